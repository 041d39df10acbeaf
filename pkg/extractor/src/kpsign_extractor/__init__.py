"""Video-to-KPSQ extraction with single-signer selection."""

from .extract import ExtractionReport, ExtractorError, extract

__version__ = "0.1.0"

__all__ = ["extract", "ExtractionReport", "ExtractorError", "__version__"]
