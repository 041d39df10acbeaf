"""Keypoint-based sign word recognition from 16-frame pose windows."""

from .layout import KeypointLayout, build_layout, layout_from_preset, total_keypoints
from .windows import Frame, Window, normalize_frame, stack_window, unstack_window

__version__ = "0.1.0"

__all__ = [
    "KeypointLayout",
    "build_layout",
    "layout_from_preset",
    "total_keypoints",
    "Frame",
    "Window",
    "normalize_frame",
    "stack_window",
    "unstack_window",
    "__version__",
]
