"""Command line: kpsign-extract <video> <out.kpsq> [--face 468|128].

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys

from .estimators import EstimatorError
from .extract import ExtractorError, extract
from .kpsq import KpsqWriteError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="kpsign-extract", description=__doc__)
    parser.add_argument("video", help="input video file")
    parser.add_argument("output", help="output .kpsq file")
    parser.add_argument("--face", type=int, default=468, choices=[468, 128],
                        help="face landmarks to keep (K=543 or K=203)")
    parser.add_argument("--backend", default="auto", choices=["auto", "mediapipe", "marker"])
    parser.add_argument("--signer", type=int, default=0, help="signer id for the header")
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        report = extract(
            args.video, args.output, face=args.face, backend=args.backend, signer_id=args.signer
        )
    except (ExtractorError, EstimatorError, KpsqWriteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.to_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
