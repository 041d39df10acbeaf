"""Writer for the KPSQ keypoint-sequence format.

The format is the wire contract with the recognition pipeline and is
reproduced here bit-for-bit: a 24-byte little-endian header ("KPSQ",
u16 version=1, u16 K, u32 frame_count, f32 fps, u16 width, u16 height,
u32 signer_id) followed by frame-major float32 (x, y) pairs.  Missing
detections are written as NaN; readers replace them with 0.0.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"KPSQ"
VERSION = 1
_HEADER = struct.Struct("<4sHHIfHHI")


class KpsqWriteError(ValueError):
    pass


def write_kpsq(
    path: Union[str, Path],
    coords: np.ndarray,
    fps: float,
    width: int,
    height: int,
    signer_id: int = 0,
) -> None:
    coords = np.ascontiguousarray(coords, dtype="<f4")
    if coords.ndim != 3 or coords.shape[2] != 2 or coords.shape[0] < 1 or coords.shape[1] < 1:
        raise KpsqWriteError(f"coords must be (frames>=1, K>=1, 2), got {coords.shape}")
    frame_count, k, _ = coords.shape
    if k > 0xFFFF or frame_count > 0xFFFFFFFF:
        raise KpsqWriteError(f"dimensions exceed the format limits: {coords.shape}")
    header = _HEADER.pack(MAGIC, VERSION, k, frame_count, fps, width, height, signer_id)
    Path(path).write_bytes(header + coords.tobytes())
