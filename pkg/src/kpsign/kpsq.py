"""KPSQ: the on-disk binary format for keypoint sequences.

Fixed 24-byte little-endian header followed by frame-major float32
coordinates, (x, y) interleaved.  Missing detections are stored as NaN
and replaced by 0.0 when read; the replacement count is reported so the
loss is never silent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

MAGIC = b"KPSQ"
VERSION = 1
_HEADER = struct.Struct("<4sHHIfHHI")  # magic, version, K, frame_count, fps, width, height, signer_id
_COORD = np.dtype("<f4")


class KpsqError(ValueError):
    """Base error for malformed KPSQ data."""


class KpsqMagicError(KpsqError):
    """The stream does not start with the KPSQ magic."""


class KpsqVersionError(KpsqError):
    """The stream is KPSQ but of an unsupported version."""


class KpsqTruncatedError(KpsqError):
    """The payload is shorter than the header promises."""


@dataclass(frozen=True)
class KpsqHeader:
    k: int
    frame_count: int
    fps: float
    width: int
    height: int
    signer_id: int
    version: int = VERSION

    def __post_init__(self):
        if self.version != VERSION:
            raise KpsqVersionError(f"unsupported KPSQ version {self.version} (expected {VERSION})")
        if self.k <= 0 or self.k > 0xFFFF:
            raise KpsqError(f"K must be in [1, 65535], got {self.k}")
        if self.frame_count <= 0 or self.frame_count > 0xFFFFFFFF:
            raise KpsqError(f"frame_count must be in [1, 2^32), got {self.frame_count}")
        if self.width <= 0 or self.height <= 0:
            raise KpsqError("width and height must be positive")

    @property
    def payload_bytes(self) -> int:
        return self.frame_count * self.k * 2 * 4


@dataclass(frozen=True)
class KpsqFile:
    """A parsed KPSQ stream: header, (frame_count, K, 2) float32 coords,
    and how many NaN coordinates were replaced by 0.0."""

    header: KpsqHeader
    coords: np.ndarray
    nan_replaced: int


def write_kpsq(header: KpsqHeader, coords: np.ndarray) -> bytes:
    """Serialize header + coordinates; inverse of ``read_kpsq`` bit-exactly
    for NaN-free coordinates."""
    coords = np.ascontiguousarray(coords, dtype=_COORD)
    if coords.shape != (header.frame_count, header.k, 2):
        raise KpsqError(
            f"coords shape {coords.shape} inconsistent with header "
            f"({header.frame_count}, {header.k}, 2)"
        )
    head = _HEADER.pack(
        MAGIC, header.version, header.k, header.frame_count,
        header.fps, header.width, header.height, header.signer_id,
    )
    return head + coords.tobytes()


def read_kpsq(data: Union[bytes, BinaryIO]) -> KpsqFile:
    """Parse a KPSQ stream, replacing NaN coordinates by 0.0."""
    if not isinstance(data, (bytes, bytearray)):
        data = data.read()
    if len(data) < _HEADER.size:
        if data[: len(MAGIC)] != MAGIC[: len(data)]:
            raise KpsqMagicError("not a KPSQ stream")
        raise KpsqTruncatedError(f"header truncated at {len(data)} bytes")
    magic, version, k, frame_count, fps, width, height, signer_id = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise KpsqMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise KpsqVersionError(f"unsupported KPSQ version {version} (expected {VERSION})")
    header = KpsqHeader(
        k=k, frame_count=frame_count, fps=fps,
        width=width, height=height, signer_id=signer_id, version=version,
    )
    payload = data[_HEADER.size:]
    if len(payload) != header.payload_bytes:
        raise KpsqTruncatedError(
            f"payload is {len(payload)} bytes, header promises {header.payload_bytes}"
        )
    coords = np.frombuffer(payload, dtype=_COORD).reshape(frame_count, k, 2).copy()
    nan_mask = np.isnan(coords)
    nan_replaced = int(nan_mask.sum())
    if nan_replaced:
        coords[nan_mask] = 0.0
    coords.setflags(write=False)
    return KpsqFile(header=header, coords=coords, nan_replaced=nan_replaced)


def write_kpsq_file(path: Union[str, Path], header: KpsqHeader, coords: np.ndarray) -> None:
    Path(path).write_bytes(write_kpsq(header, coords))


def read_kpsq_file(path: Union[str, Path]) -> KpsqFile:
    return read_kpsq(Path(path).read_bytes())
