"""Frames of 2D keypoints and the fixed-length windows fed to the model.

Coordinates live in pixel space until a window is stacked; stacking
normalizes each point by the frame dimensions and clamps stray
out-of-frame detections to [-0.5, 1.5].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

DEFAULT_WINDOW_LEN = 16
CLAMP_LO = -0.5
CLAMP_HI = 1.5


class WindowError(ValueError):
    """Raised for malformed frames or windows."""


@dataclass(frozen=True)
class Frame:
    """One video frame's keypoints: a (K, 2) array of (x, y) pixels."""

    coords: np.ndarray
    width: float
    height: float
    frame_index: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise WindowError(f"coords must be (K, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise WindowError("frame coordinates must be finite after loading")
        if not (self.width > 0 and self.height > 0):
            raise WindowError("frame dimensions must be positive")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def k(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class Window:
    """A run of consecutive frames plus its class label and signer."""

    frames: Tuple[Frame, ...]
    label_id: int
    signer_id: int

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise WindowError("window needs at least one frame")
        ks = {f.k for f in frames}
        if len(ks) != 1:
            raise WindowError(f"frames disagree on keypoint count: {sorted(ks)}")
        indices = [f.frame_index for f in frames]
        if any(b - a != 1 for a, b in zip(indices, indices[1:])):
            raise WindowError(f"frame indices must increase by 1, got {indices}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def k(self) -> int:
        return self.frames[0].k

    def pixel_array(self) -> np.ndarray:
        """Raw pixel coordinates stacked as (T, K, 2)."""
        return np.stack([f.coords for f in self.frames])

    def with_coords(self, coords: np.ndarray) -> "Window":
        """Same window metadata with every frame's coordinates replaced."""
        coords = np.asarray(coords, dtype=np.float64)
        if coords.shape != (len(self.frames), self.k, 2):
            raise WindowError(f"replacement coords shape {coords.shape} != {(len(self.frames), self.k, 2)}")
        frames = tuple(
            Frame(coords[t], f.width, f.height, f.frame_index)
            for t, f in enumerate(self.frames)
        )
        return Window(frames, self.label_id, self.signer_id)


def normalize_frame(frame: Frame) -> np.ndarray:
    """Map pixel coordinates to [0, 1]^2, clamped to [-0.5, 1.5]."""
    scale = np.array([frame.width, frame.height], dtype=np.float64)
    return np.clip(frame.coords / scale, CLAMP_LO, CLAMP_HI)


def stack_window(window: Window, window_len: int = DEFAULT_WINDOW_LEN) -> np.ndarray:
    """Stack a window into the model input tensor of shape (T, K, 2).

    Entry [t, k, c] is the normalized coordinate c of keypoint k in
    frame t.  Rejects windows whose length differs from ``window_len``.
    """
    if len(window) != window_len:
        raise WindowError(f"window has {len(window)} frames, expected {window_len}")
    return np.stack([normalize_frame(f) for f in window.frames])


def unstack_window(
    stacked: np.ndarray,
    width: float,
    height: float,
    start_index: int = 0,
    label_id: int = 0,
    signer_id: int = 0,
) -> Window:
    """Inverse of ``stack_window`` for in-frame points: back to pixels."""
    stacked = np.asarray(stacked, dtype=np.float64)
    if stacked.ndim != 3 or stacked.shape[2] != 2:
        raise WindowError(f"stacked tensor must be (T, K, 2), got {stacked.shape}")
    scale = np.array([width, height], dtype=np.float64)
    frames = tuple(
        Frame(stacked[t] * scale, width, height, start_index + t)
        for t in range(stacked.shape[0])
    )
    return Window(frames, label_id, signer_id)
