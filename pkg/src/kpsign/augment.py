"""Geometric augmentations applied uniformly to every frame of a window.

All four transforms draw one parameter set per window and apply it to
each of the frames, so the motion inside the window is preserved.
Rotation and scaling are centered on the window's keypoint centroid: the
signer stays in place, only the skeleton is perturbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple

import numpy as np

from .layout import KeypointLayout
from .windows import Window

AUGMENTATIONS = ("flip", "rotate", "scale", "shift")


class AugmentError(ValueError):
    """Raised for invalid augmentation configuration."""


@dataclass(frozen=True)
class AugmentConfig:
    shift_range: float = 2.0                       # +- pixels on each axis
    scale_range: Tuple[float, float] = (0.90, 1.10)
    rotation_range: float = 10.0                   # +- degrees
    flip_prob: float = 0.5
    enabled: FrozenSet[str] = frozenset({"shift"})
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "enabled", frozenset(self.enabled))
        if self.shift_range < 0:
            raise AugmentError("shift_range must be >= 0")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise AugmentError(f"scale_range must be within (0, inf), got {self.scale_range}")
        if not 0 <= self.flip_prob <= 1:
            raise AugmentError("flip_prob must be in [0, 1]")
        unknown = self.enabled - set(AUGMENTATIONS)
        if unknown:
            raise AugmentError(f"unknown augmentations: {sorted(unknown)}")


def shift(window: Window, dx: float, dy: float) -> Window:
    """Translate every keypoint of every frame by (dx, dy) pixels."""
    return window.with_coords(window.pixel_array() + np.array([dx, dy], dtype=np.float64))


def _centroid(coords: np.ndarray) -> np.ndarray:
    finite = np.isfinite(coords).all(axis=-1)
    if not finite.any():
        return np.zeros(2)
    return coords[finite].mean(axis=0)


def scale(window: Window, s: float, center: Optional[np.ndarray] = None) -> Window:
    """Scale about ``center`` (default: the centroid of the window's
    keypoints, which is then a fixed point of the transform).  A factor
    of exactly 1 is a bit-exact no-op."""
    if s <= 0:
        raise AugmentError(f"scale factor must be > 0, got {s}")
    if s == 1.0:
        return window
    coords = window.pixel_array()
    c = _centroid(coords) if center is None else np.asarray(center, dtype=np.float64)
    return window.with_coords(c + s * (coords - c))


def rotate(window: Window, theta_deg: float, center: Optional[np.ndarray] = None) -> Window:
    """Rigid rotation about ``center`` (default: the window centroid);
    degrees, counter-clockwise in keypoint coordinates.  Zero degrees is
    a bit-exact no-op."""
    if theta_deg == 0.0:
        return window
    coords = window.pixel_array()
    c = _centroid(coords) if center is None else np.asarray(center, dtype=np.float64)
    t = math.radians(theta_deg)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return window.with_coords(c + (coords - c) @ rot.T)


def hflip(window: Window, layout: KeypointLayout) -> Window:
    """Mirror x about the frame width, then relabel left/right keypoints.

    Without the relabeling a flipped right-hand sign would present as an
    anatomically impossible left hand, so the layout's pair table swaps
    the mirrored indices back onto their proper groups.
    """
    coords = window.pixel_array().copy()
    widths = np.array([f.width for f in window.frames], dtype=np.float64)
    coords[:, :, 0] = widths[:, None] - coords[:, :, 0]
    perm = layout.flip_permutation()
    return window.with_coords(coords[:, perm, :])


def draw_parameters(config: AugmentConfig, rng: np.random.Generator) -> dict:
    """Sample one parameter set for the enabled augmentations.

    Draws happen in the fixed application order flip -> rotate -> scale
    -> shift so a given rng state always yields the same parameters.
    """
    params = {}
    if "flip" in config.enabled:
        params["flip"] = bool(rng.random() < config.flip_prob)
    if "rotate" in config.enabled:
        params["rotate"] = float(rng.uniform(-config.rotation_range, config.rotation_range))
    if "scale" in config.enabled:
        params["scale"] = float(rng.uniform(config.scale_range[0], config.scale_range[1]))
    if "shift" in config.enabled:
        params["shift"] = (
            float(rng.uniform(-config.shift_range, config.shift_range)),
            float(rng.uniform(-config.shift_range, config.shift_range)),
        )
    return params


def apply(
    config: AugmentConfig,
    rng: np.random.Generator,
    window: Window,
    layout: Optional[KeypointLayout] = None,
) -> Window:
    """Apply the enabled augmentations in the order flip -> rotate ->
    scale -> shift with freshly drawn parameters.  Deterministic given
    the rng state."""
    params = draw_parameters(config, rng)
    out = window
    if params.get("flip"):
        if layout is None:
            raise AugmentError("horizontal flip needs the keypoint layout for its pair table")
        out = hflip(out, layout)
    if "rotate" in params:
        out = rotate(out, params["rotate"])
    if "scale" in params:
        out = scale(out, params["scale"])
    if "shift" in params:
        out = shift(out, *params["shift"])
    return out


def stream_for(seed: int, epoch: int, sample_index: int) -> np.random.Generator:
    """Counter-based random stream for one (epoch, sample) pair.

    Philox keys make the streams independent and reproducible no matter
    how samples are distributed across workers.
    """
    return np.random.Generator(
        np.random.Philox(key=np.uint64(seed), counter=[np.uint64(epoch), np.uint64(sample_index), 0, 0])
    )
