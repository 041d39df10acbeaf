"""Deterministic synthetic keypoint-sign datasets for desk-scale runs.

Each class gets a template motion per keypoint: a linear drift plus a
sinusoid whose frequency is class-specific, anchored to a fixed
upper-body rest pose.  Samples perturb the template with a per-signer
offset/scale and per-sample Gaussian noise.  A brute-force
nearest-template classifier acts as the independent separability
oracle the learned model is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .kpsq import KpsqHeader, write_kpsq_file
from .layout import KeypointLayout
from .manifest import ManifestEntry, Vocabulary, save_vocabulary, write_manifest

# Template motion constants (pixels on the default 444-wide canvas).
# Motion spans a realistic signing-space fraction of the frame and
# dominates signer offset and pixel noise by more than an order of
# magnitude, keeping the classes cleanly separable.
DRIFT_MAX = 60.0
AMP_RANGE = (30.0, 90.0)
# Adjacent class frequencies differ by half a cycle over the window, so
# templates never collapse onto each other at low noise.
BASE_FREQ = 1.0
FREQ_STEP = 0.5
SIGNER_SCALE_RANGE = (0.98, 1.02)

_STREAM_TEMPLATE = 0
_STREAM_SIGNER = 1
_STREAM_SAMPLE = 2


class SynthError(ValueError):
    """Raised for invalid generator configuration."""


@dataclass(frozen=True)
class SynthConfig:
    layout: KeypointLayout
    n_classes: int = 20
    samples_per_class: int = 50
    n_signers: int = 5
    window_len: int = 16
    noise_sigma: float = 1.0
    signer_offset_sigma: float = 5.0
    seed: int = 0
    width: int = 444
    height: int = 444
    fps: float = 25.0

    def __post_init__(self):
        if min(self.n_classes, self.samples_per_class, self.n_signers, self.window_len) < 1:
            raise SynthError("all counts must be >= 1")
        if self.noise_sigma < 0 or self.signer_offset_sigma < 0:
            raise SynthError("noise sigmas must be >= 0")

    def word(self, class_id: int) -> str:
        return f"sign_{class_id:03d}"

    def vocabulary(self) -> Vocabulary:
        return Vocabulary([self.word(c) for c in range(self.n_classes)])


def _stream(config: SynthConfig, kind: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(config.seed, spawn_key=(kind, *key))
    return np.random.Generator(np.random.Philox(ss))


def rest_pose(layout: KeypointLayout, width: float, height: float) -> np.ndarray:
    """Fixed upper-body arrangement: face ellipse up top, pose points over
    the torso, hand clusters at waist height."""
    cx, cy = width / 2.0, height / 2.0
    coords = np.zeros((layout.total(), 2))
    offset = 0
    for name, count in layout.groups:
        idx = np.arange(count)
        phi = 2.0 * np.pi * idx / max(count, 1)
        if name == "face":
            center = np.array([cx, height * 0.22])
            radius = np.array([width * 0.10, height * 0.08])
        elif name == "left_hand":
            center = np.array([width * 0.30, height * 0.62])
            radius = np.array([width * 0.05, height * 0.05])
        elif name == "right_hand":
            center = np.array([width * 0.70, height * 0.62])
            radius = np.array([width * 0.05, height * 0.05])
        else:  # pose and any custom group: spread over the torso
            center = np.array([cx, cy])
            radius = np.array([width * 0.22, height * 0.18])
        coords[offset:offset + count, 0] = center[0] + radius[0] * np.cos(phi)
        coords[offset:offset + count, 1] = center[1] + radius[1] * np.sin(phi)
        offset += count
    return coords


def class_templates(config: SynthConfig) -> np.ndarray:
    """Template trajectories for every class: (C, T, K, 2)."""
    k = config.layout.total()
    t = config.window_len
    rest = rest_pose(config.layout, config.width, config.height)
    time = np.arange(t, dtype=np.float64)
    ramp = time / max(t - 1, 1)
    templates = np.empty((config.n_classes, t, k, 2))
    for c in range(config.n_classes):
        rng = _stream(config, _STREAM_TEMPLATE, c)
        drift = rng.uniform(-DRIFT_MAX, DRIFT_MAX, size=(k, 2))
        amp = rng.uniform(AMP_RANGE[0], AMP_RANGE[1], size=(k, 1))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=(k, 2))
        freq = BASE_FREQ + FREQ_STEP * c
        wave = np.sin(2.0 * np.pi * freq * time[:, None, None] / t + phase[None])
        templates[c] = rest[None] + drift[None] * ramp[:, None, None] + amp[None] * wave
    return templates


def signer_transform(config: SynthConfig, signer_id: int) -> Tuple[np.ndarray, float]:
    """Per-signer global placement: (offset vector, scale factor)."""
    rng = _stream(config, _STREAM_SIGNER, signer_id)
    offset = rng.normal(0.0, config.signer_offset_sigma, size=2)
    scale = rng.uniform(SIGNER_SCALE_RANGE[0], SIGNER_SCALE_RANGE[1])
    return offset, float(scale)


def generate_samples(config: SynthConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All samples in memory: coords (N, T, K, 2), labels (N,), signers (N,).

    Sample j of class c belongs to signer j mod n_signers, so every
    signer covers every class.
    """
    templates = class_templates(config)
    center = np.array([config.width / 2.0, config.height / 2.0])
    n = config.n_classes * config.samples_per_class
    coords = np.empty((n, config.window_len, config.layout.total(), 2), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    signers = np.empty(n, dtype=np.int64)
    signer_tf = [signer_transform(config, s) for s in range(config.n_signers)]
    i = 0
    for c in range(config.n_classes):
        for j in range(config.samples_per_class):
            signer = j % config.n_signers
            offset, scale = signer_tf[signer]
            rng = _stream(config, _STREAM_SAMPLE, c, j)
            noise = rng.normal(0.0, config.noise_sigma, size=templates[c].shape)
            sample = center + scale * (templates[c] - center) + offset + noise
            coords[i] = sample.astype(np.float32)
            labels[i] = c
            signers[i] = signer
            i += 1
    return coords, labels, signers


def generate(config: SynthConfig, out_dir: Union[str, Path]) -> List[ManifestEntry]:
    """Write the dataset: one KPSQ file per sample, plus manifest.tsv and
    vocab.txt.  Byte-identical across runs with the same config."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords, labels, signers = generate_samples(config)
    entries = []
    for i in range(coords.shape[0]):
        c, j = int(labels[i]), i % config.samples_per_class
        name = f"{config.word(c)}_{j:04d}.kpsq"
        header = KpsqHeader(
            k=config.layout.total(),
            frame_count=config.window_len,
            fps=config.fps,
            width=config.width,
            height=config.height,
            signer_id=int(signers[i]),
        )
        write_kpsq_file(out_dir / name, header, coords[i])
        entries.append(
            ManifestEntry(
                file_path=name,
                start_frame=0,
                label_word=config.word(c),
                signer_id=int(signers[i]),
                split=None,
            )
        )
    write_manifest(out_dir / "manifest.tsv", entries)
    save_vocabulary(out_dir / "vocab.txt", config.vocabulary())
    return entries


def oracle_classify(
    config: SynthConfig,
    coords: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
) -> float:
    """Accuracy of the 1-nearest-template classifier.

    Each sample and each template is centered by its own mean, so the
    decision ignores global translation (but not rotation or scale);
    distance is the mean squared coordinate difference.
    """
    if coords is None or labels is None:
        coords, labels, _ = generate_samples(config)
    templates = class_templates(config)
    centered_templates = templates - templates.mean(axis=(1, 2), keepdims=True)
    correct = 0
    for i in range(coords.shape[0]):
        x = coords[i].astype(np.float64)
        xc = x - x.mean(axis=(0, 1), keepdims=True)
        dists = np.mean((xc[None] - centered_templates) ** 2, axis=(1, 2, 3))
        if int(np.argmin(dists)) == int(labels[i]):
            correct += 1
    return correct / coords.shape[0]
