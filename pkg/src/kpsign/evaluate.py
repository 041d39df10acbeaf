"""Accuracy metrics, per-class breakdowns, and the model-size report."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .model import ModelConfig, count_parameters

# Published size of the image-based reference classifier this model is
# compared against.
RGB_REFERENCE_PARAMETERS = 34_500_000


class EvalError(ValueError):
    """Raised for invalid metric arguments."""


def _as_logit_matrix(logits: Sequence[np.ndarray]) -> np.ndarray:
    mat = np.asarray(logits, dtype=np.float64)
    if mat.ndim != 2:
        raise EvalError(f"expected a list of logit vectors, got shape {mat.shape}")
    return mat


def topk_accuracy(logits: Sequence[np.ndarray], labels: Sequence[int], k: int) -> float:
    """Fraction of samples whose true label ranks in the top k logits.

    Ties rank the lower class index first, so the result is
    deterministic for any input.
    """
    mat = _as_logit_matrix(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != mat.shape[0]:
        raise EvalError("logits and labels disagree on sample count")
    if not 1 <= k <= mat.shape[1]:
        raise EvalError(f"k must be in [1, {mat.shape[1]}], got {k}")
    # Stable argsort on negated logits keeps equal scores in class order.
    top = np.argsort(-mat, axis=1, kind="stable")[:, :k]
    hits = (top == labels[:, None]).any(axis=1)
    return float(hits.mean())


@dataclass(frozen=True)
class ClassStats:
    label: int
    support: int
    correct: int

    @property
    def accuracy(self) -> Optional[float]:
        """None when the class has no support (never a division by zero)."""
        return self.correct / self.support if self.support else None


@dataclass(frozen=True)
class PerClassReport:
    classes: Tuple[ClassStats, ...]
    confusions: Tuple[Tuple[int, int, int], ...]  # (true, predicted, count), mistakes only

    def accuracy_of(self, label: int) -> Optional[float]:
        return self.classes[label].accuracy

    @property
    def no_support(self) -> Tuple[int, ...]:
        return tuple(c.label for c in self.classes if c.support == 0)


def per_class_report(logits: Sequence[np.ndarray], labels: Sequence[int]) -> PerClassReport:
    """Per-class accuracy plus a sparse wrong-prediction summary."""
    mat = _as_logit_matrix(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = mat.shape[1]
    preds = np.argmax(mat, axis=1)

    support = np.bincount(labels, minlength=n_classes)
    correct = np.bincount(labels[preds == labels], minlength=n_classes)
    stats = tuple(
        ClassStats(label=c, support=int(support[c]), correct=int(correct[c]))
        for c in range(n_classes)
    )

    mistakes: Dict[Tuple[int, int], int] = {}
    for t, p in zip(labels, preds):
        if t != p:
            mistakes[(int(t), int(p))] = mistakes.get((int(t), int(p)), 0) + 1
    confusions = tuple(
        (t, p, n) for (t, p), n in sorted(mistakes.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return PerClassReport(classes=stats, confusions=confusions)


@dataclass(frozen=True)
class ComputationalReport:
    """Model size versus the published image-based reference."""

    parameter_count: int
    rgb_reference_count: int
    parameter_ratio: float
    forward_macs: int

    def to_text(self) -> str:
        return (
            f"parameter_count = {self.parameter_count}\n"
            f"rgb_reference_count = {self.rgb_reference_count}\n"
            f"parameter_ratio = {self.parameter_ratio!r}\n"
            f"forward_macs = {self.forward_macs}\n"
        )

    def to_csv(self) -> str:
        return (
            "metric,value\n"
            f"parameter_count,{self.parameter_count}\n"
            f"rgb_reference_count,{self.rgb_reference_count}\n"
            f"parameter_ratio,{self.parameter_ratio!r}\n"
            f"forward_macs,{self.forward_macs}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "ComputationalReport":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                key, _, value = line.partition("=")
                kv[key.strip()] = value.strip()
        return cls(
            parameter_count=int(kv["parameter_count"]),
            rgb_reference_count=int(kv["rgb_reference_count"]),
            parameter_ratio=float(kv["parameter_ratio"]),
            forward_macs=int(kv["forward_macs"]),
        )


def forward_macs(config: ModelConfig) -> int:
    """Multiply-accumulate estimate for one window's forward pass."""
    d, f, t = config.d_model, config.ffn_dim, config.token_count
    tokenizer = t * config.token_input_dim * d
    per_layer = 4 * t * d * d + 2 * t * t * d + 2 * t * d * f
    generator = d * config.vocab_size
    return tokenizer + config.n_layers * per_layer + generator


def computational_report(config: ModelConfig) -> ComputationalReport:
    count = count_parameters(config)
    return ComputationalReport(
        parameter_count=count,
        rgb_reference_count=RGB_REFERENCE_PARAMETERS,
        parameter_ratio=count / RGB_REFERENCE_PARAMETERS,
        forward_macs=forward_macs(config),
    )
