"""Training: cross-entropy loss, Adam, mini-batching, early stopping.

One optimizer thread owns the parameters; batch assembly and
augmentation draw from counter-based per-sample random streams, so the
run is bit-reproducible at a fixed seed and thread count 1.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import augment as aug
from . import autodiff as ad
from . import model as mdl
from .autodiff import Tensor
from .layout import KeypointLayout
from .windows import Window, stack_window


class TrainError(ValueError):
    """Raised for unusable training inputs (empty splits, bad config)."""


class NumericError(RuntimeError):
    """Raised when the loss or gradients become non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    patience: int = 3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    seed: int = 0
    augmentation: aug.AugmentConfig = field(default_factory=aug.AugmentConfig)
    augment_enabled: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise TrainError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise TrainError("batch_size must be >= 1")
        if self.patience < 1:
            raise TrainError("patience must be >= 1")
        if self.max_epochs < 1:
            raise TrainError("max_epochs must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_top1: float
    val_top5: float
    wall_seconds: float

    def log_line(self) -> str:
        return (
            f"epoch={self.epoch} train_loss={self.train_loss:.6f} "
            f"val_loss={self.val_loss:.6f} val_top1={self.val_top1:.4f} "
            f"val_top5={self.val_top5:.4f} wall_seconds={self.wall_seconds:.3f}"
        )


@dataclass
class TrainState:
    """Adam moments and bookkeeping for one training run."""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    history: List[EpochRecord] = field(default_factory=list)

    @classmethod
    def fresh(cls, params: Dict[str, Tensor]) -> "TrainState":
        return cls(
            m={n: np.zeros_like(p.data) for n, p in params.items()},
            v={n: np.zeros_like(p.data) for n, p in params.items()},
        )


def cross_entropy(logits: np.ndarray, label_id: int) -> float:
    """Negative log softmax probability of the true class; >= 0."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= label_id < z.shape[-1]:
        raise TrainError(f"label {label_id} out of range for {z.shape[-1]} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    return float(lse - z[label_id])


def adam_step(
    state: TrainState,
    params: Dict[str, Tensor],
    grads: Dict[str, np.ndarray],
    config: TrainConfig,
) -> TrainState:
    """One bias-corrected Adam update over every parameter, in place."""
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise TrainError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}")
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        p.data = p.data - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return state


class EarlyStopper:
    """Stop when the validation loss fails to strictly improve for
    ``patience`` consecutive epochs; remembers the best epoch."""

    def __init__(self, patience: int):
        if patience < 1:
            raise TrainError("patience must be >= 1")
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record an epoch's validation loss; True means stop now."""
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def _snapshot(params: Dict[str, Tensor]) -> Dict[str, Tensor]:
    return {n: Tensor(p.data.copy(), requires_grad=True) for n, p in params.items()}


def batch_stack(windows: Sequence[Window], window_len: int) -> Tuple[np.ndarray, np.ndarray]:
    """Stack windows into a (B, T, K, 2) tensor plus (B,) labels."""
    xs = np.stack([stack_window(w, window_len) for w in windows])
    ys = np.array([w.label_id for w in windows], dtype=np.int64)
    return xs, ys


def evaluate_split(
    params: Dict[str, Tensor],
    config: mdl.ModelConfig,
    windows: Sequence[Window],
    batch_size: int = 128,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean loss plus raw logits/labels for a split (no augmentation,
    no dropout)."""
    if not windows:
        raise TrainError("cannot evaluate an empty split")
    all_logits = []
    labels = []
    with ad.no_grad():
        for lo in range(0, len(windows), batch_size):
            chunk = windows[lo:lo + batch_size]
            xs, ys = batch_stack(chunk, config.window_len)
            logits = mdl.forward_batch(params, config, xs).data
            all_logits.append(logits)
            labels.append(ys)
    logits = np.concatenate(all_logits)
    labels = np.concatenate(labels)
    losses = [cross_entropy(logits[i], int(labels[i])) for i in range(len(labels))]
    return float(np.mean(losses)), logits, labels


def _topk_hits(logits: np.ndarray, labels: np.ndarray, k: int) -> float:
    # Local top-k with low-index tie-break, mirrored by the eval module.
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return float(np.mean([labels[i] in order[i] for i in range(len(labels))]))


def train_loop(
    model_config: mdl.ModelConfig,
    train_config: TrainConfig,
    train_windows: Sequence[Window],
    val_windows: Sequence[Window],
    layout: Optional[KeypointLayout] = None,
    params: Optional[Dict[str, Tensor]] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    threads: int = 1,
) -> Tuple[Dict[str, Tensor], List[EpochRecord]]:
    """Mini-batch Adam training with per-epoch validation.

    Training windows are augmented with a fresh draw each epoch;
    validation windows never are.  Batch assembly may fan out over
    ``threads`` workers; augmentation streams are counter-based per
    sample, so the result does not depend on the thread count.  Returns
    the parameters from the best-validation-loss epoch and the full
    epoch history.
    """
    if not train_windows:
        raise TrainError("training split is empty")
    if not val_windows:
        raise TrainError("validation split is empty")
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    params = params if params is not None else mdl.init_parameters(model_config)
    state = TrainState.fresh(params)
    stopper = EarlyStopper(train_config.patience)
    best_params = _snapshot(params)

    augment_on = train_config.augment_enabled and train_config.augmentation.enabled
    shuffle_rng = np.random.Generator(np.random.Philox(key=np.uint64(train_config.seed)))
    dropout_rng = np.random.Generator(np.random.Philox(key=np.uint64(train_config.seed) + np.uint64(1)))

    def prepare(epoch: int, idx: int) -> Window:
        w = train_windows[idx]
        if augment_on:
            stream = aug.stream_for(train_config.augmentation.seed, epoch, idx)
            w = aug.apply(train_config.augmentation, stream, w, layout)
        return w

    try:
        for epoch in range(1, train_config.max_epochs + 1):
            started = time.perf_counter()
            order = shuffle_rng.permutation(len(train_windows))
            epoch_losses = []
            for lo in range(0, len(order), train_config.batch_size):
                batch_idx = [int(i) for i in order[lo:lo + train_config.batch_size]]
                if pool is not None:
                    batch = list(pool.map(lambda i: prepare(epoch, i), batch_idx))
                else:
                    batch = [prepare(epoch, i) for i in batch_idx]
                xs, ys = batch_stack(batch, model_config.window_len)
                logits = mdl.forward_batch(params, model_config, xs, train=True, rng=dropout_rng)
                loss = ad.cross_entropy_mean(logits, ys)
                loss_value = float(loss.data)
                if not np.isfinite(loss_value):
                    raise NumericError(
                        f"non-finite training loss {loss_value} at epoch {epoch}, step {state.step + 1}"
                    )
                ad.backward(loss)
                grads = {n: p.grad for n, p in params.items()}
                for n, g in grads.items():
                    if g is None:
                        grads[n] = np.zeros_like(params[n].data)
                adam_step(state, params, grads, train_config)
                ad.zero_grads(params.values())
                epoch_losses.append(loss_value * len(batch_idx))

            val_loss, val_logits, val_labels = evaluate_split(
                params, model_config, val_windows, train_config.batch_size
            )
            record = EpochRecord(
                epoch=epoch,
                train_loss=float(np.sum(epoch_losses) / len(order)),
                val_loss=val_loss,
                val_top1=_topk_hits(val_logits, val_labels, 1),
                val_top5=_topk_hits(val_logits, val_labels, min(5, model_config.vocab_size)),
                wall_seconds=time.perf_counter() - started,
            )
            state.history.append(record)
            if on_epoch is not None:
                on_epoch(record)

            improved = val_loss < stopper.best_loss
            stop = stopper.update(epoch, val_loss)
            if improved:
                best_params = _snapshot(params)
            if stop:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    return best_params, state.history
