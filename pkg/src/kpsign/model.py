"""The keypoint sequence classifier.

A stacked window is tokenized either frame-wise (each frame's flattened
keypoints become one of 16 tokens) or trajectory-wise (each keypoint's
whole trajectory becomes one of K tokens), gets sinusoidal positional
encoding, runs through a post-norm transformer encoder, and is mean-
pooled into class logits.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

FRAME_WISE = "frame_wise"
TRAJECTORY_WISE = "trajectory_wise"
ATTENTION_MODES = (FRAME_WISE, TRAJECTORY_WISE)

CHECKPOINT_MAGIC = "KPSIGN-CHECKPOINT"
CHECKPOINT_VERSION = 1


class ModelError(ValueError):
    """Raised for invalid model configuration or malformed checkpoints."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    k: int
    d_model: int = 512
    n_layers: int = 6
    n_heads: int = 8
    ffn_dim: int = 2048
    attention_mode: str = FRAME_WISE
    window_len: int = 16
    dropout_rate: float = 0.1
    init_seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ModelError("vocab_size must be >= 2")
        if min(self.d_model, self.n_layers, self.n_heads, self.ffn_dim, self.k, self.window_len) < 1:
            raise ModelError("all model dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ModelError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.attention_mode not in ATTENTION_MODES:
            raise ModelError(f"attention_mode must be one of {ATTENTION_MODES}")
        if not 0 <= self.dropout_rate < 1:
            raise ModelError("dropout_rate must be in [0, 1)")

    @property
    def token_input_dim(self) -> int:
        """Width of the flattened vector each token is built from."""
        if self.attention_mode == FRAME_WISE:
            return 2 * self.k
        return 2 * self.window_len

    @property
    def token_count(self) -> int:
        return self.window_len if self.attention_mode == FRAME_WISE else self.k


def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Every learnable tensor's name and shape, in checkpoint order."""
    d, f = config.d_model, config.ffn_dim
    shapes: Dict[str, Tuple[int, ...]] = {
        "tokenizer.weight": (config.token_input_dim, d),
        "tokenizer.bias": (d,),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}"
        for proj in ("q", "k", "v", "out"):
            shapes[f"{p}.attn.{proj}.weight"] = (d, d)
            shapes[f"{p}.attn.{proj}.bias"] = (d,)
        shapes[f"{p}.ffn.inner.weight"] = (d, f)
        shapes[f"{p}.ffn.inner.bias"] = (f,)
        shapes[f"{p}.ffn.outer.weight"] = (f, d)
        shapes[f"{p}.ffn.outer.bias"] = (d,)
        for norm in ("norm1", "norm2"):
            shapes[f"{p}.{norm}.scale"] = (d,)
            shapes[f"{p}.{norm}.bias"] = (d,)
    shapes["generator.weight"] = (d, config.vocab_size)
    shapes["generator.bias"] = (config.vocab_size,)
    return shapes


def init_parameters(config: ModelConfig) -> Dict[str, Tensor]:
    """Seeded initialization: uniform +-sqrt(6 / (fan_in + fan_out)) for
    affine weights, zeros for biases, ones for norm scales."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(config.init_seed)))
    params: Dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".weight"):
            fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            data = rng.uniform(-limit, limit, size=shape)
        elif name.endswith(".scale"):
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        params[name] = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
    return params


def count_parameters(config: ModelConfig) -> int:
    """Closed-form learnable scalar count; matches ``init_parameters``."""
    d, f, v = config.d_model, config.ffn_dim, config.vocab_size
    tokenizer = config.token_input_dim * d + d
    attention = 4 * (d * d + d)
    ffn = d * f + f + f * d + d
    norms = 2 * 2 * d
    generator = d * v + v
    return tokenizer + config.n_layers * (attention + ffn + norms) + generator


def flatten_tokens(stacked: np.ndarray, mode: str, window_len: int) -> np.ndarray:
    """Rearrange a (B, T, K, 2) stack into per-token input vectors.

    frame_wise: (B, T, 2K) - one token per frame.
    trajectory_wise: (B, K, 2T) - one token per keypoint.
    """
    b, t, k, _ = stacked.shape
    if t != window_len:
        raise ModelError(f"stacked window length {t} != configured {window_len}")
    if mode == FRAME_WISE:
        return stacked.reshape(b, t, 2 * k)
    if mode == TRAJECTORY_WISE:
        return stacked.transpose(0, 2, 1, 3).reshape(b, k, 2 * t)
    raise ModelError(f"unknown attention mode {mode!r}")


def positional_encoding(t: int, d_model: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd."""
    if t < 1 or d_model < 1:
        raise ModelError("positional encoding needs T >= 1 and d_model >= 1")
    pos = np.arange(t, dtype=np.float64)[:, None]
    idx = np.arange(0, d_model, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, idx / d_model)
    pe = np.zeros((t, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : d_model // 2])
    return pe


def tokenize(params: Dict[str, Tensor], config: ModelConfig, stacked: np.ndarray) -> Tensor:
    """Affine-map flattened token inputs into d_model-wide tokens."""
    stacked = np.asarray(stacked, dtype=np.float64)
    squeeze = stacked.ndim == 3
    if squeeze:
        stacked = stacked[None]
    if stacked.shape[2] != config.k or stacked.shape[3] != 2:
        raise ModelError(f"stacked shape {stacked.shape[1:]} does not match K={config.k}")
    flat = flatten_tokens(stacked, config.attention_mode, config.window_len)
    tokens = ad.add(ad.matmul(Tensor(flat), params["tokenizer.weight"]), params["tokenizer.bias"])
    return _maybe_squeeze(tokens, squeeze)


def _maybe_squeeze(t: Tensor, squeeze: bool) -> Tensor:
    return ad.reshape(t, t.shape[1:]) if squeeze else t


def attention(q: Tensor, k: Tensor, v: Tensor, return_weights: bool = False):
    """Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V.

    Accepts any batch shape (..., T, d); each softmax row sums to 1.
    """
    q, k, v = (x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64)) for x in (q, k, v))
    d_k = q.shape[-1]
    axes = list(range(len(k.shape)))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    scores = ad.mul_scalar(ad.matmul(q, ad.transpose(k, axes)), 1.0 / np.sqrt(d_k))
    weights = ad.softmax(scores, axis=-1)
    out = ad.matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def _affine(x: Tensor, params: Dict[str, Tensor], name: str) -> Tensor:
    return ad.add(ad.matmul(x, params[f"{name}.weight"]), params[f"{name}.bias"])


def multi_head_attention(
    params: Dict[str, Tensor], config: ModelConfig, layer: int, x: Tensor
) -> Tensor:
    """Project to per-head Q/K/V, attend per head, concatenate, project."""
    b, t, d = x.shape
    h = config.n_heads
    dk = d // h
    prefix = f"layers.{layer}.attn"

    def heads(name):
        proj = _affine(x, params, f"{prefix}.{name}")
        return ad.transpose(ad.reshape(proj, (b, t, h, dk)), (0, 2, 1, 3))

    ctx = attention(heads("q"), heads("k"), heads("v"))
    merged = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (b, t, d))
    return _affine(merged, params, f"{prefix}.out")


def ffn(params: Dict[str, Tensor], config: ModelConfig, layer: int, x: Tensor) -> Tensor:
    """Position-wise feed-forward: affine, ReLU, affine."""
    prefix = f"layers.{layer}.ffn"
    return _affine(ad.relu(_affine(x, params, f"{prefix}.inner")), params, f"{prefix}.outer")


def encoder_layer(
    params: Dict[str, Tensor],
    config: ModelConfig,
    layer: int,
    x: Tensor,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Post-norm residual block: norm(x + MHA(x)), then norm(x + FFN(x))."""
    p = config.dropout_rate if train else 0.0
    attn_out = multi_head_attention(params, config, layer, x)
    if p:
        attn_out = ad.dropout(attn_out, p, rng)
    x = ad.layer_norm(
        ad.add(x, attn_out),
        params[f"layers.{layer}.norm1.scale"],
        params[f"layers.{layer}.norm1.bias"],
    )
    ffn_out = ffn(params, config, layer, x)
    if p:
        ffn_out = ad.dropout(ffn_out, p, rng)
    return ad.layer_norm(
        ad.add(x, ffn_out),
        params[f"layers.{layer}.norm2.scale"],
        params[f"layers.{layer}.norm2.bias"],
    )


def encode(
    params: Dict[str, Tensor],
    config: ModelConfig,
    tokens: Tensor,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Run all encoder layers over already-positioned tokens."""
    x = tokens
    for i in range(config.n_layers):
        x = encoder_layer(params, config, i, x, train=train, rng=rng)
    return x


def generate(params: Dict[str, Tensor], config: ModelConfig, encoded: Tensor) -> Tensor:
    """Mean-pool the tokens and map to class logits."""
    squeeze = len(encoded.shape) == 2
    if squeeze:
        encoded = ad.reshape(encoded, (1,) + tuple(encoded.shape))
    pooled = ad.mean(encoded, axis=1)
    logits = _affine(pooled, params, "generator")
    return _maybe_squeeze(logits, squeeze)


def forward_batch(
    params: Dict[str, Tensor],
    config: ModelConfig,
    stacked: np.ndarray,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Full model on a (B, T, K, 2) stack of windows: (B, vocab) logits."""
    tokens = tokenize(params, config, stacked)
    pe = positional_encoding(config.token_count, config.d_model)
    tokens = ad.add(tokens, Tensor(pe))
    encoded = encode(params, config, tokens, train=train, rng=rng)
    return generate(params, config, encoded)


def forward(params: Dict[str, Tensor], config: ModelConfig, stacked: np.ndarray) -> np.ndarray:
    """Inference on one stacked window (T, K, 2): finite (vocab,) logits."""
    stacked = np.asarray(stacked, dtype=np.float64)
    if stacked.ndim != 3:
        raise ModelError(f"expected a single (T, K, 2) window, got shape {stacked.shape}")
    with ad.no_grad():
        logits = forward_batch(params, config, stacked[None]).data[0]
    if not np.all(np.isfinite(logits)):
        raise ModelError("non-finite logits")
    return logits


# --- checkpoint format -----------------------------------------------------
# Text header: magic+version line, then "key = value" per config field,
# then a "---" separator; binary body: tensor count (u32) followed by
# per-tensor records (name length u16, utf-8 name, ndim u8, dims u32 each,
# float32 little-endian data).

_CONFIG_FIELDS = [f.name for f in fields(ModelConfig)]


def save_checkpoint(path: Union[str, Path], config: ModelConfig, params: Dict[str, Tensor]) -> None:
    buf = io.BytesIO()
    head = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"]
    for name in _CONFIG_FIELDS:
        head.append(f"{name} = {getattr(config, name)}")
    head.append("---")
    buf.write(("\n".join(head) + "\n").encode("utf-8"))

    names = sorted(params)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        data = np.ascontiguousarray(params[name].data, dtype="<f4")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        buf.write(data.tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: Union[str, Path]) -> Tuple[ModelConfig, Dict[str, Tensor]]:
    raw = Path(path).read_bytes()
    sep = raw.find(b"---\n")
    if sep < 0:
        raise ModelError("malformed checkpoint: missing header separator")
    lines = raw[:sep].decode("utf-8").splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
        raise ModelError("not a model checkpoint")
    version = int(lines[0].split()[-1])
    if version != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {version}")

    kv = {}
    for line in lines[1:]:
        if line.strip():
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    converters = {f.name: f.type for f in fields(ModelConfig)}
    cfg_args = {}
    for name in _CONFIG_FIELDS:
        value = kv[name]
        typ = converters[name]
        if typ in ("int", int):
            cfg_args[name] = int(value)
        elif typ in ("float", float):
            cfg_args[name] = float(value)
        else:
            cfg_args[name] = value
    config = ModelConfig(**cfg_args)

    body = memoryview(raw)[sep + 4:]
    offset = 0
    (count,) = struct.unpack_from("<I", body, offset)
    offset += 4
    params: Dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = bytes(body[offset:offset + name_len]).decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", body, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", body, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(body, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += 4 * size
        params[name] = Tensor(data.astype(np.float64), requires_grad=True)

    expected = parameter_shapes(config)
    if set(params) != set(expected) or any(params[n].shape != expected[n] for n in expected):
        raise ModelError("checkpoint tensors do not match the stored configuration")
    return config, params
