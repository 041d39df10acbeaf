import math

import numpy as np
import pytest

from kpsign import autodiff as ad
from kpsign import model as mdl
from kpsign.autodiff import Tensor
from kpsign.model import ModelConfig


def tiny_config(**overrides):
    base = dict(
        vocab_size=3, k=4, d_model=8, n_layers=1, n_heads=2, ffn_dim=16,
        window_len=4, dropout_rate=0.0, init_seed=1,
    )
    base.update(overrides)
    return ModelConfig(**base)


# --- straight-line reference: same formulas, no shared code paths ---------

def reference_forward(raw, config, stacked):
    t_len, k = stacked.shape[0], stacked.shape[1]
    if config.attention_mode == "frame_wise":
        x = stacked.reshape(t_len, 2 * k)
    else:
        x = stacked.transpose(1, 0, 2).reshape(k, 2 * t_len)
    tok = x @ raw["tokenizer.weight"] + raw["tokenizer.bias"]

    n_tok, d = tok.shape
    pe = np.zeros((n_tok, d))
    for pos in range(n_tok):
        for i in range(0, d, 2):
            angle = pos / (10000.0 ** (i / d))
            pe[pos, i] = math.sin(angle)
            if i + 1 < d:
                pe[pos, i + 1] = math.cos(angle)
    tok = tok + pe

    def softmax_rows(m):
        out = np.empty_like(m)
        for r in range(m.shape[0]):
            e = np.exp(m[r] - m[r].max())
            out[r] = e / e.sum()
        return out

    def layer_norm(m, gain, bias, eps=1e-5):
        out = np.empty_like(m)
        for r in range(m.shape[0]):
            mu = m[r].mean()
            var = m[r].var()
            out[r] = (m[r] - mu) / math.sqrt(var + eps) * gain + bias
        return out

    h = config.n_heads
    dk = d // h
    for layer in range(config.n_layers):
        p = f"layers.{layer}"
        q = tok @ raw[f"{p}.attn.q.weight"] + raw[f"{p}.attn.q.bias"]
        key = tok @ raw[f"{p}.attn.k.weight"] + raw[f"{p}.attn.k.bias"]
        v = tok @ raw[f"{p}.attn.v.weight"] + raw[f"{p}.attn.v.bias"]
        ctx = np.zeros((n_tok, d))
        for head in range(h):
            sl = slice(head * dk, (head + 1) * dk)
            scores = q[:, sl] @ key[:, sl].T / math.sqrt(dk)
            ctx[:, sl] = softmax_rows(scores) @ v[:, sl]
        attn_out = ctx @ raw[f"{p}.attn.out.weight"] + raw[f"{p}.attn.out.bias"]
        tok = layer_norm(tok + attn_out, raw[f"{p}.norm1.scale"], raw[f"{p}.norm1.bias"])
        inner = tok @ raw[f"{p}.ffn.inner.weight"] + raw[f"{p}.ffn.inner.bias"]
        inner = np.maximum(inner, 0.0)
        ffn_out = inner @ raw[f"{p}.ffn.outer.weight"] + raw[f"{p}.ffn.outer.bias"]
        tok = layer_norm(tok + ffn_out, raw[f"{p}.norm2.scale"], raw[f"{p}.norm2.bias"])

    pooled = tok.mean(axis=0)
    return pooled @ raw["generator.weight"] + raw["generator.bias"]


def test_forward_matches_straight_line_reference():
    for mode in ("frame_wise", "trajectory_wise"):
        config = tiny_config(attention_mode=mode, n_layers=2)
        params = mdl.init_parameters(config)
        raw = {n: p.data.copy() for n, p in params.items()}
        stacked = np.random.default_rng(5).uniform(0, 1, size=(4, 4, 2))
        ours = mdl.forward(params, config, stacked)
        ref = reference_forward(raw, config, stacked)
        assert np.allclose(ours, ref, atol=1e-9), mode


# --- tokenizer -------------------------------------------------------------

def test_tokenize_frame_wise_shape():
    config = ModelConfig(vocab_size=8162, k=543)
    assert config.token_input_dim == 1086
    assert config.token_count == 16
    flat = mdl.flatten_tokens(np.zeros((1, 16, 543, 2)), "frame_wise", 16)
    assert flat.shape == (1, 16, 1086)


def test_tokenize_trajectory_wise_shape():
    config = ModelConfig(vocab_size=8162, k=543, attention_mode="trajectory_wise")
    assert config.token_input_dim == 32
    assert config.token_count == 543
    flat = mdl.flatten_tokens(np.zeros((1, 16, 543, 2)), "trajectory_wise", 16)
    assert flat.shape == (1, 543, 32)


def test_tokenize_produces_d_model_tokens():
    config = tiny_config()
    params = mdl.init_parameters(config)
    tokens = mdl.tokenize(params, config, np.zeros((4, 4, 2)))
    assert tokens.shape == (4, 8)


@pytest.mark.parametrize(
    "mode,expected", [("frame_wise", (16, 512)), ("trajectory_wise", (543, 512))]
)
def test_tokenize_full_width_shapes(mode, expected):
    config = ModelConfig(
        vocab_size=2, k=543, d_model=512, n_layers=1, n_heads=8, ffn_dim=8,
        attention_mode=mode, window_len=16,
    )
    params = mdl.init_parameters(config)
    tokens = mdl.tokenize(params, config, np.zeros((16, 543, 2)))
    assert tokens.shape == expected


def test_tokenize_zero_input_zero_bias_gives_zero_tokens():
    config = tiny_config()
    params = mdl.init_parameters(config)  # biases start at zero
    tokens = mdl.tokenize(params, config, np.zeros((4, 4, 2)))
    assert not tokens.data.any()


def test_tokenize_flattening_order():
    config = tiny_config(k=2, window_len=2)
    stacked = np.arange(8, dtype=float).reshape(2, 2, 2)
    frame = mdl.flatten_tokens(stacked[None], "frame_wise", 2)[0]
    assert np.array_equal(frame, [[0, 1, 2, 3], [4, 5, 6, 7]])
    traj = mdl.flatten_tokens(stacked[None], "trajectory_wise", 2)[0]
    assert np.array_equal(traj, [[0, 1, 4, 5], [2, 3, 6, 7]])


def test_tokenize_rejects_wrong_k():
    config = tiny_config()
    params = mdl.init_parameters(config)
    with pytest.raises(mdl.ModelError):
        mdl.tokenize(params, config, np.zeros((4, 5, 2)))


# --- positional encoding ---------------------------------------------------

def test_positional_encoding_row_zero():
    pe = mdl.positional_encoding(3, 8)
    assert np.array_equal(pe[0, 0::2], np.zeros(4))
    assert np.array_equal(pe[0, 1::2], np.ones(4))


def test_positional_encoding_known_value():
    pe = mdl.positional_encoding(2, 8)
    assert abs(pe[1, 0] - math.sin(1.0)) < 1e-12
    assert abs(pe[1, 0] - 0.841471) < 1e-6


def test_positional_encoding_bounded():
    pe = mdl.positional_encoding(64, 32)
    assert pe.min() >= -1.0 and pe.max() <= 1.0


def test_positional_encoding_validation():
    with pytest.raises(mdl.ModelError):
        mdl.positional_encoding(0, 8)


# --- attention -------------------------------------------------------------

def test_attention_single_token_returns_value():
    q = np.random.default_rng(0).normal(size=(1, 4))
    v = np.random.default_rng(1).normal(size=(1, 4))
    out = mdl.attention(q, q, v)
    assert np.allclose(out.data, v)


def test_attention_identical_keys_average_values():
    q = np.random.default_rng(2).normal(size=(3, 4))
    k = np.tile(np.random.default_rng(3).normal(size=(1, 4)), (5, 1))
    v = np.random.default_rng(4).normal(size=(5, 4))
    out = mdl.attention(q[:1], k, v)
    assert np.allclose(out.data, v.mean(axis=0))


def test_attention_two_token_hand_oracle():
    q = np.array([[1.0, 0.0], [0.0, 1.0]])
    k = np.array([[2.0, 0.0], [0.0, 2.0]])
    v = np.array([[1.0, 10.0], [2.0, 20.0]])
    out, weights = mdl.attention(q, k, v, return_weights=True)
    s = 2.0 / math.sqrt(2.0)
    e_hi, e_lo = math.exp(s), math.exp(0.0)
    w_hi = e_hi / (e_hi + e_lo)
    w_lo = 1.0 - w_hi
    expected_w = np.array([[w_hi, w_lo], [w_lo, w_hi]])
    assert np.allclose(weights.data, expected_w, atol=1e-12)
    assert np.allclose(out.data, expected_w @ v, atol=1e-12)


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(9)
    for shape in [(2, 3), (5, 8), (2, 4, 7, 3)]:
        q = rng.normal(scale=3.0, size=shape)
        _, w = mdl.attention(q, rng.normal(size=shape), rng.normal(size=shape), return_weights=True)
        assert np.abs(w.data.sum(axis=-1) - 1.0).max() < 1e-9


# --- multi-head attention / encoder ---------------------------------------

def test_mha_single_head_reduces_to_attention():
    config = tiny_config(n_heads=1)
    params = mdl.init_parameters(config)
    x = np.random.default_rng(7).normal(size=(1, 4, 8))
    got = mdl.multi_head_attention(params, config, 0, Tensor(x)).data

    raw = {n: p.data for n, p in params.items()}
    q = x[0] @ raw["layers.0.attn.q.weight"] + raw["layers.0.attn.q.bias"]
    k = x[0] @ raw["layers.0.attn.k.weight"] + raw["layers.0.attn.k.bias"]
    v = x[0] @ raw["layers.0.attn.v.weight"] + raw["layers.0.attn.v.bias"]
    ref = mdl.attention(q, k, v).data @ raw["layers.0.attn.out.weight"] + raw["layers.0.attn.out.bias"]
    assert np.allclose(got[0], ref, atol=1e-12)


def test_mha_preserves_shape():
    config = tiny_config()
    params = mdl.init_parameters(config)
    for t in (1, 4, 9):
        x = np.random.default_rng(t).normal(size=(2, t, 8))
        out = mdl.multi_head_attention(params, config, 0, Tensor(x))
        assert out.shape == (2, t, 8)


def test_encoder_without_pe_is_permutation_equivariant():
    config = tiny_config(n_layers=2)
    params = mdl.init_parameters(config)
    rng = np.random.default_rng(11)
    tokens = rng.normal(size=(1, 6, 8))
    perm = rng.permutation(6)
    with ad.no_grad():
        enc = mdl.encode(params, config, Tensor(tokens)).data
        enc_perm = mdl.encode(params, config, Tensor(tokens[:, perm])).data
    assert np.abs(enc_perm - enc[:, perm]).max() < 1e-9


def test_encoder_with_pe_is_not_permutation_equivariant():
    config = tiny_config(n_layers=2)
    params = mdl.init_parameters(config)
    rng = np.random.default_rng(12)
    tokens = rng.normal(size=(1, 6, 8))
    perm = rng.permutation(6)
    pe = mdl.positional_encoding(6, 8)
    with ad.no_grad():
        enc = mdl.encode(params, config, Tensor(tokens + pe)).data
        enc_perm = mdl.encode(params, config, Tensor(tokens[:, perm] + pe)).data
    assert np.abs(enc_perm - enc[:, perm]).max() > 1e-3


def test_layer_norm_constant_token_is_zero():
    x = Tensor(np.full((2, 6), 3.7))
    out = ad.layer_norm(x, Tensor(np.ones(6)), Tensor(np.zeros(6)))
    assert np.abs(out.data).max() < 1e-6


def test_layer_norm_shift_invariance():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(3, 6))
    g = Tensor(rng.normal(size=6))
    b = Tensor(rng.normal(size=6))
    a = ad.layer_norm(Tensor(x), g, b).data
    c = ad.layer_norm(Tensor(x + 41.5), g, b).data
    assert np.allclose(a, c, atol=1e-7)


def test_ffn_is_position_wise():
    config = tiny_config()
    params = mdl.init_parameters(config)
    row = np.random.default_rng(14).normal(size=8)
    x = np.stack([row, row, row])[None]
    out = mdl.ffn(params, config, 0, Tensor(x)).data[0]
    assert np.allclose(out[0], out[1]) and np.allclose(out[1], out[2])


# --- generator / forward ---------------------------------------------------

def test_generate_single_token_pooling_is_identity():
    config = tiny_config()
    params = mdl.init_parameters(config)
    encoded = np.random.default_rng(15).normal(size=(1, 8))
    got = mdl.generate(params, config, Tensor(encoded)).data
    ref = encoded[0] @ params["generator.weight"].data + params["generator.bias"].data
    assert np.allclose(got, ref, atol=1e-12)


def test_generate_zero_input_zero_bias_gives_zero_logits():
    config = tiny_config()
    params = mdl.init_parameters(config)
    out = mdl.generate(params, config, Tensor(np.zeros((5, 8))))
    assert not out.data.any()


def test_logits_length_matches_vocab():
    config = tiny_config(vocab_size=8162)
    params = mdl.init_parameters(config)
    logits = mdl.forward(params, config, np.random.default_rng(16).uniform(size=(4, 4, 2)))
    assert logits.shape == (8162,)
    assert np.isfinite(logits).all()


def test_forward_deterministic():
    config = tiny_config()
    params = mdl.init_parameters(config)
    stacked = np.random.default_rng(17).uniform(size=(4, 4, 2))
    assert np.array_equal(mdl.forward(params, config, stacked), mdl.forward(params, config, stacked))


def test_forward_batch_grouping_invariance():
    config = tiny_config(n_layers=2)
    params = mdl.init_parameters(config)
    xs = np.random.default_rng(18).uniform(size=(7, 4, 4, 2))
    with ad.no_grad():
        whole = mdl.forward_batch(params, config, xs).data
        parts = np.concatenate([
            mdl.forward_batch(params, config, xs[:3]).data,
            mdl.forward_batch(params, config, xs[3:]).data,
        ])
    assert np.array_equal(whole, parts)


def test_forward_rejects_wrong_rank():
    config = tiny_config()
    params = mdl.init_parameters(config)
    with pytest.raises(mdl.ModelError):
        mdl.forward(params, config, np.zeros((1, 4, 4, 2)))


def test_dropout_changes_training_forward_only():
    config = tiny_config(dropout_rate=0.5)
    params = mdl.init_parameters(config)
    xs = np.random.default_rng(19).uniform(size=(2, 4, 4, 2))
    a = mdl.forward_batch(params, config, xs, train=True, rng=np.random.default_rng(0)).data
    b = mdl.forward_batch(params, config, xs, train=True, rng=np.random.default_rng(1)).data
    c = mdl.forward_batch(params, config, xs).data
    d = mdl.forward_batch(params, config, xs).data
    assert not np.array_equal(a, b)
    assert np.array_equal(c, d)


# --- configuration validation ----------------------------------------------

def test_config_validation():
    with pytest.raises(mdl.ModelError):
        tiny_config(d_model=9)  # not divisible by heads
    with pytest.raises(mdl.ModelError):
        tiny_config(vocab_size=1)
    with pytest.raises(mdl.ModelError):
        tiny_config(attention_mode="sideways")
    with pytest.raises(mdl.ModelError):
        tiny_config(dropout_rate=1.0)


# --- parameter counting ----------------------------------------------------

def test_count_parameters_reference_configuration():
    config = ModelConfig(vocab_size=8162, k=543)
    assert mdl.count_parameters(config) == 23_657_954
    assert abs(mdl.count_parameters(config) - 23_900_000) / 23_900_000 < 0.02


def test_count_parameters_tiny_hand_arithmetic():
    config = ModelConfig(
        vocab_size=2, k=1, d_model=4, n_layers=1, n_heads=1, ffn_dim=8, window_len=16
    )
    assert mdl.count_parameters(config) == 194  # 12 + 80 + 76 + 16 + 10


def test_trajectory_tokenizer_contribution():
    config = ModelConfig(vocab_size=8162, k=543, attention_mode="trajectory_wise")
    assert config.token_input_dim * 512 + 512 == 16_896


def test_count_matches_runtime_enumeration():
    rng = np.random.default_rng(20)
    for _ in range(20):
        heads = int(rng.choice([1, 2, 4]))
        config = ModelConfig(
            vocab_size=int(rng.integers(2, 30)),
            k=int(rng.integers(1, 12)),
            d_model=heads * int(rng.integers(1, 5)),
            n_layers=int(rng.integers(1, 4)),
            n_heads=heads,
            ffn_dim=int(rng.integers(1, 24)),
            attention_mode=str(rng.choice(["frame_wise", "trajectory_wise"])),
            window_len=int(rng.integers(1, 9)),
        )
        params = mdl.init_parameters(config)
        assert mdl.count_parameters(config) == sum(p.data.size for p in params.values())


def test_init_deterministic_given_seed():
    a = mdl.init_parameters(tiny_config(init_seed=9))
    b = mdl.init_parameters(tiny_config(init_seed=9))
    c = mdl.init_parameters(tiny_config(init_seed=10))
    assert all(np.array_equal(a[n].data, b[n].data) for n in a)
    assert any(not np.array_equal(a[n].data, c[n].data) for n in a)


# --- checkpoints -------------------------------------------------------------

def test_checkpoint_roundtrip_exact(tmp_path):
    config = tiny_config(n_layers=2)
    params = mdl.init_parameters(config)
    path = tmp_path / "model.kpck"
    mdl.save_checkpoint(path, config, params)
    config2, params2 = mdl.load_checkpoint(path)
    assert config2 == config
    again = tmp_path / "again.kpck"
    mdl.save_checkpoint(again, config2, params2)
    assert path.read_bytes() == again.read_bytes()
    for n in params:
        assert np.array_equal(params2[n].data, params[n].data.astype(np.float32).astype(np.float64))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.kpck"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(mdl.ModelError):
        mdl.load_checkpoint(path)


def test_checkpoint_rejects_wrong_version(tmp_path):
    config = tiny_config()
    params = mdl.init_parameters(config)
    path = tmp_path / "model.kpck"
    mdl.save_checkpoint(path, config, params)
    data = path.read_bytes().replace(b"KPSIGN-CHECKPOINT 1", b"KPSIGN-CHECKPOINT 9", 1)
    path.write_bytes(data)
    with pytest.raises(mdl.ModelError):
        mdl.load_checkpoint(path)
