from pathlib import Path

import numpy as np
import pytest

from tabppo import encoder as E
from tabppo import numcore as nc
from tabppo.data import Batch, CategoricalField, FeatureSchema, NumericalField
from tabppo.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden" / "encoder_state.npz"


def make_schema(n_cat=3, vocab=4, n_num=2, n_classes=3):
    return FeatureSchema(
        [CategoricalField(f"c{i}", [f"v{j}" for j in range(vocab)])
         for i in range(n_cat)],
        [NumericalField(f"n{i}") for i in range(n_num)],
        [f"class_{k}" for k in range(n_classes)],
    )


def make_batch(rng, schema, b=5):
    n_cat = len(schema.categorical_fields)
    vocab = schema.categorical_fields[0].vocab_size if n_cat else 0
    return Batch(
        rng.integers(0, vocab, size=(b, n_cat)) if n_cat
        else np.zeros((b, 0), dtype=np.int64),
        rng.normal(size=(b, len(schema.numerical_fields))),
        rng.integers(0, schema.n_classes, size=b),
    )


def make(rng, kind="transformer", **cfg_kw):
    cfg_kw.setdefault("embed_dim", 8)
    cfg_kw.setdefault("n_heads", 2)
    cfg = E.EncoderConfig(encoder_kind=kind, **cfg_kw)
    schema = make_schema()
    params = E.init_encoder_params(schema, cfg, rng)
    return schema, cfg, params


class TestConfig:
    def test_ffn_default_is_four_times_width(self):
        assert E.EncoderConfig(embed_dim=16).ffn_hidden == 64

    def test_divisibility_enforced(self):
        with pytest.raises(ConfigError, match="divisible"):
            E.EncoderConfig(embed_dim=10, n_heads=4)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            E.EncoderConfig(encoder_kind="rnn")

    def test_round_trip(self):
        cfg = E.EncoderConfig(embed_dim=16, n_layers=3, n_heads=2)
        assert E.EncoderConfig.from_dict(cfg.to_dict()) == cfg


class TestShapes:
    def test_pooled_state_shape(self, rng):
        schema, cfg, params = make(rng)
        out = E.encode_state(make_batch(rng, schema), params, cfg)
        assert out.shape == (5, 8)

    def test_mlp_state_shape(self, rng):
        schema, cfg, params = make(rng, kind="mlp")
        out = E.encode_state(make_batch(rng, schema), params, cfg)
        assert out.shape == (5, 8)

    def test_categorical_only_schema(self, rng):
        schema = make_schema(n_num=0)
        cfg = E.EncoderConfig(embed_dim=8, n_heads=2)
        params = E.init_encoder_params(schema, cfg, rng)
        assert "num_proj_w" not in params
        out = E.encode(make_batch(rng, schema), params, cfg)
        assert out.shape == (5, 8)

    def test_empty_schema_rejected(self, rng):
        schema = FeatureSchema([], [], ["a", "b"])
        cfg = E.EncoderConfig(embed_dim=8, n_heads=2)
        params = E.init_encoder_params(schema, cfg, rng)
        with pytest.raises(ConfigError):
            E.encode(make_batch(rng, schema), params, cfg)


class TestTokenPermutationInvariance:
    def test_pooled_state_invariant_within_1e9(self, rng):
        """No positional encoding: reordering the categorical fields (with
        their embedding tables) must leave the pooled state unchanged."""
        schema, cfg, params = make(rng)
        batch = make_batch(rng, schema)
        base = E.encode(batch, params, cfg).data

        perm = np.array([2, 0, 1])
        permuted_params = dict(params)
        for new_pos, old_pos in enumerate(perm):
            permuted_params[f"embed_{new_pos}"] = params[f"embed_{old_pos}"]
        permuted_batch = Batch(
            batch.categorical[:, perm], batch.numerical, batch.labels)
        out = E.encode(permuted_batch, permuted_params, cfg).data
        np.testing.assert_allclose(out, base, atol=1e-9)

    def test_mlp_is_order_sensitive(self, rng):
        """The flattened ablation encoder has no such symmetry."""
        schema, cfg, params = make(rng, kind="mlp")
        batch = make_batch(rng, schema)
        base = E.encode_mlp(batch, params, cfg).data
        perm = np.array([2, 0, 1])
        permuted_params = dict(params)
        for new_pos, old_pos in enumerate(perm):
            permuted_params[f"embed_{new_pos}"] = params[f"embed_{old_pos}"]
        permuted_batch = Batch(
            batch.categorical[:, perm], batch.numerical, batch.labels)
        out = E.encode_mlp(permuted_batch, permuted_params, cfg).data
        assert np.abs(out - base).max() > 1e-6


class TestAttention:
    def test_rows_sum_to_one(self, rng):
        schema, cfg, params = make(rng)
        collected = []
        E.encode(make_batch(rng, schema), params, cfg, attn_out=collected)
        assert len(collected) == cfg.n_layers
        for attn in collected:
            assert attn.shape == (5, 2, 4, 4)  # B x heads x T x T
            np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-9)
            assert (attn >= 0).all()


class TestGradients:
    def test_unused_embedding_rows_get_zero_grad(self, rng):
        schema, cfg, params = make(rng)
        batch = make_batch(rng, schema)
        batch.categorical[:, 0] = 1  # field 0 only ever sees index 1
        nc.total(E.encode(batch, params, cfg)).backward()
        grad = params["embed_0"].grad
        assert np.abs(grad[1]).max() > 0
        untouched = [i for i in range(grad.shape[0]) if i != 1]
        assert np.abs(grad[untouched]).max() == 0

    def test_all_params_reached_by_backward(self, rng):
        schema, cfg, params = make(rng)
        nc.total(E.encode(make_batch(rng, schema), params, cfg)).backward()
        for name, p in params.items():
            assert p.grad is not None, name
            assert np.abs(p.grad).max() > 0, name


def test_transformer_and_mlp_states_differ(rng):
    schema = make_schema()
    batch = make_batch(rng, schema)
    t_cfg = E.EncoderConfig(embed_dim=8, n_heads=2)
    m_cfg = E.EncoderConfig(embed_dim=8, n_heads=2, encoder_kind="mlp")
    t_params = E.init_encoder_params(schema, t_cfg, np.random.default_rng(0))
    m_params = E.init_encoder_params(schema, m_cfg, np.random.default_rng(0))
    t_out = E.encode_state(batch, t_params, t_cfg).data
    m_out = E.encode_state(batch, m_params, m_cfg).data
    assert np.abs(t_out - m_out).max() > 1e-3


def test_golden_state_regression():
    """Frozen forward pass: catches silent changes to the encoder math."""
    blob = np.load(GOLDEN)
    schema = make_schema()
    cfg = E.EncoderConfig(embed_dim=8, n_heads=2)
    params = E.init_encoder_params(schema, cfg, np.random.default_rng(1234))
    batch = Batch(blob["categorical"], blob["numerical"], blob["labels"])
    out = E.encode(batch, params, cfg).data
    np.testing.assert_allclose(out, blob["state"], atol=1e-12)
