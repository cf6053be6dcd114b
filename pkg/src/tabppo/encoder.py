"""Feature encoders producing the per-sample state vector.

Transformer path: categorical indices become embedding tokens, numericals
become one projected token; tokens pass a per-token dimension-adjustment
affine, then pre-norm self-attention blocks, and are mean-pooled. No
positional encoding, so the pooled state is invariant to token order.

MLP path (ablation): flattened categorical embeddings concatenated with
raw numericals, two affine+ReLU layers down to the embedding dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .data import Batch, FeatureSchema
from .errors import ConfigError

TRANSFORMER = "transformer"
MLP = "mlp"


@dataclass
class EncoderConfig:
    embed_dim: int = 32
    n_layers: int = 2
    n_heads: int = 4
    ffn_hidden: int | None = None  # defaults to 4 * embed_dim
    encoder_kind: str = TRANSFORMER

    def __post_init__(self):
        if self.ffn_hidden is None:
            self.ffn_hidden = 4 * self.embed_dim
        if self.embed_dim < 1 or self.embed_dim % self.n_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} must be positive and divisible "
                f"by n_heads {self.n_heads}"
            )
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.ffn_hidden < 1:
            raise ConfigError(f"ffn_hidden must be >= 1, got {self.ffn_hidden}")
        if self.encoder_kind not in (TRANSFORMER, MLP):
            raise ConfigError(f"unknown encoder_kind {self.encoder_kind!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


def _affine_params(params, rng, name, n_in, n_out):
    params[f"{name}_w"] = nc.init_uniform((n_in, n_out), n_in, rng)
    params[f"{name}_b"] = nc.init_uniform((n_out,), n_in, rng)


def init_encoder_params(schema: FeatureSchema, cfg: EncoderConfig,
                        rng: np.random.Generator) -> dict[str, nc.Tensor]:
    """One embedding table per categorical field plus the encoder weights.

    Weights are uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; layer-norm
    gains/offsets start at identity.
    """
    d = cfg.embed_dim
    params: dict[str, nc.Tensor] = {}
    for c, f in enumerate(schema.categorical_fields):
        params[f"embed_{c}"] = nc.init_uniform((f.vocab_size, d), d, rng)
    n_num = len(schema.numerical_fields)
    if cfg.encoder_kind == TRANSFORMER:
        if n_num > 0:
            _affine_params(params, rng, "num_proj", n_num, d)
        _affine_params(params, rng, "adjust", d, d)
        for layer in range(cfg.n_layers):
            p = f"layer{layer}"
            params[f"{p}_ln1_g"] = nc.Tensor(np.ones(d), requires_grad=True)
            params[f"{p}_ln1_b"] = nc.zeros((d,), requires_grad=True)
            for head in ("q", "k", "v", "o"):
                _affine_params(params, rng, f"{p}_{head}", d, d)
            params[f"{p}_ln2_g"] = nc.Tensor(np.ones(d), requires_grad=True)
            params[f"{p}_ln2_b"] = nc.zeros((d,), requires_grad=True)
            _affine_params(params, rng, f"{p}_ffn1", d, cfg.ffn_hidden)
            _affine_params(params, rng, f"{p}_ffn2", cfg.ffn_hidden, d)
        params["final_ln_g"] = nc.Tensor(np.ones(d), requires_grad=True)
        params["final_ln_b"] = nc.zeros((d,), requires_grad=True)
    else:
        n_cat = len(schema.categorical_fields)
        flat = n_cat * d + n_num
        _affine_params(params, rng, "mlp1", flat, cfg.ffn_hidden)
        _affine_params(params, rng, "mlp2", cfg.ffn_hidden, d)
    return params


def embed_categorical(batch: Batch, params: dict) -> nc.Tensor | None:
    """Per-field embedding lookup; one token per categorical field.

    Returns [B x C x embed_dim], or None when the schema has no
    categorical fields.
    """
    n_cat = batch.categorical.shape[1]
    if n_cat == 0:
        return None
    tokens = []
    for c in range(n_cat):
        rows = nc.gather_rows(params[f"embed_{c}"], batch.categorical[:, c])
        d = rows.shape[1]
        tokens.append(nc.reshape(rows, (rows.shape[0], 1, d)))
    return nc.concat(tokens, axis=1)


def project_numerical(batch: Batch, params: dict) -> nc.Tensor | None:
    """Affine map of the standardized numericals plus ReLU: one extra token."""
    if batch.numerical.shape[1] == 0:
        return None
    x = nc.tensor(batch.numerical)
    return nc.relu(nc.matmul(x, params["num_proj_w"]) + params["num_proj_b"])


def _layer_norm_affine(x: nc.Tensor, gain: nc.Tensor, offset: nc.Tensor) -> nc.Tensor:
    return nc.layer_norm(x) * gain + offset


def _attention(x: nc.Tensor, params: dict, prefix: str, n_heads: int,
               attn_out: list | None) -> nc.Tensor:
    b, t, d = x.shape
    dh = d // n_heads

    def heads(name):
        proj = nc.matmul(x, params[f"{prefix}_{name}_w"]) + params[f"{prefix}_{name}_b"]
        return nc.permute(nc.reshape(proj, (b, t, n_heads, dh)), (0, 2, 1, 3))

    q, k, v = heads("q"), heads("k"), heads("v")
    scores = nc.scale(nc.matmul(q, nc.permute(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    attn = nc.softmax(scores)
    if attn_out is not None:
        attn_out.append(attn.data.copy())
    ctx = nc.reshape(nc.permute(nc.matmul(attn, v), (0, 2, 1, 3)), (b, t, d))
    return nc.matmul(ctx, params[f"{prefix}_o_w"]) + params[f"{prefix}_o_b"]


def encode(batch: Batch, params: dict, cfg: EncoderConfig,
           attn_out: list | None = None) -> nc.Tensor:
    """Transformer state: [B x embed_dim], mean-pooled over tokens.

    `attn_out`, when a list, collects each layer's attention weights
    ([B x heads x T x T] arrays) for diagnostics.
    """
    cat_tokens = embed_categorical(batch, params)
    num_token = project_numerical(batch, params)
    parts = []
    if cat_tokens is not None:
        parts.append(cat_tokens)
    if num_token is not None:
        bsz, d = num_token.shape
        parts.append(nc.reshape(num_token, (bsz, 1, d)))
    if not parts:
        raise ConfigError("schema has neither categorical nor numerical fields")
    x = parts[0] if len(parts) == 1 else nc.concat(parts, axis=1)

    x = nc.matmul(x, params["adjust_w"]) + params["adjust_b"]
    for layer in range(cfg.n_layers):
        p = f"layer{layer}"
        xn = _layer_norm_affine(x, params[f"{p}_ln1_g"], params[f"{p}_ln1_b"])
        x = x + _attention(xn, params, p, cfg.n_heads, attn_out)
        xn = _layer_norm_affine(x, params[f"{p}_ln2_g"], params[f"{p}_ln2_b"])
        h = nc.relu(nc.matmul(xn, params[f"{p}_ffn1_w"]) + params[f"{p}_ffn1_b"])
        x = x + nc.matmul(h, params[f"{p}_ffn2_w"]) + params[f"{p}_ffn2_b"]
    x = _layer_norm_affine(x, params["final_ln_g"], params["final_ln_b"])
    return nc.mean(x, axis=1)


def encode_mlp(batch: Batch, params: dict, cfg: EncoderConfig) -> nc.Tensor:
    """Ablation state: flattened embeddings + raw numericals through two
    affine+ReLU layers, ending at embed_dim."""
    parts = []
    cat_tokens = embed_categorical(batch, params)
    if cat_tokens is not None:
        b, c, d = cat_tokens.shape
        parts.append(nc.reshape(cat_tokens, (b, c * d)))
    if batch.numerical.shape[1] > 0:
        parts.append(nc.tensor(batch.numerical))
    if not parts:
        raise ConfigError("schema has neither categorical nor numerical fields")
    x = parts[0] if len(parts) == 1 else nc.concat(parts, axis=1)
    h = nc.relu(nc.matmul(x, params["mlp1_w"]) + params["mlp1_b"])
    return nc.relu(nc.matmul(h, params["mlp2_w"]) + params["mlp2_b"])


def encode_state(batch: Batch, params: dict, cfg: EncoderConfig,
                 attn_out: list | None = None) -> nc.Tensor:
    if cfg.encoder_kind == TRANSFORMER:
        return encode(batch, params, cfg, attn_out)
    return encode_mlp(batch, params, cfg)
