"""Dual-head network: policy distribution over classes + scalar state value."""

from __future__ import annotations

import numpy as np

from . import numcore as nc
from .data import Batch, FeatureSchema
from .encoder import EncoderConfig, encode_state, init_encoder_params


class PolicyValueNet:
    """Encoder parameters plus an affine policy head and value head.

    All trainable tensors live in ``self.params``; the forward pass builds
    a fresh tape each call, so parameters stay safely immutable during
    concurrent inference.
    """

    def __init__(self, schema: FeatureSchema, encoder_cfg: EncoderConfig,
                 params: dict[str, nc.Tensor]):
        self.schema = schema
        self.encoder_cfg = encoder_cfg
        self.params = params

    @classmethod
    def create(cls, schema: FeatureSchema, encoder_cfg: EncoderConfig,
               rng: np.random.Generator) -> "PolicyValueNet":
        params = init_encoder_params(schema, encoder_cfg, rng)
        d = encoder_cfg.embed_dim
        n_classes = schema.n_classes
        params["policy_w"] = nc.init_uniform((d, n_classes), d, rng)
        params["policy_b"] = nc.init_uniform((n_classes,), d, rng)
        params["value_w"] = nc.init_uniform((d, 1), d, rng)
        params["value_b"] = nc.init_uniform((1,), d, rng)
        return cls(schema, encoder_cfg, params)

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def encode(self, batch: Batch, attn_out: list | None = None) -> nc.Tensor:
        return encode_state(batch, self.params, self.encoder_cfg, attn_out)

    def forward(self, batch: Batch, attn_out: list | None = None):
        """Return (probs [B x K], value [B]) as tape tensors."""
        state = self.encode(batch, attn_out)
        logits = nc.matmul(state, self.params["policy_w"]) + self.params["policy_b"]
        nc.check_finite(logits, "policy logits")
        probs = nc.softmax(logits)
        value_col = nc.matmul(state, self.params["value_w"]) + self.params["value_b"]
        value = nc.reshape(value_col, (value_col.shape[0],))
        nc.check_finite(value, "value estimates")
        return probs, value

    def predict(self, batch: Batch) -> np.ndarray:
        """Argmax class per sample; numpy argmax breaks ties at the lowest
        index, which keeps evaluation deterministic."""
        with nc.no_grad():
            probs, _ = self.forward(batch)
        return np.argmax(probs.data, axis=1)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            missing = set(self.params) - set(state)
            extra = set(state) - set(self.params)
            raise ValueError(
                f"parameter mismatch: missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}"
            )
        for name, arr in state.items():
            if arr.shape != self.params[name].data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} vs "
                    f"{self.params[name].data.shape}"
                )
            self.params[name].data = np.array(arr, dtype=np.float64)


def sample_action(probs: np.ndarray, rng: np.random.Generator):
    """Sample class indices from categorical distributions.

    Accepts one distribution [K] or a batch [B x K]; returns (actions,
    log-probs) with matching leading shape. Deterministic given rng state.
    """
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    if single:
        p = p[None, :]
    cdf = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * cdf[:, -1]  # guards tiny normalization drift
    actions = np.minimum(
        (u[:, None] >= cdf).sum(axis=1), p.shape[1] - 1
    ).astype(np.int64)
    with np.errstate(divide="ignore"):
        log_probs = np.log(p[np.arange(p.shape[0]), actions])
    if single:
        return int(actions[0]), float(log_probs[0])
    return actions, log_probs


def predict(probs: np.ndarray) -> np.ndarray:
    """Argmax decision rule; ties go to the lowest class index."""
    p = np.asarray(probs)
    if p.ndim == 1:
        return int(np.argmax(p))
    return np.argmax(p, axis=1)
