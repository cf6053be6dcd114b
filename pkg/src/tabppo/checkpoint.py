"""Checkpoint and schema-sidecar serialization.

A checkpoint directory contains:
  checkpoint.npz   parameters and optimizer moments (float64 arrays)
  checkpoint.json  encoder config, rng states, step counters
  schema.json      the FeatureSchema sidecar, so inference is reproducible
"""

from __future__ import annotations

import json
import os

import numpy as np

from .data import FeatureSchema
from .encoder import EncoderConfig
from .heads import PolicyValueNet
from .reward import MistakeWindow
from .rl import Adam, TrainerState
from .seeding import substream

ARRAYS = "checkpoint.npz"
META = "checkpoint.json"
SCHEMA = "schema.json"


def save_schema(schema: FeatureSchema, directory: str) -> None:
    with open(os.path.join(directory, SCHEMA), "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)


def load_schema(directory: str) -> FeatureSchema:
    with open(os.path.join(directory, SCHEMA), encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def save_checkpoint(directory: str, state: TrainerState) -> None:
    os.makedirs(directory, exist_ok=True)
    net = state.net
    arrays: dict[str, np.ndarray] = {}
    for name, value in net.state_dict().items():
        arrays[f"param/{name}"] = value
    for name, value in state.optimizer.m.items():
        arrays[f"adam_m/{name}"] = value
    for name, value in state.optimizer.v.items():
        arrays[f"adam_v/{name}"] = value
    np.savez(os.path.join(directory, ARRAYS), **arrays)
    meta = {
        "encoder": net.encoder_cfg.to_dict(),
        "adam_t": state.optimizer.t,
        "epoch": state.epoch,
        "window_k": state.window.window_k,
        "window_flags": [bool(f) for f in state.window._flags],
        "rng_sample": state.rng_sample.bit_generator.state,
        "rng_shuffle": state.rng_shuffle.bit_generator.state,
    }
    with open(os.path.join(directory, META), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    save_schema(net.schema, directory)


def load_checkpoint(directory: str) -> TrainerState:
    """Rebuild the net, optimizer moments and rng states for exact resume."""
    schema = load_schema(directory)
    with open(os.path.join(directory, META), encoding="utf-8") as fh:
        meta = json.load(fh)
    encoder_cfg = EncoderConfig.from_dict(meta["encoder"])
    net = PolicyValueNet.create(schema, encoder_cfg, substream(0, "init"))
    with np.load(os.path.join(directory, ARRAYS)) as arrays:
        net.load_state_dict({
            key.removeprefix("param/"): arrays[key]
            for key in arrays.files if key.startswith("param/")
        })
        optimizer = Adam()
        optimizer.t = int(meta["adam_t"])
        optimizer.m = {
            key.removeprefix("adam_m/"): np.array(arrays[key])
            for key in arrays.files if key.startswith("adam_m/")
        }
        optimizer.v = {
            key.removeprefix("adam_v/"): np.array(arrays[key])
            for key in arrays.files if key.startswith("adam_v/")
        }
    window = MistakeWindow(int(meta["window_k"]))
    for flag in meta["window_flags"]:
        window.push(flag)
    rng_sample = np.random.default_rng()
    rng_sample.bit_generator.state = meta["rng_sample"]
    rng_shuffle = np.random.default_rng()
    rng_shuffle.bit_generator.state = meta["rng_shuffle"]
    return TrainerState(
        net=net,
        optimizer=optimizer,
        rng_sample=rng_sample,
        rng_shuffle=rng_shuffle,
        window=window,
        epoch=int(meta["epoch"]),
    )
