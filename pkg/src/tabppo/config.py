"""Declarative run configuration with CLI flag overrides.

A run is fully described by one JSON document; every run writes its
resolved configuration (all defaults materialized) next to its outputs so
re-running from that file reproduces the metric log exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .data import SyntheticSpec
from .encoder import EncoderConfig
from .errors import ConfigError, DataError
from .reward import RewardConfig
from .rl import PpoConfig

TRAINERS = ("ppo", "ce")


@dataclass
class CsvSource:
    path: str
    label_column: str = "label"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunConfig:
    csv: CsvSource | None = None
    synthetic: SyntheticSpec | None = None
    train_fraction: float = 0.8
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    trainer: str = "ppo"
    epochs: int = 10
    seed: int = 0
    out: str = "run_out"

    def __post_init__(self):
        if (self.csv is None) == (self.synthetic is None):
            raise ConfigError(
                "exactly one data source required: 'csv' or 'synthetic'"
            )
        if self.trainer not in TRAINERS:
            raise ConfigError(f"trainer must be one of {TRAINERS}, got {self.trainer!r}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(
                f"train_fraction must be in (0,1), got {self.train_fraction}"
            )

    def to_dict(self) -> dict:
        d = {
            "train_fraction": self.train_fraction,
            "encoder": self.encoder.to_dict(),
            "reward": self.reward.to_dict(),
            "ppo": self.ppo.to_dict(),
            "trainer": self.trainer,
            "epochs": self.epochs,
            "seed": self.seed,
            "out": self.out,
        }
        if self.csv is not None:
            d["csv"] = self.csv.to_dict()
        else:
            d["synthetic"] = dict(self.synthetic.__dict__)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        try:
            kwargs: dict = {}
            if "csv" in d:
                kwargs["csv"] = CsvSource(**d.pop("csv"))
            if "synthetic" in d:
                kwargs["synthetic"] = SyntheticSpec(**d.pop("synthetic"))
            if "encoder" in d:
                kwargs["encoder"] = EncoderConfig.from_dict(d.pop("encoder"))
            if "reward" in d:
                kwargs["reward"] = RewardConfig.from_dict(d.pop("reward"))
            if "ppo" in d:
                kwargs["ppo"] = PpoConfig.from_dict(d.pop("ppo"))
            kwargs.update(d)
            return cls(**kwargs)
        except (TypeError, ValueError, DataError) as exc:
            raise ConfigError(f"invalid run configuration: {exc}") from exc

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
