"""Composite reward: classification term, confidence-weighted adjustment,
and a log-scaled penalty over a sliding window of recent mistakes.

R = alpha * R_cls + beta * R_conf + gamma_w * R_temp, with
  R_cls  = +r_correct on a hit, -r_wrong on a miss
  R_conf = lambda * sign * p(predicted), sign = +1 on a hit, -1 on a miss
  R_temp = -delta * ln(1 + wrong count among the last window_k outcomes)

The window covers history only: the current step's outcome is pushed after
its reward is computed, so a step is never penalized for itself.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field


@dataclass
class RewardConfig:
    alpha: float = 1.0
    beta: float = 0.5
    gamma_w: float = 0.2
    r_correct: float = 1.0
    r_wrong: float = 1.0
    lambda_: float = 1.0
    delta: float = 0.5
    window_k: int = 32

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma_w", "r_correct", "r_wrong",
                     "lambda_", "delta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if self.window_k < 1:
            raise ValueError(f"window_k must be >= 1, got {self.window_k}")

    # "lambda" is the external name but a Python keyword internally
    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "lambda_"}
        d["lambda"] = self.lambda_
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)

    def bound(self) -> float:
        """Upper bound on |R| for any input."""
        return (self.alpha * max(self.r_correct, self.r_wrong)
                + self.beta * self.lambda_
                + self.gamma_w * self.delta * math.log(1 + self.window_k))


@dataclass
class MistakeWindow:
    """Ring buffer of the last `window_k` correctness flags."""

    window_k: int
    _flags: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        self._flags = deque(self._flags, maxlen=self.window_k)

    @property
    def count_wrong(self) -> int:
        return sum(1 for ok in self._flags if not ok)

    def push(self, correct: bool) -> None:
        self._flags.append(bool(correct))

    def reset(self) -> None:
        self._flags.clear()

    def __len__(self) -> int:
        return len(self._flags)


def reward_cls(predicted: int, truth: int, cfg: RewardConfig) -> float:
    return cfg.r_correct if predicted == truth else -cfg.r_wrong


def reward_conf(predicted: int, truth: int, prob_of_predicted: float,
                cfg: RewardConfig) -> float:
    sign = 1.0 if predicted == truth else -1.0
    return cfg.lambda_ * sign * prob_of_predicted


def reward_temp(window: MistakeWindow, cfg: RewardConfig) -> float:
    return -cfg.delta * math.log(1 + window.count_wrong)


def total_reward(predicted: int, truth: int, prob_of_predicted: float,
                 window: MistakeWindow, cfg: RewardConfig) -> float:
    """Weighted sum of the three terms; pushes the new outcome into the
    window only after the reward is computed."""
    value = (cfg.alpha * reward_cls(predicted, truth, cfg)
             + cfg.beta * reward_conf(predicted, truth, prob_of_predicted, cfg)
             + cfg.gamma_w * reward_temp(window, cfg))
    window.push(predicted == truth)
    return value
