"""PPO training over classification decisions, plus the cross-entropy
baseline trainer used by the ablation.

Each training batch is one episode: transitions are collected in batch
order (the mistake window depends on it), the episode terminates at the
batch end with bootstrap value 0, advantages come from GAE, and the
policy/value heads are updated for several epochs of shuffled minibatches
with the clipped surrogate objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .data import Batch, Dataset, iterate_batches
from .errors import ConfigError
from .heads import PolicyValueNet, sample_action
from .metrics import ClassReport, confusion, report
from .reward import MistakeWindow, RewardConfig, total_reward
from .seeding import substream


@dataclass
class Transition:
    """One classification decision inside an episode."""

    row: int  # index into the episode's batch
    action: int
    old_log_prob: float
    value: float
    reward: float
    advantage: float | None = None
    return_target: float | None = None


@dataclass
class PpoConfig:
    clip_epsilon: float = 0.2
    ppo_epochs: int = 4
    minibatch_size: int = 256
    # 0.99 leaves advantages dominated by unrelated future steps when i.i.d.
    # samples form the episode; 0.5 keeps the immediate-reward signal dominant
    discount: float = 0.5
    gae_lambda: float = 0.95
    value_loss_coef: float = 0.5
    entropy_coef: float = 0.0
    learning_rate: float = 3e-4
    max_grad_norm: float = 1.0
    episode_length: int | None = None  # defaults to minibatch_size

    def __post_init__(self):
        if self.episode_length is None:
            self.episode_length = self.minibatch_size
        if not 0 < self.clip_epsilon < 1:
            raise ConfigError(f"clip_epsilon must be in (0,1), got {self.clip_epsilon}")
        if self.ppo_epochs < 1 or self.minibatch_size < 1 or self.episode_length < 1:
            raise ConfigError("ppo_epochs, minibatch_size and episode_length must be >= 1")
        if not 0 <= self.discount <= 1:
            raise ConfigError(f"discount must be in [0,1], got {self.discount}")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigError(f"gae_lambda must be in [0,1], got {self.gae_lambda}")
        if self.learning_rate < 0 or self.max_grad_norm <= 0:
            raise ConfigError("learning_rate must be >= 0 and max_grad_norm > 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "PpoConfig":
        return cls(**d)


class Adam:
    """Per-parameter adaptive first-order optimizer with bias-corrected
    first/second moments (decay 0.9 / 0.999, epsilon 1e-8)."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, nc.Tensor], lr: float,
             max_grad_norm: float | None = None) -> float:
        """Apply one update from the gradients stored on `params`.

        Returns the pre-clip global gradient norm. Parameters without a
        gradient this step keep their moments untouched.
        """
        grads = {n: p.grad for n, p in params.items() if p.grad is not None}
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        clip_scale = 1.0
        if max_grad_norm is not None and norm > max_grad_norm:
            clip_scale = max_grad_norm / norm
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for name, grad in grads.items():
            g = grad * clip_scale
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / c1
            v_hat = self.v[name] / c2
            params[name].data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return norm

    def state_dict(self) -> dict:
        return {"m": dict(self.m), "v": dict(self.v), "t": self.t}

    def load_state_dict(self, state: dict) -> None:
        self.m = {k: np.array(v) for k, v in state["m"].items()}
        self.v = {k: np.array(v) for k, v in state["v"].items()}
        self.t = int(state["t"])


# -- collection and advantages -------------------------------------------


def collect_trajectory(batch: Batch, net: PolicyValueNet,
                       reward_cfg: RewardConfig, window: MistakeWindow,
                       rng: np.random.Generator) -> list[Transition]:
    """One Transition per sample, in batch order, with the composite reward.

    The network is evaluated once for the whole batch (parameters are fixed
    during collection); rewards are assigned sequentially so the mistake
    window sees outcomes in order.
    """
    with nc.no_grad():
        probs, values = net.forward(batch)
    actions, log_probs = sample_action(probs.data, rng)
    transitions = []
    for i in range(batch.size):
        action = int(actions[i])
        truth = int(batch.labels[i])
        r = total_reward(action, truth, float(probs.data[i, action]),
                         window, reward_cfg)
        transitions.append(Transition(
            row=i,
            action=action,
            old_log_prob=float(log_probs[i]),
            value=float(values.data[i]),
            reward=r,
        ))
    return transitions


def compute_gae(transitions: list[Transition], discount: float,
                gae_lambda: float, normalize: bool = True) -> list[Transition]:
    """Fill advantages and return targets; the list is one episode whose
    final step is terminal (bootstrap value 0).

    delta_t = r_t + discount * V(s_{t+1}) - V(s_t)   (V = 0 past the end)
    A_t     = delta_t + discount * gae_lambda * A_{t+1}
    return  = A_t + V(s_t), recorded before optional normalization.
    """
    if not transitions:
        return transitions
    running = 0.0
    next_value = 0.0
    for t in reversed(range(len(transitions))):
        tr = transitions[t]
        delta = tr.reward + discount * next_value - tr.value
        running = delta + discount * gae_lambda * running
        tr.advantage = running
        tr.return_target = running + tr.value
        next_value = tr.value
    if normalize:
        adv = np.array([tr.advantage for tr in transitions])
        centered = adv - adv.mean()
        std = adv.std()
        normed = centered / (std + 1e-8)
        for tr, a in zip(transitions, normed):
            tr.advantage = float(a)
    return transitions


def _sub_batch(batch: Batch, rows: np.ndarray) -> Batch:
    return Batch(batch.categorical[rows], batch.numerical[rows],
                 batch.labels[rows])


def ppo_update(batch: Batch, transitions: list[Transition],
               net: PolicyValueNet, cfg: PpoConfig, optimizer: Adam,
               rng: np.random.Generator) -> dict[str, float]:
    """K epochs of clipped-surrogate updates over shuffled minibatches.

    Returns mean policy loss, value loss, entropy and clip fraction across
    all minibatches of this call.
    """
    if any(tr.advantage is None for tr in transitions):
        raise ValueError("advantages not computed; run compute_gae first")
    rows = np.array([tr.row for tr in transitions])
    actions = np.array([tr.action for tr in transitions])
    old_log_probs = np.array([tr.old_log_prob for tr in transitions])
    advantages = np.array([tr.advantage for tr in transitions])
    returns = np.array([tr.return_target for tr in transitions])

    sums = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
            "clip_fraction": 0.0}
    n_minibatches = 0
    for k in range(cfg.ppo_epochs):
        order = rng.permutation(len(transitions))
        for start in range(0, len(order), cfg.minibatch_size):
            mb = order[start:start + cfg.minibatch_size]
            probs, values = net.forward(_sub_batch(batch, rows[mb]))
            new_log_probs = nc.log(nc.gather_index(probs, actions[mb]))
            ratio = nc.exp(new_log_probs - nc.tensor(old_log_probs[mb]))
            adv = nc.tensor(advantages[mb])
            surrogate = nc.minimum(
                ratio * adv,
                nc.clip(ratio, 1 - cfg.clip_epsilon, 1 + cfg.clip_epsilon) * adv,
            )
            policy_loss = nc.neg(nc.mean(surrogate))
            value_err = values - nc.tensor(returns[mb])
            value_loss = nc.mean(nc.square(value_err))
            entropy = nc.neg(nc.mean(nc.total(
                probs * nc.log(probs + 1e-12), axis=1)))
            loss = policy_loss + nc.scale(value_loss, cfg.value_loss_coef)
            if cfg.entropy_coef:
                loss = loss - nc.scale(entropy, cfg.entropy_coef)
            if not np.isfinite(loss.data):
                norms = {n: float(np.abs(p.data).max())
                         for n, p in net.params.items()}
                worst = max(norms, key=norms.get)
                raise nc.NumericalError(
                    f"non-finite loss at optimizer step {optimizer.t + 1} "
                    f"(largest parameter: {worst}={norms[worst]:.3e})"
                )
            net.zero_grad()
            loss.backward()
            optimizer.step(net.params, cfg.learning_rate, cfg.max_grad_norm)

            clipped = np.abs(ratio.data - 1.0) > cfg.clip_epsilon
            sums["policy_loss"] += float(policy_loss.data)
            sums["value_loss"] += float(value_loss.data)
            sums["entropy"] += float(entropy.data)
            sums["clip_fraction"] += float(clipped.mean())
            n_minibatches += 1
    return {k: v / n_minibatches for k, v in sums.items()}


# -- evaluation -----------------------------------------------------------


def evaluate(net: PolicyValueNet, ds: Dataset,
             batch_size: int = 512) -> ClassReport:
    """Argmax predictions over the dataset, summarized as a ClassReport."""
    predictions = np.concatenate([
        net.predict(b) for b in iterate_batches(ds, batch_size)
    ])
    cm = confusion(ds.labels, predictions, ds.schema.n_classes)
    return report(cm, ds.schema.labels)


# -- trainers -------------------------------------------------------------


@dataclass
class EpochMetrics:
    epoch: int
    mean_reward: float | None
    policy_loss: float
    value_loss: float | None
    clip_fraction: float | None
    test_macro_f1: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _log_epoch(metrics: EpochMetrics, log_file) -> None:
    if log_file is not None:
        log_file.write(json.dumps(metrics.to_dict()) + "\n")
        log_file.flush()


@dataclass
class TrainerState:
    """Everything mutable during training, for exact checkpoint/resume."""

    net: PolicyValueNet
    optimizer: Adam
    rng_sample: np.random.Generator
    rng_shuffle: np.random.Generator
    window: MistakeWindow
    epoch: int = 0

    @classmethod
    def create(cls, net: PolicyValueNet, window_k: int,
               seed: int) -> "TrainerState":
        return cls(
            net=net,
            optimizer=Adam(),
            rng_sample=substream(seed, "sample"),
            rng_shuffle=substream(seed, "shuffle"),
            window=MistakeWindow(window_k),
        )


def train_ppo(train_ds: Dataset, test_ds: Dataset | None,
              net: PolicyValueNet, ppo_cfg: PpoConfig,
              reward_cfg: RewardConfig, epochs: int, seed: int,
              log_file=None, state: TrainerState | None = None) -> list[EpochMetrics]:
    """Full training loop: per batch, collect -> GAE -> clipped updates.

    Deterministic given `seed`; all randomness flows through named
    substreams. Per-epoch metrics are returned and optionally appended to
    `log_file` as line-delimited JSON. Passing a restored `state` resumes
    exactly where a checkpoint left off.
    """
    if state is None:
        state = TrainerState.create(net, reward_cfg.window_k, seed)
    rng_sample, rng_shuffle = state.rng_sample, state.rng_shuffle
    optimizer, window = state.optimizer, state.window
    history = []
    for epoch in range(state.epoch, state.epoch + epochs):
        window.reset()
        reward_sum, n_steps = 0.0, 0
        stat_sums: dict[str, float] = {}
        n_batches = 0
        batch_seed = int(rng_shuffle.integers(2 ** 63))
        for b, batch in enumerate(iterate_batches(
                train_ds, ppo_cfg.episode_length, shuffle_seed=batch_seed)):
            try:
                transitions = collect_trajectory(
                    batch, net, reward_cfg, window, rng_sample)
                compute_gae(transitions, ppo_cfg.discount, ppo_cfg.gae_lambda)
                stats = ppo_update(batch, transitions, net, ppo_cfg,
                                   optimizer, rng_shuffle)
            except nc.NumericalError as exc:
                raise nc.NumericalError(
                    f"epoch {epoch}, batch {b}: {exc}") from exc
            reward_sum += sum(tr.reward for tr in transitions)
            n_steps += len(transitions)
            for key, val in stats.items():
                stat_sums[key] = stat_sums.get(key, 0.0) + val
            n_batches += 1
        test_f1 = evaluate(net, test_ds).macro_f1 \
            if test_ds is not None and test_ds.n else None
        metrics = EpochMetrics(
            epoch=epoch,
            mean_reward=reward_sum / n_steps,
            policy_loss=stat_sums["policy_loss"] / n_batches,
            value_loss=stat_sums["value_loss"] / n_batches,
            clip_fraction=stat_sums["clip_fraction"] / n_batches,
            test_macro_f1=test_f1,
        )
        history.append(metrics)
        _log_epoch(metrics, log_file)
        state.epoch = epoch + 1
    return history


def train_cross_entropy(train_ds: Dataset, test_ds: Dataset | None,
                        net: PolicyValueNet, learning_rate: float,
                        epochs: int, seed: int, batch_size: int = 256,
                        max_grad_norm: float = 1.0, log_file=None,
                        state: TrainerState | None = None) -> list[EpochMetrics]:
    """Supervised baseline: negative log-likelihood on the policy head; the
    value head is left untouched. Same logging surface as train_ppo, with
    the PPO-only fields null."""
    if state is None:
        state = TrainerState.create(net, 1, seed)
    rng_shuffle = state.rng_shuffle
    optimizer = state.optimizer
    history = []
    for epoch in range(state.epoch, state.epoch + epochs):
        loss_sum, n_batches = 0.0, 0
        batch_seed = int(rng_shuffle.integers(2 ** 63))
        for b, batch in enumerate(iterate_batches(
                train_ds, batch_size, shuffle_seed=batch_seed)):
            probs, _ = net.forward(batch)
            nll = nc.neg(nc.mean(nc.log(
                nc.gather_index(probs, batch.labels) + 1e-12)))
            if not np.isfinite(nll.data):
                raise nc.NumericalError(
                    f"epoch {epoch}, batch {b}: non-finite cross-entropy loss")
            net.zero_grad()
            nll.backward()
            optimizer.step(net.params, learning_rate, max_grad_norm)
            loss_sum += float(nll.data)
            n_batches += 1
        test_f1 = evaluate(net, test_ds).macro_f1 \
            if test_ds is not None and test_ds.n else None
        metrics = EpochMetrics(
            epoch=epoch,
            mean_reward=None,
            policy_loss=loss_sum / n_batches,
            value_loss=None,
            clip_fraction=None,
            test_macro_f1=test_f1,
        )
        history.append(metrics)
        _log_epoch(metrics, log_file)
        state.epoch = epoch + 1
    return history
