"""Recurrent advantage actor-critic agents with learned binary message channels.

The actor maps a policy input (observation followed by the previous step's
messages) through ``fc -> relu -> GRU -> relu -> head``. The head emits 5
action logits followed by 2 logits per reward-message bit; each bit is its
own two-way softmax channel and is reinforced exactly like the action. The
critic is ``fc -> relu -> out`` with a slowly tracking target copy used only
for bootstrapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .autodiff import (
    OptimizerConfig,
    ParameterSet,
    Tensor,
    adam_step,
    categorical_entropy,
    concat,
    dense,
    gru_params,
    gru_step,
    linear_params,
    log_softmax,
    pick,
    relu,
    reshape,
    sample_bernoulli,
    sample_categorical,
    soft_update,
    softmax,
    square,
)
from .autodiff.tensor import mul
from .comm_bus import MessageSplit
from .env_warehouse import N_ACTIONS

HIDDEN = 64
MESSAGE_LEN = 10


class Scheme(str, Enum):
    IA2C = "ia2c"
    M_R = "m_r"
    M_UES = "m_ues"
    M_UES_R = "m_ues_r"

    @property
    def uses_reward_bits(self) -> bool:
        return self in (Scheme.M_R, Scheme.M_UES_R)

    @property
    def uses_ues(self) -> bool:
        return self in (Scheme.M_UES, Scheme.M_UES_R)

    @property
    def communicates(self) -> bool:
        return self is not Scheme.IA2C


def default_split(scheme: Scheme, message_len: int = MESSAGE_LEN) -> MessageSplit:
    scheme = Scheme(scheme)
    if scheme is Scheme.IA2C:
        return MessageSplit(0, 0)
    if scheme is Scheme.M_R:
        return MessageSplit(message_len, 0)
    if scheme is Scheme.M_UES:
        return MessageSplit(0, message_len)
    return MessageSplit(message_len // 2, message_len - message_len // 2)


@dataclass(frozen=True)
class A2CConfig:
    learning_rate: float = 0.0005
    entropy_coefficient: float = 0.01
    gamma: float = 0.99
    n_steps: int = 5
    batch_envs: int = 10
    scheme: Scheme = Scheme.IA2C
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_epsilon: float = 1e-5
    soft_update_tau: float = 0.01

    def __post_init__(self):
        if self.entropy_coefficient < 0:
            raise ValueError("entropy_coefficient must be non-negative")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.n_steps < 1 or self.batch_envs < 1:
            raise ValueError("n_steps and batch_envs must be positive")

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_epsilon, self.soft_update_tau
        )


# ---------------------------------------------------------------- networks


class Actor:
    def __init__(self, input_size: int, n_bits: int, rng: np.random.Generator, hidden: int = HIDDEN):
        self.input_size = input_size
        self.n_bits = n_bits
        self.hidden = hidden
        self.params = ParameterSet()
        linear_params(self.params, "fc", input_size, hidden, rng)
        gru_params(self.params, "gru", hidden, hidden, rng)
        linear_params(self.params, "head", hidden, N_ACTIONS + 2 * n_bits, rng)

    def initial_hidden(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.hidden))

    def forward(self, params, x: Tensor, h: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape[-1] != self.input_size:
            raise ValueError(f"policy input has length {x.shape[-1]}, actor expects {self.input_size}")
        h_new = gru_step(params, "gru", relu(dense(params, "fc", x)), h)
        return dense(params, "head", relu(h_new)), h_new

    def split_logits(self, logits: Tensor) -> tuple[Tensor, Tensor | None]:
        action_logits = logits[..., :N_ACTIONS]
        if not self.n_bits:
            return action_logits, None
        bits = reshape(logits[..., N_ACTIONS:], logits.shape[:-1] + (self.n_bits, 2))
        return action_logits, bits


class Critic:
    def __init__(self, input_size: int, rng: np.random.Generator, hidden: int = HIDDEN):
        self.input_size = input_size
        self.online = ParameterSet()
        linear_params(self.online, "fc", input_size, hidden, rng)
        linear_params(self.online, "out", hidden, 1, rng)
        self.target = self.online.copy()

    @staticmethod
    def forward(params, x: Tensor) -> Tensor:
        out = dense(params, "out", relu(dense(params, "fc", x)))
        return out[..., 0]


# ---------------------------------------------------------------- acting


class ActResult(NamedTuple):
    action: np.ndarray  # (B,)
    reward_message_bits: np.ndarray  # (B, n_bits)
    log_probs: np.ndarray  # (B, 1 + n_bits): action channel then bits
    entropies: np.ndarray  # (B, 1 + n_bits)
    new_hidden: np.ndarray  # (B, hidden)


def act(actor: Actor, policy_input, hidden, rng: np.random.Generator) -> ActResult:
    """Sample an action, then every message bit, from a frozen view of the actor."""
    x = np.atleast_2d(np.asarray(policy_input, dtype=np.float64))
    h = np.atleast_2d(np.asarray(hidden, dtype=np.float64))
    logits, h_new = actor.forward(actor.params.constants(), Tensor(x), Tensor(h))
    action_logits, bit_logits = actor.split_logits(logits)
    a = sample_categorical(softmax(action_logits).data, rng)
    logps, ents = [a.log_prob[:, None]], [a.entropy[:, None]]
    if bit_logits is not None:
        b = sample_bernoulli(softmax(bit_logits).data[..., 1], rng)
        bits = b.value
        logps.append(b.log_prob)
        ents.append(b.entropy)
    else:
        bits = np.zeros((x.shape[0], 0), dtype=np.int64)
    return ActResult(a.value, bits, np.concatenate(logps, axis=1), np.concatenate(ents, axis=1), h_new.data)


def evaluate_value(critic: Critic, policy_input, use_target: bool = False) -> np.ndarray:
    x = np.asarray(policy_input, dtype=np.float64)
    if x.shape[-1] != critic.input_size:
        raise ValueError(f"critic input has length {x.shape[-1]}, expected {critic.input_size}")
    params = critic.target if use_target else critic.online
    return Critic.forward(params.constants(), Tensor(x)).data


def assemble_message(scheme: Scheme, reward_bits, ues_part, split: MessageSplit | None = None):
    """Concatenate the reward bits and the UES part into one message.

    Returns ``None`` for the silent scheme. A part the scheme does not produce
    is passed as ``None`` and filled with zeros.
    """
    scheme = Scheme(scheme)
    if not scheme.communicates:
        return None
    split = split or default_split(scheme)
    given = [np.asarray(p, dtype=np.float64) for p in (reward_bits, ues_part) if p is not None]
    batch_shape = given[0].shape[:-1] if given else ()
    pieces = []
    for part, length, label in ((reward_bits, split.reward_len, "reward"), (ues_part, split.ues_len, "ues")):
        part = np.zeros(batch_shape + (length,)) if part is None else np.asarray(part, dtype=np.float64)
        if part.shape[-1] != length:
            raise ValueError(f"{label} part has length {part.shape[-1]}, scheme {scheme.value} needs {length}")
        pieces.append(part)
    return np.concatenate(pieces, axis=-1)


# ---------------------------------------------------------------- learning


@dataclass
class Trajectory:
    """One n-step segment for B environments, as recorded while acting.

    ``h0`` is the actor hidden state before the first step; gradients are
    not propagated into it. ``bootstrap_input`` is the policy input observed
    after the last step.
    """

    inputs: np.ndarray  # (T, B, in)
    actions: np.ndarray  # (T, B)
    bits: np.ndarray  # (T, B, n_bits)
    rewards: np.ndarray  # (T, B)
    dones: np.ndarray  # (T, B)
    h0: np.ndarray  # (B, hidden)
    bootstrap_input: np.ndarray  # (B, in)
    log_probs: np.ndarray | None = None
    entropies: np.ndarray | None = None
    values: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.actions.size


def compute_returns(rewards, dones, bootstrap_value, gamma: float) -> np.ndarray:
    """Discounted n-step returns, bootstrapped from the segment end, cut at episode ends.

    ``rewards``/``dones`` have shape (T, B); ``bootstrap_value`` has shape (B,).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    out = np.zeros_like(rewards)
    running = np.asarray(bootstrap_value, dtype=np.float64).copy()
    for t in range(rewards.shape[0] - 1, -1, -1):
        running = rewards[t] + gamma * np.where(dones[t], 0.0, running)
        out[t] = running
    return out


def policy_terms(actor: Actor, params, traj: Trajectory) -> tuple[Tensor, Tensor]:
    """Re-run the actor over a segment; returns joint log-probs and summed entropies, (T, B) each."""
    T, B = traj.actions.shape
    h = Tensor(traj.h0)
    logps, ents = [], []
    for t in range(T):
        if t > 0:
            keep = (~np.asarray(traj.dones[t - 1], dtype=bool)).astype(np.float64)[:, None]
            h = mul(h, keep)
        logits, h = actor.forward(params, Tensor(traj.inputs[t]), h)
        action_logits, bit_logits = actor.split_logits(logits)
        logp = pick(log_softmax(action_logits), traj.actions[t])
        ent = categorical_entropy(action_logits)
        if bit_logits is not None:
            logp = logp + pick(log_softmax(bit_logits), traj.bits[t]).sum(axis=-1)
            ent = ent + categorical_entropy(bit_logits).sum(axis=-1)
        logps.append(reshape(logp, (1, B)))
        ents.append(reshape(ent, (1, B)))
    return concat(logps, axis=0), concat(ents, axis=0)


def actor_loss(actor: Actor, params, trajs: Sequence[Trajectory], advantages: Sequence[np.ndarray],
               entropy_coefficient: float) -> Tensor:
    """-(mean of logpi * A) - c * (mean entropy); advantages enter as constants."""
    total = None
    n = sum(t.n_samples for t in trajs)
    for traj, adv in zip(trajs, advantages):
        logp, ent = policy_terms(actor, params, traj)
        term = mul(logp, -np.asarray(adv)).sum() - mul(ent, entropy_coefficient).sum()
        total = term if total is None else total + term
    return mul(total, 1.0 / n)


def critic_loss(params, trajs: Sequence[Trajectory], returns: Sequence[np.ndarray]) -> Tensor:
    """Mean squared error between returns and online values."""
    total = None
    n = sum(t.n_samples for t in trajs)
    for traj, ret in zip(trajs, returns):
        values = Critic.forward(params, Tensor(traj.inputs))
        term = square(Tensor(ret) - values).sum()
        total = term if total is None else total + term
    return mul(total, 1.0 / n)


@dataclass
class UpdateReport:
    actor_loss: float
    critic_loss: float
    mean_return: float
    mean_advantage: float
    extras: dict = field(default_factory=dict)


def segment_returns(critic: Critic, traj: Trajectory, gamma: float) -> np.ndarray:
    boot = evaluate_value(critic, traj.bootstrap_input, use_target=True)
    return compute_returns(traj.rewards, traj.dones, boot, gamma)


def a2c_update(actor: Actor, critic: Critic, batch: Trajectory | Sequence[Trajectory],
               config: A2CConfig) -> UpdateReport:
    """One actor step and one critic step over the segments, then a soft target update."""
    trajs = [batch] if isinstance(batch, Trajectory) else list(batch)
    returns = [segment_returns(critic, t, config.gamma) for t in trajs]
    advantages = [r - evaluate_value(critic, t.inputs) for r, t in zip(returns, trajs)]

    a_loss = actor_loss(actor, actor.params, trajs, advantages, config.entropy_coefficient)
    c_loss = critic_loss(critic.online, trajs, returns)
    la, lc = a_loss.item(), c_loss.item()
    if not (np.isfinite(la) and np.isfinite(lc)):
        raise FloatingPointError(f"A2C loss diverged: actor={la} critic={lc}")
    a_loss.backward()
    c_loss.backward()
    opt = config.optimizer
    adam_step(actor.params, opt)
    adam_step(critic.online, opt)
    soft_update(critic.target, critic.online, config.soft_update_tau)
    return UpdateReport(
        la, lc, float(np.mean([r.mean() for r in returns])), float(np.mean([a.mean() for a in advantages]))
    )
