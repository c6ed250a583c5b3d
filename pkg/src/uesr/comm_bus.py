"""Broadcast message storage with one- and two-step delivery delays.

Messages chosen at step ``t`` reach policies at ``t + 1`` (all agents,
sender included) and the unexpectedness module at ``t + 2`` (senders other
than the reader). Message arrays may carry leading batch dimensions; the
last two axes are always ``(n_agents, message_len)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HISTORY = 3


@dataclass(frozen=True)
class MessageSplit:
    reward_len: int
    ues_len: int

    @property
    def total(self) -> int:
        return self.reward_len + self.ues_len


def check_message(values: np.ndarray, split: MessageSplit) -> None:
    """Raise if the reward part is not binary or the UES part leaves [0, 1]."""
    values = np.asarray(values)
    if values.shape[-1] != split.total:
        raise ValueError(f"message length {values.shape[-1]} != {split.total}")
    reward = values[..., : split.reward_len]
    ues = values[..., split.reward_len :]
    if not np.all((reward == 0) | (reward == 1)):
        raise ValueError("reward part of a message must be binary")
    if np.any(ues < 0) or np.any(ues > 1):
        raise ValueError("UES part of a message must lie in [0, 1]")


class MessageBuffer:
    def __init__(self, n_agents: int, message_len: int, batch_shape: tuple = ()):
        self.n_agents = n_agents
        self.message_len = message_len
        self.batch_shape = tuple(batch_shape)
        self._slices: dict[int, np.ndarray] = {}
        self.next_step = 0
        self._zeros = np.zeros(self.batch_shape + (n_agents, message_len))

    def clear(self) -> None:
        self._slices.clear()
        self.next_step = 0

    def publish(self, t: int, all_messages) -> None:
        if t != self.next_step:
            raise ValueError(f"publish at t={t}, buffer expects t={self.next_step}")
        msgs = np.array(all_messages, dtype=np.float64, copy=True)
        if msgs.shape != self._zeros.shape:
            raise ValueError(f"messages have shape {msgs.shape}, expected {self._zeros.shape}")
        self._slices[t] = msgs
        self._slices.pop(t - HISTORY, None)
        self.next_step = t + 1

    def slice(self, t: int) -> np.ndarray:
        """All agents' messages from step ``t``; zeros before the first publish."""
        if t < 0:
            return self._zeros
        if t not in self._slices:
            if t < self.next_step - HISTORY:
                raise KeyError(f"slice {t} has been dropped")
            return self._zeros
        return self._slices[t]

    def policy_inbox(self, agent_i: int, t: int) -> np.ndarray:
        """Every agent's step ``t - 1`` message, concatenated in agent order."""
        if t < 0:
            raise ValueError("t must be non-negative")
        msgs = self.slice(t - 1)
        return msgs.reshape(self.batch_shape + (self.n_agents * self.message_len,))

    def uem_inbox(self, agent_i: int, t: int) -> np.ndarray:
        """Step ``t - 2`` messages of every agent except ``agent_i``, concatenated."""
        if t < 0:
            raise ValueError("t must be non-negative")
        msgs = np.delete(self.slice(t - 2), agent_i, axis=-2)
        return msgs.reshape(self.batch_shape + ((self.n_agents - 1) * self.message_len,))
