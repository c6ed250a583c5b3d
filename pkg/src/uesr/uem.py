"""Unexpectedness encoding: predict the next embedded observation, encode the miss.

Per agent the module holds

* ``g``  -- a random projection ``relu(W o)`` of the raw observation to 64
  features, drawn once and never trained;
* ``f``  -- a two-layer ReLU perceptron mapping ``[g(o_prev), onehot(a_prev),
  inbox]`` to a prediction of ``g(o)``;
* an autoencoder ``enc`` (linear + sigmoid, to ``ues_len``) / ``dec``
  (linear, back to 64) over the unexpectedness ``x = f(...) - g(o)``.

``f`` is trained on the prediction loss ``||x||``; the autoencoder on the
reconstruction loss ``||dec(enc(x)) - x||`` with ``x`` held constant, so the
two losses never share a gradient path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .autodiff import (
    OptimizerConfig,
    ParameterSet,
    Tensor,
    adam_step,
    concat,
    dense,
    linear_params,
    mlp_relu,
    relu,
    sigmoid,
    sqrt,
    square,
)
from .autodiff.params import uniform_fan_in
from .env_warehouse import N_ACTIONS, OBS_SIZE

EMBED_SIZE = 64
NORM_EPS = 1e-8


@dataclass(frozen=True)
class UEMConfig:
    ues_len: int = 10
    inbox_len: int = 10
    obs_size: int = OBS_SIZE
    n_actions: int = N_ACTIONS
    hidden: int = EMBED_SIZE
    learning_rate: float = 0.001


class UEMBatch(NamedTuple):
    prev_obs: np.ndarray  # (M, obs)
    prev_action: np.ndarray  # (M,)
    inbox: np.ndarray  # (M, inbox_len)
    curr_obs: np.ndarray  # (M, obs)


def one_hot(indices, n: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros(indices.shape + (n,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return out


def l2_rows(x: Tensor) -> Tensor:
    """Row-wise Euclidean norm with a small epsilon under the root."""
    return sqrt(square(x).sum(axis=-1) + NORM_EPS)


def prediction_loss(
    f_params: Mapping[str, Tensor], g_prev: np.ndarray, action_onehot: np.ndarray,
    inbox: np.ndarray, g_curr: np.ndarray,
) -> Tensor:
    pred = mlp_relu(f_params, ["f.fc1", "f.fc2"], concat([Tensor(g_prev), Tensor(action_onehot), Tensor(inbox)]))
    return l2_rows(pred - Tensor(g_curr)).mean()


def reconstruction_loss(ae_params: Mapping[str, Tensor], x: np.ndarray) -> Tensor:
    x = Tensor(x)  # constant: no gradient reaches f or g
    m = sigmoid(dense(ae_params, "enc", x))
    return l2_rows(dense(ae_params, "dec", m) - x).mean()


class UEM:
    def __init__(self, config: UEMConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.g = ParameterSet()
        self.g.add("g.weight", uniform_fan_in(rng, (c.hidden, c.obs_size), c.obs_size))
        self.g.add("g.bias", np.zeros(c.hidden))
        self.f = ParameterSet()
        linear_params(self.f, "f.fc1", c.hidden + c.n_actions + c.inbox_len, c.hidden, rng)
        linear_params(self.f, "f.fc2", c.hidden, c.hidden, rng)
        self.ae = ParameterSet()
        linear_params(self.ae, "enc", c.hidden, c.ues_len, rng)
        linear_params(self.ae, "dec", c.ues_len, c.hidden, rng)
        self.optim = OptimizerConfig(learning_rate=c.learning_rate)

    # -- forward pieces (no graph recorded)

    def embed(self, observation) -> np.ndarray:
        obs = np.asarray(observation, dtype=np.float64)
        if obs.shape[-1] != self.config.obs_size:
            raise ValueError(f"observation length {obs.shape[-1]} != {self.config.obs_size}")
        return relu(dense(self.g.constants(), "g", Tensor(obs))).data

    def predict(self, prev_embedding, prev_action, uem_inbox) -> np.ndarray:
        c = self.config
        emb = np.asarray(prev_embedding, dtype=np.float64)
        inbox = np.asarray(uem_inbox, dtype=np.float64)
        if emb.shape[-1] != c.hidden or inbox.shape[-1] != c.inbox_len:
            raise ValueError("predict: input lengths do not match the module")
        x = np.concatenate([emb, one_hot(prev_action, c.n_actions), inbox], axis=-1)
        return mlp_relu(self.f.constants(), ["f.fc1", "f.fc2"], Tensor(x)).data

    @staticmethod
    def unexpectedness(predicted, actual_embedding) -> np.ndarray:
        return np.asarray(predicted, dtype=np.float64) - np.asarray(actual_embedding, dtype=np.float64)

    def encode_message(self, x) -> np.ndarray:
        return sigmoid(dense(self.ae.constants(), "enc", Tensor(np.asarray(x, dtype=np.float64)))).data

    def decode(self, m) -> np.ndarray:
        return dense(self.ae.constants(), "dec", Tensor(np.asarray(m, dtype=np.float64))).data

    def surprise(self, prev_obs, prev_action, uem_inbox, curr_obs) -> np.ndarray:
        """Unexpectedness of ``curr_obs`` given the previous step."""
        pred = self.predict(self.embed(prev_obs), prev_action, uem_inbox)
        return self.unexpectedness(pred, self.embed(curr_obs))

    # -- training

    def update(self, batch: UEMBatch) -> tuple[float, float]:
        """One Adam step on each loss; returns (mean prediction loss, mean reconstruction loss)."""
        g_prev = self.embed(batch.prev_obs)
        g_curr = self.embed(batch.curr_obs)
        onehot = one_hot(batch.prev_action, self.config.n_actions)

        pred_loss = prediction_loss(self.f, g_prev, onehot, batch.inbox, g_curr)
        x = self.predict(g_prev, batch.prev_action, batch.inbox) - g_curr
        enc_loss = reconstruction_loss(self.ae, x)
        lp, le = pred_loss.item(), enc_loss.item()
        if not (np.isfinite(lp) and np.isfinite(le)):
            raise FloatingPointError(f"UEM loss diverged: pred={lp} enc={le}")
        pred_loss.backward()
        enc_loss.backward()
        adam_step(self.f, self.optim)
        adam_step(self.ae, self.optim)
        return lp, le

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for name, ps in (("g", self.g), ("f", self.f), ("ae", self.ae)):
            out.update(ps.state_dict(f"{prefix}{name}/"))
        return out

    def load_state_dict(self, state, prefix: str = "") -> None:
        for name, ps in (("g", self.g), ("f", self.f), ("ae", self.ae)):
            ps.load_state_dict(state, f"{prefix}{name}/")
