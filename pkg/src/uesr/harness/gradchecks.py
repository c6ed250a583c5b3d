"""Finite-difference checks of every differentiable piece used in training.

Networks are built at reduced width so that checking every parameter
element stays quick; the code paths are the production ones.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..agent_a2c import Actor, Critic, Trajectory, actor_loss, critic_loss
from ..autodiff import (
    GradCheckReport,
    ParameterSet,
    Tensor,
    dense,
    grad_check,
    gru_params,
    gru_step,
    linear_params,
    log_softmax,
    pick,
    sigmoid,
)
from ..uem import UEM, UEMConfig, one_hot, prediction_loss, reconstruction_loss

LAYER_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4


class CheckResult(NamedTuple):
    name: str
    report: GradCheckReport


def _trajectory(rng, T, B, n_in, n_bits, hidden) -> Trajectory:
    dones = np.zeros((T, B), dtype=bool)
    dones[1, 0] = True  # exercises the hidden-state reset
    return Trajectory(
        inputs=rng.normal(size=(T, B, n_in)),
        actions=rng.integers(0, 5, size=(T, B)),
        bits=rng.integers(0, 2, size=(T, B, n_bits)),
        rewards=rng.normal(size=(T, B)),
        dones=dones,
        h0=rng.normal(scale=0.5, size=(B, hidden)),
        bootstrap_input=rng.normal(size=(B, n_in)),
    )


def gradient_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out: list[CheckResult] = []

    p = ParameterSet()
    linear_params(p, "lin", 4, 3, rng)
    x, c = rng.normal(size=(5, 4)), rng.normal(size=(5, 3))
    out.append(CheckResult("linear", grad_check(
        lambda: (dense(p, "lin", Tensor(x)) * c).sum(), p, LAYER_TOLERANCE)))

    p = ParameterSet()
    gru_params(p, "gru", 3, 4, rng)
    xs, h0, c = rng.normal(size=(2, 2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))

    def gru_two_steps():
        h = Tensor(h0)
        for t in range(2):
            h = gru_step(p, "gru", Tensor(xs[t]), h)
        return (h * c).sum()

    out.append(CheckResult("gru_2step", grad_check(gru_two_steps, p, LAYER_TOLERANCE)))

    p = ParameterSet()
    linear_params(p, "head", 4, 5, rng)
    x, a = rng.normal(size=(6, 4)), rng.integers(0, 5, size=6)
    out.append(CheckResult("softmax_head", grad_check(
        lambda: pick(log_softmax(dense(p, "head", Tensor(x))), a).sum(), p, LAYER_TOLERANCE)))

    p = ParameterSet()
    linear_params(p, "enc", 4, 3, rng)
    x, c = rng.normal(size=(6, 4)), rng.normal(size=(6, 3))
    out.append(CheckResult("sigmoid_head", grad_check(
        lambda: (sigmoid(dense(p, "enc", Tensor(x))) * c).sum(), p, LAYER_TOLERANCE)))

    n_in, n_bits, hidden = 6, 3, 5
    actor = Actor(n_in, n_bits, rng, hidden=hidden)
    traj = _trajectory(rng, 3, 2, n_in, n_bits, hidden)
    adv = rng.normal(size=(3, 2))
    out.append(CheckResult("actor_loss", grad_check(
        lambda: actor_loss(actor, actor.params, [traj], [adv], 0.05), actor.params, NETWORK_TOLERANCE)))

    critic = Critic(n_in, rng, hidden=hidden)
    ret = rng.normal(size=(3, 2))
    out.append(CheckResult("critic_loss", grad_check(
        lambda: critic_loss(critic.online, [traj], [ret]), critic.online, NETWORK_TOLERANCE)))

    uem = UEM(UEMConfig(ues_len=3, inbox_len=2, obs_size=6, hidden=4), rng)
    o_prev, o_curr = rng.normal(size=(1, 6)), rng.normal(size=(1, 6))
    act, inbox = one_hot([2], 5), rng.uniform(size=(1, 2))
    g_prev, g_curr = uem.embed(o_prev), uem.embed(o_curr)
    out.append(CheckResult("prediction_loss", grad_check(
        lambda: prediction_loss(uem.f, g_prev, act, inbox, g_curr), uem.f, NETWORK_TOLERANCE)))
    x = rng.normal(size=(1, 4))
    out.append(CheckResult("reconstruction_loss", grad_check(
        lambda: reconstruction_loss(uem.ae, x), uem.ae, NETWORK_TOLERANCE)))
    return out
