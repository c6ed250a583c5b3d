from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParameterSet


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.0005
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_epsilon: float = 1e-5
    soft_update_tau: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")
        if not 0 < self.soft_update_tau <= 1:
            raise ValueError("soft_update_tau must lie in (0, 1]")


def adam_step(params: ParameterSet, config: OptimizerConfig) -> None:
    """Bias-corrected Adam update of every parameter, then clear gradients.

    Parameters without a gradient are treated as having a zero gradient, so
    their moments still decay.
    """
    params.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1**params.step
    c2 = 1.0 - b2**params.step
    for _, p in params.items():
        g = p.grad if p.grad is not None else 0.0
        p.m *= b1
        p.m += (1.0 - b1) * g
        p.v *= b2
        p.v += (1.0 - b2) * np.square(g)
        p.data -= config.learning_rate * (p.m / c1) / (np.sqrt(p.v / c2) + config.adam_epsilon)
        p.grad = None


def soft_update(target: ParameterSet, online: ParameterSet, tau: float) -> None:
    """target <- (1 - tau) * target + tau * online, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("soft_update: tau must lie in [0, 1]")
    if target.names() != online.names():
        raise ValueError("soft_update: parameter sets have different names")
    for name, t in target.items():
        o = online[name]
        if t.shape != o.shape:
            raise ValueError(f"soft_update: shape mismatch for {name}")
        t.data *= 1.0 - tau
        t.data += tau * o.data
