"""Sampling heads for discrete action and message-bit channels.

Draws use inverse-CDF sampling with one uniform per row so that the number
of generator calls never depends on the probabilities themselves.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

_NORM_TOL = 1e-9


class Sample(NamedTuple):
    value: np.ndarray
    log_prob: np.ndarray
    entropy: np.ndarray


def _entropy(p: np.ndarray, axis: int = -1) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=axis)


def sample_categorical(probabilities, rng: np.random.Generator) -> Sample:
    """Draw one index per row of ``probabilities`` (shape (K,) or (B, K))."""
    p = np.asarray(probabilities, dtype=np.float64)
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > _NORM_TOL):
        raise ValueError("sample_categorical: probabilities must be non-negative and sum to 1")
    single = p.ndim == 1
    p2 = p[None] if single else p
    u = rng.random(p2.shape[0])
    cdf = np.cumsum(p2, axis=-1)
    idx = (u[:, None] >= cdf[:, :-1]).sum(axis=-1)
    # never land on a zero-probability category through rounding
    while True:
        bad = p2[np.arange(len(idx)), idx] == 0
        if not bad.any():
            break
        idx = np.where(bad, idx - 1, idx)
    logp = np.log(p2[np.arange(len(idx)), idx])
    ent = _entropy(p2)
    if single:
        return Sample(idx[0], logp[0], ent[0])
    return Sample(idx, logp, ent)


def sample_bernoulli(p_vector, rng: np.random.Generator) -> Sample:
    """Draw independent bits with P(bit = 1) = p; log-prob and entropy are per bit."""
    p = np.asarray(p_vector, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("sample_bernoulli: probabilities must lie in [0, 1]")
    u = rng.random(p.shape)
    bits = (u < p).astype(np.int64)
    chosen = np.where(bits == 1, p, 1.0 - p)
    both = np.stack([1.0 - p, p], axis=-1)
    return Sample(bits, np.log(chosen), _entropy(both))
