from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import ParameterSet
from .tensor import Tensor

# Elements whose analytic and numeric derivatives are both below this are
# compared in absolute terms; dividing by ~0 says nothing about correctness.
DENOMINATOR_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_relative_error: float
    tolerance: float
    worst_parameter: str = ""
    worst_index: tuple = ()
    per_parameter: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} max_rel_err={self.max_relative_error:.3e} "
            f"(tol {self.tolerance:.0e}) at {self.worst_parameter}{list(self.worst_index)}"
        )


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
    return np.abs(analytic - numeric) / denom


def grad_check(
    function: Callable[[], Tensor],
    params: ParameterSet,
    tolerance: float = 1e-5,
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare backprop gradients of a scalar ``function`` with central differences.

    ``function`` must rebuild its graph from ``params`` on every call.
    """
    params.zero_grad()
    loss = function()
    loss.backward()
    analytic = {name: g.copy() for name, g in params.grads().items()}
    params.zero_grad()

    report = GradCheckReport(0.0, tolerance)
    for name, p in params.items():
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = function().item()
            flat[i] = orig - step
            minus = function().item()
            flat[i] = orig
            numeric.reshape(-1)[i] = (plus - minus) / (2 * step)
        err = relative_error(analytic[name], numeric)
        worst = float(err.max()) if err.size else 0.0
        report.per_parameter[name] = worst
        if worst > report.max_relative_error:
            report.max_relative_error = worst
            report.worst_parameter = name
            report.worst_index = tuple(int(i) for i in np.unravel_index(int(err.argmax()), err.shape))
    params.zero_grad()
    return report
