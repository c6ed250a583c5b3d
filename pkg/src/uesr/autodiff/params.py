"""Named parameter collections with gradient and Adam moment storage."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator, Mapping

import numpy as np

from .tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf tensor carrying its own Adam moment buffers."""

    __slots__ = ("m", "v")

    def __init__(self, data):
        super().__init__(np.array(data, dtype=np.float64, copy=True), requires_grad=True)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)


class ParameterSet:
    """Ordered name -> Parameter map plus the Adam step counter."""

    def __init__(self, params: Mapping[str, np.ndarray] | None = None):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self.step = 0
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Parameter(value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def constants(self) -> dict[str, Tensor]:
        """Gradient-free views sharing storage; forward passes on these record nothing."""
        return {name: Tensor(p.data) for name, p in self._params.items()}

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: (np.zeros_like(p.data) if p.grad is None else p.grad)
            for name, p in self._params.items()
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def copy(self) -> "ParameterSet":
        clone = ParameterSet(self.snapshot())
        for name, p in self._params.items():
            clone[name].m[...] = p.m
            clone[name].v[...] = p.v
        clone.step = self.step
        return clone

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Values, moments and the step counter as flat named arrays."""
        out: dict[str, np.ndarray] = {}
        for name, p in self._params.items():
            out[f"{prefix}{name}"] = p.data.copy()
            out[f"{prefix}{name}@m"] = p.m.copy()
            out[f"{prefix}{name}@v"] = p.v.copy()
        out[f"{prefix}@step"] = np.array(self.step, dtype=np.int64)
        return out

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = "") -> None:
        for name, p in self._params.items():
            value = np.asarray(state[f"{prefix}{name}"])
            if value.shape != p.shape:
                raise ValueError(
                    f"shape mismatch for {prefix}{name}: checkpoint {value.shape}, model {p.shape}"
                )
            p.data[...] = value
            p.m[...] = state[f"{prefix}{name}@m"]
            p.v[...] = state[f"{prefix}{name}@v"]
            p.grad = None
        self.step = int(state[f"{prefix}@step"])


def uniform_fan_in(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def linear_params(
    params: ParameterSet, name: str, n_in: int, n_out: int, rng: np.random.Generator
) -> None:
    params.add(f"{name}.weight", uniform_fan_in(rng, (n_out, n_in), n_in))
    params.add(f"{name}.bias", uniform_fan_in(rng, (n_out,), n_in))


def gru_params(
    params: ParameterSet, name: str, n_in: int, n_hidden: int, rng: np.random.Generator
) -> None:
    for gate in ("z", "r", "n"):
        params.add(f"{name}.W_{gate}", uniform_fan_in(rng, (n_hidden, n_in), n_hidden))
        params.add(f"{name}.U_{gate}", uniform_fan_in(rng, (n_hidden, n_hidden), n_hidden))
        params.add(f"{name}.b_{gate}", uniform_fan_in(rng, (n_hidden,), n_hidden))
