"""Network building blocks expressed as compositions of tensor ops."""

from __future__ import annotations

from typing import Mapping

from .tensor import Tensor, linear, mul, relu, sigmoid, sub, tanh

Params = Mapping[str, Tensor]


def dense(params: Params, name: str, x: Tensor) -> Tensor:
    return linear(x, params[f"{name}.weight"], params[f"{name}.bias"])


def gru_step(params: Params, name: str, x: Tensor, h: Tensor) -> Tensor:
    """One GRU transition.

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    n = tanh(W_n x + U_n (r * h) + b_n)
    h' = (1 - z) * n + z * h
    """
    p = lambda key: params[f"{name}.{key}"]  # noqa: E731
    hidden = p("U_z").shape[0]
    if h.shape[-1] != hidden:
        raise ValueError(f"gru_step: hidden has size {h.shape[-1]}, expected {hidden}")
    z = sigmoid(linear(x, p("W_z"), p("b_z")) + linear(h, p("U_z")))
    r = sigmoid(linear(x, p("W_r"), p("b_r")) + linear(h, p("U_r")))
    n = tanh(linear(x, p("W_n"), p("b_n")) + linear(mul(r, h), p("U_n")))
    return mul(sub(1.0, z), n) + mul(z, h)


def mlp_relu(params: Params, names: list[str], x: Tensor) -> Tensor:
    for name in names:
        x = relu(dense(params, name, x))
    return x
