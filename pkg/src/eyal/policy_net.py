"""Fixed-architecture MLP policies stored as one flat parameter vector.

Layout is layer-major: ``W1`` (row-major, shape ``(fan_out, fan_in)``), ``b1``,
``W2``, ``b2``, ... so that mutation is a single vector addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

PARAM_DTYPE = np.float32


class OutputMode(str, Enum):
    DISCRETE_ARGMAX = "discrete_argmax"
    CONTINUOUS_BOUNDED = "continuous_bounded"


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_dims: tuple[int, ...] = (256, 256)
    output_dim: int = 2
    hidden_activation: str = "tanh"
    output_mode: OutputMode = OutputMode.CONTINUOUS_BOUNDED

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "output_mode", OutputMode(self.output_mode))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden_dims must be a non-empty list of positive integers")
        if self.hidden_activation != "tanh":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for every affine layer, input to output."""
        widths = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(widths[:-1], widths[1:]))


def param_count(arch: Architecture) -> int:
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in arch.layer_dims)


def _check_params(arch: Architecture, params: np.ndarray) -> None:
    n = param_count(arch)
    if params.ndim != 1 or params.shape[0] != n:
        raise ValueError(f"parameter vector has shape {params.shape}, expected ({n},)")


def unflatten(arch: Architecture, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``(W, b)`` views, one pair per layer (no copies)."""
    _check_params(arch, params)
    layers = []
    offset = 0
    for fan_in, fan_out in arch.layer_dims:
        w = params[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def init_params(arch: Architecture, rng: np.random.Generator) -> np.ndarray:
    """Draw weights and biases i.i.d. from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.

    This is the stock PyTorch ``nn.Linear`` default; biases share the weight bound.
    """
    chunks = []
    for fan_in, fan_out in arch.layer_dims:
        bound = 1.0 / math.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out + fan_out))
    return np.concatenate(chunks).astype(PARAM_DTYPE)


def forward_layers(
    layers: Sequence[tuple[np.ndarray, np.ndarray]],
    obs: np.ndarray,
    output_mode: OutputMode,
) -> np.ndarray:
    h = np.asarray(obs, dtype=PARAM_DTYPE)
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = h @ w.T + b
        if i < last or output_mode is OutputMode.CONTINUOUS_BOUNDED:
            h = np.tanh(h)
    return h


def forward(arch: Architecture, params: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Evaluate the network on one observation ``(input_dim,)`` or a batch ``(B, input_dim)``."""
    obs = np.asarray(obs)
    if obs.shape[-1:] != (arch.input_dim,) or obs.ndim > 2:
        raise ValueError(f"observation has shape {obs.shape}, expected (..., {arch.input_dim})")
    return forward_layers(unflatten(arch, params), obs, arch.output_mode)


def select_action(outputs: np.ndarray, mode: OutputMode) -> np.ndarray | int:
    if OutputMode(mode) is OutputMode.DISCRETE_ARGMAX:
        # np.argmax returns the first maximal index, i.e. ties go to the lowest index.
        return int(np.argmax(outputs))
    return outputs


def act(arch: Architecture, params: np.ndarray, obs: np.ndarray, mode: OutputMode | None = None):
    """Deterministic action for a single observation."""
    mode = arch.output_mode if mode is None else OutputMode(mode)
    return select_action(forward(arch, params, obs), mode)


@dataclass
class Policy:
    """An architecture bound to one parameter vector."""

    arch: Architecture
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=PARAM_DTYPE)
        _check_params(self.arch, self.params)

    def __call__(self, obs: np.ndarray):
        return act(self.arch, self.params, obs)
