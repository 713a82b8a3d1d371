"""Subdivisions of [0, 1] and their control-volume geometry."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid mesh or solver settings."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Nodes 0 = x_0 < ... < x_N = 1 with face midpoints and control volumes.

    Control volume i is [x_{i-1/2}, x_{i+1/2}] with the sentinels
    x_{-1/2} = 0 and x_{N+1/2} = 1.
    """

    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        if x.ndim != 1 or x.size < 5:
            raise ConfigurationError("a mesh needs N >= 4 intervals")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ConfigurationError("mesh must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("mesh nodes must be strictly increasing")

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Face positions x_{i+1/2}, i = 0..N-1."""
        return self.nodes[:-1] + 0.5 * self.steps

    @cached_property
    def volumes(self) -> np.ndarray:
        """Control-volume lengths l_i, i = 0..N."""
        edges = np.concatenate(([0.0], self.midpoints, [1.0]))
        return np.diff(edges)

    def __len__(self):
        return self.nodes.size


def uniform(N: int) -> Mesh:
    if N < 4:
        raise ConfigurationError("N must be at least 4")
    x = np.arange(N + 1) / N
    return Mesh(x)


def power_graded(N: int, p: float = 2.0) -> Mesh:
    """Symmetric mesh refined polynomially towards both ends.

    On the left half the steps are h_i = (i+1)^p / (2 sum_{k=1}^{N/2} k^p),
    i = 0..N/2-1; the right half is the mirror image.  Node N/2 is exactly
    0.5 and x_{N-i} = 1 - x_i.
    """
    if N < 4 or N % 2:
        raise ConfigurationError("power-graded mesh needs an even N >= 4")
    if p < 1:
        raise ConfigurationError("grading exponent p must be >= 1")
    half = N // 2
    k = np.arange(1, half + 1, dtype=float) ** p
    left = np.concatenate(([0.0], np.cumsum(k) / (2.0 * k.sum())))
    left[-1] = 0.5
    x = np.concatenate((left, 1.0 - left[-2::-1]))
    return Mesh(x)
