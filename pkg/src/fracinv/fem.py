"""Piecewise linear finite element matrices on a uniform grid.

Unknowns are the nodes ``0..m-1``; node ``m`` carries the homogeneous
Dirichlet condition and is eliminated.  All matrices are symmetric
tridiagonal and stored as ``(diag, off)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .problem import SpaceGrid


@dataclass(frozen=True, eq=False)
class Tridiag:
    """Symmetric tridiagonal matrix with main diagonal ``d`` and off-diagonal ``e``."""

    d: np.ndarray
    e: np.ndarray

    @property
    def n(self) -> int:
        return self.d.size

    def __add__(self, other: "Tridiag") -> "Tridiag":
        return Tridiag(self.d + other.d, self.e + other.e)

    def scaled(self, c: float) -> "Tridiag":
        return Tridiag(c * self.d, c * self.e)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Apply to ``x`` along its last axis."""
        y = self.d * x
        y[..., :-1] += self.e * x[..., 1:]
        y[..., 1:] += self.e * x[..., :-1]
        return y

    def dense(self) -> np.ndarray:
        return np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve with an SPD matrix; ``b`` may hold several right-hand sides as columns."""
        ab = np.zeros((2, self.n))
        ab[0, 1:] = self.e
        ab[1] = self.d
        return solveh_banded(ab, b)


def element_average(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:-1] + values[1:])


def stiffness(grid: SpaceGrid, a: np.ndarray) -> Tridiag:
    """Matrix of ``int a u' v'`` with ``a`` averaged over each element."""
    ae = element_average(np.asarray(a, dtype=float)) / grid.h
    d = np.zeros(grid.m + 1)
    d[:-1] += ae
    d[1:] += ae
    return Tridiag(d[:-1], -ae[:-1])


def mass(grid: SpaceGrid) -> Tridiag:
    """Consistent mass matrix."""
    h = grid.h
    d = np.full(grid.m, 2.0 * h / 3.0)
    d[0] = h / 3.0
    return Tridiag(d, np.full(grid.m - 1, h / 6.0))


def lumped_mass(grid: SpaceGrid) -> np.ndarray:
    """Trapezoid (row-sum) mass on the free nodes."""
    return grid.trapezoid_weights()[:-1]


def potential(grid: SpaceGrid, q: np.ndarray) -> Tridiag:
    """Lumped matrix of ``int q u v``."""
    m = grid.m
    return Tridiag(lumped_mass(grid) * np.asarray(q, dtype=float)[:m], np.zeros(m - 1))


def operator(grid: SpaceGrid, a: np.ndarray, q: np.ndarray) -> Tridiag:
    """Elliptic part ``-(a u')' + q u`` with the lumped potential."""
    return stiffness(grid, a) + potential(grid, q)


def restrict(values: np.ndarray) -> np.ndarray:
    """Drop the Dirichlet node."""
    return np.asarray(values)[..., :-1]


def extend(values: np.ndarray) -> np.ndarray:
    """Append the zero Dirichlet node."""
    values = np.asarray(values)
    pad = [(0, 0)] * (values.ndim - 1) + [(0, 1)]
    return np.pad(values, pad)
