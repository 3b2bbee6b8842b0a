"""Fully discrete solvers: P1 Galerkin in space, backward Euler CQ in time.

The Caputo derivative is discretized in shifted-history form
``dt^-alpha * sum_k w_k (u_{j-k} - u_0)`` with the weights of
``(1 - zeta)^alpha``.  Every solver in this module reduces to the same
block lower-triangular Toeplitz system in the increments ``D_j = u_j - u_0``,

    dt^-alpha M sum_{k=0}^{j} w_k D_{j-k} + S D_j = B_j,

where ``M`` is the consistent mass matrix and ``S`` the stiffness matrix
plus the lumped potential.  The adjoint is its exact transpose, obtained by
marching the same system with time-reversed loads, so the discrete gradients
below are exact derivatives of the discrete objectives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .backend import march
from .errors import NumericalError, ParameterError
from .problem import FieldHistory, ProblemSetup, SpaceGrid, TimeGrid, Trace

__all__ = [
    "CqWeights",
    "cq_weights",
    "CqOperator",
    "solve_forward",
    "solve_sensitivity",
    "solve_adjoint",
    "gradient_q",
    "gradient_u0",
    "initial_response",
    "window_weights",
]


@dataclass(frozen=True, eq=False)
class CqWeights:
    """Coefficients ``w_0..w_n`` of ``(1 - zeta)^alpha``."""

    alpha: float
    w: np.ndarray

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.w)


def cq_weights(alpha: float, n: int) -> CqWeights:
    """Backward Euler CQ weights by the recurrence ``w_j = w_{j-1} (j - 1 - alpha) / j``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    if n < 0:
        raise ParameterError("n must be non-negative")
    w = np.empty(n + 1)
    w[0] = 1.0
    if n:
        j = np.arange(1, n + 1)
        w[1:] = np.cumprod((j - 1 - alpha) / j)
    w.setflags(write=False)
    return CqWeights(alpha, w)


class CqOperator:
    """Time-stepping system for fixed grid, coefficients, order and step.

    Parameters
    ----------
    grid : SpaceGrid
    a, q : ndarray
        Nodal diffusion coefficient and potential.
    alpha : float
    tg : TimeGrid
    """

    def __init__(self, grid: SpaceGrid, a, q, alpha: float, tg: TimeGrid):
        a = np.asarray(a, dtype=float)
        q = np.asarray(q, dtype=float)
        if a.size != grid.m + 1 or q.size != grid.m + 1:
            raise ParameterError("coefficients do not match the space grid")
        self.grid = grid
        self.tg = tg
        self.alpha = alpha
        self.weights = cq_weights(alpha, tg.n_steps + 1)
        self.cw = tg.dt ** (-alpha)
        self.M = fem.mass(grid)
        self.S = fem.operator(grid, a, q)
        self.A = self.M.scaled(self.cw) + self.S
        self.lump = fem.lumped_mass(grid)

    def run(self, loads: np.ndarray) -> np.ndarray:
        """Increments ``D_0..D_N`` (``D_0 = 0``) for loads ``B_1..B_N`` given row-wise."""
        loads = np.ascontiguousarray(loads, dtype=float)
        if loads.ndim != 2 or loads.shape[1] != self.grid.m:
            raise ParameterError("loads must have shape (steps, m)")
        out = march(self.weights.w, self.cw, self.M.d, self.M.e, self.A.d, self.A.e, loads)
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite values in time march")
        return np.asarray(out)

    def forward_loads(self, u0, f, g_values) -> np.ndarray:
        base = self.M.matvec(fem.restrict(f)) - self.S.matvec(fem.restrict(u0))
        loads = np.broadcast_to(base, (g_values.size, self.grid.m)).copy()
        loads[:, 0] += g_values
        return loads

    def solve(self, u0, f, g_values) -> np.ndarray:
        """Nodal history ``(N + 1, m + 1)`` including the Dirichlet node."""
        loads = self.forward_loads(u0, f, g_values)
        return fem.extend(fem.restrict(u0) + self.run(loads))

    def sensitivity_trace(self, u: np.ndarray, delta_q) -> np.ndarray:
        """Trace of the derivative of the forward map in the potential."""
        dq = fem.restrict(np.asarray(delta_q, dtype=float))
        loads = -(self.lump * dq) * fem.restrict(u[1:])
        return self.run(loads)[:, 0]

    def adjoint(self, residual: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Adjoint states ``V_0..V_n`` for the trace functional ``sum_j c_j r_j F_j``.

        ``residual`` and ``weights`` cover the levels ``0..n``; the level
        ``0`` entry is unused because the trace at t = 0 is fixed by u0.
        """
        n = residual.size - 1
        loads = np.zeros((n + 1, self.grid.m))
        # reversed step s corresponds to forward level n + 1 - s
        loads[:n, 0] = (weights[1:] * residual[1:])[::-1] / self.tg.dt
        rev = self.run(loads)
        return fem.extend(rev[::-1][:n + 1])


def _check(setup: ProblemSetup, grid: SpaceGrid | None) -> SpaceGrid:
    grid = grid or setup.grid
    if grid.m != setup.grid.m:
        raise ParameterError("setup and grid disagree on m")
    return grid


def _operator(setup, grid, tg):
    return CqOperator(grid, setup.a, setup.q, setup.alpha, tg)


def solve_forward(setup: ProblemSetup, grid: SpaceGrid | None, tg: TimeGrid) -> FieldHistory:
    """Nodal solution history of the direct problem."""
    grid = _check(setup, grid)
    op = _operator(setup, grid, tg)
    return FieldHistory(tg.times, op.solve(setup.u0, setup.f, setup.g.step_loads(tg)))


def initial_response(setup: ProblemSetup, grid: SpaceGrid | None, tg: TimeGrid, d) -> Trace:
    """Trace generated by initial data ``d`` alone (zero source and flux)."""
    grid = _check(setup, grid)
    d = np.asarray(d, dtype=float)
    op = _operator(setup, grid, tg)
    vals = op.solve(d, np.zeros_like(d), np.zeros(tg.n_steps))[:, 0]
    return Trace(tg.times, vals)


def solve_sensitivity(setup: ProblemSetup, grid: SpaceGrid | None, tg: TimeGrid,
                      u: FieldHistory, delta_q) -> Trace:
    """Trace of the directional derivative of the forward map along ``delta_q``."""
    grid = _check(setup, grid)
    delta_q = np.asarray(delta_q, dtype=float)
    if delta_q.shape != (grid.m + 1,):
        raise ParameterError("delta_q must be a nodal array on the grid")
    if u.values.shape != (tg.n_steps + 1, grid.m + 1):
        raise ParameterError("field history does not match the grids")
    op = _operator(setup, grid, tg)
    return Trace(tg.times, op.sensitivity_trace(u.values, delta_q))


def window_weights(tg: TimeGrid, lo: float, hi: float, include_lo: bool = True) -> np.ndarray:
    """Composite trapezoid weights on the time levels of ``[lo, hi]``.

    With ``include_lo=False`` the left endpoint gets weight zero, which keeps
    the instant ``t = lo`` out of the objective.
    """
    j0, j1 = tg.index(lo), tg.index(hi)
    c = np.zeros(tg.n_steps + 1)
    if j1 > j0:
        c[j0:j1 + 1] = tg.dt
        c[j0] = c[j1] = 0.5 * tg.dt
        if not include_lo:
            c[j0] = 0.0
    return c


def solve_adjoint(setup: ProblemSetup, grid: SpaceGrid | None, tg: TimeGrid,
                  residual: Trace, t_end: float, weights=None) -> FieldHistory:
    """Adjoint history on ``[0, t_end]`` for the boundary misfit ``residual``.

    The right-sided problem is marched backwards from ``t_end`` with the
    misfit applied as a Neumann load at x = 0, weighted by the objective's
    time quadrature ``weights`` (trapezoid on ``[0, t_end]`` by default).
    """
    grid = _check(setup, grid)
    n = tg.index(t_end)
    r = np.asarray(residual.values, dtype=float)
    if r.size < n + 1:
        raise ParameterError("residual must be sampled on the time grid up to t_end")
    r = r[:n + 1]
    c = window_weights(tg, 0.0, t_end) if weights is None else np.asarray(weights, float)[:n + 1]
    op = _operator(setup, grid, tg)
    return FieldHistory(tg.times[:n + 1], op.adjoint(r, c))


def gradient_q(u: FieldHistory, v: FieldHistory, tg: TimeGrid) -> np.ndarray:
    """Nodal gradient ``-sum_j dt u_j v_j`` of the potential misfit.

    It represents the derivative in the trapezoid inner product on the grid.
    The time sum runs over the backward Euler levels ``1..n``; the objective's
    quadrature weights already sit in the adjoint load.
    """
    n = v.values.shape[0] - 1
    if u.values.shape[1] != v.values.shape[1] or u.values.shape[0] < n + 1:
        raise ParameterError("forward and adjoint histories live on different grids")
    return -tg.dt * np.einsum("ji,ji->i", u.values[1:n + 1], v.values[1:n + 1])


def gradient_u0(w: FieldHistory, alpha: float, tg: TimeGrid) -> np.ndarray:
    """Nodal gradient of the initial-value misfit in the L2 inner product.

    Discrete fractional integral of order ``1 - alpha`` of the adjoint at
    t = 0, ``dt^(1-alpha) sum_j P_{j-1} w_j`` with ``P`` the partial sums of
    the CQ weights.
    """
    n = w.values.shape[0] - 1
    psum = cq_weights(alpha, n).partial_sums[:n]
    return tg.dt ** (1.0 - alpha) * (psum @ w.values[1:n + 1])
