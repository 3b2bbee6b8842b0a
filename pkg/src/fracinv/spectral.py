"""Eigenfunction expansion of the direct problem and its boundary trace.

The Sturm-Liouville pencil is discretized with piecewise linear elements and
trapezoid (lumped) mass, so that the discrete eigenvectors are orthonormal
in the composite trapezoid inner product and the pencil reduces to a
symmetric tridiagonal matrix.  Truncating the series after ``K`` modes loses
the static part of the slowly converging flux term, so the steady response
is taken from a direct elliptic solve and only the transient part is summed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from . import fem
from .errors import NumericalError, ParameterError
from .mlf import mittag_leffler
from .problem import Excitation, ProblemSetup, SpaceGrid, Trace

__all__ = [
    "EigenDecomposition",
    "SpectralData",
    "solve_eigen",
    "spectral_coefficients",
    "spectral_trace",
    "DEFAULT_MODES",
]

DEFAULT_MODES = 50
DEFAULT_SUPPORT_TOL = 1e-10
DEFAULT_TRACE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Leading eigenpairs of ``-(a phi')' + q phi = lambda phi``.

    ``phis`` has shape ``(K, m + 1)`` and includes the zero Dirichlet node.
    ``green_at_0`` is the full-spectrum sum of ``phi_n(0)**2 / lambda_n``,
    the Green's function of the elliptic operator at ``x = 0``.
    ``lambda_shift`` holds the corrections added to the raw discrete
    eigenvalues (zero when no correction applies).
    """

    lambdas: np.ndarray
    phis: np.ndarray
    phi_at_0: np.ndarray
    dphi_at_1: np.ndarray
    green_at_0: float
    grid: SpaceGrid
    lambda_shift: np.ndarray = None

    @property
    def k_modes(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Expansion coefficients of the trace for the (u0, f) part.

    ``tail_at_0`` is the part of ``h(0)`` carried by the discarded modes.
    """

    rho0: float
    rhos: np.ndarray
    support: np.ndarray
    tail_at_0: float = 0.0


def solve_eigen(setup: ProblemSetup, grid: SpaceGrid | None = None,
                k_modes: int = DEFAULT_MODES, correct: bool = True) -> EigenDecomposition:
    """First ``k_modes`` eigenpairs, trapezoid-orthonormal with ``phi_n(0) > 0``.

    With ``correct`` and a constant diffusion coefficient, each eigenvalue
    is shifted by the exact discretization error of the potential-free
    problem, ``a0 [(n - 1/2)^2 pi^2 - 4 m^2 sin^2((n - 1/2) pi / 2m)]``.
    This makes constant potentials exact and keeps the error O(h^2)
    uniformly in ``n`` for smooth ones.
    """
    grid = grid or setup.grid
    if grid.m != setup.grid.m:
        raise ParameterError("setup and grid disagree on m")
    if not 1 <= k_modes <= grid.m // 4:
        raise ParameterError(f"k_modes must lie in [1, m/4] = [1, {grid.m // 4}]")
    op = fem.operator(grid, setup.a, setup.q)
    lump = fem.lumped_mass(grid)
    s = 1.0 / np.sqrt(lump)
    d = op.d * s * s
    e = op.e * s[:-1] * s[1:]
    try:
        lam, y = eigh_tridiagonal(d, e, select="i", select_range=(0, k_modes - 1))
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal eigensolver failed for m={grid.m}: {exc}") from exc
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise NumericalError(f"eigenvalues not positive and simple: {lam[:5]}")
    shift = np.zeros(k_modes)
    if correct and np.ptp(setup.a) == 0.0:
        nu = (np.arange(1, k_modes + 1) - 0.5) * np.pi
        shift = setup.a[0] * (nu**2 - (2.0 / grid.h * np.sin(0.5 * nu * grid.h)) ** 2)
    phis = (y * s[:, None]).T
    phis *= np.where(phis[:, 0] < 0, -1.0, 1.0)[:, None]
    phis = fem.extend(phis)
    h = grid.h
    dphi1 = (3.0 * phis[:, -1] - 4.0 * phis[:, -2] + phis[:, -3]) / (2.0 * h)
    e0 = np.zeros(grid.m)
    e0[0] = 1.0
    green0 = float(op.solve(e0)[0])
    lam_c = lam + shift
    p0 = phis[:, 0].copy()
    green0 += float(np.sum(p0**2 * (1.0 / lam_c - 1.0 / lam)))
    for arr in (lam_c, phis, shift):
        arr.setflags(write=False)
    return EigenDecomposition(lam_c, phis, p0, dphi1, green0, grid, shift)


def spectral_coefficients(setup: ProblemSetup, eig: EigenDecomposition,
                          support_tol: float = DEFAULT_SUPPORT_TOL) -> SpectralData:
    """Coefficients ``rho_n = [(u0, phi_n) - (f, phi_n) / lambda_n] phi_n(0)``.

    ``rho0`` is the value at x = 0 of the steady state driven by ``f``,
    computed by an elliptic solve rather than a truncated sum.
    """
    grid = eig.grid
    if setup.grid.m != grid.m:
        raise ParameterError("setup and eigendecomposition disagree on m")
    wts = grid.trapezoid_weights()
    u0c = eig.phis @ (wts * setup.u0)
    fc = eig.phis @ (wts * setup.f)
    rhos = (u0c - fc / eig.lambdas) * eig.phi_at_0
    op = fem.operator(grid, setup.a, setup.q)
    rho0 = 0.0
    if np.any(setup.f):
        # full discrete steady state, with the retained modes re-weighted by
        # the corrected eigenvalues
        rho0 = float(op.solve(fem.lumped_mass(grid) * setup.f[:-1])[0])
        raw = eig.lambdas - eig.lambda_shift
        rho0 += float(np.sum(fc * eig.phi_at_0 * (1.0 / eig.lambdas - 1.0 / raw)))
    scale = np.max(np.abs(rhos)) if rhos.size else 0.0
    support = np.flatnonzero(np.abs(rhos) > support_tol * scale) if scale > 0 else np.zeros(0, int)
    tail0 = float(setup.u0[0] - rho0 - rhos.sum())
    rhos.setflags(write=False)
    return SpectralData(rho0, rhos, support, tail0)


def _flux_tail(eig: EigenDecomposition, alpha: float, s: np.ndarray) -> np.ndarray:
    """Bound on the discarded modes of the step response, Weyl-type growth assumed."""
    k = eig.k_modes
    c = eig.phi_at_0[-1] ** 2
    kappa = eig.lambdas[-1] / (k - 0.5) ** 2
    b = np.sqrt(kappa * np.maximum(s, 0.0) ** alpha / math.gamma(1.0 + alpha))
    return (c / kappa) * (1.0 / k - b * (0.5 * np.pi - np.arctan(b * k)))


def _step_part(eig, alpha, s):
    """Response to a unit flux switched on at s = 0, for lags ``s``."""
    out = np.zeros_like(s)
    on = s > 0
    if not np.any(on):
        return out
    w = eig.phi_at_0 ** 2 / eig.lambdas
    ml = mittag_leffler(-np.outer(eig.lambdas, s[on] ** alpha), alpha, 1.0)
    out[on] = eig.green_at_0 - w @ ml
    return out


def _ramp_part(eig, alpha, s):
    """Response to a unit-slope flux ramp starting at s = 0."""
    out = np.zeros_like(s)
    on = s > 0
    if not np.any(on):
        return out
    w = eig.phi_at_0 ** 2 / eig.lambdas
    lag = s[on]
    ml = mittag_leffler(-np.outer(eig.lambdas, lag ** alpha), alpha, 2.0)
    out[on] = eig.green_at_0 * lag - w @ (ml * lag)
    return out


def _sampled_part(eig, alpha, g: Excitation, t):
    ts = np.asarray(g.times)
    vs = np.asarray(g.values)
    slopes = np.diff(vs) / np.diff(ts)
    kinks = np.diff(np.concatenate([[0.0], slopes, [0.0]]))
    # lattice-aligned lags repeat, so evaluate each distinct lag once
    lags = np.round(t[:, None] - ts[None, :], 13)
    uniq, inv = np.unique(lags, return_inverse=True)
    ramp = _ramp_part(eig, alpha, uniq)[inv].reshape(lags.shape)
    return vs[0] * _step_part(eig, alpha, t - ts[0]) + ramp @ kinks


def spectral_trace(setup: ProblemSetup, eig: EigenDecomposition, sd: SpectralData,
                   times, trace_tol: float = DEFAULT_TRACE_TOL) -> Trace:
    """Boundary trace ``h(t) = u(0, t)`` from the truncated eigen-expansion.

    The returned metadata holds ``tail_max``, a bound on the contribution of
    the discarded modes, and ``truncated`` when it exceeds ``trace_tol``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(t < 0):
        raise ParameterError("times must be a 1-D array of non-negative instants")
    alpha = setup.alpha
    h = np.full(t.shape, sd.rho0)
    if sd.support.size:
        lam = eig.lambdas[sd.support]
        h += sd.rhos[sd.support] @ mittag_leffler(-np.outer(lam, t ** alpha), alpha, 1.0)

    lam_next = eig.lambdas[-1] * ((eig.k_modes + 0.5) / (eig.k_modes - 0.5)) ** 2
    with np.errstate(divide="ignore"):
        decay = np.minimum(1.0, 1.0 / (lam_next * t ** alpha * math.gamma(1.0 - alpha)))
    tail = abs(sd.tail_at_0) * decay

    g = setup.g
    if g.kind == "step":
        h += g.amplitude * _step_part(eig, alpha, t - g.t_on)
        s = t - g.t_on
        tail = tail + np.where(s > 0, abs(g.amplitude) * _flux_tail(eig, alpha, s), 0.0)
    elif g.kind == "samples":
        h += _sampled_part(eig, alpha, g, t)
        s = t - g.times[0]
        gmax = float(np.max(np.abs(g.values)))
        tail = tail + np.where(s > 0, gmax * _flux_tail(eig, alpha, s), 0.0)

    tail_max = float(tail.max()) if tail.size else 0.0
    meta = {"tail_max": tail_max, "truncated": tail_max > trace_tol, "k_modes": eig.k_modes}
    return Trace(t, h, meta)
