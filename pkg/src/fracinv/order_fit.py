"""Recovery of the fractional order from the short-time behaviour of the trace.

Near ``t = 0`` the trace behaves like ``c0 + c1 t^alpha``.  For fixed alpha
the fit is a weighted linear least-squares problem in ``(c0, c1)``, so the
order is found by scanning a grid of alpha values and refining the best one
with golden-section search on the profiled objective.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ParameterError
from .problem import Trace

__all__ = ["OrderFitResult", "fit_order", "order_window_scan", "geometric_times",
           "write_table1"]

ALPHA_GRID = np.round(np.arange(1, 100) * 0.01, 2)
MIN_SAMPLES = 8


@dataclass(frozen=True)
class OrderFitResult:
    alpha_hat: float
    c0: float
    c1: float
    objective: float
    t0: float
    identifiable: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def geometric_times(t0: float, n: int = 32) -> np.ndarray:
    """Sample instants ``t0 * 2^-k`` for k = n-1..0, increasing."""
    return t0 * 2.0 ** -np.arange(n - 1, -1, -1, dtype=float)


def _weights(t: np.ndarray) -> np.ndarray:
    """Trapezoid weights on the (possibly non-uniform) sample instants."""
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    # the first sample stands in for (0, t_1]
    w[0] += t[0]
    return w


def _profile(alpha, t, h, sw):
    """Weighted least squares for fixed alpha; returns (objective, c0, c1)."""
    basis = np.column_stack([np.ones_like(t), t ** alpha]) * sw[:, None]
    rhs = h * sw
    coef, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
    res = basis @ coef - rhs
    return 0.5 * float(res @ res), float(coef[0]), float(coef[1])


def fit_order(h: Trace, t0: float) -> OrderFitResult:
    """Fit ``c0 + c1 t^alpha`` to the samples of ``h`` in ``(0, t0]``.

    Raises
    ------
    ParameterError
        With fewer than 8 samples in the window or coincident instants.
    """
    sel = (h.times > 0) & (h.times <= t0 * (1 + 1e-12))
    t = h.times[sel]
    y = h.values[sel]
    if t.size < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} samples in (0, {t0}], got {t.size}")
    if np.ptp(t) == 0:
        raise ParameterError("sample instants coincide; normal matrix is singular")
    # rescale time so that the window is (0, 1]; only c1 changes
    tau = t / t0
    sw = np.sqrt(_weights(tau))
    # c0 absorbs any shift, so fit the variation about the weighted mean;
    # this keeps a tiny c1 t^alpha visible next to a large c0
    mean = float(np.sum(sw**2 * y) / np.sum(sw**2))
    y = y - mean
    grid = np.array([_profile(a, tau, y, sw)[0] for a in ALPHA_GRID])
    spread = float(np.sum((sw * y) ** 2))
    flat = spread <= (64 * np.finfo(float).eps * abs(mean)) ** 2 * np.sum(sw**2)
    if flat or grid.max() - grid.min() < 1e-14 * spread:
        return OrderFitResult(float(ALPHA_GRID[np.argmin(grid)]), mean, 0.0, float(grid.min()), t0, False)
    i = int(np.argmin(grid))
    lo = ALPHA_GRID[i - 1] if i > 0 else 0.0
    hi = ALPHA_GRID[i + 1] if i < ALPHA_GRID.size - 1 else 1.0
    best = minimize_scalar(lambda a: _profile(a, tau, y, sw)[0],
                           bounds=(lo, hi), method="bounded", options={"xatol": 5e-7})
    cands = [(grid[i], ALPHA_GRID[i]), (best.fun, best.x)]
    if lo == 0.0 or hi == 1.0:
        cands += [(_profile(e, tau, y, sw)[0], e) for e in (lo, hi)]
    _, alpha = min(cands)
    alpha = float(np.clip(alpha, 0.0, 1.0))
    obj, c0, c1 = _profile(alpha, tau, y, sw)
    return OrderFitResult(alpha, c0 + mean, c1 / t0 ** alpha, obj, t0, True)


def order_window_scan(h_for_window, windows) -> list[OrderFitResult]:
    """One fit per window.

    ``h_for_window`` is either a :class:`Trace` used for every window or a
    callable returning the samples for a given ``t0``.
    """
    windows = list(windows)
    if any(b >= a for a, b in zip(windows, windows[1:])):
        raise ParameterError("windows must be strictly decreasing")
    out = []
    for t0 in windows:
        h = h_for_window(t0) if callable(h_for_window) else h_for_window
        out.append(fit_order(h, t0))
    return out


def write_table1(path, windows, alphas, table) -> None:
    """Write rows = windows, columns = true orders; ``table[i][j]`` is a result or error text."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t0"] + [f"{a:.4f}" for a in alphas])
        for t0, row in zip(windows, table):
            cells = [c if isinstance(c, str) else f"{c.alpha_hat:.4f}" for c in row]
            wr.writerow([f"{t0:.0e}"] + cells)
