"""Rational continuation of the trace from ``[0, T1]`` to ``[T1, T]``.

The greedy AAA iteration comes from :class:`scipy.interpolate.AAA`.  This
module adds the policies needed for extrapolation: a degree cap, detection
of stagnation, removal of spurious poles near the continuation interval by
dropping support points and refitting, and barycentric evaluation that is
exact at the support points.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import AAA

from .errors import NumericalError, ParameterError
from .problem import Trace

__all__ = ["RationalApproximant", "aaa_fit", "eval_rational", "rational_poles",
           "reduced_data"]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DEGREE = 20
POLE_RETRIES = 3


@dataclass(frozen=True, eq=False)
class RationalApproximant:
    """Barycentric rational ``sum w_k f_k / (t - z_k) / sum w_k / (t - z_k)``."""

    support: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    errors: tuple = ()
    stagnated: bool = False
    converged: bool = True
    pole_window: tuple | None = None
    removed_support: tuple = ()

    @property
    def degree(self) -> int:
        return self.support.size - 1

    @property
    def poles(self) -> np.ndarray:
        return rational_poles(self)

    def pole_report(self) -> dict:
        p = self.poles
        report = {"poles_real": p.real.tolist(), "poles_imag": p.imag.tolist()}
        if self.pole_window is not None:
            lo, hi, margin = self.pole_window
            report["window"] = [lo, hi]
            report["in_window"] = int(np.count_nonzero(_near_segment(p, lo, hi, margin)))
        return report

    def __call__(self, t):
        return eval_rational(self, t)

    def to_json(self) -> str:
        return json.dumps({
            "support": self.support.tolist(),
            "values": self.values.tolist(),
            "weights": self.weights.tolist(),
            "degree": self.degree,
            "errors": list(self.errors),
            "stagnated": bool(self.stagnated),
            "converged": bool(self.converged),
            "removed_support": list(self.removed_support),
            "pole_report": self.pole_report(),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RationalApproximant":
        d = json.loads(text)
        win = d["pole_report"].get("window")
        return cls(np.array(d["support"], float), np.array(d["values"], float),
                   np.array(d["weights"], float), tuple(d.get("errors", ())),
                   d.get("stagnated", False), d.get("converged", True),
                   (win[0], win[1], 0.0) if win else None,
                   tuple(d.get("removed_support", ())))


def eval_rational(r: RationalApproximant, t):
    """Evaluate the barycentric form; support points return their stored values.

    Raises
    ------
    NumericalError
        If ``t`` hits a pole (zero denominator).
    """
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    diff = flat[:, None] - r.support[None, :]
    hit = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = r.weights / diff
        num = c @ r.values
        den = c.sum(axis=1)
        out = num / den
    rows, cols = np.nonzero(hit)
    out[rows] = r.values[cols]
    bad = ~np.isfinite(out)
    if np.any(bad):
        raise NumericalError(f"rational approximant has a pole at t={flat[bad][0]!r}")
    return out.reshape(t.shape) if t.ndim else float(out[0])


def rational_poles(r: RationalApproximant) -> np.ndarray:
    """Zeros of the barycentric denominator, from the arrowhead pencil."""
    m = r.support.size
    if m < 2:
        return np.zeros(0, complex)
    E = np.zeros((m + 1, m + 1))
    E[0, 1:] = r.weights
    E[1:, 0] = 1.0
    E[1:, 1:] = np.diag(r.support)
    B = np.eye(m + 1)
    B[0, 0] = 0.0
    ev = sla.eigvals(E, B)
    return ev[np.isfinite(ev)]


def _near_segment(p, lo, hi, margin):
    """Poles over the interval ``[lo, hi]`` within ``margin`` of the real axis."""
    return (p.real >= lo) & (p.real <= hi) & (np.abs(p.imag) <= margin)


def _loewner_weights(z, f, zs, fs):
    """Least-squares barycentric weights for a fixed support set."""
    keep = ~np.isin(z, zs)
    zz, ff = z[keep], f[keep]
    C = 1.0 / (zz[:, None] - zs[None, :])
    A = ff[:, None] * C - C * fs[None, :]
    _, _, vh = np.linalg.svd(A, full_matrices=False)
    return vh[-1].conj()


def aaa_fit(samples: Trace, tol: float = DEFAULT_TOL, max_degree: int = DEFAULT_MAX_DEGREE,
            pole_window: tuple[float, float] | None = None,
            pole_margin: float = 1e-3) -> RationalApproximant:
    """Greedy AAA fit of the samples.

    Parameters
    ----------
    samples : Trace
        Points and values to approximate.
    tol : float
        Target for ``max |f - r|`` relative to ``max |f|``.
    max_degree : int
        Cap on the rational degree (support size minus one).
    pole_window : (lo, hi), optional
        Interval that must be free of poles; poles above it within
        ``pole_margin`` times its length of the real axis trigger removal of the support point with the
        smallest weight and a refit, up to three times.

    Raises
    ------
    ParameterError
        Too few samples for ``max_degree``.
    NumericalError
        Poles remain in ``pole_window`` after the retries.
    """
    z = np.asarray(samples.times, dtype=float)
    f = np.asarray(samples.values, dtype=float)
    if z.size < 2 * max_degree + 2:
        raise ParameterError(f"need at least {2 * max_degree + 2} samples, got {z.size}")
    scale = np.max(np.abs(f))
    if scale == 0 or np.ptp(f) <= tol * scale:
        # constant data: degree zero
        k = int(np.argmax(np.abs(f)))
        return RationalApproximant(z[k:k + 1].copy(), np.array([f[k]]), np.ones(1),
                                   (0.0,), False, True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = AAA(z, f, rtol=tol, max_terms=max_degree + 1, clean_up=False)
    errors = tuple(float(e) / scale for e in np.asarray(fit.errors))
    zs = np.asarray(fit.support_points, dtype=float)
    fs = np.asarray(fit.support_values, dtype=float)
    ws = np.real(np.asarray(fit.weights))
    stagnated = _stagnated(errors)
    r = RationalApproximant(zs, fs, ws, errors, stagnated, errors[-1] <= tol)
    if pole_window is None:
        return r
    lo, hi = pole_window
    margin = pole_margin * (hi - lo)
    removed = []
    for attempt in range(POLE_RETRIES + 1):
        if not np.any(_near_segment(rational_poles(r), lo, hi, margin)):
            break
        if attempt == POLE_RETRIES or r.support.size <= 2:
            raise NumericalError(
                f"spurious poles in [{lo}, {hi}] persist after {POLE_RETRIES} refits")
        k = int(np.argmin(np.abs(r.weights)))
        removed.append(float(r.support[k]))
        keep = np.arange(r.support.size) != k
        zs, fs = r.support[keep], r.values[keep]
        ws = np.real(_loewner_weights(z, f, zs, fs))
        r = RationalApproximant(zs, fs, ws, errors, stagnated, True)
        err = float(np.max(np.abs(eval_rational(r, z) - f))) / scale
        r = RationalApproximant(zs, fs, ws, errors + (err,), stagnated, err <= tol)
    return RationalApproximant(r.support, r.values, r.weights, r.errors, r.stagnated,
                               r.converged, (lo, hi, margin), tuple(removed))


def _stagnated(errors, run: int = 3) -> bool:
    """True when the error failed to decrease for ``run`` consecutive degrees."""
    stall = 0
    for a, b in zip(errors, errors[1:]):
        stall = stall + 1 if b >= a else 0
        if stall >= run:
            return True
    return False


def reduced_data(h: Trace, hr: RationalApproximant, t_split: float) -> Trace:
    """Trace minus its continuation after ``t_split``, exactly zero up to it.

    Raises
    ------
    ParameterError
        If ``h`` has no samples beyond ``t_split``.
    NumericalError
        If the continuation has a pole inside ``[t_split, max(h.times)]``.
    """
    t = h.times
    after = t > t_split * (1 + 1e-12)
    if not np.any(after):
        raise ParameterError("trace must extend beyond the split time")
    lo, hi = t_split, float(t[-1])
    if np.any(_near_segment(rational_poles(hr), lo, hi, 1e-8 * (hi - lo))):
        raise NumericalError(f"continuation has a pole in [{lo}, {hi}]")
    vals = np.zeros_like(h.values)
    vals[after] = h.values[after] - eval_rational(hr, t[after])
    return Trace(t, vals, {"t_split": t_split, "degree": hr.degree})
