"""Two-parameter Mittag-Leffler function and the time kernels built from it.

The evaluation splits the argument range into three regimes:

* a truncated power series near the origin,
* the Hankel-contour representation collapsed onto the negative real axis
  (Gorenflo-Mainardi form) for moderate arguments, integrated with the
  trapezoidal rule after the substitution ``r = exp(s / alpha)``,
* the algebraic asymptotic expansion for large arguments away from the
  positive real axis.

All routines are vectorised over the argument and return arrays with the
broadcast shape of their inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DomainError, ParameterError

__all__ = [
    "MlfParams",
    "mittag_leffler",
    "eval_mlf",
    "kernel_e",
    "step_response",
]

SERIES_MAX_TERMS = 250
ASYMPTOTIC_RADIUS = 25.0
ASYMPTOTIC_MAX_TERMS = 80
_EPS = 1e-17
# trapezoid nodes per chunk row block, keeps temporaries around 32 MB
_CHUNK = 4_000_000


@dataclass(frozen=True)
class MlfParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.alpha >= 2.0:
            raise ParameterError("alpha >= 2 is not supported")
        if not math.isfinite(self.beta):
            raise ParameterError(f"beta must be finite, got {self.beta}")


def _series_radius(alpha):
    # keeps sum |terms| / |E(z)| below ~1e3 on the negative axis
    return min(5.0, 4.0 ** alpha)


def _series(z, alpha, beta):
    z = np.asarray(z)
    out = np.zeros(z.shape, dtype=np.result_type(z, float))
    if z.size == 0:
        return out
    k = np.arange(SERIES_MAX_TERMS)
    # past their peak the terms |z|^k / Gamma(alpha k + beta) fall off faster
    # than geometrically; cut once the largest argument's term is negligible
    rmax = float(np.max(np.abs(z)))
    with np.errstate(divide="ignore"):
        logt = k * math.log(rmax) - gammaln(alpha * k + beta) if rmax > 0 else np.where(k == 0, 0.0, -np.inf)
    past = (np.arange(k.size) > np.argmax(logt)) & (logt < math.log(_EPS) - 16.0)
    n = int(np.argmax(past)) + 1 if np.any(past) else k.size
    coef = rgamma(alpha * k[:n] + beta)
    total = np.full(z.shape, coef[-1], dtype=out.dtype)
    for c in coef[-2::-1]:
        total = total * z + c
    out[...] = total
    return out


def _asymptotic(z, alpha, beta):
    """-sum_k z^-k / Gamma(beta - alpha k), cut at the smallest term."""
    z = np.asarray(z)
    k = np.arange(1, ASYMPTOTIC_MAX_TERMS + 1)[:, None]
    logabs = np.log(np.abs(z))[None, :]
    # envelope |Gamma(1 - beta + alpha k)| / (pi |z|^k) ignores the sine zeros
    env = np.exp(gammaln(1.0 - beta + alpha * k) - k * logabs)
    rising = np.zeros_like(env, dtype=bool)
    rising[1:] = env[1:] > env[:-1]
    # the envelope is meaningless while 1 - beta + alpha k sits near the poles
    rising &= alpha * k > beta + 1.0
    stop = np.cumsum(rising, axis=0) > 0
    n_terms = int(np.max(np.argmax(stop, axis=0) + (~stop[-1]) * stop.shape[0]))
    n_terms = max(n_terms, 1)
    k, stop = k[:n_terms], stop[:n_terms]
    coef = rgamma(beta - alpha * k)
    if np.iscomplexobj(z):
        terms = -coef * np.exp(-k * np.log(z)[None, :])
    else:
        # real z: z^-k = sign^k |z|^-k
        sign = np.where(z < 0, -1.0, 1.0)[None, :]
        terms = -coef * sign ** k * np.exp(-k * logabs)
    return np.where(stop, 0.0, terms).sum(axis=0)


def _hankel_real(x, alpha, beta):
    """E(-x) for real x != 0 and 0 < alpha < 1, beta <= 1 (no residue)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return np.zeros(0)
    pos = x > 0  # negative argument z = -x
    out = np.empty_like(x)
    for mask, dpole in ((pos, math.pi * (1.0 - alpha)), (~pos, math.pi * alpha)):
        if not np.any(mask):
            continue
        xs = x[mask]
        out[mask] = _hankel_real_group(xs, alpha, beta, dpole)
    neg = ~pos
    if np.any(neg):
        # positive argument: add the residue of the principal pole
        zp = -x[neg]
        out[neg] += (1.0 / alpha) * zp ** ((1.0 - beta) / alpha) * np.exp(zp ** (1.0 / alpha))
    return out


def _hankel_real_group(x, alpha, beta, dpole):
    d = 0.75 * min(dpole, 0.5 * math.pi * alpha)
    h = 2.0 * math.pi * d / 40.0
    p = (1.0 + alpha - beta) / alpha
    xmax = float(np.max(np.abs(x)))
    xmin = float(np.min(np.abs(x)))
    s_lo = (math.log(_EPS) - math.log1p(xmax) + min(0.0, math.log(xmin)) - 5.0) / p
    s_hi = alpha * math.log(50.0)
    s = np.arange(s_lo, s_hi + h, h)
    u = np.exp(s)
    r = u ** (1.0 / alpha)
    weight = np.exp(-r) * u ** p  # includes du = u ds and the r^(alpha-beta) dr factor
    sb = math.sin(math.pi * beta)
    sab = math.sin(math.pi * (alpha - beta))
    ca = math.cos(math.pi * alpha)
    out = np.empty_like(x)
    step = max(1, _CHUNK // s.size)
    for i in range(0, x.size, step):
        xi = x[i : i + step, None]
        num = u * sb - xi * sab
        den = u * u + 2.0 * xi * u * ca + xi * xi
        out[i : i + step] = (weight * num / den).sum(axis=1)
    return out * h / (alpha * math.pi)


def _hankel_complex(z, alpha, beta):
    """General complex z, 0 < alpha < 1, beta <= 1, |arg z| != alpha pi."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    argz = np.angle(z)
    for i, zi in enumerate(z):
        a = argz[i]
        dists = []
        for sgn in (1.0, -1.0):
            im = a - sgn * math.pi * alpha
            im = (im + math.pi) % (2.0 * math.pi) - math.pi
            dists.append(abs(im))
        d = 0.75 * min(min(dists), 0.5 * math.pi * alpha)
        d = max(d, 1e-3)
        h = 2.0 * math.pi * d / 40.0
        p = (1.0 + alpha - beta) / alpha
        az = abs(zi)
        s_lo = (math.log(_EPS) - math.log1p(az) + min(0.0, math.log(az)) - 5.0) / p
        s = np.arange(s_lo, alpha * math.log(50.0) + h, h)
        u = np.exp(s)
        x = -zi
        e1 = np.exp(1j * math.pi * (alpha - beta + 1.0))
        e2 = np.exp(1j * math.pi * alpha)
        g = e1 / (u * e2 + x) - np.conj(e1) / (u * np.conj(e2) + x)
        val = (np.exp(-(u ** (1.0 / alpha))) * u ** p * g).sum() * h / (2j * math.pi * alpha)
        if abs(a) < math.pi * alpha:
            val += (1.0 / alpha) * zi ** ((1.0 - beta) / alpha) * np.exp(zi ** (1.0 / alpha))
        out[i] = val
    return out


def _alpha_one(z, beta):
    m = int(round(beta))
    if abs(beta - m) > 0 or m < 1:
        raise ParameterError("alpha = 1 is supported for positive integer beta only")
    z = np.asarray(z)
    out = np.exp(z)
    fact = 1.0
    zk = np.ones_like(z)
    for k in range(m - 1):
        out = out - zk / fact
        zk = zk * z
        fact *= k + 1
    return out / z ** (m - 1)


def _reduce_beta(z, alpha, beta, evaluate):
    """Evaluate via E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z until b <= 1."""
    if beta <= 1.0:
        return evaluate(z, beta)
    inner = _reduce_beta(z, alpha, beta - alpha, evaluate)
    return (inner - rgamma(beta - alpha)) / z


def mittag_leffler(z, alpha, beta=1.0):
    """Evaluate the two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)``.

    Parameters
    ----------
    z : array_like
        Real or complex argument(s). Accuracy is certified on the real axis.
    alpha : float
        Order, ``0 < alpha <= 1`` over the full range; ``1 < alpha < 2``
        only inside the series disc.
    beta : float
        Second parameter.

    Returns
    -------
    ndarray or scalar
        Same shape as ``z``; real when ``z`` is real.
    """
    params = MlfParams(float(alpha), float(beta))
    alpha, beta = params.alpha, params.beta
    zin = np.asarray(z)
    if zin.dtype.kind not in "fciub":
        raise DomainError("argument must be numeric")
    if not np.all(np.isfinite(zin)):
        raise DomainError("argument must be finite")
    is_complex = np.iscomplexobj(zin)
    zf = zin.astype(complex if is_complex else float).ravel()
    out = np.empty(zf.shape, dtype=zf.dtype)
    az = np.abs(zf)

    small = az <= _series_radius(alpha)
    out[small] = _series(zf[small], alpha, beta)
    rest = ~small
    if np.any(rest):
        zr = zf[rest]
        if alpha == 1.0:
            out[rest] = _alpha_one(zr, beta)
        elif alpha > 1.0:
            raise ParameterError("alpha > 1 is supported only for |z| inside the series disc")
        else:
            out[rest] = _large(zr, alpha, beta, is_complex)
    out = out.reshape(zin.shape)
    return out[()] if out.ndim == 0 else out


def _large(z, alpha, beta, is_complex):
    out = np.empty(z.shape, dtype=z.dtype)
    az = np.abs(z)
    argz = np.abs(np.angle(z))
    asym = (
        (az >= ASYMPTOTIC_RADIUS)
        & (az >= 48.0 ** alpha)
        & (argz > alpha * math.pi + 0.5 * (math.pi - alpha * math.pi))
    )
    if np.any(asym):
        out[asym] = _asymptotic(z[asym], alpha, beta)
    mid = ~asym
    if np.any(mid):
        zm = z[mid]
        if is_complex and np.any(zm.imag != 0):
            vals = _reduce_beta(zm, alpha, beta, lambda zz, b: _hankel_complex(zz, alpha, b))
        else:
            zr = zm.real
            vals = _reduce_beta(zr, alpha, beta, lambda zz, b: _hankel_real(-zz, alpha, b))
        out[mid] = vals
    return out


def eval_mlf(params: MlfParams, z):
    """``E_{alpha,beta}(z)`` for a parameter record; thin wrapper."""
    return mittag_leffler(z, params.alpha, params.beta)


def kernel_e(alpha, lam, t):
    """Duhamel kernel ``t^(alpha-1) E_{alpha,alpha}(-lam t^alpha)`` for ``t > 0``."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(t <= 0):
        raise DomainError("kernel_e is singular at t <= 0")
    if np.any(lam < 0):
        raise ParameterError("lam must be non-negative")
    ta = t ** alpha
    out = t ** (alpha - 1.0) * mittag_leffler(-lam * ta, alpha, alpha)
    return out[()] if np.ndim(out) == 0 else out


def step_response(alpha, lam, t, t_on=0.0):
    """Response ``(1 - E_{alpha,1}(-lam s^alpha)) / lam`` to a unit step at ``t_on``.

    Written as ``s^alpha E_{alpha,1+alpha}(-lam s^alpha)`` with ``s = t - t_on``,
    which avoids the cancellation in ``1 - E`` for small ``lam s^alpha``.
    Zero for ``t <= t_on``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ParameterError("lam must be positive")
    if t_on < 0:
        raise ParameterError("t_on must be non-negative")
    t = np.asarray(t, dtype=float)
    s = np.broadcast_to(t - t_on, np.broadcast_shapes(t.shape, lam.shape))
    lam_b = np.broadcast_to(lam, s.shape)
    out = np.zeros(s.shape)
    on = s > 0
    if np.any(on):
        sa = s[on] ** alpha
        out[on] = sa * mittag_leffler(-lam_b[on] * sa, alpha, 1.0 + alpha)
    return out[()] if out.ndim == 0 else out
