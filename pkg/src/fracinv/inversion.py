"""Conjugate gradient recovery of the potential and of the initial data.

Both problems minimize half the squared L2 misfit of the boundary trace
over a time window.  Gradients come from the exact discrete adjoint in
:mod:`fracinv.fem_cq`, so the iterations are descent methods for the
discrete objectives.  The potential is found by nonlinear CG with the
linearized exact step and projection onto ``q >= 0``; the initial data
enter linearly and are found by CG on the normal equations.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fem
from .errors import ParameterError
from .fem_cq import CqOperator, gradient_q, gradient_u0, window_weights
from .problem import FieldHistory, ProblemSetup, TimeGrid, Trace

__all__ = [
    "CgOptions",
    "InversionReport",
    "objective_q",
    "recover_potential",
    "recover_initial",
]

STOP_RULES = ("oracle-error", "residual-tol", "max-iters")


@dataclass(frozen=True)
class CgOptions:
    """Settings of the CG iterations.

    ``stop_rule`` picks the reported iterate: the one closest to the truth
    (``oracle-error``), the first whose residual norm is at most
    ``residual_tol`` (``residual-tol``), or the last one (``max-iters``).
    """

    max_iters: int = 200
    projection_on: bool = True
    stop_rule: str = "oracle-error"
    residual_tol: float = 0.0
    variant: str = "FR"
    max_halvings: int = 30

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if self.stop_rule not in STOP_RULES:
            raise ParameterError(f"stop_rule must be one of {STOP_RULES}")
        if self.variant not in ("FR", "PR"):
            raise ParameterError("variant must be 'FR' or 'PR'")


@dataclass(eq=False)
class InversionReport:
    """Outcome of one CG run.

    ``errors`` and ``residuals`` are indexed by iteration, starting with the
    initial guess at index 0.  Residuals are L2 norms of the trace misfit
    over the objective window.
    """

    kind: str
    x: np.ndarray
    estimate: np.ndarray
    residuals: list
    errors: list | None
    k_star: int
    e_star: float | None
    r_star: float
    stop_reason: str
    iterations: int
    final: np.ndarray
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k_star": self.k_star,
            "e_star": self.e_star,
            "r_star": self.r_star,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "errors": self.errors,
            "residuals": self.residuals,
            "x": self.x.tolist(),
            "estimate": self.estimate.tolist(),
            "final": self.final.tolist(),
            "config": self.config,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("x,value\n")
            for xi, vi in zip(self.x, self.estimate):
                fh.write(f"{xi:.17g},{vi:.17g}\n")


def _check_template(setup: ProblemSetup, tg: TimeGrid, data: Trace):
    if abs(setup.t_final - tg.t_final) > 1e-12:
        raise ParameterError("time grid and setup disagree on the final time")
    if data.times.size != tg.n_steps + 1 or np.max(np.abs(data.times - tg.times)) > 1e-9:
        raise ParameterError("data must be sampled on the time levels of the grid")


def objective_q(q, setup: ProblemSetup, hbar: Trace, tg: TimeGrid) -> float:
    """Half the squared trapezoid L2 misfit on ``[T1, T]`` for potential ``q``."""
    _check_template(setup, tg, hbar)
    op = CqOperator(setup.grid, setup.a, q, setup.alpha, tg)
    F = op.solve(setup.u0, setup.f, setup.g.step_loads(tg))[:, 0]
    c = window_weights(tg, setup.t_split, setup.t_final)
    return 0.5 * float(np.sum(c * (F - hbar.values) ** 2))


def _select(errors, residuals, opts: CgOptions) -> tuple[int, str]:
    if opts.stop_rule == "oracle-error":
        return int(np.argmin(errors)), "oracle-error"
    if opts.stop_rule == "residual-tol":
        hit = [k for k, r in enumerate(residuals) if r <= opts.residual_tol]
        if hit:
            return hit[0], "residual-tol"
    return len(residuals) - 1, "max-iters"


def _beta(opts, g, g_old, ip):
    den = ip(g_old, g_old)
    if den == 0:
        return 0.0
    if opts.variant == "PR":
        return max(0.0, ip(g, g - g_old) / den)
    return ip(g, g) / den


def recover_potential(hbar: Trace, alpha: float, setup: ProblemSetup, tg: TimeGrid,
                      opts: CgOptions = CgOptions(), q_truth=None, q_init=None) -> InversionReport:
    """Recover the potential from reduced data on ``[T1, T]``.

    Parameters
    ----------
    hbar : Trace
        Reduced data on the levels of ``tg``, zero up to ``setup.t_split``.
    alpha : float
        Order used by the inversion model (may differ from the data's).
    setup : ProblemSetup
        Template with the grid, diffusion coefficient and step excitation;
        its ``q``, ``u0`` and ``f`` are ignored (``u0 = f = 0``).
    q_truth : ndarray, optional
        Nodal exact potential; enables the error history and oracle stopping.
    """
    if q_truth is None and opts.stop_rule == "oracle-error":
        raise ParameterError("oracle stopping needs q_truth")
    _check_template(setup, tg, hbar)
    grid = setup.grid
    n1 = tg.index(setup.t_split)
    if np.any(hbar.values[:n1 + 1] != 0):
        raise ParameterError("reduced data must vanish up to the split time")
    wts = grid.trapezoid_weights()

    def ip(x, y):
        return float(np.dot(wts * x, y))

    zero = np.zeros(grid.m + 1)
    c = window_weights(tg, setup.t_split, setup.t_final)
    gl = setup.g.step_loads(tg)
    h = hbar.values

    def forward(q):
        op = CqOperator(grid, setup.a, q, alpha, tg)
        U = op.solve(zero, zero, gl)
        r = U[:, 0] - h
        return op, U, r, 0.5 * float(np.sum(c * r * r))

    q = np.zeros(grid.m + 1) if q_init is None else np.array(q_init, dtype=float)
    op, U, r, J = forward(q)
    residuals = [math.sqrt(2 * J)]
    errors = [math.sqrt(ip(q - q_truth, q - q_truth))] if q_truth is not None else None
    iterates = [q.copy()]
    d = g_old = None
    active_old = None
    reason = "max-iters"
    for k in range(opts.max_iters):
        V = op.adjoint(r, c)
        g = gradient_q(FieldHistory(tg.times, U), FieldHistory(tg.times, V), tg)
        if opts.projection_on:
            # nodes held at the bound by a gradient pointing outward do not move
            active = (q <= 0.0) & (g > 0.0)
            g = np.where(active, 0.0, g)
            if active_old is not None and not np.array_equal(active, active_old):
                d = None
            active_old = active
        gg = ip(g, g)
        if gg == 0.0:
            reason = "zero-gradient"
            break
        if d is None:
            d = -g
        else:
            d = -g + _beta(opts, g, g_old, ip) * d
            if ip(g, d) >= 0.0:
                d = -g
        g_old = g
        s = op.sensitivity_trace(U, d)
        ss = float(np.sum(c * s * s))
        if ss == 0.0:
            reason = "stationary-direction"
            break
        gamma = -float(np.sum(c * r * s)) / ss
        accepted = False
        for _ in range(opts.max_halvings):
            q_new = q + gamma * d
            if opts.projection_on:
                q_new = np.maximum(q_new, 0.0)
            op_new, U_new, r_new, J_new = forward(q_new)
            if J_new <= J:
                accepted = True
                break
            gamma *= 0.5
        if not accepted:
            if np.array_equal(d, -g):
                reason = "no-descent"
                break
            d = None  # restart along the steepest descent direction next time
            g_old = None
            continue
        q, op, U, r, J = q_new, op_new, U_new, r_new, J_new
        iterates.append(q.copy())
        residuals.append(math.sqrt(2 * J))
        if errors is not None:
            errors.append(math.sqrt(ip(q - q_truth, q - q_truth)))
        if J == 0.0:
            reason = "zero-residual"
            break
    k_star, rule = _select(errors, residuals, opts)
    if rule != "max-iters" or reason == "max-iters":
        reason = rule if rule != "max-iters" else reason
    return InversionReport(
        kind="q",
        x=grid.nodes,
        estimate=iterates[k_star],
        residuals=residuals,
        errors=errors,
        k_star=k_star,
        e_star=errors[k_star] if errors is not None else None,
        r_star=residuals[k_star],
        stop_reason=reason,
        iterations=len(residuals) - 1,
        final=iterates[-1],
        config={"alpha": alpha, "m": grid.m, "n_steps": tg.n_steps,
                "t_split": setup.t_split, "t_final": setup.t_final,
                "gradient_smoothing": "none", "inner_product": "trapezoid",
                **asdict(opts)},
    )


def recover_initial(h: Trace, q_hat, alpha: float, setup: ProblemSetup, tg: TimeGrid,
                    opts: CgOptions = CgOptions(), u0_truth=None) -> InversionReport:
    """Recover the initial data from the trace on ``[0, T1]``.

    The forward map is linear in ``u0`` (zero source, no flux before ``T1``),
    so CG runs on the normal equations in the L2 inner product of the
    finite element space, with residuals updated by linearity.
    """
    if u0_truth is None and opts.stop_rule == "oracle-error":
        raise ParameterError("oracle stopping needs u0_truth")
    grid = setup.grid
    n1 = tg.index(setup.t_split)
    t1 = tg.truncated(setup.t_split)
    if h.times.size < n1 + 1 or np.max(np.abs(h.times[:n1 + 1] - t1.times)) > 1e-9:
        raise ParameterError("data must be sampled on the time levels up to the split time")
    q_hat = np.asarray(q_hat, dtype=float)
    op = CqOperator(grid, setup.a, q_hat, alpha, t1)
    M = fem.mass(grid)
    wts = grid.trapezoid_weights()
    zero = np.zeros(grid.m + 1)
    nog = np.zeros(t1.n_steps)
    c = window_weights(t1, 0.0, setup.t_split, include_lo=False)
    data = h.values[:n1 + 1]

    def ip_m(x, y):
        return float(fem.restrict(x) @ M.matvec(fem.restrict(y)))

    def l2err(u):
        e = u - u0_truth
        return math.sqrt(float(np.dot(wts * e, e)))

    def response(d):
        return op.solve(d, zero, nog)[:, 0]

    u = np.zeros(grid.m + 1)
    r = -data.copy()
    r[0] = 0.0
    residuals = [math.sqrt(float(np.sum(c * r * r)))]
    errors = [l2err(u)] if u0_truth is not None else None
    iterates = [u.copy()]
    d = g_old = None
    reason = "max-iters"
    for k in range(opts.max_iters):
        W = op.adjoint(r, c)
        g = gradient_u0(FieldHistory(t1.times, W), alpha, t1)
        if ip_m(g, g) == 0.0:
            reason = "zero-gradient"
            break
        d = -g if d is None else -g + _beta(opts, g, g_old, ip_m) * d
        g_old = g
        s = response(d)
        ss = float(np.sum(c * s * s))
        if ss == 0.0:
            reason = "stationary-direction"
            break
        gamma = -float(np.sum(c * r * s)) / ss
        u = u + gamma * d
        r = r + gamma * s
        iterates.append(u.copy())
        residuals.append(math.sqrt(float(np.sum(c * r * r))))
        if errors is not None:
            errors.append(l2err(u))
    k_star, rule = _select(errors, residuals, opts)
    if rule != "max-iters":
        reason = rule
    return InversionReport(
        kind="u0",
        x=grid.nodes,
        estimate=iterates[k_star],
        residuals=residuals,
        errors=errors,
        k_star=k_star,
        e_star=errors[k_star] if errors is not None else None,
        r_star=residuals[k_star],
        stop_reason=reason,
        iterations=len(residuals) - 1,
        final=iterates[-1],
        config={"alpha": alpha, "m": grid.m, "n_steps": t1.n_steps,
                "t_split": setup.t_split, "gradient_smoothing": "none",
                "inner_product": "mass", **asdict(opts)},
    )
