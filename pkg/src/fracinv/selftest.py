"""Fast consistency checks of an installation (a few seconds in total)."""
from __future__ import annotations

import numpy as np
from scipy.special import erfcx

from .backend import BACKEND, march_compiled, march_python
from .fem_cq import CqOperator
from .mlf import mittag_leffler
from .problem import Excitation, ProblemSetup, SpaceGrid, TimeGrid
from .spectral import solve_eigen, spectral_coefficients, spectral_trace


def _mlf_half():
    x = np.linspace(0.0, 30.0, 61)
    return float(np.max(np.abs(mittag_leffler(-x, 0.5) - erfcx(x)))), 1e-12


def _eigen_example():
    # two-mode data whose trace collapses to a single Mittag-Leffler term
    pi = np.pi
    grid = SpaceGrid(200)
    t = np.linspace(0.0, 1.0, 101)
    s = ProblemSetup.from_functions(
        grid, q=0.0, alpha=0.5, g=Excitation(),
        f=lambda x: pi ** 2 / 8 * (np.cos(pi * x / 2) + 9 * np.cos(3 * pi * x / 2)),
        u0=lambda x: 0.5 * np.cos(pi * x / 2) + 1.5 * np.cos(3 * pi * x / 2))
    eig = solve_eigen(s, k_modes=20)
    h = spectral_trace(s, eig, spectral_coefficients(s, eig), t)
    exact = 1 + mittag_leffler(-(9 * pi ** 2 / 4) * t ** 0.5, 0.5)
    return float(np.max(np.abs(h.values - exact))), 1e-6


def _duality():
    rng = np.random.default_rng(0)
    grid = SpaceGrid(40)
    tg = TimeGrid(1.0, 100)
    op = CqOperator(grid, np.ones(41), grid.nodes * (1 - grid.nodes), 0.6, tg)
    u = op.solve(np.zeros(41), np.zeros(41), (tg.times[1:] > 0.5).astype(float))
    dq = rng.standard_normal(41)
    r = rng.standard_normal(tg.n_steps + 1)
    c = np.full(tg.n_steps + 1, tg.dt)
    c[0] = 0
    lhs = float(np.sum(c * r * op.sensitivity_trace(u, dq)))
    v = op.adjoint(r, c)
    rhs = -tg.dt * grid.inner(np.einsum("ji,ji->i", u[1:], v[1:]), dq)
    return abs(lhs - rhs) / abs(lhs), 1e-10


def _backends():
    if march_compiled is None:
        return 0.0, 1.0
    rng = np.random.default_rng(1)
    n, steps = 30, 200
    w = np.cumprod(np.r_[1.0, (np.arange(1, steps + 1) - 1 - 0.4) / np.arange(1, steps + 1)])
    md, me = np.full(n, 4.0), np.ones(n - 1)
    ad, ae = np.full(n, 10.0), -np.ones(n - 1)
    loads = rng.standard_normal((steps, n))
    a = np.asarray(march_compiled(w, 2.0, md, me, ad, ae, loads))
    b = np.asarray(march_python(w, 2.0, md, me, ad, ae, loads))
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b))), 1e-12


CHECKS = {
    "Mittag-Leffler E_1/2 against erfcx": _mlf_half,
    "eigen-expansion single-mode trace": _eigen_example,
    "sensitivity/adjoint duality": _duality,
    "compiled vs NumPy kernel": _backends,
}


def run_selftest(verbose: bool = True) -> int:
    """Run every check; return 0 when all pass."""
    failed = 0
    if verbose:
        print(f"kernel backend: {BACKEND}")
    for name, fn in CHECKS.items():
        try:
            err, tol = fn()
            ok = err <= tol
            msg = f"{err:.2e} (tol {tol:.0e})"
        except Exception as exc:  # report and continue
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {msg}")
    return int(failed > 0)
