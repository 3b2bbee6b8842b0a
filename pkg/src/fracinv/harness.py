"""Reproduction driver: benchmark cases, data generation and result tables.

Every table cell runs the full pipeline on exact synthetic data: the order
from the short-time trace, the rational continuation of the trace beyond
``T1``, the potential from the reduced data and finally the initial data.
Outputs are plain CSV and JSON written with fixed formatting, so repeated
runs with the same configuration produce identical files.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import fem_cq
from .continuation import aaa_fit, eval_rational, reduced_data
from .errors import ParameterError
from .inversion import CgOptions, recover_initial, recover_potential
from .order_fit import fit_order, geometric_times
from .problem import Excitation, ProblemSetup, SpaceGrid, TimeGrid, Trace
from .spectral import solve_eigen, spectral_coefficients, spectral_trace

__all__ = ["CaseSpec", "RunConfig", "CASES", "generate_data", "small_time_samples",
           "run_cell", "run_table1", "run_table2", "run_table3", "run_figures", "reproduce"]

DEFAULT_WINDOWS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10)


def _q_i(x):
    return x * (1.0 - x)


def _u0_i(x):
    return x ** 2 * (1.0 - x) + np.cos(0.5 * np.pi * x)


def _q_ii(x):
    return np.minimum(x, 1.0 - x)


def _u0_ii(x):
    return np.cos(1.5 * np.pi * x)


@dataclass(frozen=True)
class CaseSpec:
    """Benchmark problem with ``a = 1``, ``f = 0`` and a unit flux switched on at ``T1``."""

    id: str
    q: object
    u0: object
    t_final: float = 1.0
    t_split: float = 0.5

    def setup(self, m: int, alpha: float) -> ProblemSetup:
        grid = SpaceGrid(m)
        s = ProblemSetup.from_functions(grid, a=1.0, q=self.q, u0=self.u0, f=0.0, alpha=alpha,
                                        t_final=self.t_final, t_split=self.t_split,
                                        g=Excitation.step(self.t_split))
        if abs(s.u0[-1]) > 1e-12:
            raise ParameterError(f"case {self.id}: initial data must vanish at x = 1")
        return s

    def template(self, m: int, alpha: float) -> ProblemSetup:
        """Same setup with ``q = u0 = 0``, as used by the inversions."""
        s = self.setup(m, alpha)
        z = np.zeros(m + 1)
        return s.replace(q=z, u0=z)


CASES = {"i": CaseSpec("i", _q_i, _u0_i), "ii": CaseSpec("ii", _q_ii, _u0_ii)}


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of a reproduction run.

    Data are generated on ``m_data`` space intervals and ``n_data`` time
    steps and sampled on the inversion grid, which must divide them.
    ``data_source`` selects the fine-grid FEM solver or the eigenfunction
    expansion for the traces fed to the continuation and inversions; the
    short-time samples for the order fit always come from the expansion.
    """

    m_inverse: int = 200
    n_inverse: int = 2000
    m_data: int = 400
    n_data: int = 2000
    data_source: str = "fem"
    k_modes: int = 50
    alphas: tuple = (0.3, 0.5, 0.7, 0.9)
    delta_alphas: tuple = (0.0, 0.001, 0.005)
    windows: tuple = DEFAULT_WINDOWS
    n_small: int = 32
    aaa_tol: float = 1e-9
    max_degree: int = 20
    max_iters: int = 200
    projection_on: bool = False
    variant: str = "FR"
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("alphas", "delta_alphas", "windows"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not (self.m_data > self.m_inverse or self.n_data > self.n_inverse):
            raise ParameterError("data must come from a finer grid than the inversion")
        if self.m_data % self.m_inverse or self.n_data % self.n_inverse:
            raise ParameterError("inversion grid must be a coarsening of the data grid")
        if self.data_source not in ("fem", "spectral"):
            raise ParameterError("data_source must be 'fem' or 'spectral'")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ParameterError("orders must lie in (0, 1)")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def cg_options(self) -> CgOptions:
        return CgOptions(max_iters=self.max_iters, projection_on=self.projection_on,
                         variant=self.variant)

    def time_grid(self) -> TimeGrid:
        return TimeGrid(1.0, self.n_inverse)


def _case(case) -> CaseSpec:
    if isinstance(case, CaseSpec):
        return case
    if case not in CASES:
        raise ParameterError(f"unknown case {case!r}; choose from {sorted(CASES)}")
    return CASES[case]


def _spectral(case: CaseSpec, alpha: float, cfg: RunConfig):
    s = case.setup(cfg.m_data, alpha)
    eig = solve_eigen(s, k_modes=cfg.k_modes)
    return s, eig, spectral_coefficients(s, eig)


def small_time_samples(case, alpha: float, cfg: RunConfig, t0: float) -> Trace:
    """Geometric samples ``t0 2^-k`` of the exact trace for the order fit."""
    s, eig, sd = _spectral(_case(case), alpha, cfg)
    return spectral_trace(s, eig, sd, geometric_times(t0, cfg.n_small))


def generate_data(case, alpha: float, cfg: RunConfig) -> tuple[Trace, Trace]:
    """Exact trace on the inversion time levels and short-time samples.

    Returns
    -------
    h : Trace
        Trace on ``[0, T]`` at the ``n_inverse + 1`` levels.
    h_small : Trace
        Geometric samples below the largest order-fit window.
    """
    case = _case(case)
    tg = cfg.time_grid()
    s, eig, sd = _spectral(case, alpha, cfg)
    if cfg.data_source == "spectral":
        h = spectral_trace(s, eig, sd, tg.times)
    else:
        fine = TimeGrid(case.t_final, cfg.n_data)
        u = fem_cq.solve_forward(s, None, fine).values[:, 0]
        h = Trace(tg.times, u[::cfg.n_data // cfg.n_inverse].copy())
    h_small = spectral_trace(s, eig, sd, geometric_times(max(cfg.windows), cfg.n_small))
    return h, h_small


def _continue(h: Trace, case: CaseSpec, cfg: RunConfig):
    r = aaa_fit(h.window(0.0, case.t_split), tol=cfg.aaa_tol, max_degree=cfg.max_degree,
                pole_window=(case.t_split, case.t_final))
    return r, reduced_data(h, r, case.t_split)


def _fmt(x) -> str:
    return f"{x:.6e}" if isinstance(x, float) else str(x)


def _error_token(exc: Exception) -> str:
    return f"ERR:{type(exc).__name__}"


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _alpha_dir(cfg: RunConfig, case: CaseSpec, alpha: float) -> Path:
    return Path(cfg.out_dir) / case.id / f"{alpha:.4f}"


def _map(fn, jobs, workers):
    if workers == 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------- table 1

def _table1_column(case_id, alpha, cfg):
    case = _case(case_id)
    s, eig, sd = _spectral(case, alpha, cfg)
    col = []
    for t0 in cfg.windows:
        try:
            h = spectral_trace(s, eig, sd, geometric_times(t0, cfg.n_small))
            col.append(fit_order(h, t0).alpha_hat)
        except Exception as exc:  # recorded in the table, the run continues
            col.append(_error_token(exc))
    return col


def run_table1(cfg: RunConfig, case) -> dict:
    """Recovered order for every window (rows) and true order (columns)."""
    case = _case(case)
    cols = _map(_table1_column, [(case.id, a, cfg) for a in cfg.alphas], cfg.workers)
    rows = [[t0] + [c[i] for c in cols] for i, t0 in enumerate(cfg.windows)]
    header = ["t0"] + [f"{a:.4f}" for a in cfg.alphas]
    _write_csv(Path(cfg.out_dir) / case.id / "table1.csv", header,
               [[f"{r[0]:.0e}"] + [f"{v:.4f}" if isinstance(v, float) else v for v in r[1:]]
                for r in rows])
    for a, c in zip(cfg.alphas, cols):
        d = _alpha_dir(cfg, case, a)
        _write_csv(d / "table1.csv", ["t0", "alpha_hat"],
                   [[f"{t0:.0e}", f"{v:.6f}" if isinstance(v, float) else v]
                    for t0, v in zip(cfg.windows, c)])
    failures = sum(isinstance(v, str) for c in cols for v in c)
    return {"table": 1, "case": case.id, "rows": rows, "failures": failures}


# ---------------------------------------------------------------- tables 2, 3

def run_cell(case_id, alpha, cfg, with_u0=False) -> dict:
    """Full pipeline for one (case, order): data, continuation, potential per
    order perturbation and optionally the initial data.

    Failures are caught and stored as ``"ERR:<type>"`` tokens in the result.
    Wall-clock seconds per stage go to ``"seconds"``; they are not written
    to any output file.
    """
    case = _case(case_id)
    tg = cfg.time_grid()
    truth = case.setup(cfg.m_inverse, alpha)
    tmpl = case.template(cfg.m_inverse, alpha)
    out = {"alpha": alpha, "q": {}, "u0": None, "error": None,
           "seconds": {"data": 0.0, "q": {}, "u0": 0.0}}
    clock = time.perf_counter()
    try:
        h, _ = generate_data(case, alpha, cfg)
        r, hbar = _continue(h, case, cfg)
        out["trace"] = h
        out["continuation"] = r
        out["hbar"] = hbar
    except Exception as exc:
        out["error"] = _error_token(exc)
        return out
    out["seconds"]["data"] = time.perf_counter() - clock
    for da in cfg.delta_alphas:
        clock = time.perf_counter()
        try:
            out["q"][da] = recover_potential(hbar, alpha + da, tmpl, tg, cfg.cg_options(),
                                             q_truth=truth.q)
        except Exception as exc:
            out["q"][da] = _error_token(exc)
        out["seconds"]["q"][da] = time.perf_counter() - clock
    if with_u0:
        rep = out["q"].get(0.0)
        clock = time.perf_counter()
        try:
            if rep is None:
                rep = recover_potential(hbar, alpha, tmpl, tg, cfg.cg_options(), q_truth=truth.q)
            if isinstance(rep, str):
                raise RuntimeError(rep)
            opts = CgOptions(max_iters=cfg.max_iters, variant=cfg.variant)
            out["u0"] = recover_initial(h, rep.estimate, alpha, tmpl, tg, opts,
                                        u0_truth=truth.u0)
        except Exception as exc:
            out["u0"] = _error_token(exc)
        out["seconds"]["u0"] = time.perf_counter() - clock
    return out


def _cell_row(rep):
    if isinstance(rep, str):
        return [rep, rep, rep]
    return [rep.e_star, rep.r_star, rep.k_star]


def _save_cell(cfg, case, cell, tables):
    d = _alpha_dir(cfg, case, cell["alpha"])
    d.mkdir(parents=True, exist_ok=True)
    if "trace" in cell:
        cell["trace"].to_csv(d / "trace.csv")
    report = {"case": case.id, "alpha": cell["alpha"], "config": cfg.to_dict(),
              "error": cell["error"], "tables": tables}
    if "continuation" in cell:
        report["continuation"] = json.loads(cell["continuation"].to_json())
    for da, rep in cell["q"].items():
        key = f"q_delta_alpha_{da:g}"
        report[key] = rep if isinstance(rep, str) else rep.to_dict()
        if not isinstance(rep, str):
            rep.to_csv(d / f"q_hat_{da:g}.csv")
    if cell["u0"] is not None:
        rep = cell["u0"]
        report["u0"] = rep if isinstance(rep, str) else rep.to_dict()
        if not isinstance(rep, str):
            rep.to_csv(d / "u0_hat.csv")
    _write_json(d / "report.json", report)


def _cell_failed(cell, with_u0):
    reps = list(cell["q"].values()) + ([cell["u0"]] if with_u0 else [])
    return cell["error"] is not None or any(isinstance(r, str) for r in reps)


def run_table2(cfg: RunConfig, case, cells=None) -> dict:
    """Error, residual and oracle index of the potential for each order and perturbation."""
    case = _case(case)
    if cells is None:
        cells = _map(run_cell, [(case.id, a, cfg) for a in cfg.alphas], cfg.workers)
    header = ["alpha"]
    for da in cfg.delta_alphas:
        header += [f"e_star_{da:g}", f"r_star_{da:g}", f"k_star_{da:g}"]
    rows = []
    for cell in cells:
        row = [f"{cell['alpha']:.4f}"]
        for da in cfg.delta_alphas:
            row += [cell["error"]] * 3 if cell["error"] else _cell_row(cell["q"][da])
        rows.append(row)
    _write_csv(Path(cfg.out_dir) / case.id / "table2.csv", header, rows)
    for cell, row in zip(cells, rows):
        _write_csv(_alpha_dir(cfg, case, cell["alpha"]) / "table2.csv", header, [row])
        _save_cell(cfg, case, cell, [2])
    failures = sum(_cell_failed(c, False) for c in cells)
    return {"table": 2, "case": case.id, "rows": rows, "failures": failures}


def run_table3(cfg: RunConfig, case) -> dict:
    """Error, residual and oracle index of the initial data, using the recovered potential."""
    case = _case(case)
    cfg3 = RunConfig.from_dict({**cfg.to_dict(), "delta_alphas": (0.0,)})
    cells = _map(run_cell, [(case.id, a, cfg3, True) for a in cfg.alphas], cfg.workers)
    header = ["alpha", "e_star", "r_star", "k_star"]
    rows = []
    for cell in cells:
        rep = cell["error"] or cell["u0"]
        rows.append([f"{cell['alpha']:.4f}"] + _cell_row(rep))
    _write_csv(Path(cfg.out_dir) / case.id / "table3.csv", header, rows)
    for cell, row in zip(cells, rows):
        _write_csv(_alpha_dir(cfg, case, cell["alpha"]) / "table3.csv", header, [row])
        _save_cell(cfg3, case, cell, [3])
    failures = sum(_cell_failed(c, True) for c in cells)
    return {"table": 3, "case": case.id, "rows": rows, "failures": failures, "cells": cells}


# ---------------------------------------------------------------- figures

def run_figures(cfg: RunConfig, case) -> dict:
    """Plot-ready data: continuation error, reconstructions and CG histories."""
    case = _case(case)
    res = run_table3(cfg, case)
    tg = cfg.time_grid()
    failures = res["failures"]
    for cell in res["cells"]:
        d = _alpha_dir(cfg, case, cell["alpha"]) / "figures"
        if cell["error"]:
            continue
        s, eig, sd = _spectral(case, cell["alpha"], cfg)
        after = tg.times >= case.t_split
        t = tg.times[after]
        exact = spectral_trace(s.replace(g=Excitation()), eig, sd, t).values
        hr = eval_rational(cell["continuation"], t)
        _write_csv(d / "continuation.csv", ["t", "h_exact", "h_r", "abs_error"],
                   [[ti, ei, ri, abs(ei - ri)] for ti, ei, ri in zip(t, exact, hr)])
        truth = case.setup(cfg.m_inverse, cell["alpha"])
        for name, rep, ref in (("q", cell["q"].get(0.0), truth.q), ("u0", cell["u0"], truth.u0)):
            if rep is None or isinstance(rep, str):
                continue
            _write_csv(d / f"{name}_profile.csv", ["x", "exact", "recovered"],
                       [[x, e, r] for x, e, r in zip(rep.x, ref, rep.estimate)])
            _write_csv(d / f"{name}_history.csv", ["k", "error", "residual"],
                       [[k, e, r] for k, (e, r) in enumerate(zip(rep.errors, rep.residuals))])
    return {"table": "figures", "case": case.id, "failures": failures}


def reproduce(cfg: RunConfig, table, case) -> dict:
    """Run one table (1, 2, 3) or ``"figures"`` for one case and write its outputs."""
    runners = {1: run_table1, 2: run_table2, 3: run_table3, "figures": run_figures}
    key = int(table) if str(table).isdigit() else table
    if key not in runners:
        raise ParameterError(f"unknown table {table!r}")
    res = runners[key](cfg, case)
    res.pop("cells", None)
    _write_json(Path(cfg.out_dir) / _case(case).id / f"run_table{key}.json",
                {"config": cfg.to_dict(), "table": key, "case": _case(case).id,
                 "failures": res["failures"]})
    return res

