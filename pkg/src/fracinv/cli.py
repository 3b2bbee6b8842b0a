"""Command line interface: ``fracinv <subcommand> [options]``.

Settings come from the :class:`~fracinv.harness.RunConfig` defaults, then
an optional JSON file given with ``--config``, then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import BACKEND, fem_cq
from .continuation import aaa_fit, reduced_data
from .errors import NumericalError, ParameterError
from .harness import CASES, RunConfig, generate_data, reproduce, small_time_samples
from .inversion import CgOptions, recover_initial, recover_potential
from .order_fit import fit_order
from .problem import Trace
from .spectral import solve_eigen, spectral_coefficients, spectral_trace

CONFIG_FLAGS = {
    "m_inverse": int, "n_inverse": int, "m_data": int, "n_data": int, "data_source": str,
    "k_modes": int, "max_iters": int, "variant": str, "workers": int, "out_dir": str,
    "aaa_tol": float, "max_degree": int,
}


def _add_config(p):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    for name, typ in CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--alphas", type=float, nargs="+", default=None)
    p.add_argument("--delta-alphas", dest="delta_alphas", type=float, nargs="+", default=None)
    p.add_argument("--projection", dest="projection_on", action="store_true", default=None)
    p.add_argument("--no-projection", dest="projection_on", action="store_false")


def resolve_config(args) -> RunConfig:
    """Defaults, then the JSON file, then explicit flags."""
    d = {}
    if getattr(args, "config", None):
        d.update(json.loads(Path(args.config).read_text()))
    for name in list(CONFIG_FLAGS) + ["alphas", "delta_alphas", "projection_on"]:
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    return RunConfig.from_dict(d)


def _case_trace(args, cfg):
    if args.trace:
        return Trace.from_csv(args.trace)
    if args.case is None:
        raise ParameterError("give --trace or --case")
    return generate_data(args.case, args.alpha, cfg)[0]


def cmd_forward(args, cfg):
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    case = CASES[args.case]
    tg = cfg.time_grid()
    s = case.setup(cfg.m_inverse, args.alpha)
    if args.solver == "spectral":
        eig = solve_eigen(s, k_modes=cfg.k_modes)
        h = spectral_trace(s, eig, spectral_coefficients(s, eig), tg.times)
    else:
        u = fem_cq.solve_forward(s, None, tg)
        h = u.trace
        if args.field:
            u.dump(args.field)
    h.to_csv(out)
    return 0


def cmd_fit_order(args, cfg):
    windows = args.t0 or list(cfg.windows)
    rows = []
    for t0 in windows:
        h = Trace.from_csv(args.trace) if args.trace else small_time_samples(
            args.case, args.alpha, cfg, t0)
        rows.append(fit_order(h, t0).to_dict())
    text = json.dumps(rows, indent=2, sort_keys=True)
    _emit(args.output, text)
    return 0


def cmd_continue(args, cfg):
    h = _case_trace(args, cfg)
    r = aaa_fit(h.window(0.0, args.t_split), tol=cfg.aaa_tol, max_degree=cfg.max_degree,
                pole_window=(args.t_split, float(h.times[-1])))
    _emit(args.output, r.to_json())
    if args.reduced:
        reduced_data(h, r, args.t_split).to_csv(args.reduced)
    return 0 if r.converged else 1


def _truth(args, cfg, name):
    if args.case is None:
        return None
    return getattr(CASES[args.case].setup(cfg.m_inverse, args.alpha), name)


def _opts(args, cfg, truth):
    rule = "oracle-error" if truth is not None else ("residual-tol" if args.residual_tol else "max-iters")
    return CgOptions(max_iters=cfg.max_iters, projection_on=cfg.projection_on,
                     variant=cfg.variant, stop_rule=rule, residual_tol=args.residual_tol or 0.0)


def _template(args, cfg):
    case = CASES[args.case or "i"]
    return case.template(cfg.m_inverse, args.alpha)


def cmd_invert_q(args, cfg):
    tg = cfg.time_grid()
    if args.trace:
        hbar = Trace.from_csv(args.trace)
    else:
        h = _case_trace(args, cfg)
        r = aaa_fit(h.window(0.0, 0.5), tol=cfg.aaa_tol, max_degree=cfg.max_degree,
                    pole_window=(0.5, 1.0))
        hbar = reduced_data(h, r, 0.5)
    truth = _truth(args, cfg, "q")
    rep = recover_potential(hbar, args.alpha, _template(args, cfg), tg,
                            _opts(args, cfg, truth), q_truth=truth)
    _write_report(rep, args.output)
    return 0


def cmd_invert_u0(args, cfg):
    tg = cfg.time_grid()
    h = _case_trace(args, cfg)
    if args.q:
        q = _read_xv(args.q)
    elif args.case:
        q = _truth(args, cfg, "q")
    else:
        raise ParameterError("invert-u0 needs --q or --case")
    truth = _truth(args, cfg, "u0")
    opts = _opts(args, cfg, truth)
    rep = recover_initial(h, q, args.alpha, _template(args, cfg), tg,
                          CgOptions(max_iters=opts.max_iters, stop_rule=opts.stop_rule,
                                    residual_tol=opts.residual_tol, variant=opts.variant),
                          u0_truth=truth)
    _write_report(rep, args.output)
    return 0


def cmd_reproduce(args, cfg):
    status = 0
    for case in args.case:
        res = reproduce(cfg, args.table, case)
        print(f"table {args.table} case {case}: {res['failures']} failed cells")
        status |= res["failures"] > 0
    return int(status)


def cmd_selftest(args, cfg):
    from .selftest import run_selftest
    return run_selftest(verbose=True)


def _read_xv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1]


def _write_report(rep, path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_json(out / "report.json")
    rep.to_csv(out / f"{rep.kind}_hat.csv")
    print(f"{rep.kind}: k*={rep.k_star} e*={rep.e_star} r*={rep.r_star:.3e} ({rep.stop_reason})")


def _emit(path, text):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracinv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernel)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        _add_config(sp)
        sp.set_defaults(func=fn)
        return sp

    sp = add("forward", cmd_forward, "boundary trace of a benchmark case")
    sp.add_argument("--case", choices=sorted(CASES), default="i")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--solver", choices=("fem", "spectral"), default="fem")
    sp.add_argument("--field", help="also dump the FEM field history here")
    sp.add_argument("-o", "--output", default="trace.csv")

    sp = add("fit-order", cmd_fit_order, "order from the short-time trace")
    sp.add_argument("--trace", help="CSV with header t,h")
    sp.add_argument("--case", choices=sorted(CASES), default="i")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--t0", type=float, nargs="+")
    sp.add_argument("-o", "--output")

    sp = add("continue", cmd_continue, "rational continuation beyond the split time")
    sp.add_argument("--trace")
    sp.add_argument("--case", choices=sorted(CASES), default="i")
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--t-split", dest="t_split", type=float, default=0.5)
    sp.add_argument("--reduced", help="write the reduced trace CSV here")
    sp.add_argument("-o", "--output")

    for name, fn, help_ in (("invert-q", cmd_invert_q, "recover the potential"),
                            ("invert-u0", cmd_invert_u0, "recover the initial data")):
        sp = add(name, fn, help_)
        sp.add_argument("--trace", help="CSV with header t,h (reduced data for invert-q)")
        sp.add_argument("--case", choices=sorted(CASES), default=None,
                        help="benchmark case; supplies data if --trace is absent and the truth")
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--residual-tol", dest="residual_tol", type=float, default=None)
        sp.add_argument("-o", "--output", default="inversion")
        if name == "invert-u0":
            sp.add_argument("--q", help="CSV x,value with the potential")

    sp = add("reproduce", cmd_reproduce, "rebuild a results table")
    sp.add_argument("--table", required=True, choices=("1", "2", "3", "figures"))
    sp.add_argument("--case", nargs="+", choices=sorted(CASES), default=["i", "ii"])

    add("selftest", cmd_selftest, "fast consistency checks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return int(args.func(args, cfg))
    except (ParameterError, NumericalError, OSError, ValueError) as exc:
        print(f"fracinv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
