import json

import numpy as np
import pytest

from fracinv.cli import build_parser, main, resolve_config
from fracinv.problem import Trace

SMALL = ["--m-inverse", "20", "--n-inverse", "100", "--m-data", "40", "--n-data", "100",
         "--k-modes", "10", "--max-iters", "5"]


def test_forward_trace_csv(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["forward", "--alpha", "0.5", "--case", "ii", "-o", str(out),
                 "--field", str(tmp_path / "u.bin")] + SMALL) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,h" and len(lines) == 102
    t, h = lines[1].split(",")
    assert float(h) == 1.0
    assert Trace.from_csv(out).values.size == 101
    side = json.loads((tmp_path / "u.bin.json").read_text())
    assert side["n_times"] == 101 and side["n_nodes"] == 21
    assert (tmp_path / "u.bin").stat().st_size == 8 * 101 * 21


def test_forward_spectral(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["forward", "--alpha", "0.5", "--solver", "spectral", "-o", str(out)]
                + SMALL + ["--k-modes", "5"]) == 0
    row = out.read_text().splitlines()[-1]
    assert len(row.split(",")[1].replace("-", "").replace(".", "").lstrip("0")) >= 15


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"max_iters": 9, "variant": "PR", "alphas": [0.3]}))
    args = build_parser().parse_args(["reproduce", "--table", "1", "--config", str(cfg),
                                      "--max-iters", "11"])
    rc = resolve_config(args)
    assert rc.max_iters == 11 and rc.variant == "PR" and rc.alphas == (0.3,)
    assert rc.m_inverse == 200


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["selftest", "--config", str(cfg)]) == 2
    assert "unknown config fields" in capsys.readouterr().err
    assert main(["selftest", "--config", str(tmp_path / "missing.json")]) == 2


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["reproduce", "--table", "4"])
    assert exc.value.code == 2
    assert main(["invert-u0", "--alpha", "0.5"] + SMALL) == 2


def test_fit_order(tmp_path):
    out = tmp_path / "fit.json"
    assert main(["fit-order", "--case", "ii", "--alpha", "0.5", "--t0", "1e-9", "1e-10",
                 "-o", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert [r["t0"] for r in rows] == [1e-9, 1e-10]
    assert all(abs(r["alpha_hat"] - 0.5) <= 5e-3 for r in rows)


def test_fit_order_from_trace(tmp_path):
    t = 1e-3 * 2.0 ** -np.arange(20)[::-1]
    Trace(t, 2 - 3 * t ** 0.4).to_csv(tmp_path / "h.csv")
    out = tmp_path / "fit.json"
    assert main(["fit-order", "--trace", str(tmp_path / "h.csv"), "--t0", "1e-3", "-o", str(out)]) == 0
    assert json.loads(out.read_text())[0]["alpha_hat"] == pytest.approx(0.4, abs=1e-6)


def test_continue_and_invert(tmp_path):
    cont = tmp_path / "r.json"
    red = tmp_path / "hbar.csv"
    assert main(["continue", "--case", "i", "--alpha", "0.5", "-o", str(cont),
                 "--reduced", str(red)] + SMALL) == 0
    assert json.loads(cont.read_text())["pole_report"]["in_window"] == 0
    assert main(["invert-q", "--trace", str(red), "--alpha", "0.5", "--residual-tol", "1e-8",
                 "-o", str(tmp_path / "q")] + SMALL) == 0
    rep = json.loads((tmp_path / "q" / "report.json").read_text())
    assert rep["kind"] == "q" and rep["e_star"] is None
    assert (tmp_path / "q" / "q_hat.csv").read_text().startswith("x,value\n")
    assert main(["invert-u0", "--case", "i", "--alpha", "0.5", "--q", str(tmp_path / "q" / "q_hat.csv"),
                 "-o", str(tmp_path / "u")] + SMALL) == 0
    rep = json.loads((tmp_path / "u" / "report.json").read_text())
    assert rep["kind"] == "u0" and rep["e_star"] is not None


def test_invert_q_with_case_truth(tmp_path):
    assert main(["invert-q", "--case", "ii", "--alpha", "0.7", "-o", str(tmp_path)] + SMALL) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["stop_reason"] == "oracle-error" and rep["iterations"] == 5


def test_reproduce_exit_codes(tmp_path):
    base = ["reproduce", "--table", "2", "--case", "ii", "--alphas", "0.5",
            "--out-dir", str(tmp_path)] + SMALL
    assert main(base) == 0
    assert (tmp_path / "ii" / "0.5000" / "report.json").exists()
    assert main(base + ["--max-degree", "60"]) == 1


def test_selftest():
    assert main(["selftest"]) == 0
