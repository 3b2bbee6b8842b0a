import json
import shutil

import numpy as np
import pytest

from fracinv.errors import ParameterError
from fracinv.fem_cq import solve_forward
from fracinv.harness import (CASES, CaseSpec, RunConfig, generate_data, reproduce, run_cell,
                             small_time_samples)
from fracinv.problem import TimeGrid

TINY = dict(m_inverse=20, n_inverse=100, m_data=40, n_data=100, k_modes=10, alphas=(0.5,),
            delta_alphas=(0.0, 0.005), windows=(1e-3, 1e-5), max_iters=5)


def tiny(tmp_path, **kw):
    return RunConfig.from_dict({**TINY, "out_dir": str(tmp_path), **kw})


@pytest.mark.parametrize("case", ["i", "ii"])
def test_trace_starts_at_one(case):
    h, small = generate_data(case, 0.5, RunConfig(data_source="spectral"))
    assert h.values[0] == pytest.approx(1.0, abs=1e-4)
    assert small.values[0] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("case", ["i", "ii"])
def test_solver_committee_at_final_time(case):
    cfg = RunConfig()
    spectral, _ = generate_data(case, 0.5, RunConfig(data_source="spectral"))
    fem, _ = generate_data(case, 0.5, cfg)
    assert abs(spectral.values[-1] - fem.values[-1]) <= 5e-3


def test_small_time_samples_are_geometric():
    s = small_time_samples("ii", 0.7, RunConfig(), 1e-4)
    assert s.times.size == 32 and s.times[-1] == 1e-4
    assert np.allclose(s.times[1:] / s.times[:-1], 2.0)


def test_case_rejects_nonzero_boundary_value():
    with pytest.raises(ParameterError):
        CaseSpec("bad", q=0.0, u0=1.0).setup(20, 0.5)
    with pytest.raises(ParameterError):
        generate_data("iii", 0.5, RunConfig())


def test_template_drops_potential_and_initial_data():
    t = CASES["i"].template(20, 0.5)
    assert np.all(t.q == 0) and np.all(t.u0 == 0) and t.g(0.75) == 1.0 and t.g(0.25) == 0.0


@pytest.mark.parametrize("bad", [
    dict(m_data=200, n_data=2000),
    dict(m_data=300),
    dict(data_source="table"),
    dict(alphas=(0.0,)),
    dict(workers=0),
])
def test_config_validation(bad):
    with pytest.raises(ParameterError):
        RunConfig(**bad)


def test_config_round_trip_and_unknown_fields():
    cfg = RunConfig(alphas=[0.5], max_iters=7)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ParameterError):
        RunConfig.from_dict({"m_inverse": 200, "colour": "red"})


def test_data_comes_from_finer_grid():
    cfg = RunConfig(**{k: v for k, v in TINY.items()})
    h, _ = generate_data("i", 0.5, cfg)
    tg = cfg.time_grid()
    direct = solve_forward(CASES["i"].setup(cfg.m_data, 0.5), None, TimeGrid(1.0, cfg.n_data))
    assert np.array_equal(h.times, tg.times)
    assert np.array_equal(h.values, direct.trace.values[::cfg.n_data // cfg.n_inverse])


def test_cell_records_everything(tmp_path):
    cell = run_cell("ii", 0.5, tiny(tmp_path), with_u0=True)
    assert cell["error"] is None
    assert set(cell["q"]) == {0.0, 0.005}
    assert cell["u0"].kind == "u0" and cell["q"][0.0].iterations <= 5


def test_failures_become_tokens(tmp_path):
    cell = run_cell("i", 0.5, tiny(tmp_path, max_degree=60))
    assert cell["error"] == "ERR:ParameterError"
    res = reproduce(tiny(tmp_path, max_degree=60), 2, "i")
    assert res["failures"] == 1
    assert "ERR:ParameterError" in (tmp_path / "i" / "table2.csv").read_text()


@pytest.mark.parametrize("table", [1, 2, 3])
def test_layout_and_determinism(tmp_path, table):
    snaps = []
    root = tmp_path / "out"
    for _ in range(2):
        shutil.rmtree(root, ignore_errors=True)
        res = reproduce(tiny(root), table, "i")
        assert res["failures"] == 0
        snaps.append({p.relative_to(root): p.read_bytes() for p in root.rglob("*") if p.is_file()})
    assert snaps[0] == snaps[1]
    files = {str(p) for p in snaps[0]}
    assert f"i/table{table}.csv" in files and f"i/run_table{table}.json" in files
    assert f"i/0.5000/table{table}.csv" in files
    if table > 1:
        assert {"i/0.5000/trace.csv", "i/0.5000/report.json"} <= files
        rep = json.loads(snaps[0][next(p for p in snaps[0] if str(p) == "i/0.5000/report.json")])
        assert rep["config"]["max_iters"] == 5 and rep["config"]["out_dir"] == str(root)


def test_table1_shape(tmp_path):
    reproduce(tiny(tmp_path, alphas=(0.3, 0.7)), 1, "ii")
    lines = (tmp_path / "ii" / "table1.csv").read_text().splitlines()
    assert lines[0] == "t0,0.3000,0.7000"
    assert [r.split(",")[0] for r in lines[1:]] == ["1e-03", "1e-05"]


def test_figures(tmp_path):
    res = reproduce(tiny(tmp_path), "figures", "ii")
    assert res["failures"] == 0
    d = tmp_path / "ii" / "0.5000" / "figures"
    names = {p.name for p in d.iterdir()}
    assert {"continuation.csv", "q_profile.csv", "u0_profile.csv", "q_history.csv"} <= names


def test_parallel_matches_serial(tmp_path):
    a = reproduce(tiny(tmp_path / "s", alphas=(0.3, 0.7)), 2, "ii")
    b = reproduce(tiny(tmp_path / "p", alphas=(0.3, 0.7), workers=2), 2, "ii")
    assert a["rows"] == b["rows"]
