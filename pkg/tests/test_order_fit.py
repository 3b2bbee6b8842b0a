import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracinv.errors import ParameterError
from fracinv.harness import RunConfig, small_time_samples
from fracinv.order_fit import (_profile, _weights, fit_order, geometric_times,
                               order_window_scan, write_table1)
from fracinv.problem import Trace

CFG = RunConfig()


def _model(alpha, c0, c1, t0=1e-3):
    t = geometric_times(t0)
    return Trace(t, c0 + c1 * t ** alpha)


def test_exact_model():
    r = fit_order(_model(0.5, 2.0, -3.0), 1e-3)
    assert r.alpha_hat == pytest.approx(0.5, abs=1e-6)
    assert r.c0 == pytest.approx(2.0, abs=1e-6)
    assert r.c1 == pytest.approx(-3.0, rel=1e-6)
    assert r.identifiable


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-5, 5), st.floats(0.1, 5), st.sampled_from([1e-2, 1e-5, 1e-9]),
       st.booleans())
def test_exact_model_any_window(alpha, c0, c1, t0, neg):
    c1 = -c1 if neg else c1
    r = fit_order(_model(alpha, c0, c1, t0), t0)
    assert abs(r.alpha_hat - alpha) <= 1e-6
    assert abs(r.c0 - c0) <= 1e-6 * max(1, abs(c0))
    assert abs(r.c1 - c1) <= 1e-6 * abs(c1)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 2**31 - 1))
def test_inner_residual_is_orthogonal(alpha, seed):
    rng = np.random.default_rng(seed)
    t = geometric_times(1.0)
    y = rng.standard_normal(t.size)
    sw = np.sqrt(_weights(t))
    _, c0, c1 = _profile(alpha, t, y, sw)
    res = (c0 + c1 * t ** alpha - y) * sw ** 2
    for b in (np.ones_like(t), t ** alpha):
        assert abs(res @ b) <= 1e-10 * np.linalg.norm(y * sw) * np.linalg.norm(b * sw)


def test_constant_trace_unidentifiable():
    t = geometric_times(1e-4)
    r = fit_order(Trace(t, np.full(t.size, 3.0)), 1e-4)
    assert r.c1 == 0.0 and not r.identifiable
    assert r.c0 == pytest.approx(3.0)
    assert 0 <= r.alpha_hat <= 1


def test_contract_errors():
    t = geometric_times(1e-3, 7)
    with pytest.raises(ParameterError):
        fit_order(Trace(t, t), 1e-3)
    with pytest.raises(ParameterError):
        order_window_scan(_model(0.5, 1, 1), [1e-5, 1e-3])


def _alpha_hat(case, alpha, t0):
    return fit_order(small_time_samples(case, alpha, CFG, t0), t0).alpha_hat


def test_case_i_cell_07():
    assert _alpha_hat("i", 0.7, 1e-7) == pytest.approx(0.7, abs=5e-3)


def test_case_ii_large_window_fails_as_documented():
    # the window is far too large for the asymptotics; the fit lands near 0
    assert _alpha_hat("ii", 0.3, 1e-3) < 0.05


def test_case_i_09_column():
    res = order_window_scan(lambda t0: small_time_samples("i", 0.9, CFG, t0),
                            [1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10])
    assert all(abs(r.alpha_hat - 0.9) <= 5e-3 for r in res)


def test_case_ii_05_smallest_windows():
    res = order_window_scan(lambda t0: small_time_samples("ii", 0.5, CFG, t0), [1e-9, 1e-10])
    assert all(abs(r.alpha_hat - 0.5) <= 5e-3 for r in res)


@pytest.mark.parametrize("case", ["i", "ii"])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
def test_error_shrinks_with_window(case, alpha):
    err = [abs(_alpha_hat(case, alpha, t0) - alpha) for t0 in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9)]
    assert all(b <= a + 1e-12 for a, b in zip(err, err[1:]))


def test_table_csv_shape(tmp_path):
    windows = [1e-3, 1e-4]
    alphas = [0.3, 0.5]
    table = [[fit_order(_model(a, 1, -1, w), w) for a in alphas] for w in windows]
    table[1][1] = "ERR:ParameterError"
    write_table1(tmp_path / "t.csv", windows, alphas, table)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t0,0.3000,0.5000"
    assert lines[1] == "1e-03,0.3000,0.5000"
    assert lines[2].endswith("ERR:ParameterError")
