import math

import numpy as np
import pytest

from lseig.experiments import (ConvergenceTable, ExperimentConfig, adaptive_slope, fit_rate, format_value,
                               run_apriori, run_curl_failure, write_csv)
from lseig.formulations import ErrorRecord


def test_fit_rate_examples():
    h = [0.5, 0.25, 0.125]
    assert fit_rate(zip(h, [x**2 for x in h])) == pytest.approx(2.0)
    assert fit_rate([(100, 1.0), (1000, 0.1), (10000, 0.01)]) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        fit_rate([(0.5, 1.0)])
    with pytest.raises(ValueError):
        fit_rate([(0.5, 1.0), (0.25, 0.0)])
    with pytest.raises(ValueError):
        fit_rate([(0.5, 1.0), (0.5, 2.0)])


def test_format_value():
    assert format_value(3) == "3"
    assert format_value(True) == "1"
    assert format_value(float("nan")) == "nan"
    assert format_value(0.1) == "1.00000000000e-01"
    assert format_value(np.float64(2 * math.pi**2)) == "1.97392088022e+01"


def test_write_csv(tmp_path):
    p = write_csv(tmp_path / "a" / "t.csv", ["x", "y"], [[1, 0.5], [2, float("nan")]])
    assert p.read_text() == "x,y\n1,5.00000000000e-01\n2,nan\n"


def _rec(v):
    return ErrorRecord(v, v, v, v, v)


def test_table_rates_and_order(tmp_path):
    t = ConvergenceTable("demo", 1)
    for lev, h in enumerate([0.5, 0.25, 0.125, 0.0625]):
        t.add(lev, h, 10, 5, [1.0], _rec(h**2), eta=h)
    r = t.rates()
    assert r["err_lambda"] == pytest.approx(2.0)
    assert r["eta"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        t.add(4, 0.0625, 10, 5, [1.0], _rec(1.0))
    t.write_rates(tmp_path / "r.csv")
    head = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert head.startswith("method,uncovered_by_theory,err_lambda")


def test_config_validation():
    cfg = ExperimentConfig("apriori", "f1star", "bdm1", "lshape")
    assert (cfg.formulation, cfg.sigma, cfg.domain) == ("F1star", "BDM1", "l-shape")
    for bad in (dict(experiment="nope"), dict(formulation="ls"), dict(sigma="p2"), dict(domain="disk"),
                dict(k=0), dict(levels=0), dict(thetas=(1.2,)), dict(quad_degree=0)):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_apriori_small_run(tmp_path):
    cfg = ExperimentConfig("apriori", "f1", "rt0", "square", levels=3, out=tmp_path, start=2)
    t = run_apriori(cfg)
    assert len(t.rows) == 3
    assert not t.uncovered_by_theory
    assert t.column("err_lambda")[-1] < t.column("err_lambda")[0]
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "apriori_f1_rt0_square.csv" in names
    assert "apriori_f1_rt0_square_rates.csv" in names
    first = (tmp_path / "apriori_f1_rt0_square.csv").read_bytes()
    run_apriori(cfg)
    assert (tmp_path / "apriori_f1_rt0_square.csv").read_bytes() == first


def test_cg1vec_flagged_uncovered(tmp_path):
    t = run_apriori(ExperimentConfig("apriori", "f1", "cg1vec", "square", levels=2, start=2))
    assert t.uncovered_by_theory


def test_llstar_and_f1star_tables():
    ll = run_apriori(ExperimentConfig("apriori", "llstar", "rt0", "square", levels=3, start=2))
    f1 = run_apriori(ExperimentConfig("apriori", "f1", "rt0", "square", levels=3, start=2))
    fs = run_apriori(ExperimentConfig("apriori", "f1star", "rt0", "square", levels=3, start=2))
    assert np.all(np.isnan(ll.column("err_divsigma_L2")))
    assert np.all(np.diff(ll.column("err_lambda")) < 0)
    # after the (lambda + 1) rescale the F1* flux errors equal the F1 ones
    np.testing.assert_allclose(fs.column("err_sigma_L2"), f1.column("err_sigma_L2"), rtol=1e-6)


def test_curl_failure_short(tmp_path):
    res = run_curl_failure(ExperimentConfig("curl-failure", "f1", "cg1vec", "lshape", levels=3, out=tmp_path))
    assert res.mode_errors(res.curl_rows)[-1] > 0.1
    assert len(res.control_rows) == 3
    assert (tmp_path / "curl_failure_summary.csv").exists()


class _R:
    def __init__(self, ndof, err):
        self.ndof, self.err_lambda = ndof, err


def test_adaptive_slope_window():
    recs = [_R(n, 5.0 / n) for n in (10, 30, 100, 300, 1000, 3000)]
    recs[0].err_lambda = 7.0
    assert adaptive_slope(recs) == pytest.approx(-1.0)
    assert adaptive_slope(recs[1:4]) == pytest.approx(-1.0)
