import numpy as np
import pytest

from decentsim.dgp import DGPConfig
from decentsim.estimator import RegressionSpec
from decentsim.model import DistributionSpec
from decentsim.montecarlo import MCResult, ReplicationError, replication_seed, run_mc, run_model_mc

SMALL = DGPConfig(n_municipalities=15, schools_per_municipality=4, pupils_per_school=8)


def test_single_replication_degenerate_case():
    res = run_mc(SMALL, n_reps=1, base_seed=3)
    assert res.mean_estimate == res.estimates[0]
    assert res.rmse == pytest.approx(abs(res.bias), abs=1e-12)
    assert res.sd_estimates == 0.0


def test_result_identities():
    res = run_mc(SMALL, n_reps=25, base_seed=4)
    assert res.bias == res.mean_estimate - res.true_att
    n = res.n_reps
    assert res.rmse**2 == pytest.approx(res.bias**2 + res.sd_estimates**2 * (n - 1) / n, abs=1e-9)
    assert 0 <= res.ci_coverage_95 <= 1 and 0 <= res.rejection_rate_5pct <= 1
    assert len(res.records()) == n


def test_seeds_depend_only_on_base_and_index():
    assert replication_seed(7, 3) == replication_seed(7, 3)
    assert replication_seed(7, 3) != replication_seed(7, 4)
    a = run_mc(SMALL, n_reps=6, base_seed=9)
    b = run_mc(SMALL, n_reps=4, base_seed=9)
    np.testing.assert_array_equal(a.estimates[:4], b.estimates)


def test_parallel_matches_serial_bitwise():
    serial = run_mc(SMALL, n_reps=6, base_seed=11, n_jobs=1)
    parallel = run_mc(SMALL, n_reps=6, base_seed=11, n_jobs=2)
    np.testing.assert_array_equal(serial.estimates, parallel.estimates)
    np.testing.assert_array_equal(serial.ses, parallel.ses)
    assert serial.summary() == parallel.summary()


def test_failure_names_replication_and_seed():
    bad = RegressionSpec("score_math", ("no_such_column",), (("post", "public"),))
    with pytest.raises(ReplicationError, match=r"replication 0 \(seed \d+\)"):
        run_mc(SMALL, bad, n_reps=2, base_seed=1)
    with pytest.raises(ValueError):
        run_mc(SMALL, n_reps=0)


def test_mc_result_coverage_from_records():
    res = MCResult(4, 1.0, np.array([1.0, 1.0, 5.0, 1.5]), np.array([1.0, 1.0, 1.0, 1.0]), np.arange(4))
    assert res.ci_coverage_95 == 0.75
    assert res.rejection_rate_5pct == 0.25


def test_model_mc_point_mass_is_zero():
    grid = [(1.0, 3.0), (2.0, 4.0), (0.5, 2.5)]
    table = run_model_mc(DistributionSpec("point", (0.4,)), grid, 200, seed=1)
    assert len(table) == 3
    assert (table.lambda_gain.abs() <= 2 * table.standard_error).all()
    assert (table.lambda_gain == 0).all()


def test_model_mc_wider_family_gains_more():
    grid = [(1.0, 2.0), (1.0, 3.0), (2.0, 6.0)]
    wide = run_model_mc(DistributionSpec("uniform", (-1.0, 1.0)), grid, 300, seed=2)
    narrow = run_model_mc(DistributionSpec("uniform", (-0.5, 0.5)), grid, 300, seed=2)
    assert (wide.lambda_gain >= narrow.lambda_gain).all()


def test_model_mc_budget_homogeneity():
    spec = DistributionSpec("normal", (0.2, 1.0))
    base = run_model_mc(spec, [(1.0, 3.0)], 300, seed=3)
    doubled = run_model_mc(spec, [(2.0, 6.0)], 300, seed=3)
    assert doubled.lambda_gain[0] == pytest.approx(2 * base.lambda_gain[0], abs=1e-9)
