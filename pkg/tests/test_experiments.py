import math

import numpy as np
import pytest

from smanakov.config import config_from_mapping
from smanakov.experiments import (
    _restrict,
    as_constants,
    as_convergence,
    as_order,
    blowup_sweep,
    cost_benchmark,
    error_sweep,
    l2_drift,
    map_samples,
    probability_convergence,
    run_experiment,
    soliton_study,
    strong_convergence,
)

BASE = {
    "problem.gamma": 1.0,
    "problem.half_width": 20 * math.pi,
    "problem.num_points": 64,
    "time.T": 0.5,
    "solver.schemes": ["LT", "EXP", "CN", "RELAX"],
}


def make(experiment, **extra):
    return config_from_mapping({"experiment": experiment, **BASE, **extra})


@pytest.fixture(scope="module")
def small_sweep():
    cfg = make("strong", **{"time.N": [8, 16, 32, 64], "time.N_ref": 64, "sampling.samples": 3})
    return cfg, error_sweep(cfg)


def test_self_comparison_is_exactly_zero(small_sweep):
    _, sw = small_sweep
    for name in sw.schemes:
        assert sw.max_err[name].shape == (3, 4)
    assert np.all(sw.max_err["LT"][:, -1] == 0.0)
    assert np.all(sw.final_err["LT"][:, -1] == 0.0)
    assert not sw.ref_failed.any()


def test_single_sample_at_reference_resolution():
    cfg = make("strong", **{"time.N": [32], "time.N_ref": 32, "solver.schemes": ["LT"]})
    assert np.all(strong_convergence(cfg)["LT"].errors == 0.0)


def test_strong_table(small_sweep):
    cfg, sw = small_sweep
    tables = strong_convergence(cfg, sw)
    for name, tab in tables.items():
        assert np.all(tab.errors >= 0)
        np.testing.assert_allclose(tab.h * np.array(tab.Ns), cfg.time.T)
        np.testing.assert_allclose(tab.mean_sq_err, (tab.errors**2).mean(axis=0))
        assert np.all(tab.excluded == 0)
    # the coarse schemes stay close to each other (common path)
    lt = tables["LT"].errors[:, 0]
    for name in ("EXP", "CN", "RELAX"):
        assert np.all(np.abs(tables[name].errors[:, 0] - lt) < 0.5 * lt)


def test_restrict_matches_direct_run(small_sweep):
    cfg, sw = small_sweep
    sub = make("strong", **{"time.N": [16, 32], "time.N_ref": 64, "sampling.samples": 3})
    direct = error_sweep(sub)
    view = _restrict(sw, [16, 32])
    for name in sw.schemes:
        np.testing.assert_array_equal(view.max_err[name], direct.max_err[name])


def test_worker_count_does_not_change_numbers(small_sweep):
    cfg, sw = small_sweep
    sw2 = error_sweep(cfg, workers=3)
    for name in sw.schemes:
        np.testing.assert_array_equal(sw.max_err[name], sw2.max_err[name])


def test_probability_estimate(small_sweep):
    cfg, sw = small_sweep
    cfg.stats.constants = [0.0, 0.1, 1.0, 1e9]
    est = probability_convergence(cfg, sw)["LT"]
    assert np.all(est.P[:, 0] == 1.0)
    assert np.all(est.P[:, -1] == 0.0)
    assert np.all((est.P >= 0) & (est.P <= 1))
    assert np.all(np.diff(est.P, axis=1) <= 0)
    S = est.C.shape[-1]
    # exactly k samples exceed C(delta, h, k/S); C at P=0 is the maximum
    for d, delta in enumerate(est.deltas):
        ratio = sw.max_err["LT"] / est.h**delta
        for j in range(len(est.Ns)):
            for k in range(S):
                assert (ratio[:, j] > est.C[d, j, k]).sum() == k or est.C[d, j, k] == est.C[d, j, k - 1]
            assert est.C[d, j, 0] == ratio[:, j].max()
    assert np.nanmax(est.C_tilde[:, :, 0]) == pytest.approx(1.0)


def test_as_constants_defining_property():
    rng = np.random.default_rng(0)
    h = 2.0 ** -np.arange(3, 9)
    e = rng.uniform(0.1, 1, (20, h.size)) * h**0.5
    for delta in (0.3, 0.5, 0.7):
        K, ed = as_constants(e, h, delta)
        bound = K[:, None] * h**delta
        assert np.all(bound >= e * (1 - 1e-15))
        assert np.all(np.isclose(bound, e, rtol=1e-14).any(axis=1))
        assert np.all(ed >= 0)


def test_as_single_step_size():
    e = np.array([[0.3], [0.1], [0.2]])
    for delta in (0.4, 0.5, 0.6):
        _, ed = as_constants(e, [0.01], delta)
        assert np.all(ed == 0)


def test_as_synthetic_power_law():
    h = 2.0 ** -np.arange(5, 11)
    c = np.array([[1.0], [2.0], [0.5]])
    e = c * h**0.5
    est = as_order("LT", e, h, [0.4, 0.45, 0.5, 0.55, 0.6])
    assert np.all(np.abs(est.e_delta[2]) < 1e-15)
    for d in (0, 1, 3, 4):
        assert np.all(est.e_delta[d] > 0)
    assert int(np.argmin(est.mean)) == 2


def test_as_convergence_p_values(small_sweep):
    cfg, sw = small_sweep
    out = as_convergence(cfg, sw)
    for est in out.values():
        assert set(est.p_value) == {0.4, 0.45, 0.55, 0.6}
        assert all(0 <= p <= 1 for p in est.p_value.values())


def test_cost_benchmark(small_sweep):
    cfg, sw = small_sweep
    cost = cost_benchmark(cfg, sw)
    for name, (Ns, wall, msq) in cost.items():
        assert Ns == [8, 16, 32, 64] and np.all(wall > 0)
        assert msq[-1] == 0.0 if name == "LT" else np.all(np.isfinite(msq))


def test_drift():
    cfg = make("drift", **{"time.N": [64], "sampling.samples": 2})
    drift = l2_drift(cfg)
    assert drift["LT"].shape == (2,)
    assert np.all(drift["LT"] < 1e-12)
    assert np.all(drift["EXP"] > 1e4 * drift["LT"].max())
    cfg_zero = make("drift", **{"time.N": [16], "initial.kind": "soliton", "initial.eta": 1.0})
    cfg_zero.solver.schemes = ["LT", "CN"]
    # an all-zero field has zero drift
    cfg_zero.initial.params = {"solitons": []}
    cfg_zero.initial.kind = "soliton_sum"
    zero = l2_drift(cfg_zero)
    assert np.all(zero["LT"] == 0) and np.all(zero["CN"] == 0)


def test_soliton_study_shares_path():
    cfg = make("soliton", **{"time.N": [32], "time.T": 0.5, "problem.num_points": 256,
                             "sweep.gammas": [0.0, 1.0], "sweep.sets": [1]})
    runs = soliton_study(cfg)
    assert [(r.gamma, r.coefficient_set) for r in runs] == [(0.0, 1), (1.0, 1)]
    det = runs[0]
    assert det.failure is None
    assert det.mass_center_slope == pytest.approx(-2.0, rel=0.02)
    assert set(det.series) == {"l2", "h1", "hamiltonian", "mass_center", "pulse_width"}


def test_blowup_sweep_is_deterministic():
    cfg = make("blowup", **{"time.N": [64], "time.T": 0.01, "problem.num_points": 512,
                            "sweep.gammas": [0.0, 1.0], "sweep.sigmas": [1.0, 3.0],
                            "initial.kind": "soliton_sum", "solver.schemes": ["LT"],
                            "solver.blowup_threshold": 30.0, "sampling.samples": 2})
    a = blowup_sweep(cfg)
    b = blowup_sweep(cfg, workers=2)
    assert [repr(r) for r in a] == [repr(r) for r in b]
    assert len(a) == 2 + 4  # gamma = 0 runs one sample
    low = [r for r in a if r.sigma == 1.0 and r.gamma == 0.0][0]
    assert not low.crossed and math.isnan(low.crossing_time) and low.steps_completed == 64


def test_run_experiment_tables(small_sweep):
    cfg, _ = small_sweep
    cfg.time.N = [16, 32]
    cfg.sampling.samples = 2
    for kind in ("strong", "probability", "as", "cost"):
        cfg.experiment = kind
        rep = run_experiment(cfg)
        assert rep.tables and all(rows for rows in rep.tables.values())
    assert rep.volatile == ("timings",)


def test_map_samples_order():
    assert map_samples(abs, [-3, 2, -1], workers=2) == [3, 2, 1]
