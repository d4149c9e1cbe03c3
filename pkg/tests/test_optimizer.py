import numpy as np
import pytest

from conftest import make_cfg, random_instance
from wpcn.model import NetworkConfig, build_geometry, sample_channels
from wpcn.optimizer import (
    InfeasibleInstance,
    SolveOptions,
    initialize,
    run,
    run_noncooperative,
)
from wpcn.physics import constraint_slacks, throughput_report


FAST = SolveOptions(max_outer=12, tau2_probes=1)


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(outer_tol=0.0)
    with pytest.raises(ValueError):
        SolveOptions(objective="best")
    with pytest.raises(ValueError):
        SolveOptions(max_inner=0)
    assert SolveOptions.table1().tau2_probes == 0


def test_initialize_feasible(rng):
    for seed in range(3):
        cfg, ch = random_instance(rng, K=2, N=2, M=2)
        alloc = initialize(cfg, ch, seed=seed)
        alloc.validate(cfg)
        slacks = constraint_slacks(alloc, ch, cfg)
        assert min(slacks.values()) >= -1e-9


def test_initialize_symmetric_for_identical_clusters():
    # identical channels across clusters give an identical canonical start
    cfg = make_cfg(K=2, N=2, M_h=2, M=2, rho_h=1.0, rho_g=1.0)
    ch = sample_channels(cfg, seed=4)
    sym = type(ch)(
        (ch.H_hat[0], ch.H_hat[0]),
        (ch.G_hat[0], ch.G_hat[0]),
        (ch.var_h_delta[0], ch.var_h_delta[0]),
        (ch.var_g_delta[0], ch.var_g_delta[0]))
    alloc = initialize(cfg, sym, seed=0)
    np.testing.assert_allclose(alloc.X[0][0], alloc.X[1][0])
    np.testing.assert_allclose(alloc.X_tilde[0][1], alloc.X_tilde[1][1])


def test_initialize_rejects_unpayable_circuit_power(rng):
    cfg, ch = random_instance(rng, K=1, N=2, M=1)
    bad = NetworkConfig(K=1, N=2, M_h=1, M=1, Pc=0.1, geometry=cfg.geometry)
    with pytest.raises(InfeasibleInstance):
        initialize(bad, ch)


def test_zero_channels_zero_objective():
    cfg = make_cfg(K=1, N=2, M_h=1, M=1, Pc=0.0)
    ch = sample_channels(cfg, seed=1)
    zero = type(ch)(
        tuple(tuple(np.zeros_like(h) for h in row) for row in ch.H_hat),
        tuple(tuple(tuple(np.zeros_like(g) for g in r) for r in blk)
              for blk in ch.G_hat),
        ch.var_h_delta, ch.var_g_delta)
    alloc, rep, trace = run(cfg, zero, SolveOptions.table1(max_outer=5))
    assert rep.min_throughput == pytest.approx(0.0, abs=1e-9)
    assert len(trace.outer_objectives) == 1


def test_run_monotone_and_feasible(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc, rep, trace = run(cfg, ch, FAST)
    v = trace.outer_objectives
    assert all(v[i + 1] >= v[i] - 1e-6 for i in range(len(v) - 1))
    for inner in trace.inner_objectives:
        assert all(inner[i + 1] >= inner[i] - 1e-6 for i in range(len(inner) - 1))
    slacks = constraint_slacks(alloc, ch, cfg)
    assert min(slacks.values()) >= -1e-6
    # the reported minimum is attained by some user
    assert abs(rep.r_user.min() - rep.min_throughput) <= 1e-6 * max(rep.min_throughput, 1e-12)


def test_final_report_consistent_with_physics(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc, rep, _ = run(cfg, ch, FAST)
    again = throughput_report(alloc, ch, cfg)
    assert again.min_throughput == pytest.approx(rep.min_throughput, rel=1e-12)


def test_noncoop_pins_relay_slots(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc, rep, _ = run_noncooperative(cfg, ch, FAST)
    assert alloc.tau[cfg.N] == 0.0
    assert float(np.trace(alloc.S_tilde(0, 0)).real) == pytest.approx(0.0, abs=1e-20)


def test_coop_at_least_noncoop_same_draw(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    a_nc, r_nc, _ = run_noncooperative(cfg, ch, FAST)
    a_c, r_c, _ = run(cfg, ch, FAST, baseline=a_nc)
    assert r_c.min_throughput >= r_nc.min_throughput - 1e-9


def test_sum_variant_runs(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc, rep, trace = run(cfg, ch, SolveOptions(objective="sum", max_outer=10,
                                                  tau2_probes=1))
    v = trace.outer_objectives
    assert all(v[i + 1] >= v[i] - 1e-6 for i in range(len(v) - 1))
    assert rep.sum_throughput > 0


def test_det_variant_monotone_and_feasible(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc, rep, trace = run(cfg, ch, SolveOptions(signal="det", max_outer=10,
                                                  tau2_probes=1))
    assert alloc.x0 is not None
    v = trace.outer_objectives
    assert all(v[i + 1] >= v[i] - 1e-6 for i in range(len(v) - 1))
    assert min(constraint_slacks(alloc, ch, cfg).values()) >= -1e-6


def test_trace_csv(tmp_path):
    cfg = make_cfg(K=1, N=2, M_h=2, M=2, d_far=6.0)
    ch = sample_channels(cfg, seed=2)
    _, _, trace = run(cfg, ch, SolveOptions.table1(max_outer=4))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "outer_iter,stage,objective"
    assert len(text) > 2
