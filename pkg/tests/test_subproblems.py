import numpy as np
import pytest

from conftest import make_cfg, random_instance
from wpcn import conic
from wpcn.model import EhParams, NetworkConfig, sample_channels
from wpcn.optimizer import initialize, _incumbent_powers
from wpcn.physics import (
    Allocation,
    b_matrix,
    constraint_slacks,
    harvested_energy,
    harvested_power_unit,
    rf_input_power,
    throughput_report,
)
from wpcn.subproblems import (
    build_covariance_subproblem,
    build_covariance_subproblem_det,
    build_sum_subproblem,
    build_time_lp,
    decode_covariance,
    decode_time,
    eh_underestimator_lines,
)
from wpcn.surrogate import build_surrogates, xi_bound


EH = EhParams()


# ---------------------------------------------------------------------------
# harvest under-approximation
# ---------------------------------------------------------------------------

def test_eh_lines_conservative_and_tight():
    lines = eh_underestimator_lines(EH, p_hi=2e-2, extra_nodes=[1.3e-4])
    P = np.geomspace(1e-9, 2e-2, 30000)
    pwl = np.min([a * P + b for a, b in lines], axis=0)
    true = np.array([harvested_power_unit(p, EH) for p in P])
    assert np.max(pwl - true) <= 1e-18
    op = (P > 4e-5) & (P < 8e-3)
    rel = (true[op] - pwl[op]) / true[op]
    assert rel.max() <= 2e-3
    # exact at an inserted node
    p = 1.3e-4
    assert min(a * p + b for a, b in lines) == pytest.approx(
        harvested_power_unit(p, EH), rel=1e-12)


def test_eh_lines_linear_mode():
    lines = eh_underestimator_lines(EhParams(mode="linear", zeta=0.3), p_hi=1.0)
    assert lines == [(0.3, 0.0)]


def test_eh_lines_convex_tail_only():
    # reachable range entirely below the concave region: tangents only
    lines = eh_underestimator_lines(EH, p_hi=1e-5)
    P = np.geomspace(1e-9, 1e-5, 5000)
    pwl = np.min([a * P + b for a, b in lines], axis=0)
    true = np.array([harvested_power_unit(p, EH) for p in P])
    assert np.max(pwl - true) <= 1e-18


# ---------------------------------------------------------------------------
# covariance subproblem
# ---------------------------------------------------------------------------

def _solve_cov(cfg, ch, alloc, objective="maxmin"):
    surr = build_surrogates(ch, alloc, cfg)
    extra = _incumbent_powers(alloc, ch, cfg)
    if objective == "maxmin":
        prob = build_covariance_subproblem(cfg, ch, alloc.tau, alloc, surr,
                                           eh_extra_nodes=extra)
    else:
        prob = build_sum_subproblem(cfg, ch, alloc.tau, alloc, surr,
                                    eh_extra_nodes=extra)
    sol = conic.solve(prob)
    return prob, sol, surr


def test_cov_solution_feasible_and_consistent(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch)
    prob, sol, surr = _solve_cov(cfg, ch, alloc)
    assert sol.status == "Optimal"
    new = decode_covariance(prob, sol.x, cfg, alloc.tau, alloc)
    # decoded variables satisfy the true constraints (inner approximations)
    slacks = constraint_slacks(new, ch, cfg)
    assert min(slacks.values()) >= -1e-6
    # the solver's objective equals the surrogate evaluated on the decode
    vals = []
    for k in range(cfg.K):
        X_slot = [new.X[j][0] for j in range(cfg.K)]
        Xt0 = [new.X_tilde[j][0] for j in range(cfg.K)]
        Xt1 = [new.X_tilde[j][1] for j in range(cfg.K)]
        vals.append(alloc.tau[1] * surr.uch[0][k].value(X_slot))
        vals.append(alloc.tau[1] * surr.uhap[0][k].value(X_slot)
                    + alloc.tau[2] * surr.chhap[0][k].value(Xt0))
        vals.append(alloc.tau[3] * surr.chhap[1][k].value(Xt1))
    assert sol.objective_value == pytest.approx(min(vals), abs=2e-6)


def test_cov_infeasible_when_circuit_power_huge(rng):
    cfg, ch = random_instance(rng, K=1, N=2, M=2)
    bad = NetworkConfig(K=1, N=2, M_h=cfg.M_h, M=2, Pc=0.5,
                        geometry=cfg.geometry)
    alloc = initialize(cfg, ch)  # feasible under the sane config
    surr = build_surrogates(ch, alloc, bad)
    prob = build_covariance_subproblem(bad, ch, alloc.tau, alloc, surr)
    sol = conic.solve(prob)
    assert sol.status == "Infeasible"


def test_cov_scalar_matches_two_dim_grid(rng):
    # fixed slots: optimize (p, p_tilde) by MM and compare against a dense
    # grid of the true min-rate under the same energy caps
    cfg = make_cfg(K=1, N=2, M_h=1, M=1, d_far=6.0)
    ch = sample_channels(cfg, seed=9)
    alloc = initialize(cfg, ch)
    anchor = alloc
    val = None
    for _ in range(40):
        prob, sol, _ = _solve_cov(cfg, ch, anchor)
        anchor = decode_covariance(prob, sol.x, cfg, alloc.tau, anchor)
        if val is not None and abs(sol.objective_value - val) <= 1e-7 * max(1, abs(val)):
            break
        val = sol.objective_value
    got = throughput_report(anchor, ch, cfg).min_throughput

    # grid oracle over the two transmit powers at the same tau and Q = p0
    q = cfg.p0
    b1 = abs(ch.H_hat[0][0][0, 0]) ** 2 + ch.var_h_delta[0][0]
    b2 = abs(ch.H_hat[0][1][0, 0]) ** 2 + ch.var_h_delta[0][1]
    E1 = alloc.tau[0] * harvested_power_unit(q * b1, cfg.eh)
    E2 = alloc.tau[0] * harvested_power_unit(q * b2, cfg.eh)
    t31, t41, t42 = alloc.tau[1], alloc.tau[2], alloc.tau[3]
    cap1 = (E1 - cfg.Pc[0][0]) / t31
    cap2 = (E2 - cfg.Pc[0][1])
    h1 = abs(ch.H_hat[0][0][0, 0]) ** 2
    h2 = abs(ch.H_hat[0][1][0, 0]) ** 2
    g2 = abs(ch.G_hat[0][0][0][0, 0]) ** 2
    vh1, vh2, vg = ch.var_h_delta[0][0], ch.var_h_delta[0][1], ch.var_g_delta[0][0][0]
    best = 0.0
    for p in np.linspace(0, cap1, 240):
        for w in np.linspace(0, 1, 240):
            pt1 = w * cap2 / t41
            pt2 = (1 - w) * cap2 / t42
            ru = min(t31 * np.log2(1 + h1 * p / (cfg.noise_cov_uhap + vh1 * p))
                     + t41 * np.log2(1 + h2 * pt1 / (cfg.noise_cov_chhap + vh2 * pt1)),
                     t31 * np.log2(1 + g2 * p / (cfg.noise_cov_uch + vg * p)))
            rc = t42 * np.log2(1 + h2 * pt2 / (cfg.noise_cov_chhap + vh2 * pt2))
            best = max(best, min(ru, rc))
    assert got == pytest.approx(best, rel=0.02)


def test_sum_subproblem_zero_channels():
    cfg = make_cfg(K=1, N=2, M_h=1, M=1, Pc=0.0)
    ch = sample_channels(cfg, seed=1)
    zero = type(ch)(
        tuple(tuple(np.zeros_like(h) for h in row) for row in ch.H_hat),
        tuple(tuple(tuple(np.zeros_like(g) for g in r) for r in blk)
              for blk in ch.G_hat),
        ch.var_h_delta, ch.var_g_delta)
    alloc = initialize(cfg, zero)
    surr = build_surrogates(zero, alloc, cfg)
    prob = build_sum_subproblem(cfg, zero, alloc.tau, alloc, surr)
    sol = conic.solve(prob)
    assert sol.status == "Optimal"
    assert sol.objective_value == pytest.approx(0.0, abs=1e-7)


# ---------------------------------------------------------------------------
# time LP
# ---------------------------------------------------------------------------

def test_time_lp_zero_rates(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch)
    zeroed = Allocation(
        tau=alloc.tau.copy(),
        X=tuple(tuple(np.zeros_like(x) for x in row) for row in alloc.X),
        X_tilde=tuple(tuple(np.zeros_like(x) for x in row) for row in alloc.X_tilde),
        Q=alloc.Q)
    lp = build_time_lp(cfg, ch, zeroed)
    sol = conic.solve(lp)
    assert sol.status == "Optimal"
    assert sol.objective_value == pytest.approx(0.0, abs=1e-9)


def test_time_lp_budget_tight(rng):
    for _ in range(4):
        cfg, ch = random_instance(rng, K=2, N=2, M=2)
        alloc = initialize(cfg, ch)
        lp = build_time_lp(cfg, ch, alloc)
        sol = conic.solve(lp)
        tau = decode_time(lp, sol.x)
        assert float(np.sum(tau)) == pytest.approx(cfg.time_budget(), abs=1e-6)


def test_time_lp_noncoop_pins_relay_slots(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch, cooperation=False)
    lp = build_time_lp(cfg, ch, alloc, cooperation=False)
    sol = conic.solve(lp)
    tau = decode_time(lp, sol.x)
    assert tau[cfg.N] == pytest.approx(0.0, abs=1e-10)


def test_time_lp_improves_true_objective(rng):
    # the LP is exact: its optimum re-evaluated by the rate functions
    # matches the reported value and improves on the incumbent slots
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch)
    g0 = throughput_report(alloc, ch, cfg).min_throughput
    lp = build_time_lp(cfg, ch, alloc)
    sol = conic.solve(lp)
    new = Allocation(tau=decode_time(lp, sol.x), X=alloc.X,
                     X_tilde=alloc.X_tilde, Q=alloc.Q)
    g1 = throughput_report(new, ch, cfg).min_throughput
    assert g1 >= g0 - 1e-9
    assert g1 == pytest.approx(sol.objective_value, rel=1e-6, abs=1e-9)


# ---------------------------------------------------------------------------
# deterministic-signal subproblem
# ---------------------------------------------------------------------------

def test_det_subproblem_solves_and_decodes(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch, signal="det")
    surr = build_surrogates(ch, alloc, cfg)
    tau2 = float(alloc.tau[0])
    xi = {(k, n): 1.1 * xi_bound(b_matrix(ch, k, n, cfg.M_h), cfg.p0, cfg.eh, tau2)
          for k in range(cfg.K) for n in range(cfg.N)}
    prob = build_covariance_subproblem_det(cfg, ch, alloc.tau, alloc.x0, xi,
                                           surr, alloc)
    sol = conic.solve(prob)
    assert sol.status == "Optimal"
    new = decode_covariance(prob, sol.x, cfg, alloc.tau, alloc)
    assert new.x0 is not None and new.Q is None
    assert float(np.vdot(new.x0, new.x0).real) <= cfg.p0 * (1 + 1e-9)
    slacks = constraint_slacks(new, ch, cfg)
    assert min(slacks.values()) >= -1e-6


def test_det_rank_one_matrix_feasible_for_random_problem(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    alloc = initialize(cfg, ch, signal="det")
    Q = np.outer(alloc.x0, alloc.x0.conj())
    swapped = Allocation(tau=alloc.tau.copy(), X=alloc.X,
                         X_tilde=alloc.X_tilde, Q=Q)
    s1 = constraint_slacks(alloc, ch, cfg)
    s2 = constraint_slacks(swapped, ch, cfg)
    for key in s1:
        assert s2[key] == pytest.approx(s1[key], rel=1e-9, abs=1e-15)
