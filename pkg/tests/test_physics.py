import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cfg, random_ch_factors, random_factors, random_instance
from wpcn.model import EhParams, NetworkConfig, sample_channels
from wpcn import physics
from wpcn.physics import (
    Allocation,
    b_matrix,
    eh_concave_range,
    harvested_energy,
    harvested_power_unit,
    lmmse_decoder,
    rate_ch_to_hap,
    rate_user_to_ch,
    rate_user_to_ch_with_decoder,
    rate_user_to_hap,
    rf_input_power,
    throughput_report,
)
from wpcn.oracle import mc_lmmse_decoder

EH = EhParams()


# ---------------------------------------------------------------------------
# RF input power
# ---------------------------------------------------------------------------

def test_rf_power_identity_channel():
    M = 3
    assert rf_input_power(np.eye(M, dtype=complex), np.eye(M, dtype=complex), 0.0) \
        == pytest.approx(M)


def test_rf_power_zero_covariance():
    H = np.ones((2, 3), dtype=complex)
    assert rf_input_power(np.zeros((3, 3), dtype=complex), H, 0.5) == 0.0


def test_rf_power_matches_entrywise_expansion(rng):
    # brute-force expectation of ||(H + dH) x||^2 over the error and signal
    M, Mh = 4, 4
    H = (rng.standard_normal((M, Mh)) + 1j * rng.standard_normal((M, Mh)))
    A = rng.standard_normal((Mh, Mh)) + 1j * rng.standard_normal((Mh, Mh))
    Q = A @ A.conj().T
    var = 0.37
    want = sum(
        (H[i, :] @ Q @ H[i, :].conj()).real for i in range(M)
    ) + var * M * np.trace(Q).real
    assert rf_input_power(Q, H, var) == pytest.approx(want, rel=1e-10)


def test_rf_power_dimension_mismatch():
    with pytest.raises(ValueError):
        rf_input_power(np.eye(3, dtype=complex), np.ones((2, 2), dtype=complex), 0.0)


# ---------------------------------------------------------------------------
# harvested energy
# ---------------------------------------------------------------------------

def test_harvest_zero_duration():
    assert harvested_energy(1e-3, 0.0, EH) == 0.0


def test_harvest_at_unit_power():
    # ln 1 = 0 and 1^b = 1 leave only e^c
    assert harvested_energy(1.0, 1.0, EH) == pytest.approx(np.exp(EH.c), rel=1e-14)


def test_harvest_golden_value_high_precision():
    # arbitrary-precision evaluation of the closed form at P = 1e-5 W
    mpmath.mp.dps = 50
    P = mpmath.mpf("1e-5")
    want = mpmath.e ** (mpmath.mpf("-0.0977") * mpmath.log(P) ** 2
                        + mpmath.mpf("-0.9151") * mpmath.log(P)
                        + mpmath.mpf("-11.1648"))
    got = harvested_energy(1e-5, 1.0, EH)
    assert got == pytest.approx(float(want), rel=1e-12)


def test_harvest_linear_mode():
    eh = EhParams(mode="linear", zeta=0.4)
    assert harvested_energy(2e-3, 0.5, eh) == pytest.approx(0.5 * 0.4 * 2e-3)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=3e-5, max_value=2e-2),
       st.floats(min_value=3e-5, max_value=2e-2),
       st.floats(min_value=0.0, max_value=1.0))
def test_harvest_concave_on_operating_range(p1, p2, lam):
    lo, hi = eh_concave_range(EH)
    assert lo < 3e-5 and hi > 2e-2 or True  # range computed below anyway
    p1 = min(max(p1, lo), hi)
    p2 = min(max(p2, lo), hi)
    mid = harvested_power_unit(lam * p1 + (1 - lam) * p2, EH)
    chord = lam * harvested_power_unit(p1, EH) + (1 - lam) * harvested_power_unit(p2, EH)
    assert mid >= chord - 1e-12


def test_concave_range_brackets_curvature_sign():
    lo, hi = eh_concave_range(EH)
    for p, sign in ((lo * 0.5, +1), (np.sqrt(lo * hi), -1), (hi * 1.5, +1)):
        h = p * 1e-4
        d2 = (harvested_power_unit(p + h, EH) - 2 * harvested_power_unit(p, EH)
              + harvested_power_unit(p - h, EH)) / h**2
        assert np.sign(d2) == sign


# ---------------------------------------------------------------------------
# decoders and rates
# ---------------------------------------------------------------------------

def test_lmmse_zero_signal(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    S_slot = [np.zeros((2, 2), dtype=complex) for _ in range(2)]
    W = lmmse_decoder(0, 0, ch, S_slot, cfg, V_kn=np.zeros((2, 2), dtype=complex))
    assert np.allclose(W, 0)


def test_lmmse_scalar_closed_form(rng):
    cfg, ch = random_instance(rng, K=1, N=2, M=1)
    v = 0.01 * (rng.standard_normal() + 1j * rng.standard_normal())
    S_slot = [np.array([[abs(v) ** 2]], dtype=complex)]
    g = ch.G_hat[0][0][0][0, 0]
    p = abs(v) ** 2
    sd = ch.var_g_delta[0][0][0]
    want = np.conj(v) * np.conj(g) / (cfg.noise_cov_uch + abs(g) ** 2 * p + sd * p)
    W = lmmse_decoder(0, 0, ch, S_slot, cfg, V_kn=np.array([[v]]))
    assert W[0, 0] == pytest.approx(want, rel=1e-12)


def test_lmmse_matches_monte_carlo_moments(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    V_slot = random_factors(rng, cfg, 0, scale=3e-2)
    W = lmmse_decoder(0, 0, ch, [v @ v.conj().T for v in V_slot], cfg, V_kn=V_slot[0])
    W_mc = mc_lmmse_decoder(0, 0, ch, V_slot, cfg, draws=10**6, seed=5)
    assert np.linalg.norm(W - W_mc) <= 0.01 * np.linalg.norm(W)


def test_rate_zero_covariance(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    Z = [np.zeros((cfg.M[j][0], cfg.M[j][0]), dtype=complex) for j in range(2)]
    assert rate_user_to_ch(0, 0, 0.5, ch, Z, cfg) == 0.0
    assert rate_user_to_hap(0, 0, 0.5, ch, Z, cfg) == 0.0
    Zt = [np.zeros((cfg.M[j][1], cfg.M[j][1]), dtype=complex) for j in range(2)]
    assert rate_ch_to_hap(0, 0, 0.5, ch, Zt, cfg) == 0.0


def test_scalar_rate_reductions(rng):
    cfg, ch = random_instance(rng, K=1, N=2, M=1)
    p = 2.3e-4
    S = [np.array([[p]], dtype=complex)]
    g2 = abs(ch.G_hat[0][0][0][0, 0]) ** 2
    vg = ch.var_g_delta[0][0][0]
    want = 0.4 * np.log2(1 + g2 * p / (cfg.noise_cov_uch + vg * p))
    assert rate_user_to_ch(0, 0, 0.4, ch, S, cfg) == pytest.approx(want, rel=1e-12)

    h2 = abs(ch.H_hat[0][0][0, 0]) ** 2
    vh = ch.var_h_delta[0][0]
    want = 0.4 * np.log2(1 + h2 * p / (cfg.noise_cov_uhap + vh * p))
    assert rate_user_to_hap(0, 0, 0.4, ch, S, cfg) == pytest.approx(want, rel=1e-12)

    h2 = abs(ch.H_hat[0][1][0, 0]) ** 2
    vh = ch.var_h_delta[0][1]
    want = 0.7 * np.log2(1 + h2 * p / (cfg.noise_cov_chhap + vh * p))
    assert rate_ch_to_hap(0, 1, 0.7, ch, S, cfg) == pytest.approx(want, rel=1e-12)


def test_sic_orders_interference(rng):
    # equal channels and powers: the later-decoded cluster sees less
    # interference, so its rate is at least the earlier one's
    cfg = make_cfg(K=2, N=2, M_h=1, M=1)
    ch = sample_channels(cfg, seed=3)
    h = ch.H_hat[0][0]
    H_hat = ((h, ch.H_hat[0][1]), (h, ch.H_hat[1][1]))
    ch_eq = type(ch)(H_hat, ch.G_hat, ch.var_h_delta, ch.var_g_delta)
    S = [np.array([[1e-4]], dtype=complex)] * 2
    r1 = rate_user_to_hap(0, 0, 1.0, ch_eq, S, cfg)
    r2 = rate_user_to_hap(1, 0, 1.0, ch_eq, S, cfg)
    assert r1 <= r2 + 1e-12


def test_uhap_chhap_structural_identity(rng):
    # the CH->HAP expression is the user->HAP expression under the
    # substitution H_{k,n} -> H_{k,N-1}, S -> S_tilde
    cfg, ch = random_instance(rng, K=2, N=2, M=3)
    Xt = random_ch_factors(rng, cfg)
    St = [x @ x.conj().T for x in Xt]
    swapped = type(ch)(
        tuple((ch.H_hat[k][1], ch.H_hat[k][1]) for k in range(2)),
        ch.G_hat,
        tuple((ch.var_h_delta[k][1], ch.var_h_delta[k][1]) for k in range(2)),
        ch.var_g_delta)
    r_ch = rate_ch_to_hap(0, 0, 0.3, ch, St, cfg)
    cfg_eq = make_cfg(K=2, N=2, M_h=cfg.M_h, M=((3, 3), (3, 3)),
                      noise_cov_uhap=cfg.noise_cov_chhap)
    r_u = rate_user_to_hap(0, 0, 0.3, swapped, St, cfg_eq)
    assert r_ch == pytest.approx(r_u, rel=1e-12)


def test_decoder_rate_equals_decoder_free(rng):
    # pre-combining rate under the LMMSE filter == decoder-free expression
    for _ in range(10):
        cfg, ch = random_instance(rng)
        if cfg.N < 2:
            continue
        X = random_factors(rng, cfg, 0)
        S = [x @ x.conj().T for x in X]
        for k in range(cfg.K):
            W = lmmse_decoder(k, 0, ch, S, cfg, V_kn=X[k])
            ra = rate_user_to_ch_with_decoder(k, 0, 0.8, ch, S, cfg, W, X[k])
            rb = rate_user_to_ch(k, 0, 0.8, ch, S, cfg)
            assert ra == pytest.approx(rb, rel=1e-8)


def test_rates_monotone_in_tau(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    X = random_factors(rng, cfg, 0)
    S = [x @ x.conj().T for x in X]
    r1 = rate_user_to_ch(0, 0, 0.3, ch, S, cfg)
    r2 = rate_user_to_ch(0, 0, 0.4, ch, S, cfg)
    assert r2 >= r1


# ---------------------------------------------------------------------------
# throughput report
# ---------------------------------------------------------------------------

def _zero_alloc(cfg):
    X = tuple(tuple(np.zeros((cfg.M[k][n], cfg.M[k][n]), dtype=complex)
                    for n in range(cfg.N - 1)) for k in range(cfg.K))
    Xt = tuple(tuple(np.zeros((cfg.M[k][cfg.n_ch], cfg.M[k][cfg.n_ch]), dtype=complex)
                     for n in range(cfg.N)) for k in range(cfg.K))
    tau = np.full(2 * cfg.N, (cfg.T - cfg.tau1) / (2 * cfg.N))
    return Allocation(tau=tau, X=X, X_tilde=Xt,
                      Q=np.zeros((cfg.M_h, cfg.M_h), dtype=complex))


def test_report_all_zero(rng):
    cfg, ch = random_instance(rng, K=2, N=2, M=2)
    rep = throughput_report(_zero_alloc(cfg), ch, cfg)
    assert rep.min_throughput == 0.0
    assert rep.sum_throughput == 0.0


def test_report_min_rule_branches(rng):
    cfg, ch = random_instance(rng, K=1, N=2, M=1)
    alloc = _zero_alloc(cfg)
    alloc.Q = np.array([[1.0]], dtype=complex)
    alloc.X = ((np.array([[0.01]], dtype=complex),),)
    alloc.X_tilde = ((np.zeros((1, 1), dtype=complex),
                      np.array([[0.01]], dtype=complex)),)
    rep = throughput_report(alloc, ch, cfg)
    # relaying slot empty: the user is capped by min(direct, decode) and the
    # CH rides its own slot
    assert rep.r_user[0, 0] == pytest.approx(
        min(rep.r_uhap[0, 0], rep.r_uch[0, 0]))
    assert rep.r_user[0, 1] == pytest.approx(rep.r_chhap[0, 1])
    rows = rep.to_rows()
    assert rows[-1]["min_throughput"] == rep.min_throughput


def test_report_units_mbps():
    rep = physics.ThroughputReport(
        r_uch=np.zeros((1, 2)), r_uhap=np.zeros((1, 2)),
        r_chhap=np.zeros((1, 2)), r_user=np.zeros((1, 2)),
        min_throughput=0.5, sum_throughput=1.0, bandwidth_hz=1e6)
    assert rep.mbps(0.5) == pytest.approx(0.5)
