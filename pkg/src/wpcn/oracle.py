"""Independent brute-force references used by the test suite.

Nothing here calls into the surrogate/conic/optimizer machinery it is used
to validate: rates are re-derived as scalar closed forms, moments are
estimated by Monte-Carlo, and derivatives come from central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ChannelSet, NetworkConfig
from .physics import harvested_power_unit

__all__ = [
    "GridSpec",
    "grid_search_scalar",
    "golden_section",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "mc_lmmse_decoder",
]


@dataclass
class GridSpec:
    """Per-axis ranges and point counts for the exhaustive search."""

    n_tau: int = 33
    n_split: int = 21
    n_q: int = 11
    refine_rounds: int = 3
    budget: int = 10**7

    def __post_init__(self):
        if self.n_tau**3 * self.n_split * self.n_q > self.budget:
            raise ValueError("grid exceeds the point budget")


def _scalar_rate(tau: np.ndarray, gain: float, power: np.ndarray,
                 sigma2: float, err_var: float) -> np.ndarray:
    """tau * log2(1 + gain * p / (sigma^2 + err_var * p)) elementwise."""
    return tau * np.log2(1.0 + gain * power / (sigma2 + err_var * power))


def grid_search_scalar(cfg: NetworkConfig, channels: ChannelSet,
                       objective: str = "maxmin",
                       grid: GridSpec | None = None,
                       cooperation: bool = True) -> tuple[float, dict]:
    """Exhaustive search over the true objective for K=1, N=2, all M=1.

    The search axes are the charging slot, the user slot, the relay slot
    (remaining time goes to the CH's own slot), the CH energy split between
    relaying and its own traffic, and the beamforming power; user and CH
    transmit powers saturate their energy constraints, which is optimal in a
    single cluster because no other user is hurt.
    """
    if cfg.K != 1 or cfg.N != 2 or cfg.M_h != 1 or any(m != 1 for r in cfg.M for m in r):
        raise NotImplementedError("the grid oracle covers the K=1, N=2 scalar case")
    if objective not in ("maxmin", "sum"):
        raise ValueError("objective must be 'maxmin' or 'sum'")
    grid = grid or GridSpec()

    h1 = abs(channels.H_hat[0][0][0, 0]) ** 2
    h2 = abs(channels.H_hat[0][1][0, 0]) ** 2
    g = abs(channels.G_hat[0][0][0][0, 0]) ** 2
    vh1 = channels.var_h_delta[0][0]
    vh2 = channels.var_h_delta[0][1]
    vg = channels.var_g_delta[0][0][0]
    b1, b2 = h1 + vh1, h2 + vh2
    s2_uch, s2_uhap, s2_chhap = (cfg.noise_cov_uch, cfg.noise_cov_uhap,
                                 cfg.noise_cov_chhap)
    Pc1, Pc2 = cfg.Pc[0][0], cfg.Pc[0][1]
    eta1, eta2 = cfg.eta[0][0], cfg.eta[0][1]
    budget = cfg.time_budget()

    def evaluate(t2, t31, t41, x, q):
        """Vectorized objective on broadcastable axis arrays."""
        t42 = budget - t2 - t31 - t41
        E1 = t2 * harvested_power_unit_vec(q * b1, cfg.eh)
        E2 = t2 * harvested_power_unit_vec(q * b2, cfg.eh)
        # the circuit power must be covered whether or not a node transmits
        valid = (t42 >= 0) & (E1 >= Pc1 * cfg.T) & (E2 >= Pc2 * cfg.T)
        W1 = np.clip(E1 - Pc1 * cfg.T, 0.0, None)
        W2 = np.clip(E2 - Pc2 * cfg.T, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(t31 > 0, W1 / (eta1 * np.maximum(t31, 1e-300)), 0.0)
            pt1 = np.where(t41 > 0, x * W2 / (eta2 * np.maximum(t41, 1e-300)), 0.0)
            pt2 = np.where(t42 > 0, (1 - x) * W2 / (eta2 * np.maximum(t42, 1e-300)), 0.0)
        r_uch = _scalar_rate(t31, g, p, s2_uch, vg)
        r_uhap = _scalar_rate(t31, h1, p, s2_uhap, vh1)
        r_ch1 = _scalar_rate(t41, h2, pt1, s2_chhap, vh2)
        r_ch2 = _scalar_rate(t42, h2, pt2, s2_chhap, vh2)
        r_u1 = np.minimum(r_uhap + r_ch1, r_uch)
        if objective == "maxmin":
            val = np.minimum(r_u1, r_ch2)
        else:
            val = r_u1 + r_ch2
        return np.where(valid, val, -np.inf)

    def sweep(t2_ax, t31_ax, t41_ax, x_ax, q_ax):
        t2 = t2_ax[:, None, None, None, None]
        t31 = t31_ax[None, :, None, None, None]
        t41 = t41_ax[None, None, :, None, None]
        x = x_ax[None, None, None, :, None]
        q = q_ax[None, None, None, None, :]
        vals = evaluate(t2, t31, t41, x, q)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        best = {"tau2": t2_ax[idx[0]], "tau31": t31_ax[idx[1]],
                "tau41": t41_ax[idx[2]], "split": x_ax[idx[3]],
                "q": q_ax[idx[4]]}
        return float(vals[idx]), best

    nt, ns, nq = grid.n_tau, grid.n_split, grid.n_q
    t2_ax = np.linspace(0, budget, nt)
    # power-starved instances live in a thin feasibility sliver just above
    # the minimal charging slot, invisible to a uniform grid; seed it
    tau2_min = max(Pc1 * cfg.T / harvested_power_unit_vec(np.array([cfg.p0 * b1]), cfg.eh)[0],
                   Pc2 * cfg.T / harvested_power_unit_vec(np.array([cfg.p0 * b2]), cfg.eh)[0])
    if 0 < tau2_min < budget:
        cliff = tau2_min * (1.0 + np.geomspace(1e-3, 0.5, 12))
        t2_ax = np.unique(np.concatenate([t2_ax, cliff[cliff < budget]]))
    t31_ax = np.linspace(0, budget, nt)
    t41_ax = (np.linspace(0, budget, nt) if cooperation else np.array([0.0]))
    x_ax = np.linspace(0, 1, ns) if cooperation else np.array([0.0])
    q_ax = np.linspace(cfg.p0 / nq, cfg.p0, nq)
    best_val, best = sweep(t2_ax, t31_ax, t41_ax, x_ax, q_ax)

    def local(center, width, lo, hi, npts):
        return np.linspace(max(lo, center - width), min(hi, center + width), npts)

    w_t = budget / (nt - 1)
    w_x = 1.0 / max(ns - 1, 1)
    w_q = cfg.p0 / max(nq - 1, 1)
    for _ in range(grid.refine_rounds):
        t2_ax = local(best["tau2"], w_t, 0, budget, nt)
        t31_ax = local(best["tau31"], w_t, 0, budget, nt)
        if cooperation:
            t41_ax = local(best["tau41"], w_t, 0, budget, nt)
            x_ax = local(best["split"], w_x, 0, 1, ns)
        q_ax = local(best["q"], w_q, cfg.p0 * 1e-6, cfg.p0, nq)
        val, pt = sweep(t2_ax, t31_ax, t41_ax, x_ax, q_ax)
        if val > best_val:
            best_val, best = val, pt
        # contract so consecutive grids overlap a few parent cells
        w_t *= 4.0 / (nt - 1)
        w_x *= 4.0 / max(ns - 1, 1)
        w_q *= 4.0 / max(nq - 1, 1)
    return best_val, best


def harvested_power_unit_vec(P: np.ndarray, eh) -> np.ndarray:
    """Vectorized twin of physics.harvested_power_unit."""
    if eh.mode == "linear":
        return eh.zeta * np.clip(P, 0.0, None)
    p = np.clip(P, eh.p_floor, None)
    lp = np.log(p)
    return np.exp(eh.a * lp * lp + eh.b * lp + eh.c)


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-9) -> tuple[float, float]:
    """Maximize a unimodal scalar function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                         step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient; O(step^2) error."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (f(x + e) - f(x - e)) / (2 * step)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("NaN/inf in finite-difference gradient")
    return grad


def finite_diff_hessian(f: Callable[[np.ndarray], float], x: np.ndarray,
                        step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian; symmetrized."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej)
                       - f(x - ei + ej) + f(x - ei - ej)) / (4 * step**2)
            H[j, i] = H[i, j]
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("NaN/inf in finite-difference Hessian")
    return H


def mc_lmmse_decoder(k: int, n: int, channels: ChannelSet,
                     V_slot: Sequence[np.ndarray], cfg: NetworkConfig,
                     draws: int = 10**6, seed: int = 0,
                     batch: int = 10**5) -> np.ndarray:
    """Monte-Carlo estimate of E[m y^H] (E[y y^H])^-1 at CH k, slot tau3_n.

    Samples messages, estimation errors and noise explicitly; converges to
    the closed-form LMMSE filter at the usual 1/sqrt(draws) rate.
    """
    rng = np.random.default_rng(seed)
    Mr = cfg.M[k][cfg.n_ch]
    d = V_slot[k].shape[1]
    acc_my = np.zeros((d, Mr), dtype=complex)
    acc_yy = np.zeros((Mr, Mr), dtype=complex)
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        y = np.zeros((m, Mr), dtype=complex)
        m_k = None
        for j in range(cfg.K):
            dj = V_slot[j].shape[1]
            msg = (rng.standard_normal((m, dj)) + 1j * rng.standard_normal((m, dj))) / np.sqrt(2)
            if j == k:
                m_k = msg
            x = msg @ V_slot[j].T  # (m, M_jn)
            y += x @ channels.G_hat[k][n][j].T
            sig = np.sqrt(channels.var_g_delta[k][n][j] / 2)
            Mj = V_slot[j].shape[0]
            dG = sig * (rng.standard_normal((m, Mr, Mj)) + 1j * rng.standard_normal((m, Mr, Mj)))
            y += np.einsum("brm,bm->br", dG, x)
        zs = np.sqrt(cfg.noise_cov_uch / 2)
        y += zs * (rng.standard_normal((m, Mr)) + 1j * rng.standard_normal((m, Mr)))
        acc_my += m_k.T @ y.conj()
        acc_yy += y.T @ y.conj()
        done += m
    return (acc_my / draws) @ np.linalg.inv(acc_yy / draws)
