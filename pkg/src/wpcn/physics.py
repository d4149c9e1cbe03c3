"""Harvested energy, LMMSE decoders and achievable-rate expressions.

Everything here is a pure function of an :class:`Allocation`, a
:class:`~wpcn.model.ChannelSet` and a :class:`~wpcn.model.NetworkConfig`.
Rates are returned in bits per block (log base 2, block length ``T = 1``);
multiply by ``cfg.bandwidth_hz * cfg.T`` for bits/s.

Uplink decoding at the HAP uses successive interference cancellation in
ascending cluster order: cluster ``k`` sees the signal interference of
clusters ``k+1..K-1`` plus the channel-estimation-error residue of all
clusters (the cancelled signals can only be reconstructed through their
estimated channels).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ChannelSet, EhParams, NetworkConfig

__all__ = [
    "Allocation",
    "ThroughputReport",
    "b_matrix",
    "rf_input_power",
    "harvested_energy",
    "harvested_power_unit",
    "eh_concave_range",
    "lmmse_decoder",
    "rate_user_to_ch",
    "rate_user_to_ch_with_decoder",
    "rate_user_to_hap",
    "rate_ch_to_hap",
    "throughput_report",
    "constraint_slacks",
]

_LN2 = np.log(2.0)


# ---------------------------------------------------------------------------
# decision variables
# ---------------------------------------------------------------------------

@dataclass
class Allocation:
    """Decision variables of one design.

    ``tau`` is the vector ``[tau2, tau3_0..tau3_{N-2}, tau4_0..tau4_{N-1}]``
    (fractions of ``T``); the fixed estimation slot ``tau1`` lives in the
    config.  Covariances are stored through free complex factors so that
    ``S = X X^H`` is positive semidefinite by construction and
    ``tr S = ||vec(X)||^2``:

    * ``X[k][n]``        factor of the transmit covariance of user ``(k, n)``,
      ``n != N-1``, shape ``(M[k][n], M[k][n])``,
    * ``X_tilde[k][n]``  factor of the CH covariance used in slot ``tau4_n``,
      shape ``(M[k][N-1], M[k][N-1])``, all ``n``.

    Exactly one of ``Q`` (energy beamforming covariance, Hermitian PSD) and
    ``x0`` (deterministic energy signal, ``Q = x0 x0^H``) is set.
    """

    tau: np.ndarray
    X: tuple
    X_tilde: tuple
    Q: np.ndarray | None = None
    x0: np.ndarray | None = None

    @property
    def tau2(self) -> float:
        return float(self.tau[0])

    def tau3(self, n: int) -> float:
        return float(self.tau[1 + n])

    def tau4(self, n: int, N: int) -> float:
        return float(self.tau[N + n])

    def S(self, k: int, n: int) -> np.ndarray:
        x = self.X[k][n]
        return x @ x.conj().T

    def S_tilde(self, k: int, n: int) -> np.ndarray:
        x = self.X_tilde[k][n]
        return x @ x.conj().T

    def eb_matrix(self) -> np.ndarray:
        """Energy beamforming covariance, rank-1 in deterministic mode."""
        if self.Q is not None:
            return self.Q
        return np.outer(self.x0, self.x0.conj())

    def validate(self, cfg: NetworkConfig, tol: float = 1e-9) -> None:
        if len(self.tau) != 2 * cfg.N:
            raise ValueError("tau must have length 2N")
        if np.any(self.tau < -tol):
            raise ValueError("tau entries must be nonnegative")
        if cfg.tau1 + float(np.sum(self.tau)) > cfg.T + 1e-9:
            raise ValueError("time budget exceeded")
        if (self.Q is None) == (self.x0 is None):
            raise ValueError("exactly one of Q and x0 must be set")
        if self.Q is not None:
            trq = float(np.trace(self.Q).real)
            if trq > cfg.p0 * (1 + 1e-9) + 1e-12:
                raise ValueError("tr(Q) exceeds the power budget")
            if np.linalg.norm(self.Q - self.Q.conj().T) > 1e-9 * max(trq, 1e-30):
                raise ValueError("Q must be Hermitian")
            lam = np.linalg.eigvalsh(self.Q)
            if lam.min() < -1e-9 * max(trq, 1e-30):
                raise ValueError("Q must be positive semidefinite")
        else:
            if float(np.vdot(self.x0, self.x0).real) > cfg.p0 * (1 + 1e-9):
                raise ValueError("||x0||^2 exceeds the power budget")


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def b_matrix(channels: ChannelSet, k: int, n: int, M_h: int) -> np.ndarray:
    """RF-power coupling matrix: tr{Q B} is the input power of user (k, n)."""
    H = channels.H_hat[k][n]
    return H.conj().T @ H + channels.var_h_delta[k][n] * H.shape[0] * np.eye(M_h)


def rf_input_power(Q: np.ndarray, H_hat_kn: np.ndarray, var_h_delta_kn: float) -> float:
    """RF power collected by one user: tr{H Q H^H} + sigma_dlt^2 tr{Q} M."""
    if Q.shape[0] != H_hat_kn.shape[1]:
        raise ValueError("Q and H_hat dimensions do not match")
    p = np.trace(H_hat_kn @ Q @ H_hat_kn.conj().T).real
    p += var_h_delta_kn * np.trace(Q).real * H_hat_kn.shape[0]
    return float(max(p, 0.0))


def harvested_power_unit(P_in: float, eh: EhParams) -> float:
    """Harvested power (watts) at RF input ``P_in``, i.e. energy per unit time."""
    if eh.mode == "linear":
        return eh.zeta * max(P_in, 0.0)
    p = max(P_in, eh.p_floor)
    lp = np.log(p)
    return float(np.exp(eh.a * lp * lp + eh.b * lp + eh.c))


def harvested_energy(P_in: float, tau2: float, eh: EhParams) -> float:
    """Energy harvested over a charging slot of duration ``tau2``."""
    if tau2 < 0:
        raise ValueError("tau2 must be nonnegative")
    if tau2 == 0.0:
        return 0.0
    return tau2 * harvested_power_unit(P_in, eh)


def eh_concave_range(eh: EhParams) -> tuple[float, float]:
    """Input-power interval on which the nonlinear harvest curve is concave.

    With ``u = 2a ln P + b`` the second derivative has the sign of
    ``u^2 - u + 2a``; the concave region is where that is nonpositive.
    """
    if eh.mode == "linear":
        return (0.0, np.inf)
    disc = np.sqrt(1.0 - 8.0 * eh.a)
    u_hi, u_lo = (1.0 + disc) / 2.0, (1.0 - disc) / 2.0
    # u is decreasing in ln P (a < 0)
    t_left = (u_hi - eh.b) / (2.0 * eh.a)
    t_right = (u_lo - eh.b) / (2.0 * eh.a)
    return (float(np.exp(t_left)), float(np.exp(t_right)))


# ---------------------------------------------------------------------------
# decoders and rates
# ---------------------------------------------------------------------------

def _logdet_ratio(inner: np.ndarray, signal: np.ndarray) -> float:
    """log2 det(I + signal @ inner^{-1}) via two Hermitian log-dets."""
    s1, d1 = np.linalg.slogdet(inner + signal)
    s0, d0 = np.linalg.slogdet(inner)
    if s1.real <= 0 or s0.real <= 0:
        raise np.linalg.LinAlgError("log-det argument not positive definite")
    return float((d1 - d0) / _LN2)


def _uch_interference(k: int, n: int, channels: ChannelSet,
                      S_slot: Sequence[np.ndarray], cfg: NetworkConfig,
                      include_own: bool) -> np.ndarray:
    """Noise + interference covariance at CH k in slot tau3_n."""
    Mr = cfg.M[k][cfg.n_ch]
    out = cfg.noise_cov_uch * np.eye(Mr, dtype=complex)
    for j in range(cfg.K):
        G = channels.G_hat[k][n][j]
        trS = np.trace(S_slot[j]).real
        if include_own or j != k:
            out += G @ S_slot[j] @ G.conj().T
        out += channels.var_g_delta[k][n][j] * trS * np.eye(Mr)
    return out


def lmmse_decoder(k: int, n: int, channels: ChannelSet,
                  S_slot: Sequence[np.ndarray], cfg: NetworkConfig,
                  V_kn: np.ndarray | None = None) -> np.ndarray:
    """LMMSE receive filter at CH k for the stream of user (k, n), n != N-1.

    ``V_kn`` is a factor of ``S_slot[k]`` (defaults to its Hermitian square
    root); the filter is ``V^H G^H (L + sum_j G S_j G^H + sum_j
    sigma_dlt^2 tr S_j I)^{-1}``.
    """
    if n == cfg.n_ch:
        raise ValueError("the CH has no uplink stream in slot tau3")
    if V_kn is None:
        lam, U = np.linalg.eigh(S_slot[k])
        V_kn = U @ np.diag(np.sqrt(np.clip(lam, 0.0, None))) @ U.conj().T
    cov = _uch_interference(k, n, channels, S_slot, cfg, include_own=True)
    G = channels.G_hat[k][n][k]
    try:
        W = V_kn.conj().T @ G.conj().T @ np.linalg.inv(cov)
    except np.linalg.LinAlgError as exc:  # impossible for sigma^2 > 0
        raise np.linalg.LinAlgError("received covariance is singular") from exc
    return W


def rate_user_to_ch(k: int, n: int, tau3n: float, channels: ChannelSet,
                    S_slot: Sequence[np.ndarray], cfg: NetworkConfig) -> float:
    """Throughput of the user (k, n) -> CH k link during slot tau3_n."""
    if tau3n == 0.0:
        return 0.0
    inner = _uch_interference(k, n, channels, S_slot, cfg, include_own=False)
    G = channels.G_hat[k][n][k]
    sig = G @ S_slot[k] @ G.conj().T
    return tau3n * _logdet_ratio(inner, sig)


def rate_user_to_ch_with_decoder(k: int, n: int, tau3n: float, channels: ChannelSet,
                                 S_slot: Sequence[np.ndarray], cfg: NetworkConfig,
                                 W: np.ndarray, V_kn: np.ndarray) -> float:
    """Pre-combining rate of the (k, n) -> CH link under an explicit decoder.

    Equals :func:`rate_user_to_ch` when ``W`` is the LMMSE filter.  Kept as
    the cross-check partner of the decoder-free expression.
    """
    if tau3n == 0.0:
        return 0.0
    G = channels.G_hat[k][n][k]
    cov = _uch_interference(k, n, channels, S_slot, cfg, include_own=False)
    sig = W @ G @ (V_kn @ V_kn.conj().T) @ G.conj().T @ W.conj().T
    inner = W @ cov @ W.conj().T
    return tau3n * _logdet_ratio(inner, sig)


def _hap_rate(k: int, n_tx: int, tau: float, channels: ChannelSet,
              S_slot: Sequence[np.ndarray], cfg: NetworkConfig,
              sigma2: float) -> float:
    """Shared SIC rate expression for the user->HAP and CH->HAP phases.

    ``n_tx`` selects the transmit antenna set / channel (``n`` for users,
    ``N-1`` for CHs); ``S_slot[j]`` is the covariance cluster ``j`` uses in
    this slot.
    """
    if tau == 0.0:
        return 0.0
    inner = sigma2 * np.eye(cfg.M_h, dtype=complex)
    for j in range(cfg.K):
        Hj = channels.H_hat[j][n_tx]
        trS = np.trace(S_slot[j]).real
        if j > k:
            inner += Hj.conj().T @ S_slot[j] @ Hj
        inner += channels.var_h_delta[j][n_tx] * trS * np.eye(cfg.M_h)
    Hk = channels.H_hat[k][n_tx]
    sig = Hk.conj().T @ S_slot[k] @ Hk
    return tau * _logdet_ratio(inner, sig)


def rate_user_to_hap(k: int, n: int, tau3n: float, channels: ChannelSet,
                     S_slot: Sequence[np.ndarray], cfg: NetworkConfig) -> float:
    """Throughput of the user (k, n) -> HAP link during slot tau3_n."""
    if n == cfg.n_ch:
        raise ValueError("the CH has no uplink stream in slot tau3")
    return _hap_rate(k, n, tau3n, channels, S_slot, cfg, cfg.noise_cov_uhap)


def rate_ch_to_hap(k: int, n: int, tau4n: float, channels: ChannelSet,
                   S_tilde_slot: Sequence[np.ndarray], cfg: NetworkConfig) -> float:
    """Throughput of the CH k -> HAP link during slot tau4_n."""
    return _hap_rate(k, cfg.n_ch, tau4n, channels, S_tilde_slot, cfg,
                     cfg.noise_cov_chhap)


# ---------------------------------------------------------------------------
# the throughput grid
# ---------------------------------------------------------------------------

@dataclass
class ThroughputReport:
    """Per-link and per-user throughputs of one allocation, in bits/block.

    ``r_user[k][n] = min(r_uhap + r_chhap, r_uch)`` for cluster members and
    ``r_chhap`` for the CH itself (its own traffic rides slot ``tau4_{N-1}``).
    """

    r_uch: np.ndarray
    r_uhap: np.ndarray
    r_chhap: np.ndarray
    r_user: np.ndarray
    min_throughput: float
    sum_throughput: float
    bandwidth_hz: float = 1e6

    def mbps(self, bits_per_block: float) -> float:
        return bits_per_block * self.bandwidth_hz / 1e6

    def to_rows(self) -> list[dict]:
        """CSV-ready rows: one per (k, n), then one summary row."""
        rows = []
        K, N = self.r_user.shape
        for k in range(K):
            for n in range(N):
                rows.append({
                    "k": k, "n": n,
                    "r_uch": self.r_uch[k, n],
                    "r_uhap": self.r_uhap[k, n],
                    "r_chhap": self.r_chhap[k, n],
                    "r_user": self.r_user[k, n],
                })
        rows.append({"k": "summary", "n": "",
                     "r_uch": "", "r_uhap": "", "r_chhap": "",
                     "r_user": "",
                     "min_throughput": self.min_throughput,
                     "sum_throughput": self.sum_throughput})
        return rows


def throughput_report(alloc: Allocation, channels: ChannelSet,
                      cfg: NetworkConfig) -> ThroughputReport:
    """Evaluate every link rate and the per-user effective throughputs."""
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    r_uch = np.zeros((K, N))
    r_uhap = np.zeros((K, N))
    r_chhap = np.zeros((K, N))

    for n in range(N - 1):
        S_slot = [alloc.S(j, n) for j in range(K)]
        t3 = alloc.tau3(n)
        for k in range(K):
            r_uch[k, n] = rate_user_to_ch(k, n, t3, channels, S_slot, cfg)
            r_uhap[k, n] = rate_user_to_hap(k, n, t3, channels, S_slot, cfg)

    for n in range(N):
        St_slot = [alloc.S_tilde(j, n) for j in range(K)]
        t4 = alloc.tau4(n, N)
        for k in range(K):
            r_chhap[k, n] = rate_ch_to_hap(k, n, t4, channels, St_slot, cfg)

    r_user = np.minimum(r_uhap + r_chhap, r_uch)
    r_user[:, nch] = r_chhap[:, nch]
    return ThroughputReport(
        r_uch=r_uch, r_uhap=r_uhap, r_chhap=r_chhap, r_user=r_user,
        min_throughput=float(r_user.min()),
        sum_throughput=float(r_user.sum()),
        bandwidth_hz=cfg.bandwidth_hz,
    )


def constraint_slacks(alloc: Allocation, channels: ChannelSet,
                      cfg: NetworkConfig) -> dict[str, float]:
    """Independent slack evaluation of the time, power and energy constraints.

    Returns the worst (smallest) slack per constraint family, in natural
    units; all values nonnegative (up to solver tolerance) for a feasible
    allocation.
    """
    slacks: dict[str, float] = {}
    slacks["time"] = cfg.T - cfg.tau1 - float(np.sum(alloc.tau))
    Q = alloc.eb_matrix()
    slacks["hap_power"] = cfg.p0 - float(np.trace(Q).real)

    e_user = np.inf
    e_ch = np.inf
    for k in range(cfg.K):
        for n in range(cfg.N):
            P = rf_input_power(Q, channels.H_hat[k][n], channels.var_h_delta[k][n])
            E = harvested_energy(P, alloc.tau2, cfg.eh)
            if n != cfg.n_ch:
                spend = cfg.eta[k][n] * alloc.tau3(n) * np.trace(alloc.S(k, n)).real
                e_user = min(e_user, E - cfg.Pc[k][n] * cfg.T - spend)
            else:
                spend = sum(cfg.eta[k][n] * alloc.tau4(m, cfg.N)
                            * np.trace(alloc.S_tilde(k, m)).real
                            for m in range(cfg.N))
                e_ch = min(e_ch, E - cfg.Pc[k][n] * cfg.T - spend)
    slacks["energy_user"] = float(e_user)
    slacks["energy_ch"] = float(e_ch)
    return slacks
