"""Minorizers for the rate constraints and the deterministic-energy signal.

Each phase rate can be written as ``tau * log2 det(A^H D^{-1} A)`` with a
block matrix ``D`` that is affine in the covariances ``S = X X^H``; that
log-det is convex in ``D``, so its tangent plane at an anchor iterate is a
global lower bound.  Rearranging the tangent in terms of ``s = vec(X)``
yields, per constraint, a constant ``T``, a linear coefficient ``v`` and
one PSD quadratic block ``Upsilon_j`` per cluster:

    rate / tau  >=  -( T + 2 Re{v^H s_k} + sum_j s_j^H Upsilon_j s_j )

with equality at the anchor.  The 1/ln(2) gradient factor of the base-2
logarithm is absorbed into T, v and Upsilon.

Three families share the construction and differ only in the channel that
plays ``C_j``, in which clusters contribute *signal* interference (SIC
leaves only clusters j >= k in the HAP phases) and in the noise level:

    ========  =================  ===============  ==========
    family    C_j                signal sum       receiver
    ========  =================  ===============  ==========
    uch       G_hat[k][n][j]     all j            CH k
    uhap      H_hat[j][n]^H      j >= k           HAP
    chhap     H_hat[j][N-1]^H    j >= k           HAP
    ========  =================  ===============  ==========

Estimation-error interference always sums over all clusters: SIC can only
subtract the part of a cancelled signal that rides the channel estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import ChannelSet, EhParams, NetworkConfig
from .physics import b_matrix, harvested_energy

__all__ = [
    "SurrogateCoeffs",
    "SurrogateSet",
    "EnergySurrogate",
    "build_D",
    "build_D_tilde",
    "build_D_bar",
    "compute_F",
    "surrogate_coeffs_uch",
    "surrogate_coeffs_uhap",
    "surrogate_coeffs_chhap",
    "build_surrogates",
    "xi_bound",
    "energy_surrogate_det",
    "vec",
]

_LN2 = np.log(2.0)


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


@dataclass
class SurrogateCoeffs:
    """One rate-constraint minorizer: rate/tau >= -(T + 2Re{v^H s_k} + sum_j s_j^H Ups_j s_j)."""

    T: float
    v: np.ndarray
    core: dict[int, np.ndarray]   # j -> inner block; full Upsilon_j = I (x) core[j]
    family: str
    k: int
    n: int

    def Upsilon(self, j: int) -> np.ndarray:
        """Full quadratic coefficient acting on vec(X_j)."""
        c = self.core[j]
        m = _stream_count(self, j)
        return np.kron(np.eye(m), c)

    def value(self, X_slot) -> float:
        """Evaluate the minorized rate per unit time at factors X_slot."""
        out = self.T + 2 * np.real(np.vdot(self.v, vec(X_slot[self.k])))
        for j, c in self.core.items():
            Xj = X_slot[j]
            out += np.trace(Xj.conj().T @ c @ Xj).real
        return -out


def _stream_count(coeffs: SurrogateCoeffs, j: int) -> int:
    return coeffs.core[j].shape[0] if j in coeffs.core else 0


@dataclass
class SurrogateSet:
    """All minorizer coefficients of one MM anchor.

    ``uch[n][k]`` and ``uhap[n][k]`` cover slots ``tau3_n`` (n = 0..N-2);
    ``chhap[n][k]`` covers slots ``tau4_n`` (n = 0..N-1).
    """

    uch: list
    uhap: list
    chhap: list


# ---------------------------------------------------------------------------
# block matrices
# ---------------------------------------------------------------------------

def _family_parts(family: str, k: int, n: int, channels: ChannelSet,
                  cfg: NetworkConfig, normalize: bool = False):
    """Channel list C_j, signal-cluster set, error variances and noise level.

    With ``normalize=True`` the channels are rescaled so the noise is unit
    (C / sigma, errs / sigma^2, sigma^2 -> 1); the log-det value, F-matrix
    bookkeeping and all surrogate coefficients are exactly invariant under
    this rescaling, but the block matrix stays well conditioned at the SNR
    scale instead of 1/sigma^2.
    """
    nch = cfg.n_ch
    if family == "uch":
        C = [channels.G_hat[k][n][j] for j in range(cfg.K)]
        errs = [channels.var_g_delta[k][n][j] for j in range(cfg.K)]
        sig = set(range(cfg.K))
        sigma2 = cfg.noise_cov_uch
    elif family == "uhap":
        C = [channels.H_hat[j][n].conj().T for j in range(cfg.K)]
        errs = [channels.var_h_delta[j][n] for j in range(cfg.K)]
        sig = set(range(k, cfg.K))
        sigma2 = cfg.noise_cov_uhap
    elif family == "chhap":
        C = [channels.H_hat[j][nch].conj().T for j in range(cfg.K)]
        errs = [channels.var_h_delta[j][nch] for j in range(cfg.K)]
        sig = set(range(k, cfg.K))
        sigma2 = cfg.noise_cov_chhap
    else:
        raise ValueError(f"unknown family {family!r}")
    if normalize:
        rt = np.sqrt(sigma2)
        C = [Cj / rt for Cj in C]
        errs = [e / sigma2 for e in errs]
        sigma2 = 1.0
    return C, errs, sig, sigma2


def _assemble_D(C, errs, sig, sigma2, k: int, X_slot) -> np.ndarray:
    Xk = X_slot[k]
    d = Xk.shape[0]
    Mr = C[k].shape[0]
    blk = sigma2 * np.eye(Mr, dtype=complex)
    for j in range(len(C)):
        Sj = X_slot[j] @ X_slot[j].conj().T
        if j in sig:
            blk += C[j] @ Sj @ C[j].conj().T
        blk += errs[j] * np.trace(Sj).real * np.eye(Mr)
    top = np.hstack([np.eye(d, dtype=complex), Xk.conj().T @ C[k].conj().T])
    bot = np.hstack([C[k] @ Xk, blk])
    D = np.vstack([top, bot])
    lam_min = np.linalg.eigvalsh(D).min()
    if lam_min <= 0:
        raise np.linalg.LinAlgError(
            f"block matrix not positive definite (lam_min={lam_min:.3e})")
    return D


def _build_block_matrix(family: str, k: int, n: int, channels: ChannelSet,
                        X_slot, cfg: NetworkConfig) -> np.ndarray:
    C, errs, sig, sigma2 = _family_parts(family, k, n, channels, cfg)
    return _assemble_D(C, errs, sig, sigma2, k, X_slot)


def build_D(k: int, n: int, channels: ChannelSet, X_slot,
            cfg: NetworkConfig) -> np.ndarray:
    """User->CH block matrix for slot tau3_n; X_slot are the user factors."""
    return _build_block_matrix("uch", k, n, channels, X_slot, cfg)


def build_D_tilde(k: int, n: int, channels: ChannelSet, X_slot,
                  cfg: NetworkConfig) -> np.ndarray:
    """User->HAP block matrix (SIC residual interference from clusters >= k)."""
    return _build_block_matrix("uhap", k, n, channels, X_slot, cfg)


def build_D_bar(k: int, n: int, channels: ChannelSet, X_tilde_slot,
                cfg: NetworkConfig) -> np.ndarray:
    """CH->HAP block matrix; X_tilde_slot are the CH factors of slot tau4_n."""
    return _build_block_matrix("chhap", k, n, channels, X_tilde_slot, cfg)


def compute_F(D: np.ndarray, d: int) -> np.ndarray:
    """Projector-like matrix D^{-1} A (A^H D^{-1} A)^{-1} A^H D^{-1}.

    ``A = [I_d; 0]`` is the top-block selector, so only the leading block
    size ``d`` is needed.  Ill-conditioned D is regularized by
    ``1e-10 tr(D)/dim`` on the diagonal.
    """
    if np.linalg.cond(D) > 1e12:
        warnings.warn("ill-conditioned block matrix; regularizing", RuntimeWarning)
        D = D + (1e-10 * np.trace(D).real / D.shape[0]) * np.eye(D.shape[0])
    Dinv = np.linalg.inv(D)
    return Dinv[:, :d] @ np.linalg.inv(Dinv[:d, :d]) @ Dinv[:d, :]


def _coeffs(family: str, k: int, n: int, channels: ChannelSet, X_slot,
            cfg: NetworkConfig) -> SurrogateCoeffs:
    C, errs, sig, sigma2 = _family_parts(family, k, n, channels, cfg, normalize=True)
    d = X_slot[k].shape[0]
    D = _assemble_D(C, errs, sig, sigma2, k, X_slot)
    F = compute_F(D, d)
    F11, F12, F22 = F[:d, :d], F[:d, d:], F[d:, d:]

    sgn, logdet = np.linalg.slogdet(np.linalg.inv(D)[:d, :d])
    f0 = logdet / _LN2
    c2 = 1.0 / _LN2
    T = (-f0 - c2 * np.trace(F @ D).real + c2 * np.trace(F11).real
         + c2 * sigma2 * np.trace(F22).real)
    v = c2 * vec(C[k].conj().T @ F12.conj().T)
    trF22 = np.trace(F22).real
    core = {}
    for j in range(cfg.K):
        m = X_slot[j].shape[0]
        cj = errs[j] * trF22 * np.eye(m, dtype=complex)
        if j in sig:
            cj = cj + C[j].conj().T @ F22 @ C[j]
        cj = c2 * 0.5 * (cj + cj.conj().T)
        if np.linalg.norm(cj) > 0:
            core[j] = cj
    return SurrogateCoeffs(T=float(T), v=v, core=core, family=family, k=k, n=n)


def surrogate_coeffs_uch(k: int, n: int, channels: ChannelSet, X_slot,
                         cfg: NetworkConfig) -> SurrogateCoeffs:
    """Minorizer coefficients of the user->CH rate at anchor X_slot."""
    return _coeffs("uch", k, n, channels, X_slot, cfg)


def surrogate_coeffs_uhap(k: int, n: int, channels: ChannelSet, X_slot,
                          cfg: NetworkConfig) -> SurrogateCoeffs:
    """Minorizer coefficients of the user->HAP SIC rate at anchor X_slot."""
    return _coeffs("uhap", k, n, channels, X_slot, cfg)


def surrogate_coeffs_chhap(k: int, n: int, channels: ChannelSet, X_tilde_slot,
                           cfg: NetworkConfig) -> SurrogateCoeffs:
    """Minorizer coefficients of the CH->HAP SIC rate at anchor X_tilde_slot."""
    return _coeffs("chhap", k, n, channels, X_tilde_slot, cfg)


def build_surrogates(channels: ChannelSet, anchor, cfg: NetworkConfig) -> SurrogateSet:
    """All families at the anchor allocation's covariance factors."""
    uch, uhap = [], []
    for n in range(cfg.N - 1):
        X_slot = [anchor.X[j][n] for j in range(cfg.K)]
        uch.append([surrogate_coeffs_uch(k, n, channels, X_slot, cfg)
                    for k in range(cfg.K)])
        uhap.append([surrogate_coeffs_uhap(k, n, channels, X_slot, cfg)
                     for k in range(cfg.K)])
    chhap = []
    for n in range(cfg.N):
        Xt_slot = [anchor.X_tilde[j][n] for j in range(cfg.K)]
        chhap.append([surrogate_coeffs_chhap(k, n, channels, Xt_slot, cfg)
                      for k in range(cfg.K)])
    return SurrogateSet(uch=uch, uhap=uhap, chhap=chhap)


# ---------------------------------------------------------------------------
# deterministic energy signal
# ---------------------------------------------------------------------------

def _hessian_coeff_rho(P, a, b, c, tau2):
    """Coefficient of B in the Hessian of tau2*exp(a ln^2 P + b ln P + c)."""
    lp = np.log(P)
    return 2 * tau2 * np.exp(c + a * lp * lp) * P ** (b - 1) * (2 * a * lp + b)


def _hessian_coeff_pi(P, a, b, c, tau2):
    """Coefficient of B x x^H B in the same Hessian."""
    lp = np.log(P)
    return (4 * tau2 * np.exp(c + a * lp * lp) * P ** (b - 2)
            * (4 * a * a * lp * lp + lp * (4 * a * b - 2 * a) + b * b - b + 2 * a))


def xi_bound(B_kn: np.ndarray, p0: float, eh: EhParams, tau2: float,
             n_grid: int = 4000) -> float:
    """Convexity shift certifying hess(E) + xi*I >= 0 over the feasible ball.

    The Hessian of the harvested energy w.r.t. the beamforming vector is
    ``rho(P) B + pi(P) B x x^H B`` with ``P = x^H B x``; bounding each term
    by extremal eigenvalues of B and taking the supremum of the negative
    parts over the reachable interval ``P in (0, p0*lmax(B)]`` gives a valid
    shift.  Scales linearly with tau2; returns 0 for tau2 = 0.
    """
    if eh.mode != "nonlinear":
        raise ValueError("xi_bound applies to the nonlinear harvest model")
    lam = np.linalg.eigvalsh(0.5 * (B_kn + B_kn.conj().T))
    if lam.min() <= 0:
        raise ValueError("B must be positive definite")
    if tau2 == 0.0:
        return 0.0
    lmax = float(lam.max())
    Pmax = p0 * lmax
    logP = np.linspace(np.log(Pmax) - 30.0, np.log(Pmax), n_grid)
    P = np.exp(logP)
    rho = _hessian_coeff_rho(P, eh.a, eh.b, eh.c, tau2)
    pi = _hessian_coeff_pi(P, eh.a, eh.b, eh.c, tau2)
    need = (np.clip(-rho, 0.0, None) * lmax
            + np.clip(-pi, 0.0, None) * np.minimum(p0 * lmax * lmax, lmax * P))
    return float(need.max())


@dataclass
class EnergySurrogate:
    """Concave global lower bound of E(x0) touching at the anchor.

    ``evaluate(x0) = const + Re{u @ x0} - xi/2 * ||x0||^2`` where ``u`` is
    the (row-vector) gradient coefficient of the convexified part at the
    anchor, so the bound is an affine-minus-quadratic function.
    """

    xi: float
    u: np.ndarray
    anchor: np.ndarray
    const: float

    def evaluate(self, x0: np.ndarray) -> float:
        return float(self.const + np.real(self.u @ x0)
                     - 0.5 * self.xi * np.vdot(x0, x0).real)


def energy_surrogate_det(k: int, n: int, x0_anchor: np.ndarray,
                         channels: ChannelSet, cfg: NetworkConfig,
                         xi: float, tau2: float) -> EnergySurrogate:
    """Minorize E(x0) = tau2*h(x0^H B x0): tangent of the xi-convexified part.

    Keeps the concave ``-xi/2 ||x0||^2`` exactly and linearizes the convex
    remainder at the anchor.
    """
    eh = cfg.eh
    B = b_matrix(channels, k, n, cfg.M_h)
    omega = float(np.real(x0_anchor.conj() @ B @ x0_anchor))
    omega_c = max(omega, eh.p_floor)
    E_anchor = harvested_energy(omega, tau2, eh)
    if eh.mode == "nonlinear":
        lp = np.log(omega_c)
        hprime = np.exp(eh.c + eh.a * lp * lp) * omega_c ** (eh.b - 1) * (2 * eh.a * lp + eh.b)
    else:
        hprime = eh.zeta
    u = xi * x0_anchor.conj() + 2 * tau2 * hprime * (x0_anchor.conj() @ B)
    norm2 = float(np.vdot(x0_anchor, x0_anchor).real)
    const = E_anchor + 0.5 * xi * norm2 - float(np.real(u @ x0_anchor))
    return EnergySurrogate(xi=xi, u=u, anchor=x0_anchor.copy(), const=const)
