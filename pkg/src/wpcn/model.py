"""Network configuration, scenario geometry and random channel generation.

Index conventions (0-based throughout the package):

* ``k = 0..K-1``   cluster index,
* ``n = 0..N-1``   user index inside a cluster; user ``n = N-1`` is the
  cluster head (CH),
* ``H[k][n]``      downlink channel HAP -> user ``(k, n)``, shape
  ``(M[k][n], M_h)``; the uplink channel is its Hermitian transpose,
* ``G[k][n][i]``   uplink channel from user ``(i, n)`` to the CH of cluster
  ``k``, shape ``(M[k][N-1], M[i][n])``, defined for ``n != N-1``.

Channel gains follow ``amplitude_scale * (d / d0)**(-alpha/2)`` with i.i.d.
unit-variance circularly-symmetric complex Gaussian fast fading.  Imperfect
CSI is modelled statistically: the generator draws the estimate and the
estimation error as independent Gaussians whose variances split the total
path-loss power as ``rho**2 : (1 - rho**2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "EhParams",
    "GeometrySpec",
    "NetworkConfig",
    "ChannelSet",
    "GeometryError",
    "build_geometry",
    "build_disk_geometry",
    "sample_channels",
    "load_config",
    "save_config",
]


class GeometryError(ValueError):
    """Raised for degenerate or out-of-range geometry parameters."""


def _grid(value, K: int, N: int, name: str) -> tuple[tuple[float, ...], ...]:
    """Broadcast a scalar (or validate a nested sequence) to a K x N grid."""
    if np.isscalar(value):
        return tuple(tuple(float(value) for _ in range(N)) for _ in range(K))
    rows = tuple(tuple(float(v) for v in row) for row in value)
    if len(rows) != K or any(len(r) != N for r in rows):
        raise ValueError(f"{name} must be scalar or a {K}x{N} grid")
    return rows


def _int_grid(value, K: int, N: int, name: str) -> tuple[tuple[int, ...], ...]:
    grid = _grid(value, K, N, name)
    out = tuple(tuple(int(v) for v in row) for row in grid)
    if any(v < 1 for row in out for v in row):
        raise ValueError(f"{name} entries must be >= 1")
    return out


@dataclass(frozen=True)
class EhParams:
    """Harvester model: saturating log-quadratic curve fit or a linear law.

    In nonlinear mode the harvested power at RF input ``P`` (watts) is
    ``exp(a * ln(P)**2) * P**b * exp(c)``; ``a < 0`` and ``b < 0`` are
    required so the curve saturates and the convexity-shift argument of the
    deterministic-signal variant applies.  ``log`` is the natural logarithm
    (the underlying fit is in natural-log scale).  ``p_floor`` clamps the
    input power before taking logs.
    """

    a: float = -0.0977
    b: float = -0.9151
    c: float = -11.1648
    mode: str = "nonlinear"  # "nonlinear" | "linear"
    zeta: float = 0.5        # conversion efficiency, linear mode only
    p_floor: float = 1e-9

    def __post_init__(self):
        if self.mode not in ("nonlinear", "linear"):
            raise ValueError("mode must be 'nonlinear' or 'linear'")
        if self.mode == "nonlinear" and not (self.a < 0 and self.b < 0):
            raise ValueError("nonlinear mode requires a < 0 and b < 0")
        if self.p_floor <= 0:
            raise ValueError("p_floor must be positive")
        if self.mode == "linear" and not (0 < self.zeta <= 1):
            raise ValueError("zeta must lie in (0, 1]")


@dataclass(frozen=True)
class GeometrySpec:
    """Node distances of one scenario.

    ``d_hap_user[k][n]`` is the HAP to user ``(k, n)`` distance and
    ``d_user_ch[k][n][i]`` the distance from user ``(i, n)`` to the CH of
    cluster ``k`` (``n = 0..N-2``).  All distances are in metres and floored
    at the reference distance ``d0`` where the path-loss law is anchored.
    """

    d_hap_user: tuple[tuple[float, ...], ...]
    d_user_ch: tuple[tuple[tuple[float, ...], ...], ...]
    d0: float = 1.0
    amplitude_scale: float = 0.1

    def __post_init__(self):
        if self.d0 <= 0:
            raise GeometryError("d0 must be positive")
        flat = [d for row in self.d_hap_user for d in row]
        flat += [d for blk in self.d_user_ch for row in blk for d in row]
        if any(d < self.d0 - 1e-12 for d in flat):
            raise GeometryError("all distances must be >= d0")

    @property
    def K(self) -> int:
        return len(self.d_hap_user)

    @property
    def N(self) -> int:
        return len(self.d_hap_user[0])


@dataclass(frozen=True)
class NetworkConfig:
    """All scalar parameters of the network.

    Powers are in watts, durations are fractions of the block length ``T``
    (normalized to 1), antenna counts are per node.  ``M[k][n]`` may be
    given as a scalar and is broadcast.  Noise covariances are white,
    ``sigma^2 * I``, with one sigma^2 per receiver type.
    """

    K: int = 4
    N: int = 2
    M_h: int = 4
    M: tuple[tuple[int, ...], ...] | int = 4
    p0: float = 3.0
    T: float = 1.0
    tau1: float = 0.0
    noise_cov_uch: float = 1e-11    # -80 dBm
    noise_cov_uhap: float = 1e-11
    noise_cov_chhap: float = 1e-11
    Pc: tuple[tuple[float, ...], ...] | float = 10 ** (-23 / 10) * 1e-3  # -23 dBm
    eta: tuple[tuple[float, ...], ...] | float = 1.0
    eh: EhParams = field(default_factory=EhParams)
    rho_h: float = 0.95
    rho_g: float = 0.95
    alpha: float = 3.0
    bandwidth_hz: float = 1e6
    geometry: GeometrySpec | None = None

    def __post_init__(self):
        if self.K < 1 or self.N < 2:
            raise ValueError("need K >= 1 clusters and N >= 2 users per cluster")
        if self.M_h < 1:
            raise ValueError("M_h must be >= 1")
        object.__setattr__(self, "M", _int_grid(self.M, self.K, self.N, "M"))
        object.__setattr__(self, "Pc", _grid(self.Pc, self.K, self.N, "Pc"))
        object.__setattr__(self, "eta", _grid(self.eta, self.K, self.N, "eta"))
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if not (0 <= self.tau1 < self.T):
            raise ValueError("tau1 must lie in [0, T)")
        for s2 in (self.noise_cov_uch, self.noise_cov_uhap, self.noise_cov_chhap):
            if s2 <= 0:
                raise ValueError("noise covariances must be positive")
        for rho in (self.rho_h, self.rho_g):
            if not (0 <= rho <= 1):
                raise ValueError("rho must lie in [0, 1]")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.geometry is not None:
            if self.geometry.K != self.K or self.geometry.N != self.N:
                raise ValueError("geometry dimensions do not match K, N")

    @property
    def n_ch(self) -> int:
        """Index of the cluster head inside each cluster."""
        return self.N - 1

    def with_geometry(self, geometry: GeometrySpec) -> "NetworkConfig":
        return replace(self, geometry=geometry)

    def time_budget(self) -> float:
        """Time available to the charging and transmit phases."""
        return self.T - self.tau1


# ---------------------------------------------------------------------------
# geometry builders
# ---------------------------------------------------------------------------

def build_geometry(
    cfg_base: NetworkConfig,
    gamma: float,
    theta_deg: float,
    d_far: float = 10.0,
    d0: float = 1.0,
    amplitude_scale: float = 0.1,
) -> GeometrySpec:
    """Ray layout for the two-users-per-cluster scenario.

    Clusters sit on rays from the HAP separated by ``theta_deg``; the far
    user of cluster ``k`` is at ``d_far`` on its ray and the CH on the same
    ray at ``gamma * d_far``.  Cross distances follow from planar geometry.
    Distances that fall below ``d0`` (e.g. the in-cluster separation at
    ``gamma -> 1``) are floored at ``d0``, where the path-loss law is
    anchored; the layout only rejects parameters outside their ranges.
    """
    K, N = cfg_base.K, cfg_base.N
    if N != 2:
        raise GeometryError("ray layout is defined for N = 2 only; "
                            "use build_disk_geometry for larger clusters")
    if not (0 < gamma <= 1):
        raise GeometryError("gamma must lie in (0, 1]")
    if K > 1 and not (0 < theta_deg < 360.0 / K):
        raise GeometryError("theta must lie in (0, 360/K) degrees")
    if d_far <= d0:
        raise GeometryError("d_far must exceed d0")

    theta = math.radians(theta_deg)
    angles = [theta * (k - (K - 1) / 2) for k in range(K)]
    d_hap = tuple((d_far, max(gamma * d_far, d0)) for _ in range(K))

    # user (i, 0) at radius d_far on ray i; CH of cluster k at gamma*d_far on ray k
    d_uc = []
    for k in range(K):
        row = []
        for i in range(K):
            d2 = (d_far**2 + (gamma * d_far) ** 2
                  - 2 * d_far * gamma * d_far * math.cos(angles[i] - angles[k]))
            row.append(max(math.sqrt(max(d2, 0.0)), d0))
        d_uc.append((tuple(row),))
    return GeometrySpec(d_hap_user=d_hap, d_user_ch=tuple(d_uc),
                        d0=d0, amplitude_scale=amplitude_scale)


def build_disk_geometry(
    cfg_base: NetworkConfig,
    seed: int,
    ch_rule: str = "center",
    radius_m: float = 5.0,
    center_dist_m: float = 10.0,
    center_spacing_m: float = 10.0,
    d0: float = 1.0,
    amplitude_scale: float = 0.1,
) -> GeometrySpec:
    """Uniform-disk layout: users drawn in a disk per cluster, CH selected.

    Cluster centres lie on a circle of radius ``center_dist_m`` around the
    HAP with chord spacing ``center_spacing_m`` between neighbours.  Users
    are placed uniformly inside a ``radius_m`` disk around their centre, and
    the CH (relabelled to index ``N-1``) is the user nearest to the HAP
    (``ch_rule='hap'``) or nearest to the cluster centre (``ch_rule='center'``).
    """
    if ch_rule not in ("hap", "center"):
        raise ValueError("ch_rule must be 'hap' or 'center'")
    K, N = cfg_base.K, cfg_base.N
    half = center_spacing_m / (2 * center_dist_m)
    if half > 1:
        raise GeometryError("center_spacing_m too large for center_dist_m")
    dphi = 2 * math.asin(half)
    if K > 1 and (K - 1) * dphi > 2 * math.pi:
        raise GeometryError("too many clusters for the requested spacing")

    rng = np.random.default_rng(seed)
    centers = [(center_dist_m * math.cos(dphi * k), center_dist_m * math.sin(dphi * k))
               for k in range(K)]
    pos = np.empty((K, N, 2))
    for k in range(K):
        r = radius_m * np.sqrt(rng.random(N))
        ang = 2 * math.pi * rng.random(N)
        pos[k, :, 0] = centers[k][0] + r * np.cos(ang)
        pos[k, :, 1] = centers[k][1] + r * np.sin(ang)

    # relabel so the selected CH sits at index N-1
    for k in range(K):
        if ch_rule == "hap":
            ref = np.zeros(2)
        else:
            ref = np.asarray(centers[k])
        ch = int(np.argmin(np.linalg.norm(pos[k] - ref, axis=1)))
        order = [n for n in range(N) if n != ch] + [ch]
        pos[k] = pos[k][order]

    d_hap = tuple(tuple(max(float(np.linalg.norm(pos[k, n])), d0) for n in range(N))
                  for k in range(K))
    d_uc = tuple(
        tuple(
            tuple(max(float(np.linalg.norm(pos[i, n] - pos[k, N - 1])), d0)
                  for i in range(K))
            for n in range(N - 1)
        )
        for k in range(K)
    )
    return GeometrySpec(d_hap_user=d_hap, d_user_ch=d_uc,
                        d0=d0, amplitude_scale=amplitude_scale)


# ---------------------------------------------------------------------------
# channel generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelSet:
    """One Monte-Carlo draw: channel estimates plus per-entry error variances.

    ``H_hat[k][n]`` has shape ``(M[k][n], M_h)`` and ``G_hat[k][n][i]`` shape
    ``(M[k][N-1], M[i][n])`` for ``n != N-1``.  ``var_h_delta[k][n]`` and
    ``var_g_delta[k][n][i]`` are the per-entry estimation-error variances,
    equal to ``(1 - rho**2)`` times the path-loss power.
    """

    H_hat: tuple
    G_hat: tuple
    var_h_delta: tuple
    var_g_delta: tuple

    @property
    def K(self) -> int:
        return len(self.H_hat)

    @property
    def N(self) -> int:
        return len(self.H_hat[0])

    def validate(self, cfg: NetworkConfig) -> None:
        if self.K != cfg.K or self.N != cfg.N:
            raise ValueError("channel set dimensions do not match config")
        for k in range(cfg.K):
            for n in range(cfg.N):
                if self.H_hat[k][n].shape != (cfg.M[k][n], cfg.M_h):
                    raise ValueError(f"H_hat[{k}][{n}] has the wrong shape")
        for k in range(cfg.K):
            for n in range(cfg.N - 1):
                for i in range(cfg.K):
                    want = (cfg.M[k][cfg.n_ch], cfg.M[i][n])
                    if self.G_hat[k][n][i].shape != want:
                        raise ValueError(f"G_hat[{k}][{n}][{i}] has the wrong shape")

    def assume_perfect(self) -> "ChannelSet":
        """Copy with zero error variances: the estimates treated as truth.

        Used by the non-robust design variant, which optimizes pretending
        the CSI is exact and is then evaluated under the true variances.
        """
        zh = tuple(tuple(0.0 for _ in row) for row in self.var_h_delta)
        zg = tuple(tuple(tuple(0.0 for _ in r) for r in blk) for blk in self.var_g_delta)
        return ChannelSet(self.H_hat, self.G_hat, zh, zg)


def _cn_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Matrix of i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def pathloss_power(geo: GeometrySpec, d: float, alpha: float) -> float:
    """Per-entry channel power at distance d: scale^2 * (d/d0)^(-alpha)."""
    return geo.amplitude_scale**2 * (d / geo.d0) ** (-alpha)


def sample_channels(cfg: NetworkConfig, seed: int) -> ChannelSet:
    """Draw one channel realization; a pure function of (cfg, seed)."""
    geo = cfg.geometry
    if geo is None:
        raise ValueError("config has no geometry; call with_geometry first")
    rng = np.random.default_rng(seed)
    nch = cfg.n_ch

    H_hat, var_h = [], []
    for k in range(cfg.K):
        row_h, row_v = [], []
        for n in range(cfg.N):
            p = pathloss_power(geo, geo.d_hap_user[k][n], cfg.alpha)
            est = np.sqrt(cfg.rho_h**2 * p) * _cn_matrix(rng, cfg.M[k][n], cfg.M_h)
            row_h.append(est)
            row_v.append((1 - cfg.rho_h**2) * p)
        H_hat.append(tuple(row_h))
        var_h.append(tuple(row_v))

    G_hat, var_g = [], []
    for k in range(cfg.K):
        blk_g, blk_v = [], []
        for n in range(cfg.N - 1):
            row_g, row_v = [], []
            for i in range(cfg.K):
                p = pathloss_power(geo, geo.d_user_ch[k][n][i], cfg.alpha)
                est = np.sqrt(cfg.rho_g**2 * p) * _cn_matrix(rng, cfg.M[k][nch], cfg.M[i][n])
                row_g.append(est)
                row_v.append((1 - cfg.rho_g**2) * p)
            blk_g.append(tuple(row_g))
            blk_v.append(tuple(row_v))
        G_hat.append(tuple(blk_g))
        var_g.append(tuple(blk_v))

    out = ChannelSet(tuple(H_hat), tuple(G_hat),
                     tuple(var_h), tuple(var_g))
    out.validate(cfg)
    return out


# ---------------------------------------------------------------------------
# config file I/O (JSON; schema documented in the README)
# ---------------------------------------------------------------------------

def _geometry_to_dict(geo: GeometrySpec) -> dict:
    return {
        "d_hap_user": [list(r) for r in geo.d_hap_user],
        "d_user_ch": [[list(r) for r in blk] for blk in geo.d_user_ch],
        "d0": geo.d0,
        "amplitude_scale": geo.amplitude_scale,
    }


def config_to_dict(cfg: NetworkConfig) -> dict:
    d = {
        "K": cfg.K, "N": cfg.N, "M_h": cfg.M_h,
        "M": [list(r) for r in cfg.M],
        "p0": cfg.p0, "T": cfg.T, "tau1": cfg.tau1,
        "noise_cov_uch": cfg.noise_cov_uch,
        "noise_cov_uhap": cfg.noise_cov_uhap,
        "noise_cov_chhap": cfg.noise_cov_chhap,
        "Pc": [list(r) for r in cfg.Pc],
        "eta": [list(r) for r in cfg.eta],
        "eh": {"a": cfg.eh.a, "b": cfg.eh.b, "c": cfg.eh.c,
               "mode": cfg.eh.mode, "zeta": cfg.eh.zeta,
               "p_floor": cfg.eh.p_floor},
        "rho_h": cfg.rho_h, "rho_g": cfg.rho_g,
        "alpha": cfg.alpha, "bandwidth_hz": cfg.bandwidth_hz,
    }
    if cfg.geometry is not None:
        d["geometry"] = _geometry_to_dict(cfg.geometry)
    return d


def config_from_dict(d: dict) -> NetworkConfig:
    d = dict(d)
    if "eh" in d:
        d["eh"] = EhParams(**d["eh"])
    if "geometry" in d and d["geometry"] is not None:
        g = d["geometry"]
        d["geometry"] = GeometrySpec(
            d_hap_user=tuple(tuple(r) for r in g["d_hap_user"]),
            d_user_ch=tuple(tuple(tuple(r) for r in blk) for blk in g["d_user_ch"]),
            d0=g.get("d0", 1.0),
            amplitude_scale=g.get("amplitude_scale", 0.1),
        )
    for key in ("M", "Pc", "eta"):
        if key in d and isinstance(d[key], list):
            d[key] = tuple(tuple(r) for r in d[key])
    return NetworkConfig(**d)


def load_config(path) -> NetworkConfig:
    """Load a NetworkConfig (and optional geometry) from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: NetworkConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
