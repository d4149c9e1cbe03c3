"""Alternating-optimization driver.

One run alternates two convex steps until the true objective stalls:

* step 1 -- covariance step at fixed slot durations, itself an inner
  minorize-maximize loop: build the rate minorizers at the current anchor,
  solve the conic subproblem, re-anchor, repeat;
* step 2 -- slot-duration LP at fixed covariances.

Both steps can only improve the true objective: the subproblem's feasible
set is an inner approximation that contains the anchor, with constraints
touching at the anchor, and the LP is exact.  The trace records the true
(physics-evaluated) objective after every outer round and the surrogate
objective of every inner pass.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import conic
from .model import ChannelSet, NetworkConfig
from .physics import (
    Allocation,
    ThroughputReport,
    b_matrix,
    constraint_slacks,
    harvested_power_unit,
    rf_input_power,
    throughput_report,
)
from .subproblems import (
    build_covariance_subproblem,
    build_covariance_subproblem_det,
    build_sum_subproblem,
    build_time_lp,
    decode_covariance,
    decode_time,
)
from .surrogate import build_surrogates, xi_bound

__all__ = [
    "SolveOptions",
    "SolveTrace",
    "InfeasibleInstance",
    "SolveError",
    "initialize",
    "run",
    "run_noncooperative",
]


class InfeasibleInstance(RuntimeError):
    """The circuit power cannot be covered even with full-time charging."""


class SolveError(RuntimeError):
    """A subproblem failed; carries the trace collected so far."""

    def __init__(self, msg: str, trace: "SolveTrace"):
        super().__init__(msg)
        self.trace = trace


@dataclass
class SolveOptions:
    outer_tol: float = 1e-4       # absolute change of the true objective
    inner_tol: float = 1e-3       # relative change of the surrogate objective
    max_outer: int = 50
    max_inner: int = 30
    objective: str = "maxmin"     # "maxmin" | "sum"
    signal: str = "random"        # "random" | "det"
    cooperation: bool = True
    seed: int = 0                 # initialization seed (0 = canonical start)
    solver_tol: float = 1e-9
    xi_margin: float = 0.1
    n_starts: int = 1             # charging-slot templates to try (best kept)
    tau2_probes: int = 2          # guarded charging-slot line searches after convergence
    explore_structures: bool = True  # cooperative runs also try the no-relay structure

    @classmethod
    def table1(cls, **kw) -> "SolveOptions":
        """The plain nested alternation with no basin-escape heuristics."""
        kw.setdefault("tau2_probes", 0)
        kw.setdefault("n_starts", 1)
        kw.setdefault("explore_structures", False)
        return cls(**kw)

    def __post_init__(self):
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.objective not in ("maxmin", "sum"):
            raise ValueError("objective must be 'maxmin' or 'sum'")
        if self.signal not in ("random", "det"):
            raise ValueError("signal must be 'random' or 'det'")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass
class SolveTrace:
    outer_objectives: list = field(default_factory=list)
    inner_objectives: list = field(default_factory=list)   # one list per outer round
    statuses: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)         # (stage, seconds)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["outer_iter", "stage", "objective"])
            for i, inners in enumerate(self.inner_objectives):
                for j, v in enumerate(inners):
                    w.writerow([i, f"mm_{j}", f"{v:.12g}"])
                if i < len(self.outer_objectives):
                    w.writerow([i, "outer", f"{self.outer_objectives[i]:.12g}"])


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _random_factor(rng, m: int, tr: float) -> np.ndarray:
    """Complex factor X with tr(X X^H) = tr, random direction."""
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return X * np.sqrt(tr / np.trace(X @ X.conj().T).real)


def _maxmin_beam_direction(Bs: list[np.ndarray], M_h: int, iters: int = 40) -> np.ndarray:
    """Unit vector lifting the worst user's received power (projected ascent)."""
    v = np.linalg.eigh(sum(Bs))[1][:, -1].astype(complex)
    best_v, best_val = v, min(float(np.real(v.conj() @ B @ v)) for B in Bs)
    for _ in range(iters):
        worst = min(Bs, key=lambda B: float(np.real(v.conj() @ B @ v)))
        v = v + 0.5 * (worst @ v) / max(np.linalg.norm(worst @ v), 1e-30)
        v = v / np.linalg.norm(v)
        val = min(float(np.real(v.conj() @ B @ v)) for B in Bs)
        if val > best_val:
            best_val, best_v = val, v
    return best_v


def initialize(cfg: NetworkConfig, channels: ChannelSet, seed: int = 0,
               cooperation: bool = True, signal: str = "random",
               tau2_frac: float | None = None) -> Allocation:
    """Feasible starting point: equal slot split, scaled-identity covariances.

    ``seed=0`` gives the canonical start (isotropic beamforming, identity
    factor directions); other seeds randomize the directions under the same
    feasibility scaling, for initialization-sensitivity studies.
    ``tau2_frac`` fixes the charging slot as a fraction of the budget
    (multi-start templates); by default the slots split equally, with the
    charging slot stretched when the equal split cannot cover the circuit
    power.  Raises :class:`InfeasibleInstance` when no charging slot can.

    Covariances start at a tenth of their energy caps: the covariance step
    can always grow them back to the cap, but the alternation has no move
    that lowers transmit power and lengthens a slot simultaneously, so a
    saturated start would wall off the low-power/long-slot part of the
    landscape.
    """
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    rng = np.random.default_rng(seed)
    budget = cfg.time_budget()
    n_slots = 2 * N if cooperation else N + 1

    Bs = [b_matrix(channels, k, n, cfg.M_h) for k in range(K) for n in range(N)]
    # hard infeasibility: even full-time charging at the best rank-1 beam
    # cannot cover some user's circuit power
    for (k, n), B in zip(((k, n) for k in range(K) for n in range(N)), Bs):
        peak = harvested_power_unit(cfg.p0 * float(np.linalg.eigvalsh(B).max()),
                                    cfg.eh)
        if cfg.Pc[k][n] * cfg.T >= budget * peak:
            raise InfeasibleInstance(
                f"user ({k},{n}) cannot cover its circuit power")

    Q = x0 = None
    if signal == "random":
        if seed == 0:
            Q = (cfg.p0 / cfg.M_h) * np.eye(cfg.M_h, dtype=complex)
        else:
            A = (rng.standard_normal((cfg.M_h, cfg.M_h))
                 + 1j * rng.standard_normal((cfg.M_h, cfg.M_h)))
            Q = A @ A.conj().T
            Q *= cfg.p0 / np.trace(Q).real
        eb = Q
    else:
        v = _maxmin_beam_direction(Bs, cfg.M_h)
        if seed != 0:
            w = rng.standard_normal(cfg.M_h) + 1j * rng.standard_normal(cfg.M_h)
            v = v + 0.3 * w / np.linalg.norm(w)
            v = v / np.linalg.norm(v)
        x0 = np.sqrt(cfg.p0) * v
        eb = np.outer(x0, x0.conj())

    P = np.array([[rf_input_power(eb, channels.H_hat[k][n], channels.var_h_delta[k][n])
                   for n in range(N)] for k in range(K)])
    unit = np.array([[harvested_power_unit(P[k, n], cfg.eh)
                      for n in range(N)] for k in range(K)])
    pc = np.array([[cfg.Pc[k][n] for n in range(N)] for k in range(K)])

    tau2_min = float(np.max(pc * cfg.T / np.maximum(unit, 1e-300)))
    if tau2_frac is not None:
        tau2 = max(tau2_frac * budget, min(1.05 * tau2_min, 0.95 * budget))
    else:
        tau2 = max(budget / n_slots, min(1.05 * tau2_min, 0.95 * budget))
    if tau2 < tau2_min:
        raise InfeasibleInstance("the starting beam cannot cover circuit power")
    rest = (budget - tau2) / (n_slots - 1)
    tau = np.zeros(2 * N)
    tau[0] = tau2
    tau[1:N] = rest
    if cooperation:
        tau[N:] = rest
    else:
        tau[N + nch] = rest

    energy = tau2 * unit
    X = []
    for k in range(K):
        row = []
        for n in range(N - 1):
            spend = 0.10 * max(energy[k, n] - pc[k, n] * cfg.T, 0.0)
            tr = spend / (cfg.eta[k][n] * tau[1 + n]) if tau[1 + n] > 0 else 0.0
            m = cfg.M[k][n]
            row.append(np.sqrt(tr / m) * np.eye(m, dtype=complex) if seed == 0
                       else _random_factor(rng, m, tr))
        X.append(tuple(row))
    Xt = []
    for k in range(K):
        row = []
        spend = 0.10 * max(energy[k, nch] - pc[k, nch] * cfg.T, 0.0)
        active = [n for n in range(N) if tau[N + n] > 0]
        m = cfg.M[k][nch]
        for n in range(N):
            if n in active:
                tr = spend / (len(active) * cfg.eta[k][nch] * tau[N + n])
                row.append(np.sqrt(tr / m) * np.eye(m, dtype=complex) if seed == 0
                           else _random_factor(rng, m, tr))
            else:
                row.append(np.zeros((m, m), dtype=complex))
        Xt.append(tuple(row))

    alloc = Allocation(tau=tau, X=tuple(X), X_tilde=tuple(Xt), Q=Q, x0=x0)
    slacks = constraint_slacks(alloc, channels, cfg)
    if min(slacks.values()) < -1e-9:
        raise InfeasibleInstance(f"initialization violates constraints: {slacks}")
    return alloc


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------

def _true_objective(alloc: Allocation, channels: ChannelSet,
                    cfg: NetworkConfig, objective: str) -> float:
    rep = throughput_report(alloc, channels, cfg)
    return rep.min_throughput if objective == "maxmin" else rep.sum_throughput


def _incumbent_powers(alloc: Allocation, channels: ChannelSet,
                      cfg: NetworkConfig) -> dict:
    """Per-user RF input powers at the incumbent beam (harvest-model nodes)."""
    Q = alloc.eb_matrix()
    return {(k, n): rf_input_power(Q, channels.H_hat[k][n],
                                   channels.var_h_delta[k][n])
            for k in range(cfg.K) for n in range(cfg.N)}


_TAU2_TEMPLATES = (None, 0.12, 0.3, 0.55, 0.75)


def run(cfg: NetworkConfig, channels: ChannelSet,
        opts: SolveOptions | None = None,
        baseline: Allocation | None = None):
    """Alternating optimization; returns (Allocation, ThroughputReport, SolveTrace).

    With ``n_starts > 1`` the alternation restarts from a few charging-slot
    templates and the best end point is kept (the landscape is multimodal in
    the power/time split and one alternation path cannot cross between
    basins).  Cooperative runs also explore the no-relaying structure --
    every pinned-relay allocation is feasible here, and on draws where
    relaying does not pay the alternation cannot cross to that structure on
    its own.  Pass the allocation of a finished non-cooperative run as
    ``baseline`` to reuse it; otherwise the pinned pipeline runs internally.
    The returned report re-evaluates the final allocation through the
    physics module (true rates, not surrogates).
    """
    opts = opts or SolveOptions()
    best = None
    for i in range(opts.n_starts):
        frac = _TAU2_TEMPLATES[i % len(_TAU2_TEMPLATES)]
        try:
            out = _run_single(cfg, channels, opts, tau2_frac=frac)
        except SolveError:
            if best is None and i == opts.n_starts - 1:
                raise
            continue
        key = (out[1].min_throughput if opts.objective == "maxmin"
               else out[1].sum_throughput)
        if best is None or key > best[0]:
            best = (key, out)

    if opts.cooperation and cfg.N >= 2 and (opts.explore_structures
                                            or baseline is not None):
        base_alloc = baseline
        if base_alloc is None:
            try:
                base_alloc = run(cfg, channels,
                                 dc_replace(opts, cooperation=False))[0]
            except (SolveError, InfeasibleInstance):
                base_alloc = None
        if base_alloc is not None:
            rep = throughput_report(base_alloc, channels, cfg)
            key = (rep.min_throughput if opts.objective == "maxmin"
                   else rep.sum_throughput)
            if key > best[0]:
                alloc, _, trace = best[1]
                trace.outer_objectives.append(key)
                best = (key, (base_alloc, rep, trace))
    return best[1]


def _run_single(cfg: NetworkConfig, channels: ChannelSet,
                opts: SolveOptions, tau2_frac: float | None = None):
    trace = SolveTrace()
    alloc = initialize(cfg, channels, opts.seed, cooperation=opts.cooperation,
                       signal=opts.signal, tau2_frac=tau2_frac)
    alloc = _ao_loop(cfg, channels, opts, alloc, trace, lp_first=False)

    # The alternation has no move that changes the charging slot and the
    # transmit powers together (the covariance step saturates the energy
    # caps at fixed time, the LP re-times at fixed power), so it can stall
    # on the charging/transmission ridge.  Probe along it: rescale tau2,
    # re-saturate the powers in closed form, and continue the alternation
    # from the best probe if it beats the incumbent.
    for _ in range(opts.tau2_probes):
        g_best = _true_objective(alloc, channels, cfg, opts.objective)
        cand = _charging_probe(cfg, channels, alloc, opts, g_best)
        if cand is None:
            break
        sub_trace = SolveTrace()
        cont_opts = dc_replace(opts, max_outer=min(opts.max_outer, 15))
        try:
            cand = _ao_loop(cfg, channels, cont_opts, cand, sub_trace, lp_first=False)
        except SolveError:
            break
        trace.inner_objectives.extend(sub_trace.inner_objectives)
        trace.statuses.extend(sub_trace.statuses)
        trace.wall_clock.extend(sub_trace.wall_clock)
        g_cand = _true_objective(cand, channels, cfg, opts.objective)
        if g_cand <= g_best + opts.outer_tol:
            break
        # the outer trace tracks the incumbent: record the accepted probe's
        # end point, not its (initially lower) climb
        trace.outer_objectives.append(g_cand)
        alloc = cand

    report = throughput_report(alloc, channels, cfg)
    return alloc, report, trace


def _resaturate(cfg: NetworkConfig, channels: ChannelSet, alloc: Allocation,
                tau: np.ndarray) -> Allocation:
    """Rescale covariance factors to 99% of their energy caps at slots tau.

    Slots with zero duration get zero factors so the follow-up time LP sees
    their true (zero) rate and cannot re-open them on stale powers.
    """
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    Q = alloc.eb_matrix()
    X, Xt = [], []
    for k in range(K):
        rowX = []
        for n in range(N - 1):
            if tau[1 + n] <= 0:
                rowX.append(np.zeros_like(alloc.X[k][n]))
                continue
            P = rf_input_power(Q, channels.H_hat[k][n], channels.var_h_delta[k][n])
            avail = 0.99 * max(tau[0] * harvested_power_unit(P, cfg.eh)
                               - cfg.Pc[k][n] * cfg.T, 0.0)
            cur = cfg.eta[k][n] * tau[1 + n] * float(np.trace(alloc.S(k, n)).real)
            rowX.append(alloc.X[k][n] * np.sqrt(avail / cur) if cur > 0
                        else alloc.X[k][n].copy())
        X.append(tuple(rowX))
        P = rf_input_power(Q, channels.H_hat[k][nch], channels.var_h_delta[k][nch])
        avail = 0.99 * max(tau[0] * harvested_power_unit(P, cfg.eh)
                           - cfg.Pc[k][nch] * cfg.T, 0.0)
        cur = sum(cfg.eta[k][nch] * tau[N + m] * float(np.trace(alloc.S_tilde(k, m)).real)
                  for m in range(N))
        s = np.sqrt(avail / cur) if cur > 0 else 1.0
        Xt.append(tuple((x * s if tau[N + m] > 0 else np.zeros_like(x))
                        for m, x in enumerate(alloc.X_tilde[k])))
    return Allocation(tau=tau.copy(), X=tuple(X), X_tilde=tuple(Xt),
                      Q=alloc.Q, x0=alloc.x0)


def _charging_probe(cfg: NetworkConfig, channels: ChannelSet, alloc: Allocation,
                    opts: SolveOptions, g_best: float) -> Allocation | None:
    """Best re-timed/re-saturated candidate along the charging-slot ray.

    Each candidate gets one time-LP pass so the transmit slots re-balance
    to its power levels before being judged.  Candidates worse than 85% of
    the incumbent are discarded; the caller's final keep-if-better guard
    decides whether the continued alternation actually pays off.
    """
    budget = cfg.time_budget()
    tau2 = float(alloc.tau[0])
    rest = alloc.tau[1:]
    rest_sum = float(np.sum(rest))
    if rest_sum <= 0:
        return None
    taus = []
    # charging-slot ray: coarse steps cross between charging/transmission
    # basins; the fine steps matter for feasibility-squeezed instances
    # where all slack lives within a few percent of the charging slot
    for f in (0.5, 0.65, 0.8, 0.9, 0.96, 0.98, 0.99,
              1.01, 1.02, 1.04, 1.1, 1.25, 1.5):
        t2 = tau2 * f
        if 0 < t2 < budget:
            taus.append(np.concatenate([[t2], rest * (budget - t2) / rest_sum]))
    # pairwise slot transfers: the LP alone cannot rebalance transmit slots
    # against their saturated powers (a long slot's power is low, so cutting
    # it always looks like a rate loss at fixed covariances); half and full
    # transfers explore those crossings, a full transfer out of a relay
    # slot being the no-relaying structure
    pinned = () if opts.cooperation else tuple(range(cfg.N, 2 * cfg.N - 1))
    n_slots = 2 * cfg.N
    for a in range(n_slots):
        if alloc.tau[a] <= 0 or a in pinned:
            continue
        for b in range(n_slots):
            if b == a or b in pinned:
                continue
            for frac in (0.5, 1.0):
                tau = alloc.tau.copy()
                tau[b] += frac * tau[a]
                tau[a] *= (1.0 - frac)
                taus.append(tau)

    best = None
    silent = SolveTrace()
    for tau in taus:
        cand = _resaturate(cfg, channels, alloc, tau)
        try:
            cand = _time_step(cfg, channels, opts, cand, silent)
        except SolveError:
            continue
        g = _true_objective(cand, channels, cfg, opts.objective)
        if best is None or g > best[0]:
            best = (g, cand)
    if best is None or best[0] < 0.85 * g_best:
        return None
    return best[1]


def _time_step(cfg, channels, opts, alloc, trace):
    t0 = time.perf_counter()
    lp = build_time_lp(cfg, channels, alloc, objective=opts.objective,
                       cooperation=opts.cooperation)
    sol = conic.solve(lp, tol=opts.solver_tol)
    trace.statuses.append(f"time:{sol.status}")
    if sol.status == "Infeasible":
        raise SolveError("time LP infeasible", trace)
    tau_new = decode_time(lp, sol.x)
    trace.wall_clock.append(("time_lp", time.perf_counter() - t0))
    return Allocation(tau=tau_new, X=alloc.X, X_tilde=alloc.X_tilde,
                      Q=alloc.Q, x0=alloc.x0)


def _ao_loop(cfg: NetworkConfig, channels: ChannelSet, opts: SolveOptions,
             alloc: Allocation, trace: SolveTrace, lp_first: bool) -> Allocation:
    if lp_first:
        alloc = _time_step(cfg, channels, opts, alloc, trace)
    g_prev = _true_objective(alloc, channels, cfg, opts.objective)
    for outer in range(opts.max_outer):
        # ---- step 1: covariance step (inner MM loop) ----
        t0 = time.perf_counter()
        inner_vals: list[float] = []
        anchor = alloc
        extra_nodes = _incumbent_powers(anchor, channels, cfg)
        xi = None
        if opts.signal == "det":
            tau2 = float(anchor.tau[0])
            xi = {(k, n): (1.0 + opts.xi_margin)
                  * xi_bound(b_matrix(channels, k, n, cfg.M_h), cfg.p0, cfg.eh, tau2)
                  for k in range(cfg.K) for n in range(cfg.N)}
        val_prev = None
        for kappa in range(opts.max_inner):
            surr = build_surrogates(channels, anchor, cfg)
            if opts.signal == "det":
                prob = build_covariance_subproblem_det(
                    cfg, channels, anchor.tau, anchor.x0, xi, surr, anchor,
                    objective=opts.objective)
            elif opts.objective == "maxmin":
                prob = build_covariance_subproblem(
                    cfg, channels, anchor.tau, anchor, surr,
                    eh_extra_nodes=extra_nodes)
            else:
                prob = build_sum_subproblem(
                    cfg, channels, anchor.tau, anchor, surr,
                    eh_extra_nodes=extra_nodes)
            sol = conic.solve(prob, tol=opts.solver_tol)
            trace.statuses.append(f"cov:{sol.status}")
            if sol.status == "Infeasible":
                raise SolveError(f"covariance subproblem infeasible at outer {outer}",
                                 trace)
            if sol.status == "NumericalLimit" and kappa > 0:
                break  # keep the previous anchor
            anchor = decode_covariance(prob, sol.x, cfg, anchor.tau, anchor)
            inner_vals.append(sol.objective_value)
            if val_prev is not None:
                rel = abs(sol.objective_value - val_prev) / max(1.0, abs(val_prev))
                if rel <= opts.inner_tol:
                    break
            val_prev = sol.objective_value
        alloc = anchor
        trace.inner_objectives.append(inner_vals)
        trace.wall_clock.append(("covariance", time.perf_counter() - t0))

        # ---- step 2: time LP ----
        alloc = _time_step(cfg, channels, opts, alloc, trace)

        g = _true_objective(alloc, channels, cfg, opts.objective)
        trace.outer_objectives.append(g)
        if abs(g - g_prev) <= opts.outer_tol:
            break
        g_prev = g

    return alloc


def run_noncooperative(cfg: NetworkConfig, channels: ChannelSet,
                       opts: SolveOptions | None = None):
    """Same pipeline with the relaying slots pinned to zero."""
    opts = opts or SolveOptions()
    if opts.cooperation:
        opts = dc_replace(opts, cooperation=False)
    return run(cfg, channels, opts)
