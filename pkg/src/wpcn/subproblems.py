"""Conic formulations of the three alternating-optimization subproblems.

* covariance step (time vector fixed): SOCP over the beamforming covariance,
  the user/CH covariance factors and the epigraph scalar, with the rate
  constraints replaced by their quadratic minorizers and the harvested
  energy by a piecewise-linear concave under-approximation,
* time step (covariances fixed): LP over the slot durations,
* sum-throughput variant: QCQP whose objective carries the CH own-rate
  minorizers and per-user epigraph scalars,
* deterministic-signal variant: the beamforming covariance is replaced by a
  vector under a norm ball, and the energy constraints use the
  affine-minus-quadratic harvest minorizer.

Variable layout (real): ``beta`` / ``phi`` epigraph scalars, ``q`` (real
parameters of the Hermitian beamforming covariance) or ``x0`` (embedded
complex vector), ``s:{k}:{n}`` and ``st:{k}:{n}`` embedded vec(X) factors,
``e:{k}:{n}`` harvested-energy epigraphs.  Slots with (fixed) zero duration
contribute no variables; their rate constraints degenerate to ``beta <= 0``.
"""

from __future__ import annotations

import numpy as np

from .conic import (
    ConicProblem,
    ProblemBuilder,
    embed_complex_matrix,
    embed_complex_vector,
    embed_hermitian_quadratic,
    hermitian_basis,
    svec,
)
from .model import ChannelSet, EhParams, NetworkConfig
from .physics import (
    Allocation,
    b_matrix,
    eh_concave_range,
    harvested_power_unit,
    rate_ch_to_hap,
    rate_user_to_ch,
    rate_user_to_hap,
    rf_input_power,
)
from .surrogate import EnergySurrogate, SurrogateSet, vec

__all__ = [
    "build_covariance_subproblem",
    "build_sum_subproblem",
    "build_covariance_subproblem_det",
    "build_time_lp",
    "decode_covariance",
    "decode_time",
    "eh_underestimator_lines",
]

_SLOT_EPS = 1e-9


# ---------------------------------------------------------------------------
# piecewise-linear concave under-approximation of the harvest curve
# ---------------------------------------------------------------------------

def _eh_value_and_slope(P: np.ndarray, eh: EhParams):
    lp = np.log(P)
    val = np.exp(eh.a * lp * lp + eh.b * lp + eh.c)
    slope = val * (2 * eh.a * lp + eh.b) / P
    return val, slope


def eh_underestimator_lines(eh: EhParams, p_hi: float, n_nodes: int = 64,
                            extra_nodes=()) -> list[tuple[float, float]]:
    """Lines (slope, intercept) whose pointwise min under-estimates the
    unit-time harvest curve on (0, p_hi].

    The curve is S-shaped in the input power: convex below the lower
    inflection point, concave between the inflection points, convex and
    decreasing beyond.  Chords of log-spaced nodes cover the concave
    interval tightly; the two inflection tangents alone bridge the convex
    tails (a tangent lies below a convex arc, and above the concave one, so
    it never drags the pointwise min below the curve where the chords are
    tight).  Tangents at interior convex-region nodes must NOT be added:
    extended rightward they dive far under the concave arc and would ruin
    the model there.
    """
    if eh.mode == "linear":
        return [(eh.zeta, 0.0)]

    def tangent(p):
        v, s = _eh_value_and_slope(np.asarray([p], float), eh)
        return (float(s[0]), float(v[0] - s[0] * p))

    c_lo, c_hi = eh_concave_range(eh)
    if p_hi <= c_lo:
        # entire reachable range is in the convex tail; the pointwise min of
        # several tangents collapses to the lowest one there, so use the
        # single tangent at the reachable maximum: conservative on the whole
        # tail and tight where the harvest is largest
        return [tangent(p_hi)]

    hi = min(c_hi, p_hi)
    nodes = set(np.geomspace(c_lo, hi, n_nodes))
    nodes.update((c_lo, hi))
    for p in extra_nodes:
        if np.isfinite(p) and c_lo < p < hi:
            nodes.add(float(p))
    nodes = np.array(sorted(nodes))
    vals, _ = _eh_value_and_slope(nodes, eh)

    lines = [tangent(c_lo)]
    for i in range(len(nodes) - 1):
        s = (vals[i + 1] - vals[i]) / (nodes[i + 1] - nodes[i])
        lines.append((float(s), float(vals[i] - s * nodes[i])))
    if p_hi > c_hi:
        lines.append(tangent(c_hi))
    return lines


# ---------------------------------------------------------------------------
# shared assembly pieces
# ---------------------------------------------------------------------------

def _active_slots(cfg: NetworkConfig, tau: np.ndarray):
    act3 = [n for n in range(cfg.N - 1) if tau[1 + n] > _SLOT_EPS]
    act4 = [n for n in range(cfg.N) if tau[cfg.N + n] > _SLOT_EPS]
    return act3, act4


def _embedded_v(v: np.ndarray) -> np.ndarray:
    """Row vector r with 2*Re{v^H s} = 2 * r @ embed(s)."""
    return 2.0 * embed_complex_vector(v)


def _rate_quad_terms(bld, coeffs, tau: float, var_of, w_entries, u_entries):
    """Append one family's tau-scaled surrogate pieces to an RSOC draft.

    The minorized rate is ``-tau*(T + 2Re{v^H s_k} + sum_j s_j^H Ups_j s_j)``;
    its quadratic part lands in ``w`` and the rest in the affine bound ``u``.
    Returns the constant contribution ``-tau*T``.
    """
    rt = np.sqrt(tau)
    for j, core in coeffs.core.items():
        W = embed_hermitian_quadratic(core, core.shape[0])
        w_entries.append((bld.var_map[var_of(j)], rt * W))
    u_entries.append((bld.var_map[var_of(coeffs.k)], -tau * _embedded_v(coeffs.v)))
    return -tau * coeffs.T


def _add_epigraph_rate(bld: ProblemBuilder, parts, epi: slice) -> None:
    """Sum of minorized rates >= epigraph var: one quadratic<=affine cone.

    ``parts`` is a list of (coeffs, tau, var_of) whose surrogate values add
    up on the left-hand side; slots with zero duration contribute nothing,
    and if none is active the constraint degenerates to ``epi <= 0``.
    """
    w_entries: list = []
    u_entries: list = [(epi, np.array([-1.0]))]
    const = 0.0
    for coeffs, tau, var_of in parts:
        if tau <= _SLOT_EPS:
            continue
        const += _rate_quad_terms(bld, coeffs, tau, var_of, w_entries, u_entries)
    if not w_entries:
        bld.add_upper_bound([(epi, [1.0])], 0.0)
        return
    w_rows = sum(m.shape[0] for _, m in w_entries)
    bld.add_quad_le_affine(w_entries, w_rows, u_entries, const)


class _EnergyModel:
    """Adds harvested-energy epigraph variables and hypograph rows (random-Q).

    Line sets are built per user over that user's own reachable input-power
    interval: users sit at power scales orders of magnitude apart, and a
    shared set anchored at the strongest user's range under-estimates the
    weak users' harvest so badly it can declare them energy-infeasible.
    """

    def __init__(self, bld: ProblemBuilder, cfg: NetworkConfig,
                 channels: ChannelSet, tau2: float, q_slice,
                 basis, extra_nodes):
        self.bld, self.cfg = bld, cfg
        self.q_slice = q_slice
        extra = dict(extra_nodes or {})
        self.pcoef, self.lines = {}, {}
        for k in range(cfg.K):
            for n in range(cfg.N):
                B = b_matrix(channels, k, n, cfg.M_h)
                self.pcoef[(k, n)] = np.array(
                    [np.trace(E @ B).real for E in basis])
                p_hi = cfg.p0 * float(np.linalg.eigvalsh(B).max())
                nodes = [extra[(k, n)]] if (k, n) in extra else ()
                self.lines[(k, n)] = eh_underestimator_lines(
                    cfg.eh, p_hi, extra_nodes=nodes)
        self.tau2 = tau2

    def add_user(self, k: int, n: int, row_scale: float) -> str:
        """Create e_{k,n} <= tau2 * line_i(P_{k,n}(q)) rows; return var name.

        Rows are multiplied by ``row_scale`` so their coefficients sit near
        unity (the natural energy scale is microwatts, far below the
        solver's absolute tolerances).
        """
        name = f"e:{k}:{n}"
        se = self.bld.add_var(name, 1)
        lines = self.lines[(k, n)]
        slopes = np.array([a for a, _ in lines])
        icepts = np.array([b for _, b in lines])
        block_e = row_scale * np.ones((len(lines), 1))
        block_q = -row_scale * self.tau2 * np.outer(slopes, self.pcoef[(k, n)])
        self.bld.add_block("nonneg", len(lines),
                           [(se, block_e), (self.q_slice, block_q)],
                           row_scale * self.tau2 * icepts)
        return name


# ---------------------------------------------------------------------------
# covariance subproblems
# ---------------------------------------------------------------------------

def _build_cov_problem(cfg: NetworkConfig, channels: ChannelSet,
                       tau_fixed: np.ndarray, anchor: Allocation,
                       surrogates: SurrogateSet, objective: str,
                       signal: str,
                       energy_surrogates: dict | None = None,
                       eh_extra_nodes=()) -> ConicProblem:
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    tau = np.asarray(tau_fixed, dtype=float)
    act3, act4 = _active_slots(cfg, tau)
    bld = ProblemBuilder()

    if objective == "maxmin":
        bld.add_var("beta", 1)
        bld.set_objective("beta", [1.0])
    else:
        bld.add_var("phi", K * (N - 1))
        bld.set_objective("phi", np.ones(K * (N - 1)))

    # -- beamforming variable -------------------------------------------------
    if signal == "random":
        basis = hermitian_basis(cfg.M_h)
        sq = bld.add_var("q", len(basis))
        trace_coeffs = np.array([np.trace(E).real for E in basis])
        bld.add_upper_bound([(sq, trace_coeffs)], cfg.p0)
        emb = np.column_stack([svec(Er) for Er in embed_for_psd(basis)])
        side = 2 * cfg.M_h
        bld.add_block("psd", side, [(sq, -emb)], np.zeros(side * (side + 1) // 2))
    else:
        sx0 = bld.add_var("x0", 2 * cfg.M_h)
        ball = np.zeros((1 + 2 * cfg.M_h,))
        ball[0] = np.sqrt(cfg.p0)
        bld.add_block("soc", 1 + 2 * cfg.M_h,
                      [(sx0, np.vstack([np.zeros(2 * cfg.M_h),
                                        -np.eye(2 * cfg.M_h)]))], ball)

    # -- covariance factors ----------------------------------------------------
    def s_name(k, n):
        return f"s:{k}:{n}" if n in act3 else None

    def st_name(k, n):
        return f"st:{k}:{n}" if n in act4 else None

    for n in act3:
        for k in range(K):
            bld.add_var(f"s:{k}:{n}", 2 * cfg.M[k][n] ** 2)
    for n in act4:
        for k in range(K):
            bld.add_var(f"st:{k}:{n}", 2 * cfg.M[k][nch] ** 2)

    # -- energy constraints -----------------------------------------------------
    # The RSOC is written in units of the circuit energy: u and w are scaled
    # by 1/u_E and 1/sqrt(u_E) so the cone coordinates sit near unity (the
    # natural microwatt scale would turn the solver's absolute tolerance into
    # a fraction of the constraint itself, which the time LP then amplifies).
    tau2 = float(tau[0])
    anchor_eb = anchor.eb_matrix()

    def energy_scale(k, n):
        """Natural energy unit of one user's cone: the larger of the circuit
        energy and the harvest at the anchor beam (keeps coefficients near
        unity whatever the power regime)."""
        P = rf_input_power(anchor_eb, channels.H_hat[k][n],
                           channels.var_h_delta[k][n])
        return max(cfg.Pc[k][n] * cfg.T,
                   tau2 * harvested_power_unit(P, cfg.eh), 1e-15)

    def consumption_w(k, n, u_E):
        out = []
        if n != nch:
            if n in act3:
                rt = np.sqrt(cfg.eta[k][n] * tau[1 + n] / u_E)
                out.append((bld.var_map[f"s:{k}:{n}"],
                            rt * np.eye(2 * cfg.M[k][n] ** 2)))
        else:
            for m in act4:
                rt = np.sqrt(cfg.eta[k][n] * tau[N + m] / u_E)
                out.append((bld.var_map[f"st:{k}:{m}"],
                            rt * np.eye(2 * cfg.M[k][nch] ** 2)))
        return out

    if signal == "random":
        emodel = _EnergyModel(bld, cfg, channels, tau2, bld.var_map["q"],
                              basis, eh_extra_nodes)
        for k in range(K):
            for n in range(N):
                u_E = energy_scale(k, n)
                ename = emodel.add_user(k, n, row_scale=1.0 / u_E)
                se = bld.var_map[ename]
                u_entries = [(se, np.array([1.0 / u_E]))]
                w_entries = consumption_w(k, n, u_E)
                u_off = -cfg.Pc[k][n] * cfg.T / u_E
                if w_entries:
                    rows = sum(m.shape[0] for _, m in w_entries)
                    bld.add_quad_le_affine(w_entries, rows, u_entries, u_off)
                else:
                    bld.add_upper_bound([(se, [-1.0 / u_E])], u_off)
    else:
        sx0 = bld.var_map["x0"]
        for k in range(K):
            for n in range(N):
                es: EnergySurrogate = energy_surrogates[(k, n)]
                u_E = energy_scale(k, n)
                u_entries = [(sx0, embed_row_real(es.u) / u_E)]
                w_entries = [(sx0, np.sqrt(es.xi / (2.0 * u_E)) * np.eye(2 * cfg.M_h))]
                w_entries += consumption_w(k, n, u_E)
                rows = sum(m.shape[0] for _, m in w_entries)
                bld.add_quad_le_affine(w_entries, rows, u_entries,
                                       (es.const - cfg.Pc[k][n] * cfg.T) / u_E)

    # -- rate constraints --------------------------------------------------------
    if objective == "maxmin":
        epi_of = lambda k, n: bld.var_map["beta"]
    else:
        sp = bld.var_map["phi"]
        epi_of = lambda k, n: slice(sp.start + k * (N - 1) + n,
                                    sp.start + k * (N - 1) + n + 1)

    for n in range(N - 1):
        for k in range(K):
            _add_epigraph_rate(
                bld,
                [(surrogates.uch[n][k], tau[1 + n], lambda j, n=n: s_name(j, n))],
                epi_of(k, n))
            _add_epigraph_rate(
                bld,
                [(surrogates.uhap[n][k], tau[1 + n], lambda j, n=n: s_name(j, n)),
                 (surrogates.chhap[n][k], tau[N + n], lambda j, n=n: st_name(j, n))],
                epi_of(k, n))

    if objective == "maxmin":
        for k in range(K):
            _add_epigraph_rate(
                bld,
                [(surrogates.chhap[nch][k], tau[N + nch],
                  lambda j: st_name(j, nch))],
                bld.var_map["beta"])
    else:
        # CH own rates ride the objective (constants in obj_offset)
        t4N = float(tau[N + nch])
        if t4N > _SLOT_EPS:
            core_sum: dict[int, np.ndarray] = {}
            for k in range(K):
                co = surrogates.chhap[nch][k]
                bld.obj_offset -= t4N * co.T
                bld.objective_terms.append(
                    (bld.var_map[st_name(co.k, nch)],
                     -t4N * _embedded_v(co.v)))
                for j, c in co.core.items():
                    core_sum[j] = core_sum.get(j, 0) + t4N * c
            st_obj = bld.add_var("tobj", 1)
            bld.set_objective("tobj", [-1.0])
            w_entries = [(bld.var_map[st_name(j, nch)],
                          embed_hermitian_quadratic(c, c.shape[0]))
                         for j, c in core_sum.items()]
            rows = sum(m.shape[0] for _, m in w_entries)
            bld.add_quad_le_affine(w_entries, rows,
                                   [(st_obj, np.array([1.0]))], 0.0)

    return bld.build()


def embed_for_psd(basis):
    """Real symmetric embeddings of the Hermitian basis matrices."""
    return [np.block([[E.real, -E.imag], [E.imag, E.real]]) for E in basis]


def embed_row_real(u: np.ndarray) -> np.ndarray:
    """Row r with Re{u @ x} = r @ embed(x) for a complex row vector u."""
    return np.concatenate([u.real, -u.imag])


def build_covariance_subproblem(cfg: NetworkConfig, channels: ChannelSet,
                                tau_fixed, anchor: Allocation,
                                surrogates: SurrogateSet,
                                eh_extra_nodes=()) -> ConicProblem:
    """Max-min covariance step with the random energy signal (PSD cone on Q)."""
    return _build_cov_problem(cfg, channels, tau_fixed, anchor, surrogates,
                              objective="maxmin", signal="random",
                              eh_extra_nodes=eh_extra_nodes)


def build_sum_subproblem(cfg: NetworkConfig, channels: ChannelSet,
                         tau_fixed, anchor: Allocation,
                         surrogates: SurrogateSet,
                         eh_extra_nodes=()) -> ConicProblem:
    """Sum-throughput covariance step (epigraph QCQP)."""
    return _build_cov_problem(cfg, channels, tau_fixed, anchor, surrogates,
                              objective="sum", signal="random",
                              eh_extra_nodes=eh_extra_nodes)


def build_covariance_subproblem_det(cfg: NetworkConfig, channels: ChannelSet,
                                    tau_fixed, x0_anchor: np.ndarray,
                                    xi: dict, surrogates: SurrogateSet,
                                    anchor: Allocation,
                                    objective: str = "maxmin") -> ConicProblem:
    """Deterministic-signal covariance step: vector x0 under a norm ball.

    ``xi[(k, n)]`` are the convexity shifts from :func:`~wpcn.surrogate.xi_bound`
    (already including any safety margin); the harvested-energy minorizers
    are anchored at ``x0_anchor``.
    """
    from .surrogate import energy_surrogate_det

    tau2 = float(np.asarray(tau_fixed, float)[0])
    esurr = {(k, n): energy_surrogate_det(k, n, x0_anchor, channels, cfg,
                                          xi[(k, n)], tau2)
             for k in range(cfg.K) for n in range(cfg.N)}
    return _build_cov_problem(cfg, channels, tau_fixed, anchor, surrogates,
                              objective=objective, signal="det",
                              energy_surrogates=esurr)


# ---------------------------------------------------------------------------
# time LP
# ---------------------------------------------------------------------------

def build_time_lp(cfg: NetworkConfig, channels: ChannelSet,
                  alloc: Allocation, objective: str = "maxmin",
                  cooperation: bool = True) -> ConicProblem:
    """Slot-duration LP at fixed covariances.

    Rates are linear in the slot durations and the harvested energy is
    linear in the charging slot (the true nonlinear curve evaluated at the
    fixed input powers), so this step is exact.
    """
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    bld = ProblemBuilder()
    n_tau = 2 * N
    if objective == "maxmin":
        bld.add_var("beta", 1)
        bld.set_objective("beta", [1.0])
    else:
        bld.add_var("phi", K * (N - 1))
        bld.set_objective("phi", np.ones(K * (N - 1)))
    stau = bld.add_var("tau", n_tau)

    # unit rates at the fixed covariances
    r_uch = np.zeros((K, N - 1))
    r_uhap = np.zeros((K, N - 1))
    r_chhap = np.zeros((K, N))
    for n in range(N - 1):
        S_slot = [alloc.S(j, n) for j in range(K)]
        for k in range(K):
            r_uch[k, n] = rate_user_to_ch(k, n, 1.0, channels, S_slot, cfg)
            r_uhap[k, n] = rate_user_to_hap(k, n, 1.0, channels, S_slot, cfg)
    for n in range(N):
        St_slot = [alloc.S_tilde(j, n) for j in range(K)]
        for k in range(K):
            r_chhap[k, n] = rate_ch_to_hap(k, n, 1.0, channels, St_slot, cfg)

    Q = alloc.eb_matrix()
    harvest = np.zeros((K, N))   # energy per unit charging time
    for k in range(K):
        for n in range(N):
            P = rf_input_power(Q, channels.H_hat[k][n], channels.var_h_delta[k][n])
            harvest[k, n] = harvested_power_unit(P, cfg.eh)

    # C1: tau >= 0, budget; non-cooperative runs pin the relay slots to zero
    bld.add_block("nonneg", n_tau, [(stau, -np.eye(n_tau))], np.zeros(n_tau))
    bld.add_upper_bound([(stau, np.ones(n_tau))], cfg.T - cfg.tau1)
    if not cooperation:
        for n in range(N - 1):
            row = np.zeros(n_tau)
            row[N + n] = 1.0
            bld.add_equality([(stau, row)], 0.0)

    # C3/C4: consumption linear in tau, harvest linear in tau2
    for k in range(K):
        for n in range(N - 1):
            row = np.zeros(n_tau)
            row[1 + n] = cfg.eta[k][n] * float(np.trace(alloc.S(k, n)).real)
            row[0] = -harvest[k, n]
            bld.add_upper_bound([(stau, row)], -cfg.Pc[k][n] * cfg.T)
        row = np.zeros(n_tau)
        for m in range(N):
            row[N + m] = cfg.eta[k][nch] * float(np.trace(alloc.S_tilde(k, m)).real)
        row[0] = -harvest[k, nch]
        bld.add_upper_bound([(stau, row)], -cfg.Pc[k][nch] * cfg.T)

    # rate epigraphs
    def bound_row(entries, rhs):
        bld.add_upper_bound(entries, rhs)

    if objective == "maxmin":
        sb = bld.var_map["beta"]
        for k in range(K):
            for n in range(N - 1):
                row = np.zeros(n_tau)
                row[1 + n] = -r_uch[k, n]
                bound_row([(sb, [1.0]), (stau, row)], 0.0)
                row = np.zeros(n_tau)
                row[1 + n] = -r_uhap[k, n]
                row[N + n] = -r_chhap[k, n]
                bound_row([(sb, [1.0]), (stau, row)], 0.0)
            row = np.zeros(n_tau)
            row[N + nch] = -r_chhap[k, nch]
            bound_row([(sb, [1.0]), (stau, row)], 0.0)
    else:
        sp = bld.var_map["phi"]
        for k in range(K):
            for n in range(N - 1):
                one_phi = slice(sp.start + k * (N - 1) + n,
                                sp.start + k * (N - 1) + n + 1)
                row = np.zeros(n_tau)
                row[1 + n] = -r_uch[k, n]
                bound_row([(one_phi, [1.0]), (stau, row)], 0.0)
                row = np.zeros(n_tau)
                row[1 + n] = -r_uhap[k, n]
                row[N + n] = -r_chhap[k, n]
                bound_row([(one_phi, [1.0]), (stau, row)], 0.0)
            # CH own throughput enters the objective directly
            row = np.zeros(n_tau)
            row[N + nch] = r_chhap[k, nch]
            bld.objective_terms.append((stau, row))

    return bld.build()


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def _unembed(xr: np.ndarray, m: int) -> np.ndarray:
    """Inverse of vec + complex embedding: (2m^2,) real -> (m, m) complex."""
    half = m * m
    return (xr[:half] + 1j * xr[half:]).reshape((m, m), order="F")


def decode_covariance(problem: ConicProblem, x: np.ndarray,
                      cfg: NetworkConfig, tau_fixed,
                      anchor: Allocation) -> Allocation:
    """Rebuild an Allocation from a covariance-subproblem solution.

    Slots without variables (zero duration) keep the anchor's factors so a
    later outer round can warm-start from them.
    """
    K, N, nch = cfg.K, cfg.N, cfg.n_ch
    vm = problem.var_map
    if "q" in vm:
        basis = hermitian_basis(cfg.M_h)
        qv = x[vm["q"]]
        Q = sum(qv[i] * basis[i] for i in range(len(basis)))
        # clip tiny negative eigenvalues left by solver tolerance
        lam, U = np.linalg.eigh(Q)
        Q = (U * np.clip(lam, 0.0, None)) @ U.conj().T
        x0 = None
    else:
        xr = x[vm["x0"]]
        x0 = xr[:cfg.M_h] + 1j * xr[cfg.M_h:]
        nrm2 = float(np.vdot(x0, x0).real)
        if nrm2 > cfg.p0:
            x0 = x0 * np.sqrt(cfg.p0 / nrm2)
        Q = None

    X = []
    for k in range(K):
        row = []
        for n in range(N - 1):
            name = f"s:{k}:{n}"
            row.append(_unembed(x[vm[name]], cfg.M[k][n]) if name in vm
                       else anchor.X[k][n].copy())
        X.append(tuple(row))
    Xt = []
    for k in range(K):
        row = []
        for n in range(N):
            name = f"st:{k}:{n}"
            row.append(_unembed(x[vm[name]], cfg.M[k][nch]) if name in vm
                       else anchor.X_tilde[k][n].copy())
        Xt.append(tuple(row))
    return Allocation(tau=np.asarray(tau_fixed, float).copy(),
                      X=tuple(X), X_tilde=tuple(Xt), Q=Q, x0=x0)


def decode_time(problem: ConicProblem, x: np.ndarray) -> np.ndarray:
    """Extract the slot-duration vector from a time-LP solution."""
    tau = np.clip(x[problem.var_map["tau"]], 0.0, None)
    return tau
