"""Monte-Carlo experiment harness: scenario sweeps to CSV.

One scenario is a base configuration, an optional parameter sweep, a trial
count and a list of design variants.  Each (sweep point, trial) pair draws
its channel from a seed derived deterministically from the master seed, so
identical specs give byte-identical CSVs regardless of the worker-pool
parallelism (timing columns are only written when explicitly enabled).

Variants:

* ``maxmin``     cooperative max-min design,
* ``sum``        cooperative sum-throughput design,
* ``noncoop``    relaying slots pinned to zero,
* ``det``        deterministic energy signal (rank-1 beamforming),
* ``nonrobust``  optimized pretending the CSI is exact, evaluated under the
  true error statistics (the loss study pairs it with ``maxmin``).

Per-trial failures (infeasible draws, solver breakdowns) become rows with a
status, never abort a batch.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    ChannelSet,
    NetworkConfig,
    build_disk_geometry,
    build_geometry,
    sample_channels,
)
from .optimizer import (
    InfeasibleInstance,
    SolveError,
    SolveOptions,
    run,
    run_noncooperative,
)
from .physics import throughput_report

__all__ = ["ScenarioSpec", "TrialResult", "run_scenario", "run_ch_selection_study"]

_VARIANTS = ("maxmin", "sum", "noncoop", "det", "nonrobust")


@dataclass
class ScenarioSpec:
    """One experiment: base config, sweep axis, trials and variants."""

    cfg: NetworkConfig = field(default_factory=NetworkConfig)
    sweep: str = "none"            # none | gamma | p0 | theta | rho | K
    sweep_values: tuple = ()
    trials: int = 100
    variants: tuple = ("maxmin",)
    output_dir: str = "results"
    master_seed: int = 0
    gamma: float = 0.5
    theta_deg: float = 30.0
    d_far: float = 10.0
    include_timing: bool = False
    options: SolveOptions = field(default_factory=SolveOptions)
    max_workers: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sweep != "none" and not self.sweep_values:
            raise ValueError("sweep requires a nonempty value list")
        bad = [v for v in self.variants if v not in _VARIANTS]
        if bad:
            raise ValueError(f"unknown variants {bad}; choose from {_VARIANTS}")

    def points(self) -> list:
        return list(self.sweep_values) if self.sweep != "none" else [None]

    def config_at(self, value) -> NetworkConfig:
        """Base config with the sweep parameter applied and geometry built."""
        cfg, gamma, theta = self.cfg, self.gamma, self.theta_deg
        if self.sweep == "gamma":
            gamma = float(value)
        elif self.sweep == "theta":
            theta = float(value)
        elif self.sweep == "p0":
            cfg = replace(cfg, p0=float(value), geometry=None)
        elif self.sweep == "rho":
            cfg = replace(cfg, rho_h=float(value), rho_g=float(value),
                          geometry=None)
        elif self.sweep == "K":
            cfg = replace(cfg, K=int(value), geometry=None)
        geo = build_geometry(cfg, gamma=gamma, theta_deg=theta, d_far=self.d_far)
        return cfg.with_geometry(geo)


@dataclass
class TrialResult:
    point: object
    trial: int
    variant: str
    status: str
    min_throughput: float = float("nan")
    sum_throughput: float = float("nan")
    r_user: tuple = ()
    iterations: int = 0
    wall_clock_s: float = float("nan")


def trial_seed(master_seed: int, point_idx: int, trial: int) -> int:
    """Deterministic channel seed for one (sweep point, trial) cell."""
    return int(np.random.SeedSequence(
        (master_seed, point_idx, trial)).generate_state(1)[0])


def _run_cell(spec: ScenarioSpec, point_idx: int, trial: int) -> list[TrialResult]:
    """All requested variants on one channel draw."""
    point = spec.points()[point_idx]
    results = []
    try:
        cfg = spec.config_at(point)
        channels = sample_channels(cfg, trial_seed(spec.master_seed, point_idx, trial))
    except Exception as exc:  # geometry/config errors poison the whole cell
        return [TrialResult(point, trial, v, f"error:{type(exc).__name__}")
                for v in spec.variants]

    cache: dict[str, tuple] = {}

    def execute(variant: str):
        opts = spec.options
        t0 = time.perf_counter()
        if variant == "noncoop":
            out = run_noncooperative(cfg, channels, opts)
        elif variant == "sum":
            out = run(cfg, channels, replace(opts, objective="sum"))
        elif variant == "det":
            out = run(cfg, channels, replace(opts, signal="det"))
        elif variant == "nonrobust":
            alloc, _, trace = run(cfg, channels.assume_perfect(), opts)
            rep = throughput_report(alloc, channels, cfg)
            return alloc, rep, trace, time.perf_counter() - t0
        else:
            baseline = cache.get("noncoop")
            out = run(cfg, channels, opts,
                      baseline=baseline[0] if baseline else None)
        return (*out, time.perf_counter() - t0)

    order = list(spec.variants)
    if "maxmin" in order and "noncoop" in order:
        # the cooperative run reuses the pinned result as its baseline
        order.remove("noncoop")
        order.insert(0, "noncoop")

    for variant in order:
        try:
            alloc, rep, trace, dt = execute(variant)
            cache[variant] = (alloc, rep, trace)
            results.append(TrialResult(
                point, trial, variant, "ok",
                min_throughput=rep.min_throughput,
                sum_throughput=rep.sum_throughput,
                r_user=tuple(np.asarray(rep.r_user).ravel()),
                iterations=len(trace.outer_objectives),
                wall_clock_s=dt,
            ))
        except (InfeasibleInstance, SolveError) as exc:
            results.append(TrialResult(point, trial, variant,
                                       f"failed:{type(exc).__name__}"))
    results.sort(key=lambda r: r.variant)
    return results


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if np.isnan(x) else f"{x:.10g}"
    return str(x)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def run_scenario(spec: ScenarioSpec) -> dict:
    """Execute the scenario; returns paths and in-memory results.

    Writes ``<sweep>_trials.csv`` (one row per point/trial/variant) and
    ``<sweep>_aggregate.csv`` (trial means per point/variant) under
    ``spec.output_dir``.
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    points = spec.points()
    cells = [(pi, t) for pi in range(len(points)) for t in range(spec.trials)]

    if spec.max_workers and spec.max_workers > 1:
        with ProcessPoolExecutor(max_workers=spec.max_workers) as pool:
            batches = list(pool.map(_run_cell, [spec] * len(cells),
                                    [pi for pi, _ in cells],
                                    [t for _, t in cells]))
    else:
        batches = [_run_cell(spec, pi, t) for pi, t in cells]

    results = [r for batch in batches for r in batch]
    results.sort(key=lambda r: (str(r.point), r.trial, r.variant))

    n_users = spec.cfg.K * spec.cfg.N
    user_cols = [f"r_user_{k}_{n}" for k in range(spec.cfg.K)
                 for n in range(spec.cfg.N)]
    header = (["point", "trial", "variant", "status", "min_throughput",
               "sum_throughput"] + user_cols + ["iterations"])
    if spec.include_timing:
        header.append("wall_clock_s")
    rows = []
    for r in results:
        row = [_fmt(r.point), r.trial, r.variant, r.status,
               _fmt(r.min_throughput), _fmt(r.sum_throughput)]
        user = list(r.r_user) + [float("nan")] * (n_users - len(r.r_user))
        row += [_fmt(float(u)) for u in user[:n_users]]
        row += [r.iterations]
        if spec.include_timing:
            row.append(_fmt(r.wall_clock_s))
        rows.append(row)
    name = spec.sweep if spec.sweep != "none" else "single"
    trials_path = os.path.join(spec.output_dir, f"{name}_trials.csv")
    _write_rows(trials_path, header, rows)

    agg_rows = []
    for pi, point in enumerate(points):
        for variant in sorted(spec.variants):
            sel = [r for r in results
                   if r.point == point and r.variant == variant and r.status == "ok"]
            if sel:
                agg_rows.append([
                    _fmt(point), variant, len(sel),
                    _fmt(float(np.mean([r.min_throughput for r in sel]))),
                    _fmt(float(np.mean([r.sum_throughput for r in sel]))),
                ])
            else:
                agg_rows.append([_fmt(point), variant, 0, "", ""])
    agg_path = os.path.join(spec.output_dir, f"{name}_aggregate.csv")
    _write_rows(agg_path, ["point", "variant", "n_ok", "mean_min_throughput",
                           "mean_sum_throughput"], agg_rows)
    return {"results": results, "trials_csv": trials_path,
            "aggregate_csv": agg_path}


def run_ch_selection_study(spec: ScenarioSpec, K_values=(2, 3, 4, 5),
                           radius_m: float = 5.0,
                           center_dist_m: float = 10.0) -> dict:
    """Total min-throughput vs cluster count for the two CH selection rules.

    Users are placed uniformly in disks (N > 2); the CH is either the user
    nearest to the HAP or nearest to the cluster centre.  Emits one CSV with
    ``min_throughput * K * N`` per (K, rule, trial).
    """
    if spec.cfg.N <= 2:
        raise ValueError("the CH-selection study needs N > 2")
    os.makedirs(spec.output_dir, exist_ok=True)
    rows = []
    for K in K_values:
        cfg_k = replace(spec.cfg, K=int(K), geometry=None)
        for rule in ("hap", "center"):
            for trial in range(spec.trials):
                seed = trial_seed(spec.master_seed, int(K), trial)
                try:
                    geo = build_disk_geometry(cfg_k, seed=seed, ch_rule=rule,
                                              radius_m=radius_m,
                                              center_dist_m=center_dist_m)
                    cfg = cfg_k.with_geometry(geo)
                    channels = sample_channels(cfg, seed + 1)
                    _, rep, _ = run(cfg, channels, spec.options)
                    rows.append([K, rule, trial, "ok",
                                 _fmt(rep.min_throughput),
                                 _fmt(rep.min_throughput * K * cfg.N)])
                except (InfeasibleInstance, SolveError) as exc:
                    rows.append([K, rule, trial,
                                 f"failed:{type(exc).__name__}", "", ""])
    path = os.path.join(spec.output_dir, "ch_selection.csv")
    _write_rows(path, ["K", "rule", "trial", "status", "min_throughput",
                       "total_min_throughput"], rows)
    return {"csv": path, "rows": rows}
