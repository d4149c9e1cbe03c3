"""Command-line experiment runner.

Examples::

    wpcn --trials 5 --seed 1 --out results/
    wpcn --sweep gamma --sweep-values 0.2:1.0:0.1 --trials 20 \\
         --variant maxmin,noncoop --out results/gamma
    wpcn --config scenario.json --sweep rho --sweep-values 0.8,0.9,0.95,0.99 \\
         --variant maxmin,nonrobust --trials 100 --out results/rho
    wpcn --ch-study --n-users 4 --trials 10 --out results/chsel

Exit code 0 when every trial either solved or was recorded as a failed row;
nonzero only when the batch itself could not run.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ScenarioSpec, run_ch_selection_study, run_scenario
from .model import EhParams, NetworkConfig, load_config
from .optimizer import SolveOptions


def _parse_values(text: str) -> tuple:
    """Comma list ('0.2,0.3') or range 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        out = []
        v = start
        while v <= stop + 1e-12:
            out.append(round(v, 12))
            v += step
        return tuple(out)
    return tuple(float(x) for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wpcn",
        description="Monte-Carlo sweeps for the cooperative wireless-powered "
                    "network designs (CSV output)")
    p.add_argument("--config", help="JSON network config (defaults to the "
                                    "standard scenario)")
    p.add_argument("--sweep", default="none",
                   choices=["none", "gamma", "p0", "theta", "rho", "K"])
    p.add_argument("--sweep-values", default="",
                   help="comma list or start:stop:step")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--variant", default="maxmin",
                   help="comma list: maxmin,sum,noncoop,det,nonrobust")
    p.add_argument("--out", default="results")
    p.add_argument("--eh-mode", choices=["nonlinear", "linear"])
    p.add_argument("--solver-tol", type=float, default=1e-8)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=30.0)
    p.add_argument("--timing", action="store_true",
                   help="write wall-clock columns (breaks byte determinism)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ch-study", action="store_true",
                   help="run the CH-selection study instead of a sweep")
    p.add_argument("--n-users", type=int, default=4,
                   help="users per cluster for --ch-study")
    p.add_argument("--k-values", default="2,3,4,5",
                   help="cluster counts for --ch-study")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config) if args.config else NetworkConfig()
    if args.eh_mode:
        cfg = replace(cfg, eh=replace(cfg.eh, mode=args.eh_mode))
    opts = SolveOptions(solver_tol=args.solver_tol)
    variants = tuple(v.strip() for v in args.variant.split(",") if v.strip())
    try:
        spec = ScenarioSpec(
            cfg=replace(cfg, geometry=None),
            sweep=args.sweep,
            sweep_values=_parse_values(args.sweep_values) if args.sweep_values else (),
            trials=args.trials,
            variants=variants,
            output_dir=args.out,
            master_seed=args.seed,
            gamma=args.gamma,
            theta_deg=args.theta,
            include_timing=args.timing,
            options=opts,
            max_workers=args.workers,
        )
        if args.ch_study:
            spec = replace(spec, cfg=replace(spec.cfg, N=args.n_users))
            out = run_ch_selection_study(
                spec, K_values=tuple(int(k) for k in args.k_values.split(",")))
            print(f"wrote {out['csv']}")
        else:
            out = run_scenario(spec)
            n_failed = sum(r.status != "ok" for r in out["results"])
            print(f"wrote {out['trials_csv']} and {out['aggregate_csv']} "
                  f"({n_failed} failed trials recorded)")
    except Exception as exc:  # batch-level failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
