"""Command-line entry points: run, sweep, verify."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

from .experiment import (ExperimentConfig, generate, load_config, report_json,
                         run_harmonic_approximation, verify_identities)

CSV_COLUMNS = ["epsilon", "E", "D", "R", "lhs_ao89", "ratio",
               "energy_ratio", "crossing_cost", "max_disp"]


def _run(args) -> int:
    config = load_config(args.config)
    lam, mu = generate(config)
    rep = run_harmonic_approximation(lam, mu, config)
    with open(args.out, "w") as fh:
        fh.write(report_json(rep))
        fh.write("\n")
    return 0


def _sweep(args) -> int:
    base = load_config(args.config)
    epsilons = [float(tok) for tok in args.epsilons.split(",") if tok]
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for eps in epsilons:
        config = dataclasses.replace(base, epsilon=eps)
        lam, mu = generate(config)
        rep = run_harmonic_approximation(lam, mu, config)
        with open(os.path.join(args.out, f"report_eps{eps:g}.json"), "w") as fh:
            fh.write(report_json(rep))
            fh.write("\n")
        rows.append({
            "epsilon": repr(eps), "E": repr(rep.E), "D": repr(rep.D),
            "R": repr(rep.R_selected), "lhs_ao89": repr(rep.lhs_ao89),
            "ratio": "" if rep.ratio is None else repr(rep.ratio),
            "energy_ratio": "" if rep.energy_ratio is None else repr(rep.energy_ratio),
            "crossing_cost": repr(rep.crossing_cost),
            "max_disp": repr(rep.max_displacement),
        })
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return 0


def _verify(args) -> int:
    config = load_config(args.config)
    lam, mu = generate(config)
    rows = verify_identities(lam, mu, config)
    width = max(len(r["name"]) for r in rows)
    all_ok = True
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        all_ok &= r["passed"]
        print(f"{r['name']:<{width}}  {status}  residual={r['residual']:.3e}")
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otha",
                                description="harmonic-approximation transport laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="single experiment, JSON report")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_run)

    ps = sub.add_parser("sweep", help="epsilon sweep, per-run JSON plus aggregate CSV")
    ps.add_argument("--config", required=True)
    ps.add_argument("--epsilons", default="0.2,0.1,0.05")
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_sweep)

    pv = sub.add_parser("verify", help="identity/inequality checks, exit 0 iff all pass")
    pv.add_argument("--config", required=True)
    pv.set_defaults(func=_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
