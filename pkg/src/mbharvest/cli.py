"""Command-line drivers.

``run``     simulate one scenario and write plan, records, region maps and summary
``sweep``   Monte-Carlo sweep of training fraction (energy and labelling error)
``oracle``  cross-check the optimiser against the closed form and the grid scan

Exit status: 0 success, 1 oracle disagreement, 2 configuration error,
3 solver infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io, simulator
from .config import parse_scenario
from .errors import ConfigError, ConvergenceError, InfeasibleError
from .sensing import FORMS, SlotState, closed_form_min_samples, grid_oracle, optimize_slot

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("mbharvest")


def _fractions(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario file (default: reference scenario)")
    common.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    common.add_argument("--mode", choices=simulator.MODES)
    common.add_argument("--constraint-form", choices=FORMS)
    common.add_argument("--sca-tol", type=float, help="SCA stopping tolerance on the objective change")
    common.add_argument("--slots", type=int, help="number of slots (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mbharvest", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="simulate one scenario")
    run.add_argument("--fraction", type=float, help="training fraction in svm mode")
    run.add_argument("--trace", type=Path, help="write every SCA iterate to this JSON-lines file")
    sw = sub.add_parser("sweep", parents=[common], help="training-fraction sweep")
    sw.add_argument("--fractions", type=_fractions, default=[0.2, 0.35, 0.5, 0.65, 0.8])
    sw.add_argument("--seeds", type=int, default=20, help="number of Monte-Carlo seeds")
    orc = sub.add_parser("oracle", parents=[common], help="optimiser vs closed form and grid scan")
    orc.add_argument("--instances", type=int, default=200)
    orc.add_argument("--snr-range", type=_fractions, default=[0.01, 10.0], help="log-uniform SNR bounds")
    orc.add_argument("--no-grid", action="store_true", help="skip the brute-force grid scan")
    return p


def load_scenario(args) -> simulator.Scenario:
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from exc
    else:
        text = ""
    scenario = parse_scenario(text)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        if args.config is None or '"su_positions"' not in text:
            changes["su_positions"] = simulator.place_random(scenario.n_sus, scenario.arena, args.seed)
    for key in ("mode", "constraint_form", "sca_tol"):
        if getattr(args, key) is not None:
            changes[key] = getattr(args, key)
    if getattr(args, "fraction", None) is not None:
        changes["training_fraction"] = args.fraction
    try:
        if args.slots is not None:
            changes["sensing"] = replace(scenario.sensing, n_slots=args.slots)
        return replace(scenario, **changes)
    except ValueError as exc:
        raise ConfigError("command line", str(exc)) from exc


def cmd_run(args) -> int:
    scenario = load_scenario(args)
    out = args.out
    if args.trace is not None:
        with io.TraceWriter(args.trace) as tw:
            records = simulator.run(scenario, trace=tw)
    else:
        records = simulator.run(scenario)
    io.emit_plan(records, out / "plan.csv")
    io.emit_records(records, out / "records.json")
    io.emit_region_maps(records[-1], scenario, out)
    entry = io.summarize_run(records, scenario)
    io.emit_summary([entry], scenario, out / "summary.json")
    print(f"{len(records)} slots, total sensing energy {entry['total_sensing_energy_J']['mean']:.6g} J, "
          f"label error {entry['error']['mean']:.4f}; results in {out}")
    if entry["solver_errors"]:
        for r in records:
            for m, msg in r.errors.items():
                log.error("slot %d SU %d: %s", r.slot, m, msg)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args)
    if any(not 0 < f <= 1 for f in args.fractions):
        raise ConfigError("--fractions", "fractions must lie in (0, 1]")
    if args.seeds < 1:
        raise ConfigError("--seeds", "need at least one seed")
    seeds = range(scenario.seed, scenario.seed + args.seeds)
    rows = simulator.energy_vs_training_fraction(scenario, args.fractions, seeds)
    io.emit_sweep_table(rows, args.out / "sweep.csv")
    io.emit_summary(io.summarize_sweep(rows), scenario, args.out / "summary.json", seeds=list(seeds))
    for r in rows:
        print(f"fraction {r.fraction:.3f}: energy {r.mean_energy:.6g} J  error {r.mean_error:.4f}")
    return EXIT_OK


def oracle_check(n: int, seed: int, snr_range=(0.01, 10.0), form: str = "corrected", sca_tol: float = 1e-6,
                 grid: bool = True, config=None):
    """Compare optimiser, closed form and grid scan on random single-pair instances.

    Returns a list of dicts, one per instance.
    """
    from .core import SensingConfig

    cfg = config or SensingConfig()
    rng = np.random.default_rng(seed)
    lo, hi = np.log(snr_range[0]), np.log(snr_range[1])
    rows = []
    for snr in np.exp(rng.uniform(lo, hi, n)):
        closed = float(closed_form_min_samples(snr, cfg.max_false_alarm, cfg.min_detection))
        expected = max(cfg.min_samples, closed)
        # battery large enough that only detection binds
        state = SlotState([[snr]], [10.0 * cfg.max_samples * cfg.sample_energy])
        plan = optimize_slot(state, cfg, form=form, sca_tol=sca_tol)
        got = float(plan.theta_continuous[0, 0])
        row = {"snr": float(snr), "closed_form": closed, "expected": expected, "optimizer": got,
               "rel_error": abs(got - expected) / expected if math.isfinite(got) else math.inf}
        if grid:
            t_lo = int(cfg.min_samples)
            t_hi = max(t_lo, int(math.ceil(10 * closed)))
            g_theta, _ = grid_oracle(snr, cfg.max_false_alarm, cfg.min_detection, t_lo, t_hi)
            row["grid"] = g_theta
            row["grid_gap"] = math.inf if g_theta is None else abs(g_theta - max(cfg.min_samples, math.ceil(closed)))
        rows.append(row)
    return rows


def cmd_oracle(args) -> int:
    scenario = load_scenario(args)
    if args.instances < 1 or len(args.snr_range) != 2 or not 0 < args.snr_range[0] < args.snr_range[1]:
        raise ConfigError("--instances/--snr-range", "need instances >= 1 and 0 < low < high")
    rows = oracle_check(args.instances, scenario.seed, args.snr_range, scenario.constraint_form, scenario.sca_tol,
                        grid=not args.no_grid, config=scenario.sensing)
    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "oracle.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    worst = max(r["rel_error"] for r in rows)
    opt_ok = worst <= 1e-3
    result = {"instances": len(rows), "max_rel_error": worst, "optimizer_ok": opt_ok}
    ok = opt_ok
    if not args.no_grid:
        bad = sum(r["grid_gap"] > 1 for r in rows)
        result.update(grid_mismatches=bad, grid_ok=bad == 0)
        ok = ok and bad == 0
    (args.out / "oracle_summary.json").write_text(json.dumps(result, indent=2), encoding="utf-8")
    print(json.dumps(result))
    return EXIT_OK if ok else EXIT_MISMATCH


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, ConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
