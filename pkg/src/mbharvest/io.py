"""Result emission: plan and region-map CSVs, slot records, summaries, SCA traces.

All files are UTF-8; CSVs use ',' as delimiter and '.' as decimal separator.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import scenario_to_dict
from .regions import RegionLabel
from .simulator import Scenario, SlotRecord, SweepRow

PLAN_COLUMNS = ("slot", "su", "band", "theta", "epsilon", "feasible", "limiting_constraint", "sensing_energy_J")
REGION_COLUMNS = ("su", "x_m", "y_m", "band", "truth_label", "predicted_label", "is_training", "is_support_vector")

# Shown in summaries so readers know how predicted labels were acted on.
SVM_HARVEST_NOTE = ("non-training SUs predicted HR harvest for the whole slot without sensing; "
                    "the rectifier only yields energy where the received power reaches the threshold")


def _open(path: Path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def plan_rows(records: Iterable[SlotRecord]):
    for r in records:
        M, B = r.theta.shape
        for m in range(M):
            for b in range(B):
                eps = r.eps[m, b]
                yield (r.slot, m, b, int(r.theta[m, b]), 0.0 if math.isnan(eps) else float(eps),
                       int(bool(r.feasible[m, b])), str(r.limiting[m, b]), float(r.sensing[m, b]))


def emit_plan(records: Sequence[SlotRecord], path) -> Path:
    """Per-slot sensing plan, one row per (slot, SU, band).

    Pairs that were not sensed carry theta 0 and epsilon 0.
    """
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(PLAN_COLUMNS)
        w.writerows(plan_rows(records))
    return Path(path)


def emit_region_map(record: SlotRecord, scenario: Scenario, band: int, path) -> Path:
    pos = scenario.su_positions
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(REGION_COLUMNS)
        for m, (x, y) in enumerate(pos):
            w.writerow((m, x, y, band, RegionLabel(int(record.truth[m, band])).name,
                        RegionLabel(int(record.label[m, band])).name, int(bool(record.is_training[m])),
                        int(bool(record.is_support_vector[m, band]))))
    return Path(path)


def emit_region_maps(record: SlotRecord, scenario: Scenario, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    return [emit_region_map(record, scenario, b, out_dir / f"regions_band{b}.csv") for b in range(scenario.n_bands)]


def record_to_dict(r: SlotRecord) -> dict:
    return {
        "slot": r.slot,
        "battery_before_J": r.battery_before.tolist(),
        "battery_after_J": r.battery_after.tolist(),
        "harvest_J": r.harvest_su.tolist(),
        "sensing_J": r.sensing_su.tolist(),
        "total_sensing_energy_J": r.total_sensing_energy,
        "theta": r.theta.tolist(),
        "delta": r.delta.tolist(),
        "label": [[RegionLabel(int(v)).name for v in row] for row in r.label],
        "is_training": r.is_training.astype(bool).tolist(),
        "transmit_eligible": r.transmit_eligible.astype(bool).tolist(),
        "sca_iterations": r.sca_iterations.tolist(),
        "error": r.error,
        "solver_errors": {str(k): v for k, v in r.errors.items()},
    }


def emit_records(records: Sequence[SlotRecord], path) -> Path:
    with _open(path) as fh:
        json.dump([record_to_dict(r) for r in records], fh, indent=1)
    return Path(path)


def _stats(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std())}


def summarize_run(records: Sequence[SlotRecord], scenario: Scenario) -> dict:
    """One summary entry for a single run."""
    fraction = scenario.training_fraction if scenario.mode == "svm" else 1.0
    energy = sum(r.total_sensing_energy for r in records)
    sensing_iters = np.concatenate([r.sca_iterations[r.is_training] for r in records])
    return {
        "fraction": fraction,
        "n_seeds": 1,
        "total_sensing_energy_J": {"mean": energy, "std": 0.0},
        "error": {"mean": float(np.mean([r.error for r in records])), "std": 0.0},
        "sca_iterations": {"mean": float(sensing_iters.mean()) if sensing_iters.size else 0.0,
                           "max": int(sensing_iters.max()) if sensing_iters.size else 0},
        "solver_errors": sum(len(r.errors) for r in records),
    }


def summarize_sweep(rows: Sequence[SweepRow]) -> list[dict]:
    return [{
        "fraction": r.fraction,
        "n_seeds": r.n_seeds,
        "total_sensing_energy_J": {"mean": r.mean_energy, "std": r.std_energy},
        "error": {"mean": r.mean_error, "std": r.std_error},
        "sca_iterations": {"mean": r.mean_sca_iterations},
    } for r in sorted(rows, key=lambda r: r.fraction)]


def emit_summary(entries: list[dict], scenario: Scenario, path=None, **extra) -> dict:
    """Summary report with a full config echo.  Written to ``path`` when given."""
    report = {
        "entries": sorted(entries, key=lambda e: e["fraction"]),
        "config": scenario_to_dict(scenario),
        "notes": {"svm_harvest": SVM_HARVEST_NOTE},
        **extra,
    }
    if path is not None:
        with _open(path) as fh:
            json.dump(report, fh, indent=2)
    return report


def emit_sweep_table(rows: Sequence[SweepRow], path) -> Path:
    with _open(path) as fh:
        w = csv.writer(fh)
        w.writerow(("fraction", "mean_sensing_energy_J", "std_sensing_energy_J", "mean_error", "std_error",
                    "mean_sca_iterations", "n_seeds"))
        for r in rows:
            w.writerow((r.fraction, r.mean_energy, r.std_energy, r.mean_error, r.std_error,
                        r.mean_sca_iterations, r.n_seeds))
    return Path(path)


class TraceWriter:
    """JSON-lines dump of every SCA iterate; usable as the ``trace`` callback of
    :func:`mbharvest.simulator.run`."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = _open(self.path)

    def __call__(self, slot: int, su: int, iteration: int, objective: float, point: dict):
        self._fh.write(json.dumps({"slot": slot, "su": su, "iteration": iteration, "objective": objective,
                                   "point": {k: float(v) for k, v in point.items()}}) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
