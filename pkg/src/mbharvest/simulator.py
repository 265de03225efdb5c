"""Time-slotted network simulation under the two labelling solutions.

``all-sensing``
    every SU optimises and performs sensing on every band in every slot.
``svm``
    only a training subset senses; the rest wait for per-band one-vs-one SVM
    predictions trained on the sensed labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import core
from .core import Band, ChannelParams, SensingConfig
from .regions import (Kernel, RegionLabel, classification_error, label_ground_truth, predict_max_wins,
                      support_vector_mask, train_ovo)
from .sensing import FORMS, SlotState, _pair_min_samples, optimize_slot

MODES = ("all-sensing", "svm")

# Frequencies (Hz) of the seven PU bands in the reference scenario.
REFERENCE_FREQUENCIES = (0.9e9, 1.24e9, 1.56e9, 1.78e9, 2.19e9, 2.46e9, 2.68e9)


def place_random(n: int, arena: tuple[float, float], seed) -> np.ndarray:
    """``n`` i.i.d. uniform positions inside ``[0, w] x [0, h]``."""
    if n < 1:
        raise ValueError("need at least one node")
    rng = np.random.default_rng(seed)
    return rng.uniform((0.0, 0.0), arena, size=(n, 2))


def _as_points(a) -> tuple[tuple[float, float], ...]:
    return tuple((float(x), float(y)) for x, y in np.asarray(a, dtype=float).reshape(-1, 2))


@dataclass(frozen=True)
class Scenario:
    arena: tuple[float, float]
    bands: tuple[Band, ...]
    pu_positions: tuple[tuple[float, float], ...]
    su_positions: tuple[tuple[float, float], ...]
    sensing: SensingConfig = SensingConfig()
    channel: ChannelParams = ChannelParams()
    mode: str = "all-sensing"
    training_fraction: float = 0.5
    redraw_training: bool = False
    penalty: float = 10.0
    kernel: str = "rbf"
    constraint_form: str = "corrected"
    sca_tol: float = 1e-6
    max_sca_iter: int = 50
    initial_battery: float | None = None  # J; None means sensing_power * slot_length
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "arena", (float(self.arena[0]), float(self.arena[1])))
        object.__setattr__(self, "bands", tuple(self.bands))
        object.__setattr__(self, "pu_positions", _as_points(self.pu_positions))
        object.__setattr__(self, "su_positions", _as_points(self.su_positions))
        w, h = self.arena
        if w <= 0 or h <= 0:
            raise ValueError("arena sides must be > 0")
        if len(self.pu_positions) != len(self.bands):
            raise ValueError("exactly one PU per band required")
        if not self.su_positions:
            raise ValueError("need at least one SU")
        for kind, pts in (("PU", self.pu_positions), ("SU", self.su_positions)):
            for x, y in pts:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise ValueError(f"{kind} position ({x}, {y}) lies outside the arena")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 < self.training_fraction <= 1:
            raise ValueError("training_fraction must lie in (0, 1]")
        if self.constraint_form not in FORMS:
            raise ValueError(f"constraint_form must be one of {FORMS}")
        if self.penalty <= 0 or self.sca_tol <= 0 or self.max_sca_iter < 1:
            raise ValueError("penalty, sca_tol and max_sca_iter must be positive")
        Kernel(self.kernel)
        if self.initial_battery is not None and self.initial_battery < 0:
            raise ValueError("initial battery must be >= 0")

    @property
    def n_sus(self) -> int:
        return len(self.su_positions)

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @property
    def battery0(self) -> float:
        if self.initial_battery is not None:
            return self.initial_battery
        return self.sensing.sensing_power * self.sensing.slot_length

    @property
    def n_training(self) -> int:
        # guard against 0.35 * 60 = 21.000000000000004
        return max(1, math.ceil(self.training_fraction * self.n_sus - 1e-9))


def default_scenario(n_sus: int = 60, seed: int = 0, arena=(40.0, 40.0), **overrides) -> Scenario:
    """Reference layout: seven bands, all PUs at the arena centre, SUs uniform at random."""
    bands = tuple(Band(i, f) for i, f in enumerate(REFERENCE_FREQUENCIES))
    centre = (arena[0] / 2.0, arena[1] / 2.0)
    base = dict(arena=arena, bands=bands, pu_positions=[centre] * len(bands),
                su_positions=place_random(n_sus, arena, seed), seed=seed)
    base.update(overrides)
    return Scenario(**base)


@dataclass
class Geometry:
    distance: np.ndarray  # (M, B) metres
    gain: np.ndarray
    rx_power: np.ndarray  # W, with the PU transmitting
    snr: np.ndarray
    detection_feasible: np.ndarray
    truth: np.ndarray  # ground-truth RegionLabel values


def geometry(scenario: Scenario) -> Geometry:
    su = np.asarray(scenario.su_positions)
    pu = np.asarray(scenario.pu_positions)
    dist = np.linalg.norm(su[:, None, :] - pu[None, :, :], axis=-1)
    # an SU sitting exactly on a PU would have unbounded gain
    dist = np.maximum(dist, 1e-3)
    freq = np.array([b.frequency for b in scenario.bands])
    power = np.array([b.pu_power for b in scenario.bands])
    gain = core.channel_gain(dist, freq[None, :], scenario.channel)
    rx = power[None, :] * gain
    snr = core.snr(power[None, :], gain, scenario.channel.noise_variance)
    need = _pair_min_samples(snr, scenario.sensing)
    det_ok = need <= scenario.sensing.max_samples
    truth = label_ground_truth(rx, scenario.sensing.harvest_threshold, det_ok)
    return Geometry(dist, gain, rx, snr, det_ok, truth)


@dataclass
class SlotRecord:
    slot: int
    battery_before: np.ndarray
    battery_after: np.ndarray
    theta: np.ndarray
    eps: np.ndarray
    delta: np.ndarray
    label: np.ndarray
    truth: np.ndarray
    harvest: np.ndarray  # (M, B) J
    sensing: np.ndarray  # (M, B) J
    sensed: np.ndarray  # (M, B) pair measured or found undetectable this slot
    is_training: np.ndarray
    is_support_vector: np.ndarray  # (M, B)
    sca_iterations: np.ndarray
    pu_active: np.ndarray
    feasible: np.ndarray
    limiting: np.ndarray
    transmit_eligible: np.ndarray  # predicted or sensed CR
    errors: dict = field(default_factory=dict)

    @property
    def harvest_su(self) -> np.ndarray:
        return self.harvest.sum(axis=1)

    @property
    def sensing_su(self) -> np.ndarray:
        return self.sensing.sum(axis=1)

    @property
    def total_sensing_energy(self) -> float:
        return float(self.sensing.sum())

    @property
    def error(self) -> float:
        return classification_error(self.label, self.truth)


def training_indices(scenario: Scenario, slot: int = 1) -> np.ndarray:
    """Sorted training SUs.  For a fixed seed the subsets are nested in the fraction."""
    key = [scenario.seed, slot] if scenario.redraw_training else [scenario.seed]
    perm = np.random.default_rng(key).permutation(scenario.n_sus)
    return np.sort(perm[: scenario.n_training])


def run(scenario: Scenario, trace: Callable[[int, int, int, float, dict], None] | None = None) -> list[SlotRecord]:
    """Simulate ``scenario.sensing.n_slots`` slots and return one record per slot."""
    cfg = scenario.sensing
    M, B = scenario.n_sus, scenario.n_bands
    geo = geometry(scenario)
    eff = np.array([b.efficiency for b in scenario.bands])
    power = np.array([b.pu_power for b in scenario.bands])
    activity = np.array([b.activity for b in scenario.bands])
    activity_rng = np.random.default_rng([scenario.seed, 0x5EED])
    battery = np.full(M, scenario.battery0)
    kernel = Kernel(scenario.kernel)
    records = []
    for t in range(1, cfg.n_slots + 1):
        before = battery.copy()
        active = np.ones(B, dtype=bool) if np.all(activity >= 1) else activity_rng.random(B) < activity
        if scenario.mode == "svm":
            train = np.zeros(M, dtype=bool)
            train[training_indices(scenario, t)] = True
        else:
            train = np.ones(M, dtype=bool)
        idx = np.flatnonzero(train)

        state = SlotState(geo.snr[idx], battery[idx], geo.distance[idx])
        slot_trace = None if trace is None else (lambda m, r, chi, z, t=t: trace(t, int(idx[m]), r, chi, z))
        plan = optimize_slot(state, cfg, form=scenario.constraint_form, sca_tol=scenario.sca_tol,
                             max_iter=scenario.max_sca_iter, trace=slot_trace)

        theta = np.zeros((M, B), dtype=np.int64)
        eps = np.full((M, B), np.nan)
        feasible = np.zeros((M, B), dtype=bool)
        limiting = np.full((M, B), "not-sensing", dtype=object)
        iters = np.zeros(M, dtype=int)
        theta[idx], eps[idx] = plan.theta, plan.eps
        feasible[idx], limiting[idx] = plan.report.feasible, plan.report.limiting
        iters[idx] = plan.sca_iterations
        errors = {int(idx[m]): msg for m, msg in plan.errors.items()}

        # A sensing SU knows a band's label when it measured it or found it
        # undetectable within the sample cap.
        sensed = np.zeros((M, B), dtype=bool)
        sensed[idx] = (plan.theta > 0) | ~plan.report.detection_feasible
        for m in errors:
            sensed[m] = False
        label = geo.truth.copy()
        is_sv = np.zeros((M, B), dtype=bool)
        believes_hr = sensed & (label == RegionLabel.HR)
        if scenario.mode == "svm":
            others = np.flatnonzero(~train)
            X = np.asarray(scenario.su_positions)
            for b in range(B):
                known = idx[sensed[idx, b]]
                if known.size == 0:
                    # nothing measured on this band: stay idle
                    label[others, b] = RegionLabel.IR
                    continue
                models = train_ovo(X[known], geo.truth[known, b], penalty=scenario.penalty, kernel=kernel)
                is_sv[known, b] = support_vector_mask(models, known.size)
                if others.size:
                    label[others, b] = predict_max_wins(models, X[others])
            believes_hr[~train] = label[~train] == RegionLabel.HR

        delta = core.harvest_indicator(geo.rx_power, cfg.harvest_threshold, active[None, :])
        delta = np.broadcast_to(delta, (M, B)).astype(int)
        # Harvesting happens only where the SU believes it is in HR and the
        # rectifier actually turns on; sensing time is taken out of the slot.
        window = cfg.slot_length - theta * cfg.sample_time
        harvest = np.where(believes_hr, delta * eff[None, :] * window * power[None, :] * geo.gain, 0.0)
        sensing = theta * cfg.sample_energy
        for m in range(M):
            battery[m] = core.battery_update(before[m], float(harvest[m].sum()), float(sensing[m].sum()))

        transmit = (label == RegionLabel.CR) & (sensed | ~train[:, None])
        records.append(SlotRecord(t, before, battery.copy(), theta, eps, delta, label, geo.truth.copy(), harvest,
                                  sensing, sensed, train.copy(), is_sv, iters, active, feasible, limiting,
                                  transmit, errors))
    return records


@dataclass
class SweepRow:
    fraction: float
    mean_energy: float
    std_energy: float
    mean_error: float
    std_error: float
    mean_sca_iterations: float
    n_seeds: int
    energies: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)


def energy_vs_training_fraction(scenario: Scenario, fractions: Sequence[float], seeds: Sequence[int], *,
                                redraw_layout: bool = True) -> list[SweepRow]:
    """Monte-Carlo over seeds of total sensing energy and labelling error.

    Each seed fixes the SU layout (when ``redraw_layout``) and the training
    permutation, so the training subsets of one seed are nested across
    fractions.  Rows come back sorted by fraction.
    """
    fractions = sorted(float(f) for f in fractions)
    if any(not 0 < f <= 1 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    per = {f: ([], [], []) for f in fractions}
    for seed in seeds:
        base = scenario
        if redraw_layout:
            base = replace(base, su_positions=place_random(base.n_sus, base.arena, seed))
        base = replace(base, seed=int(seed), mode="svm")
        for f in fractions:
            recs = run(replace(base, training_fraction=f))
            per[f][0].append(sum(r.total_sensing_energy for r in recs))
            per[f][1].append(float(np.mean([r.error for r in recs])))
            per[f][2].append(float(np.mean([r.sca_iterations[r.is_training].mean() for r in recs])))
    rows = []
    for f in fractions:
        e, err, it = (np.array(v) for v in per[f])
        rows.append(SweepRow(f, float(e.mean()), float(e.std()), float(err.mean()), float(err.std()),
                             float(it.mean()), len(e), e.tolist(), err.tolist()))
    return rows
