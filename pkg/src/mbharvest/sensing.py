"""Per-slot sensing optimisation.

Builds the GP that minimises total sensing energy under false-alarm,
detection, battery and sample-count constraints, solves it with SCA, and
recovers integer sample counts.  Two constraint forms are available:

``"corrected"``
    Bounds obtained directly from the false-alarm and detection formulas::

        (1 + qF * theta**-0.5) / eps <= 1
        eps / (snr + 1) + a * theta**-0.5 <= 1        with a = -Q^-1(D_min) > 0

    Both are posynomials, so the SCA loop stabilises after one refinement.

``"paper"``
    ``eps * theta**0.5 / (qF + theta) <= 1`` with the denominator condensed
    around the previous iterate, and
    ``(snr + 1) * (qD + theta**0.5) / (eps * theta**0.5) <= 1``.  The second
    needs ``qD = Q^-1(D_min) >= 0``, i.e. ``D_min <= 0.5``; otherwise a
    :class:`StructuralError` is raised.

The closed-form minimum sample count and the brute-force grid scan are kept
here as independent checks of the optimiser.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import core, kernels
from .core import SensingConfig
from .errors import InfeasibleError, StructuralError
from .gp import GpProblem, Monomial, Posynomial, ScaSettings, condense, sca_solve

FORMS = ("corrected", "paper")

LIMIT_NONE = "none"
LIMIT_WINDOW = "detection-window"
LIMIT_CAP = "sample-cap"
LIMIT_BATTERY = "battery"


def theta_name(m: int, b: int) -> str:
    return f"theta_{m}_{b}"


def eps_name(m: int, b: int) -> str:
    return f"eps_{m}_{b}"


def closed_form_min_samples(snr, max_fa: float, min_det: float):
    """Smallest real sample count that admits a threshold meeting both targets.

    ``((Q^-1(F) - (snr + 1) Q^-1(D)) / snr) ** 2``.
    """
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 0):
        raise ValueError("closed-form minimum needs snr > 0")
    qf = core.q_inverse(max_fa)
    qd = core.q_inverse(min_det)
    return (((qf - (snr + 1.0) * qd) / snr) ** 2)[()]


def detection_window(theta, snr, max_fa: float, min_det: float):
    """Interval of thresholds with ``F <= max_fa`` and ``D >= min_det``.

    Empty when ``lo > hi``.
    """
    rt = np.sqrt(np.asarray(theta, dtype=float))
    lo = 1.0 + core.q_inverse(max_fa) / rt
    hi = (np.asarray(snr) + 1.0) * (1.0 + core.q_inverse(min_det) / rt)
    return lo, hi


def boundary_threshold(theta, max_fa: float) -> float:
    """Lowest threshold whose false-alarm probability does not exceed ``max_fa``.

    This is the threshold with the highest detection probability among those
    that respect the false-alarm cap.
    """
    eps = 1.0 + float(core.q_inverse(max_fa)) / math.sqrt(theta)
    while core.false_alarm_prob(eps, theta) > max_fa:
        eps = math.nextafter(eps, math.inf)
    return eps


def grid_oracle(snr: float, max_fa: float, min_det: float, theta_lo: int, theta_hi: int,
                eps_step: float = 1e-4):
    """Brute-force scan of integer ``theta`` and a uniform threshold grid.

    Checks the false-alarm and detection probabilities themselves at each grid
    point; returns ``(theta, eps)`` for the smallest feasible ``theta`` or
    ``(None, nan)``.
    """
    theta, eps = kernels.grid_min_samples(float(snr), float(max_fa), float(min_det),
                                          int(theta_lo), int(theta_hi), float(eps_step))
    return (None if theta < 0 else int(theta)), eps


@dataclass
class SlotState:
    """Network snapshot for one slot: SNR and PU distance per (SU, band), batteries per SU."""

    snr: np.ndarray
    battery: np.ndarray
    distance: np.ndarray | None = None

    def __post_init__(self):
        self.snr = np.atleast_2d(np.asarray(self.snr, dtype=float))
        self.battery = np.atleast_1d(np.asarray(self.battery, dtype=float))
        if np.any(self.snr < 0):
            raise ValueError("SNR must be >= 0")
        if np.any(self.battery < 0):
            raise ValueError("battery must be >= 0")
        if self.battery.shape[0] != self.snr.shape[0]:
            raise ValueError("one battery level per SU required")
        if self.distance is not None:
            self.distance = np.atleast_2d(np.asarray(self.distance, dtype=float))

    @property
    def shape(self):
        return self.snr.shape


@dataclass
class FeasibilityReport:
    detection_feasible: np.ndarray
    feasible: np.ndarray
    limiting: np.ndarray
    min_samples: np.ndarray  # nan unless detection-feasible


def _pair_min_samples(snr, config: SensingConfig, thresholds=None):
    fa, det = thresholds or (config.max_false_alarm, config.min_detection)
    out = np.full(np.shape(snr), np.inf)
    pos = snr > 0
    if np.any(pos):
        out[pos] = closed_form_min_samples(snr[pos], fa, det)
    return out


def feasibility_scan(state: SlotState, config: SensingConfig) -> FeasibilityReport:
    """Detection and battery feasibility of every (SU, band) pair.

    Detection-feasible pairs are admitted closest-PU first while their minimum
    sensing cost fits in the SU's battery.
    """
    M, B = state.shape
    need = _pair_min_samples(state.snr, config)
    cap = config.max_samples
    det_ok = need <= cap
    limiting = np.full((M, B), LIMIT_NONE, dtype=object)
    limiting[state.snr <= 0] = LIMIT_WINDOW
    limiting[(state.snr > 0) & ~det_ok] = LIMIT_CAP
    feasible = det_ok.copy()
    per_sample = config.sample_energy
    for m in range(M):
        order = np.argsort(state.distance[m], kind="stable") if state.distance is not None else np.arange(B)
        spent = 0.0
        for b in order:
            if not det_ok[m, b]:
                continue
            cost = max(config.min_samples, math.ceil(need[m, b])) * per_sample
            if spent + cost <= state.battery[m]:
                spent += cost
            else:
                feasible[m, b] = False
                limiting[m, b] = LIMIT_BATTERY
    min_samples = np.where(det_ok, need, np.nan)
    return FeasibilityReport(det_ok, feasible, limiting, min_samples)


def build_subproblem(state: SlotState, config: SensingConfig, z_prev=None, *, form: str = "corrected",
                     active: np.ndarray | None = None, thresholds: tuple[float, float] | None = None) -> GpProblem:
    """GP for one SCA step over the ``active`` (SU, band) pairs.

    ``thresholds`` overrides ``(max_false_alarm, min_detection)`` from the
    config, which the paper form needs since it only accepts ``min_detection
    <= 0.5``.
    """
    if form not in FORMS:
        raise ValueError(f"unknown constraint form {form!r}")
    M, B = state.shape
    if active is None:
        active = np.ones((M, B), dtype=bool)
    fa, det = thresholds or (config.max_false_alarm, config.min_detection)
    qf = float(core.q_inverse(fa))
    qd = float(core.q_inverse(det))
    if qf <= 0:
        raise StructuralError("false-alarm cap must be below 0.5")
    cost = config.sample_energy
    objective_terms = []
    cons: list[Posynomial] = []
    for m in range(M):
        bands = np.flatnonzero(active[m])
        if bands.size == 0:
            continue
        if state.battery[m] <= 0:
            raise InfeasibleError(f"SU {m} has an empty battery; no sample count satisfies the budget")
        battery_terms = []
        for b in bands:
            th, ep = theta_name(m, b), eps_name(m, b)
            g = float(state.snr[m, b])
            objective_terms.append(Monomial(cost, {th: 1}))
            battery_terms.append(Monomial(cost / state.battery[m], {th: 1}))
            if form == "corrected":
                cons.append(Posynomial([Monomial(1.0, {ep: -1}), Monomial(qf, {ep: -1, th: -0.5})]))
                cons.append(Posynomial([Monomial(1.0 / (g + 1.0), {ep: 1}), (-qd) * Monomial(1.0, {th: -0.5})]
                                       if qd < 0 else [Monomial(1.0 / (g + 1.0), {ep: 1})]))
            else:
                if qd < 0:
                    raise StructuralError(
                        "paper-form detection constraint needs Q^-1(min_detection) >= 0 "
                        f"(min_detection <= 0.5), got {det}"
                    )
                if z_prev is None:
                    raise ValueError("paper form needs the previous iterate for condensation")
                denom = condense(Posynomial([qf, Monomial(1.0, {th: 1})]), z_prev)
                cons.append(Posynomial([Monomial(1.0, {ep: 1, th: 0.5}) / denom]))
                cons.append(Posynomial([Monomial((g + 1.0) * qd, {ep: -1, th: -0.5}) if qd > 0 else 0.0,
                                        Monomial(g + 1.0, {ep: -1})]))
            cons.append(Posynomial([Monomial(1.0 / config.max_samples, {th: 1})]))
            cons.append(Posynomial([Monomial(config.min_samples, {th: -1})]))
        cons.append(Posynomial(battery_terms))
    if not objective_terms:
        raise ValueError("no active (SU, band) pair")
    return GpProblem(Posynomial(objective_terms), cons)


def initial_point(state: SlotState, config: SensingConfig, *, form: str = "corrected",
                  active: np.ndarray | None = None, thresholds=None) -> dict[str, float]:
    """Maximum sample count and the middle of the admissible threshold range there."""
    M, B = state.shape
    if active is None:
        active = np.ones((M, B), dtype=bool)
    fa, det = thresholds or (config.max_false_alarm, config.min_detection)
    qf, qd = float(core.q_inverse(fa)), float(core.q_inverse(det))
    theta = config.max_samples
    rt = math.sqrt(theta)
    z = {}
    for m, b in zip(*np.nonzero(active)):
        g = float(state.snr[m, b])
        if form == "corrected":
            lo, hi = 1.0 + qf / rt, (g + 1.0) * (1.0 + qd / rt)
        else:
            lo, hi = (g + 1.0) * (1.0 + qd / rt), rt + qf / rt
        z[theta_name(m, b)] = theta
        z[eps_name(m, b)] = 0.5 * (lo + hi) if hi > lo else max(lo, 1e-6)
    return z


@dataclass
class SensingPlan:
    theta: np.ndarray  # integer sample counts, 0 where the pair does not sense
    eps: np.ndarray  # nan where the pair does not sense
    theta_continuous: np.ndarray
    sensing_energy: np.ndarray  # per SU (J)
    report: FeasibilityReport
    sca_iterations: np.ndarray
    sca_history: dict[int, list[float]] = field(default_factory=dict)
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def sensing(self) -> np.ndarray:
        return self.theta > 0

    @property
    def total_energy(self) -> float:
        return float(self.sensing_energy.sum())


def _round_pair(theta_cont, snr, config: SensingConfig):
    """Integer sample count and threshold that meet both probability targets.

    Returns ``None`` when no integer count up to the cap works.
    """
    fa, det = config.max_false_alarm, config.min_detection
    # tiny relative slack so a solver result of 100.0000001 does not become 101
    theta = max(config.min_samples, math.ceil(theta_cont * (1.0 - 1e-9)))
    if snr > 0:
        theta = max(theta, math.ceil(closed_form_min_samples(snr, fa, det) * (1.0 - 1e-12)))
    while theta <= config.max_samples:
        eps = boundary_threshold(theta, fa)
        if core.detection_prob(eps, theta, snr) >= det:
            return theta, eps
        theta += 1
    return None


def _solve_su(snr: tuple, battery: float, config: SensingConfig, form: str, sca_tol: float, max_iter: int,
              thresholds, trace=None):
    """SCA for one SU over the given bands; returns continuous sample counts."""
    state = SlotState([snr], [battery])
    active = np.ones((1, len(snr)), dtype=bool)
    start = initial_point(state, config, form=form, active=active, thresholds=thresholds)

    def builder(z):
        return build_subproblem(state, config, z, form=form, active=active, thresholds=thresholds)

    res = sca_solve(builder, ScaSettings(tol=sca_tol, max_iter=max_iter, start=start), trace=trace)
    point = tuple(res.point[theta_name(0, b)] for b in range(len(snr)))
    return point, res.iterations, tuple(res.history)


# The per-SU problem is a pure function of its arguments; sweeps over nested
# training subsets solve the same SU many times.
_solve_su_cached = functools.lru_cache(maxsize=65536)(_solve_su)


def optimize_slot(state: SlotState, config: SensingConfig, *, form: str = "corrected", sca_tol: float = 1e-6,
                  max_iter: int = 50, thresholds=None,
                  trace: Callable[[int, int, float, dict], None] | None = None) -> SensingPlan:
    """Optimise sample counts and thresholds for every SU in the slot.

    Each SU is solved separately (only the battery couples its bands).  After
    SCA the count is rounded up, the threshold is placed on the false-alarm
    boundary, and bands are dropped farthest-PU first if rounding breaks the
    battery budget.
    """
    M, B = state.shape
    report = feasibility_scan(state, config)
    theta = np.zeros((M, B), dtype=np.int64)
    eps = np.full((M, B), np.nan)
    cont = np.full((M, B), np.nan)
    iters = np.zeros(M, dtype=int)
    history: dict[int, list[float]] = {}
    errors: dict[int, str] = {}
    for m in range(M):
        bands = np.flatnonzero(report.feasible[m])
        if bands.size == 0:
            continue
        key = (tuple(float(g) for g in state.snr[m, bands]), float(state.battery[m]), config, form,
               float(sca_tol), int(max_iter), thresholds)
        try:
            if trace is None:
                point, it, hist = _solve_su_cached(*key)
            else:
                point, it, hist = _solve_su(*key, trace=lambda r, chi, z, m=m: trace(m, r, chi, z))
        except (InfeasibleError, StructuralError, RuntimeError) as exc:
            errors[m] = f"{type(exc).__name__}: {exc}"
            continue
        iters[m] = it
        history[m] = list(hist)
        for k, b in enumerate(bands):
            cont[m, b] = point[k]
            rounded = _round_pair(cont[m, b], float(state.snr[m, b]), config)
            if rounded is None:
                report.feasible[m, b] = False
                report.limiting[m, b] = LIMIT_CAP
                continue
            theta[m, b], eps[m, b] = rounded

        order = np.argsort(-state.distance[m], kind="stable") if state.distance is not None else np.arange(B)[::-1]
        for b in order:
            if theta[m].sum() * config.sample_energy <= state.battery[m]:
                break
            if theta[m, b] > 0:
                theta[m, b] = 0
                eps[m, b] = np.nan
                report.feasible[m, b] = False
                report.limiting[m, b] = LIMIT_BATTERY
    energy = theta.sum(axis=1) * config.sample_energy
    return SensingPlan(theta, eps, cont, energy, report, iters, history, errors)
