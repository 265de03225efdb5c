"""Region labelling: exact ground truth and one-vs-one SVM prediction."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class RegionLabel(IntEnum):
    """Per-band region of an SU.  Integer order doubles as the vote tie-break order."""

    HR = 0  # harvesting
    IR = 1  # inactive
    CR = 2  # communication

    def __str__(self):
        return self.name


CLASSES = (RegionLabel.HR, RegionLabel.IR, RegionLabel.CR)


def label_ground_truth(rx_power, threshold: float, detection_feasible) -> np.ndarray:
    """HR where the received power reaches ``threshold``; otherwise CR where the
    PU cannot be detected, else IR.  Labels are defined with the PU active."""
    rx_power = np.asarray(rx_power, dtype=float)
    labels = np.full(rx_power.shape, int(RegionLabel.IR))
    labels[~np.asarray(detection_feasible, dtype=bool)] = int(RegionLabel.CR)
    labels[rx_power >= threshold] = int(RegionLabel.HR)
    return labels


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    length_scale: float | None = None  # None: half the median pairwise training distance

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kind!r}")

    def matrix(self, A, B, length_scale=None):
        if self.kind == "linear":
            return A @ B.T
        ell = length_scale if length_scale is not None else self.length_scale
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * ell * ell))


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def __call__(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


@dataclass
class PairwiseSvm:
    """Binary soft-margin SVM between ``positive`` (+1) and ``negative`` (-1).

    When one class had no training data the model is a constant vote for
    ``default`` and carries no support vectors.
    """

    positive: RegionLabel
    negative: RegionLabel
    penalty: float
    kernel: Kernel
    scaler: Scaler | None = None
    length_scale: float | None = None
    support: np.ndarray | None = None  # standardised support vectors
    support_index: np.ndarray | None = None  # rows of the training set
    dual_coef: np.ndarray | None = None  # alpha_i * y_i for the support vectors
    alpha: np.ndarray | None = None  # full dual vector over the pair's training rows
    labels: np.ndarray | None = None  # +1 / -1 for the pair's training rows
    bias: float = 0.0
    iterations: int = 0
    kkt_gap: float = 0.0
    default: RegionLabel | None = None

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.default is not None:
            sign = 1.0 if self.default == self.positive else -1.0
            return np.full(X.shape[0], sign)
        Z = self.scaler(X)
        return self.kernel.matrix(Z, self.support, self.length_scale) @ self.dual_coef + self.bias

    def vote(self, X) -> np.ndarray:
        d = self.decision(X)
        return np.where(d >= 0, int(self.positive), int(self.negative))

    @property
    def weight(self) -> np.ndarray:
        """Primal weight vector; linear kernel only (in standardised coordinates)."""
        if self.kernel.kind != "linear":
            raise ValueError("weight vector is only explicit for the linear kernel")
        return self.dual_coef @ self.support


def _median_distance(Z):
    if Z.shape[0] < 2:
        return 1.0
    d = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))
    med = float(np.median(d[np.triu_indices(Z.shape[0], 1)]))
    return med if med > 0 else 1.0


def train_pairwise(X, y, positive, negative, *, penalty: float = 10.0, kernel: Kernel = Kernel(),
                   scaler: Scaler | None = None, length_scale: float | None = None,
                   tol: float = 1e-3, max_iter: int = 10_000_000) -> PairwiseSvm:
    """Fit one binary SVM by solving its dual with SMO.

    ``X`` and ``y`` may contain other classes; only rows labelled ``positive``
    or ``negative`` are used.  ``scaler`` defaults to standardising those rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    rows = np.flatnonzero((y == positive) | (y == negative))
    has_pos = np.any(y[rows] == positive)
    has_neg = np.any(y[rows] == negative)
    if not (has_pos and has_neg):
        raise ValueError(f"need samples of both {RegionLabel(positive)!s} and {RegionLabel(negative)!s}")
    if scaler is None:
        scaler = Scaler.fit(X[rows])
    Z = scaler(X[rows])
    if kernel.kind == "rbf" and length_scale is None:
        length_scale = kernel.length_scale or 0.5 * _median_distance(Z)
    s = np.where(y[rows] == positive, 1.0, -1.0)
    K = np.ascontiguousarray(kernel.matrix(Z, Z, length_scale))
    alpha, rho, it, gap = kernels.smo_solve(K, np.ascontiguousarray(s), float(penalty), float(tol), int(max_iter))
    if gap >= tol:
        log.warning("SMO stopped at iteration cap %d with KKT gap %.3g", it, gap)
    sv = alpha > 0
    return PairwiseSvm(
        positive=RegionLabel(positive), negative=RegionLabel(negative), penalty=penalty, kernel=kernel,
        scaler=scaler, length_scale=length_scale, support=Z[sv], support_index=rows[sv],
        dual_coef=alpha[sv] * s[sv], alpha=alpha, labels=s, bias=-float(rho), iterations=int(it),
        kkt_gap=float(gap),
    )


def train_ovo(X, y, classes: Sequence[RegionLabel] = CLASSES, *, penalty: float = 10.0,
              kernel: Kernel = Kernel(), tol: float = 1e-3) -> list[PairwiseSvm]:
    """One binary SVM per unordered class pair, all sharing one standardisation
    and one kernel length-scale fitted on the whole training set."""
    if len(classes) < 2:
        raise ValueError("one-vs-one needs at least two classes")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    scaler = Scaler.fit(X)
    ell = None
    if kernel.kind == "rbf":
        ell = kernel.length_scale or 0.5 * _median_distance(scaler(X))
    models = []
    for ci, cj in itertools.combinations(classes, 2):
        has_i, has_j = np.any(y == ci), np.any(y == cj)
        if has_i and has_j:
            models.append(train_pairwise(X, y, ci, cj, penalty=penalty, kernel=kernel, scaler=scaler,
                                         length_scale=ell, tol=tol))
            continue
        if has_i or has_j:
            log.warning("pair (%s, %s) lacks training data for one class; voting for the other", ci, cj)
        default = RegionLabel(ci) if has_i else RegionLabel(cj) if has_j else None
        models.append(PairwiseSvm(RegionLabel(ci), RegionLabel(cj), penalty, kernel, default=default))
    return models


def predict_max_wins(models: Sequence[PairwiseSvm], X, n_classes: int = len(CLASSES)) -> np.ndarray:
    """Majority vote over the pairwise models; ties go to the lowest label."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    votes = np.zeros((X.shape[0], n_classes), dtype=int)
    rows = np.arange(X.shape[0])
    for mdl in models:
        if mdl.support is None:
            # defaulted pair; casts nothing when neither class was seen
            if mdl.default is not None:
                votes[:, int(mdl.default)] += 1
            continue
        np.add.at(votes, (rows, mdl.vote(X)), 1)
    return np.argmax(votes, axis=1)


def support_vector_mask(models: Sequence[PairwiseSvm], n: int) -> np.ndarray:
    """Training rows that are a support vector of at least one pairwise model."""
    mask = np.zeros(n, dtype=bool)
    for mdl in models:
        if mdl.support_index is not None:
            mask[mdl.support_index] = True
    return mask


def classification_error(predicted, truth) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("label arrays differ in shape")
    if truth.size == 0:
        return 0.0
    return float(np.mean(predicted != truth))
