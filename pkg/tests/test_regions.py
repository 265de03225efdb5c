import logging

import numpy as np
import pytest

from mbharvest.regions import (CLASSES, Kernel, PairwiseSvm, RegionLabel, Scaler, classification_error,
                               label_ground_truth, predict_max_wins, support_vector_mask, train_ovo,
                               train_pairwise)

HR, IR, CR = RegionLabel.HR, RegionLabel.IR, RegionLabel.CR


def test_ground_truth_precedence():
    rx = np.array([2e-5, 1e-5, 5e-6, 5e-6, 2e-5])
    det = np.array([True, True, True, False, False])
    assert label_ground_truth(rx, 1e-5, det).tolist() == [HR, HR, IR, CR, HR]


def test_two_point_hand_solution():
    # points 0 and 2 on a line standardise to -1 and +1: alpha = 1/2, w = 1, b = 0
    X = np.array([[0.0, 5.0], [2.0, 5.0]])
    y = np.array([IR, HR])
    mdl = train_pairwise(X, y, HR, IR, penalty=10.0, kernel=Kernel("linear"), tol=1e-9)
    np.testing.assert_allclose(mdl.alpha, [0.5, 0.5], atol=1e-6)
    assert mdl.bias == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(mdl.weight, [1.0, 0.0], atol=1e-6)
    assert 2.0 / np.linalg.norm(mdl.weight) == pytest.approx(2.0, abs=1e-6)
    assert mdl.vote([[1.9, 5.0]])[0] == HR
    assert mdl.vote([[0.1, 5.0]])[0] == IR


def test_box_constraint_binds_on_overlapping_classes():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 2))
    y = np.where(rng.random(40) < 0.5, HR, CR)
    mdl = train_pairwise(X, y, HR, CR, penalty=0.5, kernel=Kernel("linear"))
    assert mdl.alpha.max() <= 0.5 + 1e-12
    assert np.any(np.isclose(mdl.alpha, 0.5))
    # equality constraint of the dual
    assert abs(mdl.alpha @ mdl.labels) < 1e-9


def test_rbf_separates_ring():
    rng = np.random.default_rng(1)
    ang = rng.uniform(0, 2 * np.pi, 200)
    r = np.where(np.arange(200) < 100, rng.uniform(0, 1, 200), rng.uniform(2, 3, 200))
    X = np.c_[r * np.cos(ang), r * np.sin(ang)]
    y = np.where(r < 1.5, HR, IR)
    mdl = train_pairwise(X, y, HR, IR)
    assert classification_error(mdl.vote(X), y) < 0.02


def test_ovo_count_and_voting():
    rng = np.random.default_rng(2)
    centres = {HR: (0, 0), IR: (5, 0), CR: (0, 5)}
    X = np.vstack([rng.normal(c, 0.5, size=(20, 2)) for c in centres.values()])
    y = np.repeat(list(centres), 20)
    models = train_ovo(X, y)
    assert len(models) == 3
    assert {(m.positive, m.negative) for m in models} == {(HR, IR), (HR, CR), (IR, CR)}
    assert classification_error(predict_max_wins(models, X), y) == 0.0
    assert support_vector_mask(models, len(y)).any()


def test_missing_class_votes_for_present_one(caplog):
    X = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]])
    y = np.array([HR, HR, IR, IR])
    with caplog.at_level(logging.WARNING, logger="mbharvest.regions"):
        models = train_ovo(X, y)
    assert len(models) == 3
    assert "lacks training data" in caplog.text
    defaults = [m for m in models if m.support is None]
    assert {m.default for m in defaults} == {HR, IR}
    assert predict_max_wins(models, X).tolist() == y.tolist()


def test_single_class_training_predicts_that_class():
    X = np.random.default_rng(3).uniform(0, 10, size=(5, 2))
    models = train_ovo(X, np.full(5, IR))
    assert (predict_max_wins(models, X + 100) == IR).all()


def test_ties_go_to_lowest_label():
    # three defaulted pairs cast one vote each for a different class
    k = Kernel()
    models = [PairwiseSvm(HR, IR, 1.0, k, default=IR), PairwiseSvm(HR, CR, 1.0, k, default=CR),
              PairwiseSvm(IR, CR, 1.0, k, default=HR)]
    assert predict_max_wins(models, [[0.0, 0.0]])[0] == HR
    models[2] = PairwiseSvm(IR, CR, 1.0, k, default=CR)
    assert predict_max_wins(models, [[0.0, 0.0]])[0] == CR


def test_train_pairwise_requires_both_classes():
    with pytest.raises(ValueError):
        train_pairwise(np.zeros((2, 2)), np.array([HR, HR]), HR, IR)


def test_scaler_and_kernel():
    X = np.array([[1.0, 2.0], [3.0, 2.0]])
    s = Scaler.fit(X)
    np.testing.assert_allclose(s(X), [[-1.0, 0.0], [1.0, 0.0]])
    K = Kernel("rbf").matrix(X, X, 1.0)
    assert K[0, 0] == 1.0 and K[0, 1] == pytest.approx(np.exp(-2.0))
    with pytest.raises(ValueError):
        Kernel("poly")
    with pytest.raises(ValueError):
        PairwiseSvm(HR, IR, 1.0, Kernel()).weight


def test_classification_error():
    assert classification_error([0, 1, 2], [0, 1, 1]) == pytest.approx(1 / 3)
    assert classification_error([], []) == 0.0
    with pytest.raises(ValueError):
        classification_error([0], [0, 1])
    assert CLASSES == (HR, IR, CR)
    assert str(CR) == "CR"
