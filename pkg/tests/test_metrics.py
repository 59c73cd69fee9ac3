import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as nps

from grsattack import attacks as A
from grsattack import metrics, nn

from conftest import linear_model


def test_avg_robustness_cases():
    x = np.array([1.0, -0.5])
    assert metrics.avg_robustness([(x, np.zeros(2))]) == 0.0
    assert metrics.avg_robustness([(x, np.array([0.05, 0.0]))]) == 0.05
    pairs = [(np.array([1.0]), np.array([0.02])), (np.array([-2.0]), np.array([0.08]))]
    assert abs(metrics.avg_robustness(pairs) - 0.03) <= 1e-15


def test_avg_robustness_errors():
    with pytest.raises(ValueError):
        metrics.avg_robustness([])
    with pytest.raises(ValueError):
        metrics.avg_robustness([(np.zeros(3), np.ones(3))])


vec = nps.arrays(np.float64, 6, elements=st.floats(-10, 10, allow_subnormal=False))


@given(st.lists(st.tuples(vec, vec), min_size=1, max_size=5), st.sampled_from([0.5, 2.0, 10.0, 0.25]))
def test_scale_invariance(pairs, c):
    pairs = [(x, r) for x, r in pairs if np.max(np.abs(x)) > 0]
    if not pairs:
        return
    # powers of two and 10 * (||r|| / 10||x||): ratios agree to rounding
    a = metrics.avg_robustness(pairs)
    b = metrics.avg_robustness([(c * x, c * r) for x, r in pairs])
    assert b == pytest.approx(a, rel=1e-15, abs=0)


def _result(success, pert, attempted=None):
    return A.AttackResult(np.asarray(pert, float), 0.0, None, np.zeros(2), success, 0, 0.0, attempted=attempted)


def test_failed_policies():
    x = np.array([2.0, 0.0])
    ok = _result(True, [0.1, 0.0])
    bad = _result(False, [0.0, 0.0], attempted=np.array([0.0, 0.4]))
    assert metrics.results_robustness([x, x], [ok, bad], "pmax") == pytest.approx((0.05 + 0.2) / 2)
    assert metrics.results_robustness([x, x], [ok, bad], "zero") == pytest.approx(0.025)
    assert metrics.results_robustness([x, x], [ok, bad], "exclude") == pytest.approx(0.05)
    assert math.isnan(metrics.results_robustness([x], [bad], "exclude"))
    with pytest.raises(ValueError):
        metrics.robustness_perturbation(ok, "median")


def test_accuracy_counts():
    # logits = x: class is the larger coordinate
    m = linear_model(np.eye(2), np.zeros(2))
    X = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    assert metrics.clean_accuracy(m, X, y) == 1.0
    pert = [np.zeros(2), np.zeros(2), np.zeros(2), np.array([4.0, 0.0])]
    assert metrics.adversarial_accuracy(m, X, y, pert) == 0.75
    assert metrics.adversarial_accuracy(m, X, y, [np.zeros(2)] * 4) == 1.0
    flip = [np.array([-5.0, 5.0])] * 2 + [np.array([5.0, -5.0])] * 2
    assert metrics.adversarial_accuracy(m, X, y, flip) == 0.0
    with pytest.raises(ValueError):
        metrics.clean_accuracy(m, np.zeros((0, 2)), np.zeros(0))


def test_constant_model_balanced_accuracy():
    m = linear_model(np.zeros((4, 3)), np.array([0.0, 1.0, 0.0, 0.0]))
    X = np.random.default_rng(0).normal(size=(40, 3))
    y = np.repeat(np.arange(4), 10)
    assert metrics.clean_accuracy(m, X, y) == 0.25


def test_clean_accuracy_manual_count():
    rng = np.random.default_rng(1)
    m = linear_model(rng.normal(size=(3, 4)), rng.normal(size=3))
    X, y = rng.normal(size=(10, 4)), rng.integers(3, size=10)
    manual = sum(int(np.argmax(m.weights[0] @ x + m.biases[0]) == t) for x, t in zip(X, y)) / 10
    assert metrics.clean_accuracy(m, X, y) == manual


def test_timing_stats():
    m = linear_model(np.eye(2), np.zeros(2))
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    stats = metrics.batch_attack_time(A.AttackConfig(method="fgsm"), m, X, [0, 1], repeats=5)
    assert len(stats.times_s) == 5 and stats.batch_size == 2
    assert min(stats.times_s) <= stats.median_s <= max(stats.times_s)
    assert stats.spread_s >= 0


def test_report_roundtrip():
    rows = [
        metrics.ReportRow("m", "grs", 0.0, 0.9, 0.8, 0.01, 0.5, 100),
        metrics.ReportRow("m", "fgsm", 20.0, 1.0, 0.25, 0.04, 0.01, 100),
    ]
    rep = metrics.RobustnessReport(rows)
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == "model,attack,snr_db,clean_acc,adv_acc,avg_robustness,mean_batch_time_s,n"
    assert len(csv_text.splitlines()) == 3
    back = metrics.RobustnessReport.from_json(rep.to_json())
    assert back.rows == rows
    assert json.loads(rep.to_json())["fields"] == list(metrics.REPORT_FIELDS)
    assert rep.lookup("m", "fgsm", 20.0).adv_acc == 0.25


def test_report_row_invariants():
    with pytest.raises(ValueError):
        metrics.ReportRow("m", "grs", 0.0, 1.5, 0.5, 0.0, 0.0, 1)
    with pytest.raises(ValueError):
        metrics.ReportRow("m", "grs", 0.0, 1.0, 0.5, -0.1, 0.0, 1)
    with pytest.raises(ValueError):
        metrics.ReportRow("m", "grs", 0.0, 1.0, 0.5, 0.1, 0.0, 0)


def test_grs_dominates_fgsm_robustness_per_sample():
    rng = np.random.default_rng(2)
    m = linear_model(rng.normal(size=(3, 8)), rng.normal(size=3))
    X = rng.normal(size=(30, 8))
    y = nn.predict(m, X)
    grs = [A.grs_attack(m, x, int(l), A.AttackConfig(p_max=0.05)) for x, l in zip(X, y)]
    fgsm = [A.fgsm_attack(m, x, int(l), A.AttackConfig(method="fgsm", eps=0.05)) for x, l in zip(X, y)]
    assert metrics.results_robustness(X, grs) <= metrics.results_robustness(X, fgsm)
    assert metrics.adversarial_accuracy(m, X, y, [r.perturbation for r in grs]) <= metrics.clean_accuracy(m, X, y)
