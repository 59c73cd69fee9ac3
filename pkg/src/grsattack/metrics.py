"""Accuracy, average L-inf robustness, and attack timing summaries."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import nn
from .attacks import AttackConfig, AttackResult, run_attack

FAILED_POLICIES = ("pmax", "zero", "exclude")
TIMING_BATCH = 128
TIMING_REPEATS = 5


def avg_robustness(samples) -> float:
    """Mean of ``||r||_inf / ||x||_inf`` over ``(x, r)`` pairs."""
    samples = list(samples)
    if not samples:
        raise ValueError("avg_robustness needs at least one sample")
    total = 0.0
    for x, r in samples:
        xn = np.max(np.abs(x))
        if xn == 0:
            raise ValueError("||x||_inf = 0: robustness ratio undefined")
        total += np.max(np.abs(r)) / xn
    return float(total / len(samples))


def robustness_perturbation(result: AttackResult, policy: str = "pmax") -> np.ndarray | None:
    """Perturbation that represents ``result`` in the robustness average.

    Successful attacks use their perturbation. Failed ones use the full-budget
    attempt (``pmax``), a zero vector (``zero``) or are dropped (``exclude``,
    returns None).
    """
    if policy not in FAILED_POLICIES:
        raise ValueError(f"unknown failed policy {policy!r}")
    if result.success:
        return result.perturbation
    if policy == "exclude":
        return None
    if policy == "pmax" and result.attempted is not None:
        return result.attempted
    return np.zeros_like(result.perturbation)


def results_robustness(X, results, policy: str = "pmax") -> float:
    pairs = []
    for x, res in zip(X, results):
        r = robustness_perturbation(res, policy)
        if r is not None:
            pairs.append((x, r))
    if not pairs:
        return math.nan
    return avg_robustness(pairs)


def clean_accuracy(model, X, y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(nn.predict(model, np.atleast_2d(X)) == y))


def adversarial_accuracy(model, X, y, perturbations) -> float:
    """Fraction of samples still classified as their label after perturbation."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty test set")
    Xa = np.atleast_2d(X) + np.asarray([np.asarray(r) for r in perturbations])
    return float(np.mean(nn.predict(model, Xa) == y))


@dataclass
class TimingStats:
    median_s: float
    times_s: list[float]
    batch_size: int

    @property
    def spread_s(self) -> float:
        return max(self.times_s) - min(self.times_s)


def batch_attack_time(cfg: AttackConfig, model, X, y, repeats: int = TIMING_REPEATS) -> TimingStats:
    """Median wall time to attack the batch ``X`` sample by sample."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for x, label in zip(X, y):
            run_attack(model, x, int(label), cfg)
        times.append(time.perf_counter() - t0)
    return TimingStats(statistics.median(times), times, len(y))


@dataclass
class ReportRow:
    model: str
    attack: str
    snr_db: float
    clean_acc: float
    adv_acc: float
    avg_robustness: float
    mean_batch_time_s: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.clean_acc <= 1.0 and 0.0 <= self.adv_acc <= 1.0):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.avg_robustness < 0:
            raise ValueError("avg_robustness must be non-negative")
        if self.n <= 0:
            raise ValueError("n must be positive")


REPORT_FIELDS = tuple(f.name for f in fields(ReportRow))


@dataclass
class RobustnessReport:
    rows: list[ReportRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for row in self.rows:
            w.writerow([_fmt(getattr(row, k)) for k in REPORT_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"fields": list(REPORT_FIELDS), "rows": [asdict(r) for r in self.rows]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RobustnessReport":
        doc = json.loads(text)
        if list(doc["fields"]) != list(REPORT_FIELDS):
            raise ValueError("report fields do not match the schema")
        return cls([ReportRow(**r) for r in doc["rows"]])

    def lookup(self, model: str, attack: str, snr_db: float) -> ReportRow:
        for r in self.rows:
            if (r.model, r.attack, r.snr_db) == (model, attack, snr_db):
                return r
        raise KeyError((model, attack, snr_db))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize(model, model_id: str, method: str, snr_db: float, X, y, results, policy: str = "pmax") -> ReportRow:
    """One report row from per-sample attack results on ``(X, y)``.

    Batch time is the run's total attack time scaled to a batch of
    ``TIMING_BATCH`` samples.
    """
    total_time = sum(r.wall_time_s for r in results)
    rob = results_robustness(X, results, policy)
    return ReportRow(
        model=model_id,
        attack=method,
        snr_db=float(snr_db),
        clean_acc=clean_accuracy(model, X, y),
        adv_acc=adversarial_accuracy(model, X, y, [r.perturbation for r in results]),
        avg_robustness=rob,
        mean_batch_time_s=total_time * TIMING_BATCH / len(results),
        n=len(results),
    )
