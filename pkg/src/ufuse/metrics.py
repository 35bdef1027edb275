"""Segmentation metrics: clamped cross entropy, class-1 IoU, pixel accuracy."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

CLAMP_EPS = 1e-6


def to_probability(pred) -> np.ndarray:
    """Class-1 probability map; hard {0,1} maps become probabilities 0 or 1."""
    return np.asarray(pred, dtype=float)


def cross_entropy(pred, labels, eps: float = CLAMP_EPS) -> float:
    """Mean binary cross entropy with probabilities clamped to ``[eps, 1 - eps]``."""
    p = np.clip(to_probability(pred), eps, 1.0 - eps)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise ValueError(f"prediction shape {p.shape} != ground truth shape {y.shape}")
    return float(np.mean(np.where(y == 1, -np.log(p), -np.log1p(-p))))


def hard_labels(pred) -> np.ndarray:
    return (to_probability(pred) > 0.5).astype(np.uint8)


def iou(pred, labels) -> float:
    """Class-1 intersection over union; two empty maps score 1."""
    a = hard_labels(pred).astype(bool)
    b = np.asarray(labels).astype(bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def pixel_accuracy(pred, labels) -> float:
    return float(np.mean(hard_labels(pred) == np.asarray(labels)))


@dataclass
class ScenarioMetrics:
    scenario_id: str
    cross_entropy: float
    iou: float
    accuracy: float


@dataclass
class MetricsReport:
    method: str
    per_scenario: list[ScenarioMetrics] = field(default_factory=list)

    @property
    def mean_cross_entropy(self) -> float:
        return float(np.mean([m.cross_entropy for m in self.per_scenario]))

    @property
    def mean_iou(self) -> float:
        return float(np.mean([m.iou for m in self.per_scenario]))

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([m.accuracy for m in self.per_scenario]))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_scenarios": len(self.per_scenario),
            "mean": {"cross_entropy": self.mean_cross_entropy, "iou": self.mean_iou,
                     "accuracy": self.mean_accuracy},
            "per_scenario": [asdict(m) for m in self.per_scenario],
        }


def evaluate(predictions, ground_truths, method: str = "learned", ids=None) -> MetricsReport:
    predictions, ground_truths = list(predictions), list(ground_truths)
    if len(predictions) != len(ground_truths):
        raise ValueError("number of predictions and ground truths differ")
    if not predictions:
        raise ValueError("nothing to evaluate")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(predictions))]
    report = MetricsReport(method)
    for sid, pred, gt in zip(ids, predictions, ground_truths):
        if np.shape(pred) != np.shape(gt):
            raise ValueError(f"scenario {sid}: shape {np.shape(pred)} != {np.shape(gt)}")
        report.per_scenario.append(
            ScenarioMetrics(sid, cross_entropy(pred, gt), iou(pred, gt), pixel_accuracy(pred, gt)))
    return report
