"""Evaluation metrics and the entailment-label baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

BASELINE_SCORES = {"yes": 5.0, "no": 3.0, "unknown": 3.0}


@dataclass
class EvalReport:
    pearson: float
    spearman: float
    mse: float
    n: int
    pearson_defined: bool = True
    spearman_defined: bool = True
    predictions: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "pearson": self.pearson,
            "spearman": self.spearman,
            "mse": self.mse,
            "n": self.n,
            "pearson_defined": self.pearson_defined,
            "spearman_defined": self.spearman_defined,
            "predictions": self.predictions,
        }


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0.0:
        return 0.0, False
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0)), True


def metrics(pred: Sequence[float], gold: Sequence[float], ids: Optional[Sequence[str]] = None) -> EvalReport:
    """Pearson, Spearman (Pearson on average ranks) and mean squared error.

    A correlation with a constant input is undefined; it is reported as 0
    with the matching ``*_defined`` flag cleared.
    """
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gold, dtype=float)
    if p.shape != g.shape or p.ndim != 1:
        raise ValueError(f"prediction and gold shapes differ: {p.shape} vs {g.shape}")
    if len(p) == 0:
        raise ValueError("no predictions to evaluate")
    r, r_ok = _pearson(p, g)
    rho, rho_ok = _pearson(rankdata(p), rankdata(g))
    preds = dict(zip(ids, p.tolist())) if ids is not None else {}
    return EvalReport(r, rho, float(np.mean((p - g) ** 2)), len(p), r_ok, rho_ok, preds)


def baseline_score(label: str) -> float:
    try:
        return BASELINE_SCORES[label]
    except KeyError:
        raise ValueError(f"unknown entailment label {label!r}") from None


def baseline_predictions(labels: Sequence[str]) -> List[float]:
    return [baseline_score(l) for l in labels]
