"""Ranking metrics: ROC-AUC, Precision@K and Recall@K."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, UndefinedMetricError

DEFAULT_KS = (50, 100, 200, 300)


def _binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or not np.isin(y, (0, 1)).all():
        raise ConfigError("labels must be a 1-D 0/1 vector")
    return y.astype(bool)


def roc_auc(scores, labels) -> float:
    """Tie-aware AUC from average ranks (Mann-Whitney U / (P * N))."""
    s = np.asarray(scores, dtype=np.float64)
    y = _binary_labels(labels)
    if s.shape != y.shape:
        raise ConfigError(f"scores {s.shape} and labels {y.shape} differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs at least one positive and one negative label")
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_recall_at(ranking, labels, ks):
    """Precision@K and Recall@K from a ranking (or anything with a ``.ranking``).

    Returns two dicts keyed by K.
    """
    order = np.asarray(getattr(ranking, "ranking", ranking), dtype=np.int64)
    y = _binary_labels(labels)
    n = y.size
    if order.shape != (n,):
        raise ConfigError(f"ranking has shape {order.shape}, expected ({n},)")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("recall@K needs at least one anomaly")
    hits = np.cumsum(y[order])
    prec, rec = {}, {}
    for k in ks:
        k = int(k)
        if not 1 <= k <= n:
            raise ConfigError(f"K must be in 1..{n}, got {k}")
        prec[k] = float(hits[k - 1] / k)
        rec[k] = float(hits[k - 1] / n_pos)
    return prec, rec


@dataclass
class EvalResult:
    auc: float
    precision_at: dict = field(default_factory=dict)
    recall_at: dict = field(default_factory=dict)
    n_anomalies: int = 0
    n_nodes: int = 0
    strategy: str | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "auc": self.auc,
            "precision_at": {str(k): v for k, v in sorted(self.precision_at.items())},
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "n_anomalies": self.n_anomalies,
            "n_nodes": self.n_nodes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalResult":
        return cls(
            auc=d["auc"],
            precision_at={int(k): v for k, v in d["precision_at"].items()},
            recall_at={int(k): v for k, v in d["recall_at"].items()},
            n_anomalies=d["n_anomalies"],
            n_nodes=d["n_nodes"],
            strategy=d.get("strategy"),
        )

    def csv_rows(self) -> list[list]:
        """Long format: ``strategy,metric,K,value``, one row per cell of a results table."""
        name = self.strategy or ""
        rows = [[name, "auc", "", repr(self.auc)]]
        rows += [[name, "precision", k, repr(v)] for k, v in sorted(self.precision_at.items())]
        rows += [[name, "recall", k, repr(v)] for k, v in sorted(self.recall_at.items())]
        return rows


def evaluate(report, labels, ks=DEFAULT_KS) -> EvalResult:
    y = np.asarray(labels)
    prec, rec = precision_recall_at(report, y, ks)
    return EvalResult(
        auc=roc_auc(report.scores, y),
        precision_at=prec,
        recall_at=rec,
        n_anomalies=int(y.sum()),
        n_nodes=int(y.size),
        strategy=getattr(report, "strategy", None),
    )


def results_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "metric", "K", "value"])
    for res in results:
        writer.writerows(res.csv_rows())
    return buf.getvalue()


def compare_strategies(g, params, hp, labels, ks=DEFAULT_KS, strategies=None) -> list[EvalResult]:
    """Evaluate every ranking strategy of one trained model."""
    from .model import STRATEGIES, score_nodes

    return [evaluate(score_nodes(g, params, hp, s), labels, ks) for s in (strategies or STRATEGIES)]


def strategy_table(results) -> str:
    """Wide text table: one row per strategy, AUC then Precision@K and Recall@K columns."""
    ks = sorted(results[0].precision_at) if results else []
    header = ["strategy", "auc"] + [f"P@{k}" for k in ks] + [f"R@{k}" for k in ks]
    lines = [" | ".join(header)]
    for r in results:
        cells = [r.strategy or "", f"{r.auc:.4f}"]
        cells += [f"{r.precision_at[k]:.3f}" for k in ks] + [f"{r.recall_at[k]:.3f}" for k in ks]
        lines.append(" | ".join(cells))
    return "\n".join(lines)
