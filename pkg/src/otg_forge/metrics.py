"""Ranking and thresholded metrics in the column layout PRAUC, AUC, PR, REC, F1, TP, FP."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from otg_forge.errors import EmptyInput, InconsistentCounts, NoPositives, SingleClass

TABLE_COLUMNS = ("PRAUC", "AUC", "PR", "REC", "F1", "TP", "FP")


@dataclass(frozen=True)
class ScoreSet:
    """Ordered (doc_id, P(hate)) pairs."""

    doc_ids: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.doc_ids) != len(self.probs):
            raise ValueError("doc_ids and probs differ in length")
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("probabilities must be finite and in [0, 1]")

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __iter__(self):
        return iter(zip(self.doc_ids, self.probs))

    @classmethod
    def from_pairs(cls, pairs) -> "ScoreSet":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])


@dataclass(frozen=True)
class EvalReport:
    prauc: float
    auc: float
    precision: float
    recall: float
    f1: float
    tp: float
    fp: float
    n_pos: int
    n_neg: int
    seed: int | None = None

    def row(self) -> tuple[float, ...]:
        return (self.prauc, self.auc, self.precision, self.recall, self.f1, self.tp, self.fp)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**{f.name: d.get(f.name) for f in fields(cls)})


def _check(scores: ScoreSet, labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray([int(v) for v in labels], dtype=np.int64)
    if len(y) != len(scores):
        raise ValueError(f"{len(scores)} scores but {len(y)} labels")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be binary")
    return np.asarray(scores.probs, dtype=np.float64), y


def pr_auc(scores: ScoreSet, labels: Sequence[int]) -> float:
    """Average precision; equal scores are ordered by ascending doc_id."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive")
    order = sorted(range(len(s)), key=lambda i: (-s[i], scores.doc_ids[i]))
    hits = y[order]
    ranks = np.arange(1, len(hits) + 1)
    precision_at = np.cumsum(hits) / ranks
    return float(precision_at[hits == 1].sum() / n_pos)


def roc_auc(scores: ScoreSet, labels: Sequence[int]) -> float:
    """Mann-Whitney U / (n_pos * n_neg), ties count one half."""
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC AUC needs both classes")
    ranks = rankdata(s)  # average ranks settle ties at 1/2
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def classification_report(
    scores: ScoreSet, labels: Sequence[int], threshold: float = 0.5, seed: int | None = None
) -> EvalReport:
    s, y = _check(scores, labels)
    pred = s >= threshold
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / n_pos if n_pos else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    prauc = pr_auc(scores, labels) if n_pos else 0.0
    auc = roc_auc(scores, labels) if n_pos and n_neg else 0.5
    return EvalReport(prauc, auc, precision, recall, f1, float(tp), float(fp), n_pos, n_neg, seed)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Field-wise arithmetic mean over seeds."""
    if not reports:
        raise EmptyInput("nothing to aggregate")
    n_pos, n_neg = reports[0].n_pos, reports[0].n_neg
    if any(r.n_pos != n_pos or r.n_neg != n_neg for r in reports):
        raise InconsistentCounts("reports were computed on different test sets")
    k = len(reports)
    mean = [sum(vals) / k for vals in zip(*(r.row() for r in reports))]
    return EvalReport(*mean, n_pos=n_pos, n_neg=n_neg, seed=None)


def _fmt_count(v: float) -> str:
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return text if text != "-0" else "0"


def format_table(rows: Sequence[tuple[str, str, EvalReport]]) -> str:
    """Aligned plain-text table: Model, Training Data, then the metric columns."""
    header = ("Model", "Training Data") + TABLE_COLUMNS
    body = []
    for model, data, rep in rows:
        body.append(
            (model, data)
            + tuple(f"{v:.3f}" for v in rep.row()[:5])
            + (_fmt_count(rep.tp), _fmt_count(rep.fp))
        )
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = []
    for r in [header, *body]:
        cells = [r[0].ljust(widths[0]), r[1].ljust(widths[1])] + [c.rjust(w) for c, w in zip(r[2:], widths[2:])]
        lines.append(" | ".join(cells).rstrip())
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
