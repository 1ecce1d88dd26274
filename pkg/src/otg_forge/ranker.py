"""tf-idf representation of templates, summed-cosine scoring and top-k selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from otg_forge.errors import EmptyInput
from otg_forge.templating import REP, Template


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    document_frequency: np.ndarray
    n_docs: int

    def idf_of(self, token: str) -> float:
        return float(self.idf[self.vocabulary[token]])


@dataclass(frozen=True)
class ScoredTemplate:
    template: Template
    score: float

    def to_record(self) -> dict:
        rec = self.template.to_record()
        rec["score"] = self.score
        return rec


def fit_tfidf(templates: Sequence[Template]) -> TfIdfModel:
    """Document frequencies over the given templates, smoothed idf ``ln((1+N)/(1+df)) + 1``."""
    if not templates:
        raise EmptyInput("cannot fit tf-idf on zero templates")
    df: dict[str, int] = {}
    for t in templates:
        for tok in set(t.slotted_tokens):
            if tok != REP:
                df[tok] = df.get(tok, 0) + 1
    terms = sorted(df)
    vocab = {tok: i for i, tok in enumerate(terms)}
    dfs = np.array([df[t] for t in terms], dtype=np.int64)
    n = len(templates)
    idf = np.log((1.0 + n) / (1.0 + dfs)) + 1.0
    return TfIdfModel(vocab, idf, dfs, n)


def _counts(model: TfIdfModel, template: Template) -> dict[int, int]:
    counts: dict[int, int] = {}
    for tok in template.slotted_tokens:
        j = model.vocabulary.get(tok)
        if j is not None:
            counts[j] = counts.get(j, 0) + 1
    return counts


def vectorize(model: TfIdfModel, template: Template) -> dict[str, float]:
    """L2-normalised tf-idf weights keyed by token; empty when nothing is in vocabulary."""
    weights: dict[str, float] = {}
    for tok in template.slotted_tokens:
        if tok in model.vocabulary:
            weights[tok] = weights.get(tok, 0.0) + model.idf_of(tok)
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0.0:
        return {}
    return {tok: w / norm for tok, w in weights.items()}


def tfidf_matrix(model: TfIdfModel, templates: Sequence[Template]) -> sp.csr_matrix:
    """Row-normalised CSR matrix, one row per template, columns in vocabulary order."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for t in templates:
        counts = _counts(model, t)
        cols = sorted(counts)
        indices.extend(cols)
        data.extend(counts[j] * model.idf[j] for j in cols)
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(templates), len(model.vocabulary)),
    )
    norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.csr_matrix(sp.diags(scale) @ mat)


def score_pool(weak: Sequence[Template], target: Sequence[Template], model: TfIdfModel) -> list[ScoredTemplate]:
    """Summed cosine similarity of each weak template to every target template.

    Rows are unit (or zero) vectors, so the sum of cosines against the target
    set equals one sparse dot product with the sum of the target vectors. That
    keeps the cost linear in the non-zeros of the weak pool.
    """
    if not weak:
        return []
    target_sum = np.zeros(len(model.vocabulary), dtype=np.float64)
    if target:
        tmat = tfidf_matrix(model, target)
        # Row-by-row accumulation in target order keeps the reduction order fixed.
        for i in range(tmat.shape[0]):
            lo, hi = tmat.indptr[i], tmat.indptr[i + 1]
            np.add.at(target_sum, tmat.indices[lo:hi], tmat.data[lo:hi])
    scores = tfidf_matrix(model, weak) @ target_sum
    # Non-negative weights: clamp rounding noise below zero.
    scores = np.maximum(scores, 0.0)
    return [ScoredTemplate(t, float(s)) for t, s in zip(weak, scores)]


def select_top(
    scored: Sequence[ScoredTemplate], k: int, min_slots: int = 0, max_slots: int | None = None
) -> list[Template]:
    """Top-k templates with slot_count in [min_slots, max_slots]; ties go to the smaller doc_id."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if max_slots is not None and min_slots > max_slots:
        raise ValueError("min_slots exceeds max_slots")
    eligible = [
        s for s in scored if s.template.slot_count >= min_slots and (max_slots is None or s.template.slot_count <= max_slots)
    ]
    eligible.sort(key=lambda s: (-s.score, s.template.doc_id))
    return [s.template for s in eligible[:k]]


def sort_scored(scored: Sequence[ScoredTemplate]) -> list[ScoredTemplate]:
    return sorted(scored, key=lambda s: (-s.score, s.template.doc_id))
