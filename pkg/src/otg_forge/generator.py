"""Slot imputation from the target lexicon, labeling, and merging with the source corpus."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from otg_forge.corpus import Corpus, Document, Label
from otg_forge.errors import DuplicateId, EmptyLexicon
from otg_forge.lexicon import Lexicon
from otg_forge.templating import REP, Template

AUGMENTED = "augmented"


@dataclass(frozen=True)
class AugmentedExample(Document):
    template_id: str = ""
    imputed: tuple[str, ...] = field(default=())
    slot_positions: tuple[int, ...] = field(default=())

    def to_record(self) -> dict:
        rec = super().to_record()
        rec["template_id"] = self.template_id
        rec["imputed"] = list(self.imputed)
        return rec


def impute(
    template: Template,
    lexicon: Lexicon,
    rng: np.random.Generator,
    doc_id: str | None = None,
    label: Label | None = None,
) -> AugmentedExample:
    """Replace each REP with an independent uniform draw from the lexicon unigrams."""
    if len(lexicon) == 0:
        raise EmptyLexicon("cannot impute from an empty lexicon")
    vocab = lexicon.sorted_unigrams()
    positions = [i for i, tok in enumerate(template.slotted_tokens) if tok == REP]
    draws = rng.integers(0, len(vocab), size=len(positions)) if positions else []
    imputed = [vocab[j] for j in draws]
    tokens = list(template.slotted_tokens)
    for pos, tok in zip(positions, imputed):
        tokens[pos] = tok
    return AugmentedExample(
        id=doc_id or template.doc_id,
        raw_text=" ".join(tokens),
        label=label,
        domain=AUGMENTED,
        template_id=template.doc_id,
        imputed=tuple(imputed),
        slot_positions=tuple(positions),
    )


def generate(
    hate_templates: Sequence[Template],
    nonhate_templates: Sequence[Template],
    lexicon: Lexicon,
    seed: int,
    name: str = "augmented",
) -> Corpus:
    """Hate examples first, then non-hate, each in selection order, one seeded stream."""
    if len(lexicon) == 0:
        raise EmptyLexicon("cannot generate from an empty lexicon")
    rng = np.random.default_rng(seed)
    docs = [impute(t, lexicon, rng, f"aug-hate-{i}", Label.HATE) for i, t in enumerate(hate_templates)]
    docs += [impute(t, lexicon, rng, f"aug-nonhate-{i}", Label.NONHATE) for i, t in enumerate(nonhate_templates)]
    return Corpus(name, docs, True)


def merge(source: Corpus, augmented: Corpus, name: str | None = None) -> Corpus:
    if not (source.labeled and augmented.labeled):
        raise ValueError("both corpora must be labeled")
    clash = set(source.ids) & set(augmented.ids)
    if clash:
        raise DuplicateId(f"ids present in both corpora: {sorted(clash)[:5]}")
    return Corpus(name or f"{source.name}+{augmented.name}", source.documents + augmented.documents, True)
