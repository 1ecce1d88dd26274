"""REP-slotted templates (context carriers) and the target-domain lexicon."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from otg_forge.corpus import tokenize
from otg_forge.errors import EmptyTargetLexicon
from otg_forge.lexicon import OTG, Lexicon, TaggedSentence

log = logging.getLogger(__name__)

# Slot marker. tokenize() lowercases everything, so it never emits this token.
REP = "REP"


@dataclass(frozen=True)
class Template:
    doc_id: str
    slotted_tokens: tuple[str, ...]
    removed_otg: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "slotted_tokens", tuple(self.slotted_tokens))
        object.__setattr__(self, "removed_otg", tuple(tuple(r) for r in self.removed_otg))
        if any(REP in run for run in self.removed_otg):
            raise ValueError(f"{self.doc_id}: slot marker inside a removed run")

    @property
    def slot_count(self) -> int:
        return self.slotted_tokens.count(REP)

    @property
    def slotted_text(self) -> str:
        return " ".join(self.slotted_tokens)

    def without_removed(self) -> "Template":
        return Template(self.doc_id, self.slotted_tokens)

    def fill(self, runs: Iterable[Iterable[str]]) -> list[str]:
        """Splice one token run into each slot, left to right."""
        runs = list(runs)
        if len(runs) != self.slot_count:
            raise ValueError(f"{self.doc_id}: {len(runs)} fillers for {self.slot_count} slots")
        it = iter(runs)
        out: list[str] = []
        for tok in self.slotted_tokens:
            if tok == REP:
                out.extend(next(it))
            else:
                out.append(tok)
        return out

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "slotted_text": self.slotted_text, "slot_count": self.slot_count}

    @classmethod
    def from_record(cls, rec: dict) -> "Template":
        tmpl = cls(rec["doc_id"], rec["slotted_text"].split(" ") if rec["slotted_text"] else ())
        if "slot_count" in rec and rec["slot_count"] != tmpl.slot_count:
            raise ValueError(f"{rec['doc_id']}: slot_count {rec['slot_count']} disagrees with text")
        return tmpl


def parse_slotted(text: str) -> list[str]:
    """Tokenize human-written template text, keeping literal ``REP`` markers."""
    out: list[str] = []
    for piece in text.split():
        if piece == REP:
            out.append(REP)
        else:
            out.extend(tokenize(piece))
    return out


def templatize(tagged: TaggedSentence) -> Template:
    """Collapse each maximal run of OTG tokens into a single REP slot."""
    slotted: list[str] = []
    removed: list[tuple[str, ...]] = []
    run: list[str] = []
    for tok, tag in zip(tagged.tokens, tagged.tags):
        if tag == OTG:
            run.append(tok)
            continue
        if run:
            slotted.append(REP)
            removed.append(tuple(run))
            run = []
        slotted.append(tok)
    if run:
        slotted.append(REP)
        removed.append(tuple(run))
    return Template(tagged.doc_id, slotted, removed)


def extract_target_lexicon(tagged_target: Iterable[TaggedSentence], source_name: str = "target") -> Lexicon:
    unigrams = {tok for s in tagged_target for tok, tag in zip(s.tokens, s.tags) if tag == OTG}
    if not unigrams:
        raise EmptyTargetLexicon("the tagger found no OTG token in the target sample")
    return Lexicon(frozenset(unigrams), frozenset(), source_name)


def build_weak_pool(tagged_weak: Iterable[TaggedSentence]) -> list[Template]:
    """Templatize weak sentences, drop the OTG values and keep the first of each duplicate."""
    pool = []
    seen: set[tuple[str, ...]] = set()
    n_in = 0
    for s in tagged_weak:
        n_in += 1
        tmpl = templatize(s).without_removed()
        if tmpl.slotted_tokens in seen:
            continue
        seen.add(tmpl.slotted_tokens)
        pool.append(tmpl)
    log.info("weak pool: %d templates from %d sentences", len(pool), n_in)
    return pool
