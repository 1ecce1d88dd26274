"""Hate lexicon loading and lexicon-driven token-level weak labels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from otg_forge.corpus import Corpus, Document, Label, tokenize
from otg_forge.errors import EmptyLexicon, NonHateInput

log = logging.getLogger(__name__)

OTG = "OTG"
O = "O"
TAGS = (O, OTG)


@dataclass(frozen=True)
class Lexicon:
    unigrams: frozenset[str]
    phrases: frozenset[tuple[str, ...]] = frozenset()
    source_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "unigrams", frozenset(self.unigrams))
        object.__setattr__(self, "phrases", frozenset(tuple(p) for p in self.phrases))
        if any(not t for t in self.unigrams):
            raise ValueError("lexicon contains an empty token")

    def __len__(self) -> int:
        return len(self.unigrams)

    def __contains__(self, token: str) -> bool:
        return token in self.unigrams

    def sorted_unigrams(self) -> list[str]:
        return sorted(self.unigrams)

    def save(self, path: str | Path) -> None:
        """One entry per line: unigrams first, then phrases, both sorted."""
        lines = self.sorted_unigrams() + sorted(" ".join(p) for p in self.phrases)
        Path(path).write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


@dataclass(frozen=True)
class TaggedSentence:
    doc_id: str
    tokens: tuple[str, ...]
    tags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tags) != len(self.tokens):
            raise ValueError(f"{self.doc_id}: {len(self.tags)} tags for {len(self.tokens)} tokens")
        bad = set(self.tags) - set(TAGS)
        if bad:
            raise ValueError(f"{self.doc_id}: unknown tags {sorted(bad)}")

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "tokens": list(self.tokens), "tags": list(self.tags)}

    @classmethod
    def from_record(cls, rec: dict) -> "TaggedSentence":
        return cls(rec["doc_id"], rec["tokens"], rec["tags"])


def consolidate(entries: Iterable[str], source_name: str = "") -> Lexicon:
    unigrams: set[str] = set()
    phrases: set[tuple[str, ...]] = set()
    for entry in entries:
        toks = tokenize(entry)
        if not toks:
            continue
        if len(toks) > 1:
            phrases.add(tuple(toks))
        unigrams.update(toks)
    if not unigrams:
        raise EmptyLexicon(f"lexicon {source_name!r} has no entries")
    return Lexicon(frozenset(unigrams), frozenset(phrases), source_name)


def load_and_consolidate(path: str | Path) -> Lexicon:
    """Read a one-entry-per-line lexicon, merging phrase tokens into the unigram set.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                entries.append(line)
    return consolidate(entries, source_name=path.name)


def match_mask(tokens: tuple[str, ...] | list[str], lexicon: Lexicon) -> list[bool]:
    """True for tokens matching a unigram or covered by a contiguous phrase occurrence."""
    mask = [t in lexicon.unigrams for t in tokens]
    if lexicon.phrases:
        by_len: dict[int, set[tuple[str, ...]]] = {}
        for p in lexicon.phrases:
            by_len.setdefault(len(p), set()).add(p)
        n = len(tokens)
        for length, group in by_len.items():
            for start in range(n - length + 1):
                if tuple(tokens[start : start + length]) in group:
                    for i in range(start, start + length):
                        mask[i] = True
    return mask


def weak_label(hate_docs: Corpus | Iterable[Document], lexicon: Lexicon) -> list[TaggedSentence]:
    """Tag tokens of hate-labeled documents OTG where they match the lexicon, O otherwise."""
    out = []
    for doc in hate_docs:
        if doc.label != Label.HATE:
            raise NonHateInput(f"document {doc.id!r} is not labeled hate")
        tags = [OTG if hit else O for hit in match_mask(doc.tokens, lexicon)]
        out.append(TaggedSentence(doc.id, doc.tokens, tags))
    all_o = sum(1 for s in out if OTG not in s.tags)
    log.info("weak-labeled %d sentences (%d without any OTG token)", len(out), all_o)
    return out
