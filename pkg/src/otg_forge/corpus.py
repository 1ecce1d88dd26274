"""Documents, corpora, tokenization and the UDA target split."""

from __future__ import annotations

import csv
import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from otg_forge.errors import DuplicateId, MalformedRecord, MissingLabel

# Contraction suffixes are split off as a single token ("crv's" -> "crv", "'s").
# The suffix set is closed so that an opening quote ('hello) stays a lone "'".
# A run of two or more hyphens is a dash and stays one token ("--").
_TOKEN_RE = re.compile(r"'(?:s|t|re|ve|ll|d|m)\b|[^\W_]+|-{2,}|[^\s]", re.UNICODE)
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


def tokenize(text: str) -> list[str]:
    """Lowercase tokens: alphanumeric runs, contraction suffixes, dashes, single punctuation chars.

    >>> tokenize("The problem with Honda CRV's")
    ['the', 'problem', 'with', 'honda', 'crv', "'s"]
    """
    return _TOKEN_RE.findall(text.lower().translate(_APOSTROPHES))


class Label(enum.IntEnum):
    NONHATE = 0
    HATE = 1

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, bool):
            raise ValueError(f"unrecognised label {value!r}")
        if isinstance(value, (int, np.integer)):
            if value in (0, 1):
                return cls(int(value))
            raise ValueError(f"unrecognised label {value!r}")
        if isinstance(value, float) and value in (0.0, 1.0):
            return cls(int(value))
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("1", "hate"):
                return cls.HATE
            if key in ("0", "non-hate"):
                return cls.NONHATE
        raise ValueError(f"unrecognised label {value!r}")


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    label: Label | None = None
    domain: str = "source"
    tokens: tuple[str, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(tokenize(self.raw_text)))
        if self.label is not None:
            object.__setattr__(self, "label", Label.parse(self.label))

    def unlabeled(self) -> "Document":
        return Document(self.id, self.raw_text, None, self.domain)

    def to_record(self) -> dict:
        rec = {"id": self.id, "text": self.raw_text}
        if self.label is not None:
            rec["label"] = int(self.label)
        return rec


@dataclass(frozen=True)
class Corpus:
    name: str
    documents: tuple[Document, ...]
    labeled: bool

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise DuplicateId(f"duplicate document id {doc.id!r} in corpus {self.name!r}")
            seen.add(doc.id)
            if self.labeled and doc.label is None:
                raise MissingLabel(f"document {doc.id!r} in labeled corpus {self.name!r} has no label")
        if not self.labeled and any(d.label is not None for d in self.documents):
            object.__setattr__(self, "documents", tuple(d.unlabeled() for d in self.documents))

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __getitem__(self, i):
        return self.documents[i]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    @property
    def labels(self) -> list[int]:
        return [int(d.label) for d in self.documents]

    def subset(self, indices: Iterable[int], name: str | None = None, labeled: bool | None = None) -> "Corpus":
        docs = [self.documents[i] for i in indices]
        return Corpus(name or self.name, docs, self.labeled if labeled is None else labeled)

    def hate_only(self) -> "Corpus":
        return Corpus(f"{self.name}_hate", [d for d in self.documents if d.label == Label.HATE], True)


def _parse_label(raw, path, line):
    try:
        return Label.parse(raw)
    except ValueError as exc:
        raise MalformedRecord(path, line, str(exc)) from None


def _make_doc(rec_id, text, label, labeled, domain, path, line):
    if rec_id is None or rec_id == "":
        raise MalformedRecord(path, line, "missing id")
    if isinstance(rec_id, bool) or not isinstance(rec_id, (str, int)):
        raise MalformedRecord(path, line, f"id must be a string, got {type(rec_id).__name__}")
    if not isinstance(text, str):
        raise MalformedRecord(path, line, "missing or non-string text")
    if labeled:
        if label is None or label == "":
            raise MissingLabel(f"{path}:{line}: record {rec_id!r} has no label")
        label = _parse_label(label, path, line)
    else:
        label = None
    return Document(str(rec_id), text, label, domain)


def _read_jsonl(path, labeled, domain):
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise MalformedRecord(path, lineno, "record is not an object")
            docs.append(_make_doc(rec.get("id"), rec.get("text"), rec.get("label"), labeled, domain, path, lineno))
    return docs


def _read_csv(path, labeled, domain):
    docs = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return docs
        except csv.Error as exc:
            raise MalformedRecord(path, 1, str(exc)) from None
        header = [h.strip().lower() for h in header]
        if header[:2] != ["id", "text"] or len(header) > 3 or (len(header) == 3 and header[2] != "label"):
            raise MalformedRecord(path, 1, f"expected header id,text[,label], got {','.join(header)}")
        if labeled and "label" not in header:
            raise MissingLabel(f"{path}: labeled corpus has no label column")
        try:
            for row in reader:
                lineno = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise MalformedRecord(path, lineno, f"expected {len(header)} fields, got {len(row)}")
                label = row[2] if len(row) == 3 else None
                docs.append(_make_doc(row[0], row[1], label, labeled, domain, path, lineno))
        except csv.Error as exc:
            raise MalformedRecord(path, reader.line_num, str(exc)) from None
    return docs


def load_corpus(
    path: str | Path,
    format: str | None = None,
    labeled: bool = True,
    domain: str = "source",
    name: str | None = None,
) -> Corpus:
    """Read a JSONL or CSV corpus. The format defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "jsonl":
        docs = _read_jsonl(path, labeled, domain)
    elif fmt == "csv":
        docs = _read_csv(path, labeled, domain)
    else:
        raise ValueError(f"unsupported corpus format {fmt!r}")
    return Corpus(name or path.stem, docs, labeled)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSONL; documents may add fields through ``to_record``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


def split_indices(n: int, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded split of ``range(n)``.

    The first ``floor(fraction * n)`` entries of ``default_rng(seed).permutation(n)``
    form the sample; both returned index lists are sorted ascending.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    m = math.floor(fraction * n)
    perm = np.random.default_rng(seed).permutation(n)
    return sorted(perm[:m].tolist()), sorted(perm[m:].tolist())


def sample_unlabeled(corpus: Corpus, fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Split a labeled target corpus into an unlabeled sample and a labeled test set."""
    if len(corpus) == 0:
        raise ValueError("cannot sample from an empty corpus")
    sample_idx, test_idx = split_indices(len(corpus), fraction, seed)
    unlabeled = Corpus(f"{corpus.name}_unlabeled", [corpus[i].unlabeled() for i in sample_idx], False)
    test = corpus.subset(test_idx, name=f"{corpus.name}_test")
    return unlabeled, test


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(path: str | Path, records: Sequence[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
