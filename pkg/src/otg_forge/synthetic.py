"""Synthetic two-domain corpora for end-to-end checks.

Both domains write hate speech with the same carrier grammar but fill the
slots from disjoint made-up OTG vocabularies. Source non-hate reuses the
carriers with generic negative fillers, so carrier words alone do not give
the label away. The target-group terms also occur in neutral sentences of
both domains (a group is mentioned without being attacked), which is what
makes a source-only classifier read them as harmless. The weak pool mixes
two-slot carriers, one-slot complaints and slot-free negative sentences.

Run ``python -m otg_forge.synthetic OUTDIR`` to write the files plus a config.
"""

from __future__ import annotations

import argparse
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from otg_forge.corpus import write_jsonl

OPENERS = [
    "the problem with", "i can not stand", "honestly", "why are", "everyone knows",
    "i am so tired of", "look at these", "nobody likes", "get rid of", "typical",
    "of course", "can we talk about", "remember when", "so basically", "yet again",
]
LINKERS = [
    "they are so", "is that they are", "always acting", "are just", "are completely",
    "so incredibly", "being", "and they stay", "are basically", "seem",
]
CLOSERS = [
    "", "!", "lol", "every single day", "as usual", "tbh", "and everyone sees it", "smh", "again", "right now",
]
ONE_SLOT_OPENERS = [
    "i hate", "ugh", "so done with", "can not believe", "sick of", "why is there", "no more",
]
ONE_SLOT_CLOSERS = [
    "ruined my whole day", "so much", "again today", "is the worst", "at this hour", "for real", "all week",
]
PLAIN_NEGATIVE_A = [
    "worst day ever", "i feel awful", "nothing went right", "this week was terrible", "my head hurts",
    "so tired and sad", "everything is broken", "i want to cry", "life is hard",
]
PLAIN_NEGATIVE_B = ["", "today", "honestly", "ugh", "right now", "again", "as always", "no joke"]
GENERIC_NEGATIVE = [
    "sundays", "mondays", "traffic", "exams", "rain", "meetings", "printers", "alarms", "queues", "bills",
    "dull", "boring", "slow", "loud", "late", "messy", "noisy", "cold", "tedious", "sticky",
]
SOURCE_NEUTRAL = ["football", "coach", "match", "league", "stadium", "season", "referee", "goal"]
TARGET_NEUTRAL = ["garden", "recipe", "kitchen", "market", "bakery", "picnic", "soup", "orchard"]
NEUTRAL_OPENERS = [
    "we watched the", "i read about the", "there is a new", "my friend loves the", "they talked about the",
    "we walked past the", "did you see the", "what a lovely",
]
NEUTRAL_CLOSERS = ["", "yesterday", "this morning", "with my family", "after work", "last night", "today"]
MENTION_VERBS = ["visited the", "wrote about the", "opened a", "cleaned the", "organised the", "photographed the"]

SOURCE_SYLLABLES = ["zar", "vok", "kri", "dul", "mog", "tek", "bax", "nur", "gri", "pol"]
TARGET_SYLLABLES = ["quim", "bel", "sna", "feo", "lur", "wix", "hap", "yen", "jod", "cus"]


def make_terms(syllables: list[str], n: int, rng: np.random.Generator) -> list[str]:
    pool = sorted({a + b for a, b in itertools.product(syllables, repeat=2) if a != b})
    picks = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in sorted(picks)]


def _carrier(rng, a: str, b: str) -> str:
    parts = [
        OPENERS[rng.integers(len(OPENERS))],
        a,
        LINKERS[rng.integers(len(LINKERS))],
        b,
        CLOSERS[rng.integers(len(CLOSERS))],
    ]
    return " ".join(p for p in parts if p)


def _pick(rng, items):
    return items[rng.integers(len(items))]


def _neutral(rng, nouns):
    return " ".join(p for p in (_pick(rng, NEUTRAL_OPENERS), _pick(rng, nouns), _pick(rng, NEUTRAL_CLOSERS)) if p)


def _mention(rng, term, nouns):
    return " ".join(p for p in (term, _pick(rng, MENTION_VERBS), _pick(rng, nouns), _pick(rng, NEUTRAL_CLOSERS)) if p)


def _nonhate(rng, r, nouns, mention_terms, carrier_rate, mention_rate):
    if r < carrier_rate:
        return _carrier(rng, _pick(rng, GENERIC_NEGATIVE), _pick(rng, GENERIC_NEGATIVE))
    if r < carrier_rate + mention_rate:
        return _mention(rng, _pick(rng, mention_terms), nouns)
    return _neutral(rng, nouns)


@dataclass
class SyntheticPaths:
    source: Path
    target: Path
    weak: Path
    lexicon: Path
    source_terms: list[str]
    target_terms: list[str]


def make_domains(
    out_dir: str | Path,
    seed: int = 0,
    n_source: int = 1000,
    n_target: int = 600,
    n_weak: int = 2000,
    n_terms: int = 40,
    source_hate_rate: float = 0.5,
    target_hate_rate: float = 0.4,
) -> SyntheticPaths:
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    src_terms = make_terms(SOURCE_SYLLABLES, n_terms, rng)
    tgt_terms = make_terms(TARGET_SYLLABLES, n_terms, rng)

    source = []
    for i in range(n_source):
        if rng.random() < source_hate_rate:
            text, label = _carrier(rng, _pick(rng, src_terms), _pick(rng, src_terms)), 1
        else:
            text, label = _nonhate(rng, rng.random(), SOURCE_NEUTRAL, tgt_terms, 0.8, 0.2), 0
        source.append({"id": f"s{i}", "text": text, "label": label})

    target = []
    for i in range(n_target):
        if rng.random() < target_hate_rate:
            text, label = _carrier(rng, _pick(rng, tgt_terms), _pick(rng, tgt_terms)), 1
        else:
            text, label = _nonhate(rng, rng.random(), TARGET_NEUTRAL, tgt_terms, 0.2, 0.3), 0
        target.append({"id": f"t{i}", "text": text, "label": label})

    weak = []
    for i in range(n_weak):
        r = rng.random()
        if r < 0.4:
            text = _carrier(rng, _pick(rng, GENERIC_NEGATIVE), _pick(rng, GENERIC_NEGATIVE))
        elif r < 0.7:
            text = f"{_pick(rng, ONE_SLOT_OPENERS)} {_pick(rng, GENERIC_NEGATIVE)} {_pick(rng, ONE_SLOT_CLOSERS)}"
        else:
            text = " ".join(p for p in (_pick(rng, PLAIN_NEGATIVE_A), _pick(rng, PLAIN_NEGATIVE_B)) if p)
        weak.append({"id": f"w{i}", "text": text})

    paths = SyntheticPaths(out / "source.jsonl", out / "target.jsonl", out / "weak.jsonl", out / "lexicon.txt", src_terms, tgt_terms)
    write_jsonl(paths.source, source)
    write_jsonl(paths.target, target)
    write_jsonl(paths.weak, weak)
    paths.lexicon.write_text("# synthetic source-domain OTG terms\n" + "".join(f"{t}\n" for t in src_terms), encoding="utf-8")
    return paths


def write_config(paths: SyntheticPaths, path: str | Path, k: int = 200, seeds: tuple[int, ...] = tuple(range(10))) -> Path:
    text = f"""# synthetic two-domain experiment
source_corpus = "{paths.source.resolve().as_posix()}"
target_corpus = "{paths.target.resolve().as_posix()}"
weak_corpus = "{paths.weak.resolve().as_posix()}"
lexicon = "{paths.lexicon.resolve().as_posix()}"
k_hate = {k}
k_nonhate = {k}
seeds = [{", ".join(str(s) for s in seeds)}]
variants = ["WordBiLSTM"]

# Only 40 target-side terms exist; stronger word dropout keeps the tagger
# from memorising the source terms and pushes it onto context.
[tagger]
word_dropout = 0.25
"""
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = make_domains(args.out_dir, seed=args.seed)
    cfg = write_config(paths, Path(args.out_dir) / "config.toml")
    print(f"wrote synthetic corpora and {cfg}")


if __name__ == "__main__":
    main()
