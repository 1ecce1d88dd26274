"""Stage-by-stage orchestration with persisted intermediates and a checksum manifest.

Every stage reads its inputs from files written by earlier stages, so any stage
can be re-run on its own against an existing output directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from otg_forge import classifiers as clf
from otg_forge.config import PipelineConfig
from otg_forge.corpus import Corpus, load_corpus, read_jsonl, sample_unlabeled, save_corpus, split_indices, write_jsonl
from otg_forge.errors import ConfigError, OTGError, StageError
from otg_forge.generator import generate, merge
from otg_forge.lexicon import Lexicon, TaggedSentence, consolidate, load_and_consolidate, weak_label
from otg_forge.metrics import EvalReport, aggregate, classification_report, format_table, pr_auc
from otg_forge.ranker import fit_tfidf, score_pool, select_top, sort_scored
from otg_forge.tagger import TaggerModel, tag_corpus, train_tagger
from otg_forge.templating import Template, build_weak_pool, extract_target_lexicon, templatize
from otg_forge.training import configure_threads

log = logging.getLogger(__name__)

BASELINE = "baseline"
AUGMENTED = "augmented"

# Artifact layout, relative to the output directory.
SOURCE = "01_corpus/source.jsonl"
TARGET_UNLABELED = "01_corpus/target_unlabeled.jsonl"
TARGET_TEST = "01_corpus/target_test.jsonl"
WEAK = "01_corpus/weak.jsonl"
SOURCE_TAGGED = "02_weak_label/source_tagged.jsonl"
TAGGER = "03_tagger/tagger.otgf"
TARGET_TAGGED = "04_tag/target_tagged.jsonl"
WEAK_TAGGED = "04_tag/weak_tagged.jsonl"
SOURCE_TEMPLATES = "05_templates/source_templates.jsonl"
TARGET_TEMPLATES = "05_templates/target_templates.jsonl"
WEAK_POOL = "05_templates/weak_pool.jsonl"
TARGET_LEXICON = "05_templates/target_lexicon.txt"
SCORED_POOL = "06_rank/scored_pool.jsonl"
HATE_TEMPLATES = "06_rank/hate_templates.jsonl"
NONHATE_TEMPLATES = "06_rank/nonhate_templates.jsonl"
AUGMENTED_CORPUS = "07_generate/augmented.jsonl"
TRAIN_AUGMENTED = "07_generate/train_augmented.jsonl"
MANIFEST = "manifest.json"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_tagged(path: Path) -> list[TaggedSentence]:
    return [TaggedSentence.from_record(r) for r in read_jsonl(path)]


def _read_templates(path: Path) -> list[Template]:
    return [Template.from_record(r) for r in read_jsonl(path)]


def _checkpoint_name(condition: str, variant: str, seed: int) -> str:
    return f"08_train/{condition}/{variant}/seed{seed}.otgf"


def _scores_name(condition: str, variant: str, seed: int) -> str:
    return f"09_evaluate/{condition}/{variant}/seed{seed}_scores.csv"


@dataclass
class Stage:
    name: str
    run: Callable[["Pipeline"], list[str]]
    inputs: Callable[["Pipeline"], list[str]]


@dataclass
class PipelineResult:
    reports: dict[tuple[str, str], EvalReport] = field(default_factory=dict)
    per_seed: dict[tuple[str, str], list[EvalReport]] = field(default_factory=dict)
    table: str = ""


class Pipeline:
    def __init__(self, config: PipelineConfig, out_dir: str | Path, conditions: Sequence[str] = (BASELINE, AUGMENTED)):
        self.config = config
        self.out = Path(out_dir)
        self.conditions = tuple(conditions)

    def path(self, rel: str) -> Path:
        return self.out / rel

    # -- stages ---------------------------------------------------------------

    def stage_tokenize(self) -> list[str]:
        cfg = self.config
        source = load_corpus(cfg.source_corpus, labeled=True, domain="source", name=cfg.source_name)
        target = load_corpus(cfg.target_corpus, labeled=True, domain="target", name=cfg.target_name)
        weak = load_corpus(cfg.weak_corpus, labeled=False, domain="weak", name="weak")
        if cfg.max_weak_docs is not None and len(weak) > cfg.max_weak_docs:
            weak = weak.subset(range(cfg.max_weak_docs))
        unlabeled, test = sample_unlabeled(target, cfg.target_sample_fraction, cfg.seed)
        save_corpus(source, self.path(SOURCE))
        save_corpus(unlabeled, self.path(TARGET_UNLABELED))
        save_corpus(test, self.path(TARGET_TEST))
        save_corpus(weak, self.path(WEAK))
        return [SOURCE, TARGET_UNLABELED, TARGET_TEST, WEAK]

    def stage_weak_label(self) -> list[str]:
        source = load_corpus(self.path(SOURCE), labeled=True)
        lexicon = load_and_consolidate(self.config.lexicon)
        tagged = weak_label(source.hate_only(), lexicon)
        write_jsonl(self.path(SOURCE_TAGGED), [s.to_record() for s in tagged])
        self.stats["weak_label"] = {
            "sentences": len(tagged),
            "without_otg": sum(1 for s in tagged if "OTG" not in s.tags),
            "lexicon_unigrams": len(lexicon.unigrams),
            "lexicon_phrases": len(lexicon.phrases),
        }
        return [SOURCE_TAGGED]

    def stage_train_tagger(self) -> list[str]:
        data = _read_tagged(self.path(SOURCE_TAGGED))
        model = train_tagger(data, self.config.tagger, self.config.seed, self.config.embeddings)
        model.save(self.path(TAGGER))
        return [TAGGER]

    def stage_tag(self) -> list[str]:
        model = TaggerModel.load(self.path(TAGGER))
        for src, dst in ((TARGET_UNLABELED, TARGET_TAGGED), (WEAK, WEAK_TAGGED)):
            corpus = load_corpus(self.path(src), labeled=False)
            write_jsonl(self.path(dst), [s.to_record() for s in tag_corpus(model, corpus)])
        return [TARGET_TAGGED, WEAK_TAGGED]

    def stage_templatize(self) -> list[str]:
        # Source carriers are not used downstream; they are written for inspection.
        source = [templatize(s) for s in _read_tagged(self.path(SOURCE_TAGGED))]
        target = [templatize(s) for s in _read_tagged(self.path(TARGET_TAGGED))]
        pool = build_weak_pool(_read_tagged(self.path(WEAK_TAGGED)))
        write_jsonl(self.path(SOURCE_TEMPLATES), [t.to_record() for t in source])
        write_jsonl(self.path(TARGET_TEMPLATES), [t.to_record() for t in target])
        write_jsonl(self.path(WEAK_POOL), [t.to_record() for t in pool])
        self.stats["templatize"] = {"target_templates": len(target), "weak_pool": len(pool)}
        return [SOURCE_TEMPLATES, TARGET_TEMPLATES, WEAK_POOL]

    def stage_extract_lexicon(self) -> list[str]:
        lexicon = extract_target_lexicon(_read_tagged(self.path(TARGET_TAGGED)))
        lexicon.save(self.path(TARGET_LEXICON))
        source_lex = load_and_consolidate(self.config.lexicon)
        self.stats["extract_lexicon"] = {
            "target_unigrams": len(lexicon),
            "overlap_with_source": len(lexicon.unigrams & source_lex.unigrams),
        }
        return [TARGET_LEXICON]

    def stage_rank(self) -> list[str]:
        cfg = self.config
        target = _read_templates(self.path(TARGET_TEMPLATES))
        pool = _read_templates(self.path(WEAK_POOL))
        model = fit_tfidf(pool + target)
        scored = score_pool(pool, target, model)
        write_jsonl(self.path(SCORED_POOL), [s.to_record() for s in sort_scored(scored)])
        hate = select_top(scored, cfg.k_hate, min_slots=cfg.hate_min_slots)
        nonhate = select_top(scored, cfg.k_nonhate, min_slots=0, max_slots=cfg.nonhate_max_slots)
        write_jsonl(self.path(HATE_TEMPLATES), [t.to_record() for t in hate])
        write_jsonl(self.path(NONHATE_TEMPLATES), [t.to_record() for t in nonhate])
        self.stats["rank"] = {"vocabulary": len(model.vocabulary), "hate": len(hate), "nonhate": len(nonhate)}
        return [SCORED_POOL, HATE_TEMPLATES, NONHATE_TEMPLATES]

    def stage_generate(self) -> list[str]:
        lexicon = _read_lexicon(self.path(TARGET_LEXICON))
        augmented = generate(
            _read_templates(self.path(HATE_TEMPLATES)),
            _read_templates(self.path(NONHATE_TEMPLATES)),
            lexicon,
            self.config.seed,
        )
        save_corpus(augmented, self.path(AUGMENTED_CORPUS))
        source = load_corpus(self.path(SOURCE), labeled=True)
        save_corpus(merge(source, augmented), self.path(TRAIN_AUGMENTED))
        return [AUGMENTED_CORPUS, TRAIN_AUGMENTED]

    def _training_corpus(self, condition: str) -> str:
        return SOURCE if condition == BASELINE else TRAIN_AUGMENTED

    def stage_train(self) -> list[str]:
        outputs = []
        for condition in self.conditions:
            corpus = load_corpus(self.path(self._training_corpus(condition)), labeled=True)
            for variant in self.config.variants:
                for seed in self.config.seeds:
                    model = clf.train_classifier(corpus, self.config.classifier(variant), seed, self.config.embeddings)
                    name = _checkpoint_name(condition, variant, seed)
                    model.save(self.path(name))
                    outputs.append(name)
        return outputs

    def stage_evaluate(self) -> list[str]:
        test = load_corpus(self.path(TARGET_TEST), labeled=True)
        result = PipelineResult()
        outputs = []
        for condition in self.conditions:
            for variant in self.config.variants:
                reps = []
                for seed in self.config.seeds:
                    model = clf.ClassifierModel.load(self.path(_checkpoint_name(condition, variant, seed)))
                    scores = clf.predict(model, test)
                    name = _scores_name(condition, variant, seed)
                    clf.write_scores(scores, self.path(name))
                    outputs.append(name)
                    reps.append(classification_report(scores, test.labels, self.config.threshold, seed=seed))
                agg = aggregate(reps)
                result.per_seed[(variant, condition)] = reps
                result.reports[(variant, condition)] = agg
                rel = f"09_evaluate/{condition}/{variant}/report.json"
                _write_json(self.path(rel), {"aggregate": agg.to_dict(), "per_seed": [r.to_dict() for r in reps]})
                outputs.append(rel)
        result.table = self.table(result.reports)
        self.path("report.txt").write_text(result.table, encoding="utf-8")
        _write_json(
            self.path("report.json"),
            [
                {"model": v, "training_data": self.row_label(c), "condition": c, **rep.to_dict()}
                for (v, c), rep in result.reports.items()
            ],
        )
        self.result = result
        return outputs + ["report.txt", "report.json"]

    # -- helpers --------------------------------------------------------------

    def row_label(self, condition: str) -> str:
        cfg = self.config
        return cfg.source_name if condition == BASELINE else f"{cfg.source_name} + {cfg.target_name}_weak"

    def table(self, reports: dict[tuple[str, str], EvalReport]) -> str:
        rows = []
        for variant in self.config.variants:
            for condition in self.conditions:
                if (variant, condition) in reports:
                    rows.append((clf.DISPLAY_NAMES[variant], self.row_label(condition), reports[(variant, condition)]))
        return format_table(rows)

    def stages(self) -> list[Stage]:
        c = self.conditions
        lexicon_file = [self.config.lexicon]
        inputs_cfg = [self.config.source_corpus, self.config.target_corpus, self.config.weak_corpus]
        train_inputs = [SOURCE] + ([TRAIN_AUGMENTED] if AUGMENTED in c else [])
        eval_inputs = [TARGET_TEST] + [
            _checkpoint_name(cond, v, s) for cond in c for v in self.config.variants for s in self.config.seeds
        ]
        all_stages = [
            Stage("tokenize", Pipeline.stage_tokenize, lambda p: inputs_cfg),
            Stage("weak-label", Pipeline.stage_weak_label, lambda p: [SOURCE] + lexicon_file),
            Stage("train-tagger", Pipeline.stage_train_tagger, lambda p: [SOURCE_TAGGED]),
            Stage("tag", Pipeline.stage_tag, lambda p: [TAGGER, TARGET_UNLABELED, WEAK]),
            Stage("templatize", Pipeline.stage_templatize, lambda p: [SOURCE_TAGGED, TARGET_TAGGED, WEAK_TAGGED]),
            Stage("extract-lexicon", Pipeline.stage_extract_lexicon, lambda p: [TARGET_TAGGED] + lexicon_file),
            Stage("rank", Pipeline.stage_rank, lambda p: [TARGET_TEMPLATES, WEAK_POOL]),
            Stage("generate", Pipeline.stage_generate, lambda p: [HATE_TEMPLATES, NONHATE_TEMPLATES, TARGET_LEXICON, SOURCE]),
            Stage("train", Pipeline.stage_train, lambda p: train_inputs),
            Stage("evaluate", Pipeline.stage_evaluate, lambda p: eval_inputs),
        ]
        if AUGMENTED not in c:
            keep = {"tokenize", "train", "evaluate"}
            all_stages = [s for s in all_stages if s.name in keep]
        return all_stages

    def _load_manifest(self) -> dict:
        path = self.path(MANIFEST)
        if path.exists():
            manifest = json.loads(path.read_text(encoding="utf-8"))
            if manifest.get("config_hash") == self.config.config_hash():
                return manifest
        return {"config_hash": self.config.config_hash(), "config": self.config.to_dict(), "stages": {}}

    def run_stage(self, stage: Stage, manifest: dict) -> None:
        self.stats: dict = {}
        log.info("stage %s", stage.name)
        try:
            outputs = stage.run(self)
        except (OTGError, ValueError, OSError, KeyError) as exc:
            raise StageError(stage.name, exc) from exc
        manifest["stages"][stage.name] = {
            "inputs": stage.inputs(self),
            "outputs": {rel: sha256_file(self.path(rel)) for rel in outputs},
            "stats": self.stats.get(stage.name.replace("-", "_"), {}),
        }
        _write_json(self.path(MANIFEST), manifest)

    def run(self, only: Sequence[str] | None = None) -> dict:
        configure_threads()
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = self._load_manifest()
        stages = self.stages()
        if only:
            known = {s.name for s in stages}
            missing = set(only) - known
            if missing:
                raise ConfigError(f"unknown stage(s) {sorted(missing)}; choose from {sorted(known)}")
            stages = [s for s in stages if s.name in only]
        for stage in stages:
            self.run_stage(stage, manifest)
        return manifest


def _read_lexicon(path: Path) -> Lexicon:
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return consolidate([line for line in lines if line and not line.startswith("#")], source_name=path.name)


def run_pipeline(config: PipelineConfig, out_dir: str | Path) -> PipelineResult:
    """Full augmentation pipeline plus source-only baseline, evaluated on the held-out target test set."""
    pipe = Pipeline(config, out_dir, (BASELINE, AUGMENTED))
    pipe.run()
    return pipe.result


def run_baseline(config: PipelineConfig, out_dir: str | Path) -> PipelineResult:
    """Source-only training, evaluated on the same target test split as run_pipeline."""
    pipe = Pipeline(config, out_dir, (BASELINE,))
    pipe.run()
    return pipe.result


@dataclass
class CrossEvalResult:
    train_names: list[str]
    test_names: list[str]
    matrices: dict[str, np.ndarray]

    def format(self) -> str:
        blocks = []
        for variant, mat in self.matrices.items():
            width = max(len(n) for n in self.train_names + self.test_names + ["train\\test"])
            head = "train\\test".ljust(width) + " | " + " | ".join(n.rjust(6) for n in self.test_names)
            lines = [f"{clf.DISPLAY_NAMES[variant]} PRAUC", head, "-" * len(head)]
            for name, row in zip(self.train_names, mat):
                lines.append(name.ljust(width) + " | " + " | ".join(f"{v:.3f}".rjust(max(6, len(n))) for v, n in zip(row, self.test_names)))
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"

    def to_dict(self) -> dict:
        return {
            "train": self.train_names,
            "test": self.test_names,
            "prauc": {v: m.tolist() for v, m in self.matrices.items()},
        }


def cross_eval(
    train_corpora: Sequence[Corpus], test_corpora: Sequence[Corpus], config: PipelineConfig, split_fraction: float = 0.9
) -> CrossEvalResult:
    """PRAUC for every (train, test) pair; each corpus is split 90/10 once, so a corpus
    used on both axes is always scored on its held-out part."""
    configure_threads()

    def split(c: Corpus) -> tuple[Corpus, Corpus]:
        train_idx, test_idx = split_indices(len(c), split_fraction, config.seed)
        return c.subset(train_idx, name=f"{c.name}_train"), c.subset(test_idx, name=f"{c.name}_test")

    train_parts = [split(c)[0] for c in train_corpora]
    test_parts = [split(c)[1] for c in test_corpora]
    matrices = {}
    for variant in config.variants:
        mat = np.zeros((len(train_parts), len(test_parts)))
        for i, tr in enumerate(train_parts):
            for seed in config.seeds:
                model = clf.train_classifier(tr, config.classifier(variant), seed, config.embeddings)
                for j, te in enumerate(test_parts):
                    mat[i, j] += pr_auc(clf.predict(model, te), te.labels)
        matrices[variant] = mat / len(config.seeds)
    return CrossEvalResult([c.name for c in train_corpora], [c.name for c in test_corpora], matrices)
