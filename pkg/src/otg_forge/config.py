"""Pipeline configuration: TOML file -> PipelineConfig, plus a stable config hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from otg_forge.classifiers import VARIANTS, ClassifierHyperparams
from otg_forge.errors import ConfigError
from otg_forge.tagger import TaggerHyperparams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DESK_SCALE_K = 200
DESK_SCALE_MAX_WEAK = 5000
PATH_KEYS = ("source_corpus", "target_corpus", "weak_corpus", "lexicon", "embeddings")


@dataclass(frozen=True)
class PipelineConfig:
    source_corpus: str = ""
    target_corpus: str = ""
    weak_corpus: str = ""
    lexicon: str = ""
    source_name: str = "source"
    target_name: str = "target"
    target_sample_fraction: float = 0.1
    k_hate: int = 10_000
    k_nonhate: int = 10_000
    hate_min_slots: int = 2
    nonhate_max_slots: int = 1
    max_weak_docs: int | None = None
    seed: int = 0
    seeds: tuple[int, ...] = tuple(range(10))
    variants: tuple[str, ...] = ("CharCNN", "WordBiLSTM")
    threshold: float = 0.5
    embeddings: str | None = None
    tagger: TaggerHyperparams = field(default_factory=TaggerHyperparams)
    classifiers: dict[str, ClassifierHyperparams] = field(
        default_factory=lambda: {v: ClassifierHyperparams(variant=v) for v in VARIANTS}
    )

    def __post_init__(self):
        if not 0.0 <= self.target_sample_fraction <= 1.0:
            raise ConfigError("target_sample_fraction must lie in [0, 1]")
        if self.k_hate < 0 or self.k_nonhate < 0:
            raise ConfigError("k values must be >= 0")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.nonhate_max_slots < 0 or self.hate_min_slots < 0:
            raise ConfigError("slot bounds must be >= 0")
        if self.max_weak_docs is not None and self.max_weak_docs < 0:
            raise ConfigError("max_weak_docs must be >= 0")
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown or not self.variants:
            raise ConfigError(f"variants must be a non-empty subset of {VARIANTS}, got {list(self.variants)}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")

    def classifier(self, variant: str) -> ClassifierHyperparams:
        return self.classifiers.get(variant) or ClassifierHyperparams(variant=variant)

    def desk_scale(self) -> "PipelineConfig":
        max_weak = DESK_SCALE_MAX_WEAK if self.max_weak_docs is None else min(self.max_weak_docs, DESK_SCALE_MAX_WEAK)
        return dataclasses.replace(
            self,
            k_hate=min(self.k_hate, DESK_SCALE_K),
            k_nonhate=min(self.k_nonhate, DESK_SCALE_K),
            max_weak_docs=max_weak,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        d["variants"] = list(self.variants)
        return json.loads(json.dumps(d))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"3"`` -> (3,), ``"0..9"`` -> (0, ..., 9) inclusive, ``"1,4,5"`` -> (1, 4, 5)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ConfigError(f"empty seed range {text!r}")
            return tuple(range(lo_i, hi_i + 1))
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None


def _hyper(cls, raw: Any, where: str, **fixed):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**{**raw, **fixed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def config_from_dict(raw: dict, base_dir: str | Path | None = None) -> PipelineConfig:
    raw = dict(raw)
    kwargs: dict[str, Any] = {}
    if "tagger" in raw:
        kwargs["tagger"] = _hyper(TaggerHyperparams, raw.pop("tagger"), "tagger")
    if "classifier" in raw:
        section = raw.pop("classifier")
        if not isinstance(section, dict):
            raise ConfigError("[classifier] must be a table")
        shared = {k: v for k, v in section.items() if not isinstance(v, dict)}
        per_variant = {k: v for k, v in section.items() if isinstance(v, dict)}
        bad = set(per_variant) - set(VARIANTS)
        if bad:
            raise ConfigError(f"unknown classifier sections {sorted(bad)}")
        kwargs["classifiers"] = {
            v: _hyper(ClassifierHyperparams, {**shared, **per_variant.get(v, {})}, f"classifier.{v}", variant=v)
            for v in VARIANTS
        }
    names = {f.name for f in dataclasses.fields(PipelineConfig)} - {"tagger", "classifiers"}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in PATH_KEYS:
        if raw.get(key) and base_dir is not None:
            p = Path(raw[key])
            raw[key] = str(p if p.is_absolute() else (Path(base_dir) / p))
    if "seeds" in raw:
        seeds = raw["seeds"]
        raw["seeds"] = parse_seeds(seeds) if isinstance(seeds, str) else tuple(int(s) for s in seeds)
    if "variants" in raw:
        raw["variants"] = tuple(raw["variants"])
    try:
        return PipelineConfig(**raw, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)
