"""otg-forge command line: run the domain adaptation pipeline stage by stage or end to end.

Each stage subcommand runs one pipeline stage against the output directory,
reading what earlier stages wrote there. Exit codes: 0 ok, 2 bad config or
arguments, 3 a stage failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from otg_forge.config import PipelineConfig, load_config, parse_seeds
from otg_forge.corpus import load_corpus
from otg_forge.errors import ConfigError, OTGError, StageError
from otg_forge.pipeline import AUGMENTED, BASELINE, Pipeline, cross_eval

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
STAGES = (
    "tokenize", "weak-label", "train-tagger", "tag", "templatize",
    "extract-lexicon", "rank", "generate", "train", "evaluate",
)

log = logging.getLogger("otg_forge")


def _common_flags() -> argparse.ArgumentParser:
    # Shared by the top-level parser and every subcommand, so flags may come
    # before or after the subcommand name.
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="TOML config file")
    p.add_argument("--stage", metavar="NAME", choices=STAGES, default=argparse.SUPPRESS, help="run a single stage")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="pipeline seed (sampling, tagger, imputation)")
    p.add_argument("--seeds", metavar="A..B", default=argparse.SUPPRESS, help="classifier seeds, e.g. 0..9 or 1,3")
    p.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--desk-scale", action="store_true", default=argparse.SUPPRESS, help="k=200, weak corpus <= 5000")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="otg-forge", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run-all", parents=[common], help="every stage, baseline and augmented conditions")
    sub.add_parser("run-baseline", parents=[common], help="source-only training and evaluation")
    ce = sub.add_parser("cross-eval", parents=[common], help="PRAUC matrix across labeled corpora")
    ce.add_argument("--corpus", action="append", required=True, metavar="PATH", help="labeled corpus; repeat")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "desk_scale", False):
        cfg = cfg.desk_scale()
    overrides = {}
    if hasattr(args, "seed"):
        overrides["seed"] = args.seed
    if hasattr(args, "seeds"):
        overrides["seeds"] = parse_seeds(args.seeds)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = Path(getattr(args, "out", "otg_out"))
    command = args.command
    stage = getattr(args, "stage", None)
    if command is None and stage is None:
        raise ConfigError("give a subcommand or --stage NAME")
    if command in STAGES and stage is not None and stage != command:
        raise ConfigError(f"--stage {stage} conflicts with subcommand {command}")

    if command == "cross-eval":
        corpora = [load_corpus(p, labeled=True, name=Path(p).stem) for p in args.corpus]
        result = cross_eval(corpora, corpora, cfg)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cross_eval.txt").write_text(result.format(), encoding="utf-8")
        (out / "cross_eval.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(result.format(), end="")
        return EXIT_OK

    if not getattr(args, "config", None):
        raise ConfigError("--config is required")
    conditions = (BASELINE,) if command == "run-baseline" else (BASELINE, AUGMENTED)
    pipe = Pipeline(cfg, out, conditions)
    only = [command] if command in STAGES else ([stage] if stage else None)
    pipe.run(only=only)
    if getattr(pipe, "result", None) is not None:
        print(pipe.result.table, end="")
    else:
        print(f"{', '.join(only or ['all stages'])} done -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OTGError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
