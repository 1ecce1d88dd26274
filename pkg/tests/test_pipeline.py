import json
import shutil

import numpy as np
import pytest

import transcript
from otg_forge import cli, synthetic
from otg_forge.classifiers import VARIANTS, WORD_BILSTM, ClassifierHyperparams
from otg_forge.config import PipelineConfig, load_config
from otg_forge.corpus import Corpus, Document, Label, load_corpus
from otg_forge.errors import StageError
from otg_forge.pipeline import (
    AUGMENTED, BASELINE, MANIFEST, TARGET_TEST, TRAIN_AUGMENTED, Pipeline, cross_eval, run_baseline, run_pipeline,
)
from otg_forge.tagger import TaggerHyperparams


def tiny_config(paths, **overrides) -> PipelineConfig:
    fields = dict(
        source_corpus=str(paths.source),
        target_corpus=str(paths.target),
        weak_corpus=str(paths.weak),
        lexicon=str(paths.lexicon),
        k_hate=40,
        k_nonhate=40,
        seeds=(0, 1),
        tagger=TaggerHyperparams(max_epochs=25),
        classifiers={v: ClassifierHyperparams(variant=v, max_epochs=1) for v in VARIANTS},
    )
    fields.update(overrides)
    return PipelineConfig(**fields)


@pytest.fixture(scope="module")
def domains(tmp_path_factory):
    root = tmp_path_factory.mktemp("domains")
    return synthetic.make_domains(root, seed=0, n_source=300, n_target=300, n_weak=300)


@pytest.fixture(scope="module")
def tiny_run(domains, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    result = run_pipeline(tiny_config(domains), out)
    return out, result


def test_transcript_golden(tmp_path):
    art = transcript.run(tmp_path)
    assert art["source_tags"] == ["O", "O", "O", "OTG", "OTG", "O", "O", "O", "O", "O", "OTG"]
    assert art["source_templates"] == ["the problem with REP 's is that they are REP"]
    assert art["target_lexicon"] == {"bananas", "yucky"}
    assert art["target_templates"] == ["REP are very REP !"]
    assert art["weak_pool"] == ["i hate REP -- they are so REP"]
    assert art["augmented"] == [("i hate bananas -- they are so yucky", 1)]


def test_run_produces_table_and_reports(tiny_run):
    out, result = tiny_run
    assert set(result.reports) == {(v, c) for v in ("CharCNN", "WordBiLSTM") for c in (BASELINE, AUGMENTED)}
    assert all(len(reps) == 2 for reps in result.per_seed.values())
    lines = result.table.splitlines()
    assert lines[0].split("|")[2].strip() == "PRAUC"
    # Baseline row then augmented row, per model.
    assert [l.split("|")[0].strip() for l in lines[2:]] == ["Char-CNN", "Char-CNN", "Word-BiLSTM", "Word-BiLSTM"]
    assert "source + target_weak" in lines[3]
    report = json.loads((out / "report.json").read_text())
    assert {r["condition"] for r in report} == {BASELINE, AUGMENTED}


def test_test_set_never_feeds_building_stages(tiny_run):
    out, _ = tiny_run
    manifest = json.loads((out / MANIFEST).read_text())
    for name in ("weak-label", "train-tagger", "tag", "templatize", "extract-lexicon", "rank", "generate", "train"):
        assert TARGET_TEST not in manifest["stages"][name]["inputs"]
    assert TARGET_TEST in manifest["stages"]["evaluate"]["inputs"]
    test_ids = set(load_corpus(out / TARGET_TEST).ids)
    assert not test_ids & set(load_corpus(out / TRAIN_AUGMENTED).ids)


def test_rerun_gives_identical_manifest(domains, tiny_run, tmp_path):
    out, _ = tiny_run
    run_pipeline(tiny_config(domains), tmp_path / "again")
    first = json.loads((out / MANIFEST).read_text())
    second = json.loads((tmp_path / "again" / MANIFEST).read_text())
    assert first == second


def test_stage_isolation(domains, tiny_run, tmp_path):
    out, _ = tiny_run
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    manifest = json.loads((out / MANIFEST).read_text())
    pipe = Pipeline(tiny_config(domains), copy)
    for stage in ("templatize", "rank", "generate", "evaluate"):
        outputs = manifest["stages"][stage]["outputs"]
        for rel in outputs:
            (copy / rel).unlink()
        pipe.run(only=[stage])
        again = json.loads((copy / MANIFEST).read_text())["stages"][stage]["outputs"]
        assert again == outputs


def test_baseline_shares_test_split(domains, tiny_run, tmp_path):
    out, result = tiny_run
    base = run_baseline(tiny_config(domains), tmp_path / "base")
    assert (tmp_path / "base" / TARGET_TEST).read_bytes() == (out / TARGET_TEST).read_bytes()
    assert set(base.reports) == {(v, BASELINE) for v in ("CharCNN", "WordBiLSTM")}
    for key, rep in base.reports.items():
        assert rep == result.reports[key]
    assert not (tmp_path / "base" / "07_generate").exists()


def test_stage_errors_name_the_stage(domains, tmp_path):
    cfg = tiny_config(domains, lexicon=str(tmp_path / "missing.txt"))
    with pytest.raises(StageError) as err:
        Pipeline(cfg, tmp_path / "o").run()
    assert err.value.stage == "weak-label"


def _disjoint_corpus(name, words_hate, words_ok, n, seed):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        label = i % 2
        pool = words_hate if label else words_ok
        docs.append(Document(f"{name}{i}", " ".join(pool[j] for j in rng.integers(0, len(pool), 5)), Label(label)))
    return Corpus(name, docs, True)


def test_cross_eval_matrix():
    a = _disjoint_corpus("a", ["aa", "ab", "ac"], ["ad", "ae", "af"], 300, 0)
    b = _disjoint_corpus("b", ["ba", "bb", "bc"], ["bd", "be", "bf"], 300, 1)
    cfg = PipelineConfig(seeds=(0,), variants=(WORD_BILSTM,))
    res = cross_eval([a, b], [a, b], cfg)
    m = res.matrices[WORD_BILSTM]
    assert m.shape == (2, 2)
    assert min(m[0, 0], m[1, 1]) > 0.95
    assert max(m[0, 1], m[1, 0]) < 0.8
    lines = res.format().splitlines()
    assert lines[1].split("|")[0].strip() == "train\\test"
    assert lines[3].startswith("a") and lines[4].startswith("b")
    assert res.to_dict()["train"] == ["a", "b"]


def test_cross_eval_diagonal_uses_held_out_part():
    # A classifier that memorised the training part would score 1.0 on it; the
    # held-out part here is pure noise, so the diagonal must sit near chance.
    rng = np.random.default_rng(3)
    docs = [Document(f"n{i}", " ".join(f"w{j}" for j in rng.integers(0, 500, 4)), Label(int(rng.integers(2))))
            for i in range(200)]
    noise = Corpus("noise", docs, True)
    m = cross_eval([noise], [noise], PipelineConfig(seeds=(0,), variants=(WORD_BILSTM,))).matrices[WORD_BILSTM]
    assert m[0, 0] < 0.9


def test_cli_stage_subcommands_and_exit_codes(domains, tmp_path, capsys):
    cfg_path = synthetic.write_config(domains, tmp_path / "cfg.toml", k=40, seeds=(0,))
    out = str(tmp_path / "out")
    assert cli.main(["--config", str(cfg_path), "--out", out, "tokenize"]) == 0
    assert (tmp_path / "out" / "01_corpus" / "source.jsonl").exists()
    assert cli.main(["weak-label", "--config", str(cfg_path), "--out", out]) == 0
    assert cli.main(["--config", str(cfg_path), "--out", out, "--stage", "rank"]) == 3
    assert cli.main(["--config", str(tmp_path / "none.toml"), "--out", out, "tokenize"]) == 2
    assert cli.main(["--bogus"]) == 2
    assert cli.main([]) == 2
    assert cli.main(["--seeds", "9..1", "--config", str(cfg_path), "tokenize"]) == 2
    assert "stage error" in capsys.readouterr().err


def test_cli_seed_and_desk_scale_flags(domains, tmp_path):
    cfg_path = synthetic.write_config(domains, tmp_path / "cfg.toml")
    args = cli.build_parser().parse_args(["--config", str(cfg_path), "--seed", "4", "--seeds", "2..3", "--desk-scale", "run-all"])
    cfg = cli.resolve_config(args)
    assert (cfg.seed, cfg.seeds, cfg.k_hate, cfg.max_weak_docs) == (4, (2, 3), 200, 5000)
    assert load_config(cfg_path).seeds == tuple(range(10))


def test_cli_cross_eval(tmp_path, capsys):
    paths = []
    for name, seed in (("a", 0), ("b", 1)):
        c = _disjoint_corpus(name, [f"{name}h{i}" for i in range(3)], [f"{name}o{i}" for i in range(3)], 100, seed)
        path = tmp_path / f"{name}.jsonl"
        path.write_text("".join(json.dumps(d.to_record()) + "\n" for d in c), encoding="utf-8")
        paths.append(str(path))
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('variants = ["WordBiLSTM"]\n', encoding="utf-8")
    rc = cli.main(["cross-eval", "--config", str(cfg), "--seeds", "0", "--out", str(tmp_path / "o"), "--corpus", paths[0], "--corpus", paths[1]])
    assert rc == 0
    assert "Word-BiLSTM PRAUC" in capsys.readouterr().out
    assert json.loads((tmp_path / "o" / "cross_eval.json").read_text())["train"] == ["a", "b"]
