import dataclasses

import numpy as np
import pytest
import torch

from gradcheck import check_gradients
from otg_forge.checkpoint import parameter_checksum
from otg_forge.classifiers import (
    ALPHABET, CHAR_CNN, WORD_BILSTM, CharCNNNet, ClassifierHyperparams, ClassifierModel, WordBiLSTMNet,
    char_cnn_output_width, encode_chars, import_scores, predict, train_classifier, write_scores,
)
from otg_forge.corpus import Corpus, Document, Label
from otg_forge.errors import EmptyCorpus, MalformedScore, OutOfRange, SingleClassCorpus
from otg_forge.metrics import ScoreSet

HATEFUL = ["zarvok", "krimog", "tekbax", "nurgri"]
BENIGN = ["garden", "recipe", "picnic", "soup"]
CONTEXT = ["the", "people", "with", "are", "so", "today", "my", "we", "saw"]


def separable_corpus(n=200, seed=0):
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        label = i % 2
        words = [CONTEXT[j] for j in rng.integers(0, len(CONTEXT), size=4)]
        words.insert(int(rng.integers(0, 5)), (HATEFUL if label else BENIGN)[rng.integers(4)])
        docs.append(Document(f"d{i:03d}", " ".join(words), Label(label)))
    return Corpus("sep", docs, True)


def tiny(variant):
    return ClassifierHyperparams(
        variant=variant, word_embedding_dim=3, lstm_hidden_dim=3, conv_channels=(3,) * 6,
        kernel_widths=(3, 3, 2, 2, 2, 2), pool_width=2, fc_dims=(5, 5, 2), max_chars=40, dropout_rate=0.0,
    )


def test_alphabet_has_seventy_symbols():
    assert len(ALPHABET) == 70 and len(set(ALPHABET)) == 70
    enc = encode_chars(["ab", "é"], 4)
    assert enc.tolist() == [[1, 2, -1, -1], [0, -1, -1, -1]]


def test_word_bilstm_sentence_vector_is_100d():
    net = WordBiLSTMNet(10, ClassifierHyperparams())
    assert net.output_dim == 100
    assert net.hidden.in_features == 100


def test_char_cnn_structure():
    hp = ClassifierHyperparams(variant=CHAR_CNN)
    net = CharCNNNet(hp)
    assert len(net.convs) == 6
    assert [l.out_features for l in (net.fc1, net.fc2, net.fc3)] == [256, 256, 2]
    out = net(encode_chars(["hello world", ""], hp.max_chars))
    assert out.shape == (2, 2)
    # 280 -6 =274 /3 =91 -6 =85 /3 =28 -2-2-2-2 =20 /3 =6
    assert char_cnn_output_width(hp) == 6
    with pytest.raises(ValueError):
        ClassifierHyperparams(variant=CHAR_CNN, max_chars=20)


def _accuracy(model, corpus):
    probs = np.asarray(predict(model, corpus).probs)
    return np.mean((probs >= 0.5) == np.asarray(corpus.labels))


def test_defaults_learn_separable_corpus():
    train = separable_corpus(200, 0)
    model = train_classifier(train, ClassifierHyperparams(), seed=0)
    assert model.training_history.epochs_run <= ClassifierHyperparams().max_epochs
    assert _accuracy(model, train) >= 0.95
    assert _accuracy(model, separable_corpus(200, 1)) >= 0.95


def test_char_cnn_learns_separable_corpus():
    # With only ~6 updates per epoch the Char-CNN sits on a loss plateau for
    # its first 10-15 epochs, so this small corpus needs a longer budget.
    train = separable_corpus(200, 0)
    hp = ClassifierHyperparams(variant=CHAR_CNN, max_epochs=40, patience=10)
    model = train_classifier(train, hp, seed=0)
    assert _accuracy(model, train) >= 0.95
    assert _accuracy(model, separable_corpus(200, 1)) >= 0.95


def test_predict_contracts():
    c = separable_corpus(20)
    model = train_classifier(c, dataclasses.replace(tiny(WORD_BILSTM), max_epochs=1), seed=0)
    assert len(predict(model, [])) == 0
    a, b = predict(model, c), predict(model, c)
    assert a == b and all(0.0 <= p <= 1.0 for p in a.probs)
    assert a.doc_ids == tuple(c.ids)


def test_same_seed_same_model():
    c = separable_corpus(60)
    hp = ClassifierHyperparams(max_epochs=2)
    a, b = train_classifier(c, hp, seed=4), train_classifier(c, hp, seed=4)
    assert parameter_checksum(a.network) == parameter_checksum(b.network)


@pytest.mark.parametrize("variant", [WORD_BILSTM, CHAR_CNN])
def test_save_load_same_predictions(tmp_path, variant):
    c = separable_corpus(40)
    model = train_classifier(c, dataclasses.replace(tiny(variant), max_epochs=1), seed=0)
    model.save(tmp_path / "m.otgf")
    back = ClassifierModel.load(tmp_path / "m.otgf")
    assert np.allclose(predict(model, c).probs, predict(back, c).probs, atol=1e-6)


def test_error_contracts():
    with pytest.raises(EmptyCorpus):
        train_classifier(Corpus("e", [], True))
    one = Corpus("o", [Document("a", "x", Label.HATE), Document("b", "y", Label.HATE)], True)
    with pytest.raises(SingleClassCorpus):
        train_classifier(one)


def test_scores_round_trip_and_import_errors(tmp_path):
    s = ScoreSet(["a", "b"], [0.25, 1.0])
    write_scores(s, tmp_path / "s.csv")
    assert import_scores(tmp_path / "s.csv") == s
    (tmp_path / "bad.csv").write_text("a,0.2\nb,lots\n", encoding="utf-8")
    with pytest.raises(MalformedScore):
        import_scores(tmp_path / "bad.csv")
    (tmp_path / "one.csv").write_text("d1,0.73\n", encoding="utf-8")
    assert import_scores(tmp_path / "one.csv") == ScoreSet(["d1"], [0.73])
    (tmp_path / "empty.csv").write_text("", encoding="utf-8")
    assert len(import_scores(tmp_path / "empty.csv")) == 0
    (tmp_path / "range.csv").write_text("a,1.2\n", encoding="utf-8")
    with pytest.raises(OutOfRange):
        import_scores(tmp_path / "range.csv")


def _grad_fixture(variant):
    torch.manual_seed(0)
    c = separable_corpus(6)
    hp = tiny(variant)
    vocab = {"<pad>": 0, "<unk>": 1, **{w: i + 2 for i, w in enumerate(sorted({t for d in c for t in d.tokens}))}}
    net = WordBiLSTMNet(len(vocab), hp) if variant == WORD_BILSTM else CharCNNNet(hp)
    model = ClassifierModel(variant, vocab if variant == WORD_BILSTM else {}, hp, 0, net)
    inputs = model.inputs(list(c))
    y = torch.tensor(c.labels)
    return net, lambda: torch.nn.functional.cross_entropy(net(*inputs), y)


@pytest.mark.parametrize("variant", [WORD_BILSTM, CHAR_CNN])
def test_gradient_check_tiny(variant):
    net, loss = _grad_fixture(variant)
    bad = check_gradients(net, loss)
    assert not bad, bad[:5]
