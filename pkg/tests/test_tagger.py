import dataclasses

import numpy as np
import pytest
import torch

from gradcheck import check_gradients
from otg_forge.checkpoint import parameter_checksum
from otg_forge.corpus import Corpus, Document
from otg_forge.errors import EmptyTrainingData, NoPositiveTags
from otg_forge.lexicon import O, OTG, TaggedSentence
from otg_forge.tagger import TaggerHyperparams, TaggerModel, TaggerNet, build_vocabs, tag_corpus, tag_sentence, train_tagger

TERMS = ["zarvok", "krimog", "tekbax", "nurgri", "polzar", "duldek"]
FILLER = ["the", "problem", "with", "is", "that", "they", "are", "so", "very", "always", "really", "people", "i", "think"]


def synthetic_tagged(n=50, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        toks, tags = [], []
        for _ in range(int(rng.integers(5, 12))):
            if rng.random() < 0.3:
                toks.append(TERMS[rng.integers(len(TERMS))])
                tags.append(OTG)
            else:
                toks.append(FILLER[rng.integers(len(FILLER))])
                tags.append(O)
        out.append(TaggedSentence(f"d{i}", tuple(toks), tuple(tags)))
    return out


FAST = TaggerHyperparams(max_epochs=3)


def token_accuracy(model, data):
    pairs = [(p, g) for s in data for p, g in zip(tag_sentence(model, s.tokens).tags, s.tags)]
    return sum(p == g for p, g in pairs) / len(pairs)


def test_overfits_fifty_sentences():
    data = synthetic_tagged()
    model = train_tagger(data, dataclasses.replace(TaggerHyperparams(), max_epochs=200), seed=0)
    assert token_accuracy(model, data) >= 0.99
    assert model.history.epochs_run <= 200


def test_same_seed_same_parameters():
    data = synthetic_tagged(20)
    a = train_tagger(data, FAST, seed=3)
    b = train_tagger(data, FAST, seed=3)
    assert parameter_checksum(a.network) == parameter_checksum(b.network)


def test_training_does_not_touch_global_rng():
    torch.manual_seed(123)
    expected = torch.rand(1)
    torch.manual_seed(123)
    train_tagger(synthetic_tagged(10), FAST, seed=0)
    assert torch.equal(torch.rand(1), expected)


def test_error_contracts():
    with pytest.raises(EmptyTrainingData):
        train_tagger([])
    with pytest.raises(NoPositiveTags):
        train_tagger([TaggedSentence("a", ("x", "y"), (O, O))])


def test_save_load_and_batch_invariance(tmp_path):
    data = synthetic_tagged(30)
    model = train_tagger(data, FAST, seed=1)
    model.save(tmp_path / "t.otgf")
    back = TaggerModel.load(tmp_path / "t.otgf")
    tokens = ("the", "unseenword", "are", "zarvok", "!")
    assert np.allclose(model.probabilities(tokens), back.probabilities(tokens), atol=1e-6)
    corpus = Corpus("c", [Document(s.doc_id, " ".join(s.tokens)) for s in data] + [Document("empty", "")], False)
    batched = tag_corpus(back, corpus)
    assert [s.tags for s in batched[:-1]] == [tag_sentence(back, s.tokens).tags for s in data]
    assert batched[-1].tags == ()


def test_probabilities_shape_and_char_mask():
    model = train_tagger(synthetic_tagged(10), FAST, seed=0)
    p = model.probabilities(("a", "b", "c"))
    assert p.shape == (3, 2) and np.allclose(p.sum(axis=1), 1.0)
    assert model.probabilities(("a", "b", "c"), mask_chars=True).shape == (3, 2)
    assert model.probabilities(()).shape == (0, 2)


def test_vocab_reserves_pad_and_unk():
    chars, words = build_vocabs([("b", "a"), ("a",)])
    assert words == {"<pad>": 0, "<unk>": 1, "a": 2, "b": 3}
    assert chars["<pad>"] == 0 and chars["<unk>"] == 1


def test_gradient_check_tiny_tagger():
    torch.manual_seed(0)
    hp = TaggerHyperparams(char_embedding_dim=3, char_conv_filters=4, word_embedding_dim=3, lstm_hidden_dim=3, dropout_rate=0.0)
    data = synthetic_tagged(3)
    chars, words = build_vocabs([s.tokens for s in data])
    net = TaggerNet(len(chars), len(words), hp)
    model = TaggerModel(chars, words, hp, 0, net)
    batch = model.encode([s.tokens for s in data], [s.tags for s in data])
    bad = check_gradients(net, lambda: net.loss(batch))
    assert not bad, bad[:5]
