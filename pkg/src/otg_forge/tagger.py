"""OTG sequence tagger: char CNN + word embeddings -> BiLSTM -> per-token softmax over {O, OTG}."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from otg_forge.checkpoint import read_checkpoint, state_to_arrays, write_checkpoint
from otg_forge.corpus import Corpus
from otg_forge.errors import EmptyTrainingData, NoPositiveTags
from otg_forge.lexicon import O, OTG, TaggedSentence
from otg_forge.training import TrainingHistory, fit, minibatches, seeded, validation_split, warm_start

log = logging.getLogger(__name__)

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
TAG_IDS = {O: 0, OTG: 1}
INFERENCE_BATCH = 256


@dataclass(frozen=True)
class TaggerHyperparams:
    char_embedding_dim: int = 16
    char_conv_filters: int = 30
    char_conv_width: int = 3
    word_embedding_dim: int = 50
    lstm_hidden_dim: int = 50
    dropout_rate: float = 0.3
    learning_rate: float = 1e-3
    max_epochs: int = 50
    patience: int = 3
    batch_size: int = 32
    # Probability of swapping a training word for UNK, so the UNK row learns
    # to defer to the character path and the context.
    word_dropout: float = 0.05

    def __post_init__(self):
        dims = (
            self.char_embedding_dim,
            self.char_conv_filters,
            self.char_conv_width,
            self.word_embedding_dim,
            self.lstm_hidden_dim,
            self.max_epochs,
            self.batch_size,
        )
        if min(dims) < 1:
            raise ValueError("tagger dimensions must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0 or not 0.0 <= self.word_dropout < 1.0:
            raise ValueError("dropout rates must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class TaggerNet(nn.Module):
    def __init__(self, n_chars: int, n_words: int, hp: TaggerHyperparams):
        super().__init__()
        self.char_emb = nn.Embedding(n_chars, hp.char_embedding_dim, padding_idx=PAD_ID)
        self.char_conv = nn.Conv1d(
            hp.char_embedding_dim, hp.char_conv_filters, hp.char_conv_width, padding=hp.char_conv_width // 2
        )
        self.word_emb = nn.Embedding(n_words, hp.word_embedding_dim, padding_idx=PAD_ID)
        self.dropout = nn.Dropout(hp.dropout_rate)
        self.lstm = nn.LSTM(
            hp.word_embedding_dim + hp.char_conv_filters, hp.lstm_hidden_dim, batch_first=True, bidirectional=True
        )
        self.out = nn.Linear(2 * hp.lstm_hidden_dim, len(TAG_IDS))

    def char_features(self, chars: torch.Tensor) -> torch.Tensor:
        b, t, c = chars.shape
        flat = chars.reshape(b * t, c)
        conv = self.char_conv(self.char_emb(flat).transpose(1, 2))[:, :, :c]
        conv = conv.masked_fill((flat == PAD_ID).unsqueeze(1), float("-inf"))
        pooled = conv.max(dim=2).values
        # Padding words have no characters at all.
        pooled = torch.where(torch.isfinite(pooled), pooled, torch.zeros_like(pooled))
        return pooled.reshape(b, t, -1)

    def forward(
        self, words: torch.Tensor, chars: torch.Tensor, lengths: torch.Tensor, mask_chars: bool = False
    ) -> torch.Tensor:
        """Per-token logits of shape (batch, time, 2)."""
        char_rep = self.char_features(chars)
        if mask_chars:
            char_rep = torch.zeros_like(char_rep)
        x = self.dropout(torch.cat([self.word_emb(words), char_rep], dim=-1))
        packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
        h, _ = pad_packed_sequence(self.lstm(packed)[0], batch_first=True, total_length=words.shape[1])
        return self.out(self.dropout(h))

    def loss(self, batch: "Batch") -> torch.Tensor:
        logits = self(batch.words, batch.chars, batch.lengths)
        mask = batch.words != PAD_ID
        return nn.functional.cross_entropy(logits[mask], batch.tags[mask])


@dataclass
class Batch:
    words: torch.Tensor
    chars: torch.Tensor
    lengths: torch.Tensor
    tags: torch.Tensor | None = None


def build_vocabs(sentences: Sequence[Sequence[str]]) -> tuple[dict[str, int], dict[str, int]]:
    words = sorted({t for s in sentences for t in s})
    chars = sorted({ch for s in sentences for t in s for ch in t})
    word_vocab = {PAD: PAD_ID, UNK: UNK_ID, **{w: i + 2 for i, w in enumerate(words)}}
    char_vocab = {PAD: PAD_ID, UNK: UNK_ID, **{ch: i + 2 for i, ch in enumerate(chars)}}
    return char_vocab, word_vocab


@dataclass
class TaggerModel:
    char_vocab: dict[str, int]
    word_vocab: dict[str, int]
    hyperparams: TaggerHyperparams
    seed: int
    network: TaggerNet
    history: TrainingHistory = field(default_factory=TrainingHistory)

    def encode(self, sentences: Sequence[Sequence[str]], tags: Sequence[Sequence[str]] | None = None) -> Batch:
        """Pad a list of non-empty token lists into tensors."""
        t_max = max(len(s) for s in sentences)
        c_max = max(max(len(tok) for tok in s) for s in sentences)
        c_max = max(c_max, self.hyperparams.char_conv_width)
        words = torch.zeros(len(sentences), t_max, dtype=torch.long)
        chars = torch.zeros(len(sentences), t_max, c_max, dtype=torch.long)
        for i, sent in enumerate(sentences):
            words[i, : len(sent)] = torch.tensor([self.word_vocab.get(tok.lower(), UNK_ID) for tok in sent])
            for j, tok in enumerate(sent):
                chars[i, j, : len(tok)] = torch.tensor([self.char_vocab.get(ch, UNK_ID) for ch in tok.lower()])
        lengths = torch.tensor([len(s) for s in sentences], dtype=torch.long)
        tag_t = None
        if tags is not None:
            tag_t = torch.zeros(len(sentences), t_max, dtype=torch.long)
            for i, ts in enumerate(tags):
                tag_t[i, : len(ts)] = torch.tensor([TAG_IDS[t] for t in ts])
        return Batch(words, chars, lengths, tag_t)

    @torch.no_grad()
    def probabilities(self, tokens: Sequence[str], mask_chars: bool = False) -> np.ndarray:
        """(len(tokens), 2) softmax over (O, OTG)."""
        if not tokens:
            return np.zeros((0, 2))
        self.network.eval()
        b = self.encode([list(tokens)])
        logits = self.network(b.words, b.chars, b.lengths, mask_chars=mask_chars)[0]
        return torch.softmax(logits, dim=-1).numpy()

    def save(self, path: str | Path) -> None:
        write_checkpoint(
            path,
            kind="tagger",
            tensors=state_to_arrays(self.network.state_dict()),
            vocabularies={"char": self.char_vocab, "word": self.word_vocab},
            hyperparams=asdict(self.hyperparams),
            seed=self.seed,
            extra={"history": self.history.to_dict()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "TaggerModel":
        header, tensors = read_checkpoint(path, kind="tagger")
        hp = TaggerHyperparams(**header["hyperparams"])
        char_vocab, word_vocab = header["vocabularies"]["char"], header["vocabularies"]["word"]
        net = TaggerNet(len(char_vocab), len(word_vocab), hp)
        net.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
        net.eval()
        hist = TrainingHistory(**header.get("extra", {}).get("history", {}))
        return cls(char_vocab, word_vocab, hp, header["seed"], net, hist)


def _word_dropout(words: torch.Tensor, rate: float) -> torch.Tensor:
    if rate <= 0:
        return words
    drop = (torch.rand(words.shape) < rate) & (words != PAD_ID)
    return words.masked_fill(drop, UNK_ID)


def train_tagger(
    data: Sequence[TaggedSentence],
    hyper: TaggerHyperparams | None = None,
    seed: int = 0,
    embeddings_path: str | Path | None = None,
) -> TaggerModel:
    """Train on weakly labeled sentences with a 10% validation hold-out and early stopping."""
    hyper = hyper or TaggerHyperparams()
    data = [s for s in data if s.tokens]
    if not data:
        raise EmptyTrainingData("no non-empty tagged sentences to train on")
    if not any(OTG in s.tags for s in data):
        raise NoPositiveTags("training data contains no OTG tag")
    train_idx, val_idx = validation_split(len(data), seed)
    char_vocab, word_vocab = build_vocabs([data[i].tokens for i in train_idx])
    rng = np.random.default_rng(seed)
    with seeded(seed):
        net = TaggerNet(len(char_vocab), len(word_vocab), hyper)
        model = TaggerModel(char_vocab, word_vocab, hyper, seed, net)
        if embeddings_path:
            warm_start(net.word_emb, embeddings_path, word_vocab)
        opt = torch.optim.Adam(net.parameters(), lr=hyper.learning_rate)

        def encode(idx):
            return model.encode([data[i].tokens for i in idx], [data[i].tags for i in idx])

        val_batches = [encode(val_idx[i : i + INFERENCE_BATCH]) for i in range(0, len(val_idx), INFERENCE_BATCH)]

        def run_epoch(epoch):
            net.train()
            total, count = 0.0, 0
            for idx in minibatches(train_idx, hyper.batch_size, rng):
                batch = encode(idx)
                batch.words = _word_dropout(batch.words, hyper.word_dropout)
                opt.zero_grad()
                loss = net.loss(batch)
                loss.backward()
                opt.step()
                n_tok = int(batch.lengths.sum())
                total += loss.item() * n_tok
                count += n_tok
            return total / count

        @torch.no_grad()
        def validate():
            net.eval()
            batches = val_batches or [encode(train_idx[i : i + INFERENCE_BATCH]) for i in range(0, len(train_idx), INFERENCE_BATCH)]
            total, count = 0.0, 0
            for b in batches:
                n_tok = int(b.lengths.sum())
                total += net.loss(b).item() * n_tok
                count += n_tok
            return total / count

        model.history = fit(net, run_epoch, validate, hyper.max_epochs, hyper.patience)
    net.eval()
    log.info(
        "tagger trained: %d epochs, best epoch %d (val loss %.4f)",
        model.history.epochs_run,
        model.history.best_epoch,
        min(model.history.val_loss),
    )
    return model


def tag_sentence(model: TaggerModel, tokens: Sequence[str], doc_id: str = "") -> TaggedSentence:
    probs = model.probabilities(tokens)
    tags = [OTG if p[1] > p[0] else O for p in probs]
    return TaggedSentence(doc_id, tuple(tokens), tags)


@torch.no_grad()
def tag_corpus(model: TaggerModel, corpus: Corpus | Sequence) -> list[TaggedSentence]:
    """Tag every document, in order. Batches are formed by length so padding stays small."""
    docs = list(corpus)
    model.network.eval()
    tags: list[list[str]] = [[] for _ in docs]
    order = sorted((i for i, d in enumerate(docs) if d.tokens), key=lambda i: (len(docs[i].tokens), i))
    for start in range(0, len(order), INFERENCE_BATCH):
        chunk = order[start : start + INFERENCE_BATCH]
        b = model.encode([docs[i].tokens for i in chunk])
        pred = model.network(b.words, b.chars, b.lengths).argmax(dim=-1)
        for row, i in enumerate(chunk):
            n = len(docs[i].tokens)
            tags[i] = [OTG if v == 1 else O for v in pred[row, :n].tolist()]
    return [TaggedSentence(d.id, d.tokens, t) for d, t in zip(docs, tags)]
