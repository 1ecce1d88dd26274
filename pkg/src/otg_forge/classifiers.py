"""Word-BiLSTM and Char-CNN hate speech classifiers, plus imported external scores."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from otg_forge.checkpoint import read_checkpoint, state_to_arrays, write_checkpoint
from otg_forge.corpus import Corpus
from otg_forge.errors import EmptyCorpus, MalformedScore, OutOfRange, SingleClassCorpus
from otg_forge.metrics import ScoreSet
from otg_forge.training import TrainingHistory, fit, minibatches, seeded, validation_split, warm_start

log = logging.getLogger(__name__)

WORD_BILSTM = "WordBiLSTM"
CHAR_CNN = "CharCNN"
VARIANTS = (WORD_BILSTM, CHAR_CNN)
DISPLAY_NAMES = {WORD_BILSTM: "Word-BiLSTM", CHAR_CNN: "Char-CNN"}

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
INFERENCE_BATCH = 256

# 70 symbols: a-z, 0-9, 32 punctuation marks, space, newline. Index 0 = UNK; padding is all-zero.
ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789-,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{} \n"
assert len(ALPHABET) == 70 and len(set(ALPHABET)) == 70


@dataclass(frozen=True)
class ClassifierHyperparams:
    variant: str = WORD_BILSTM
    word_embedding_dim: int = 50
    lstm_hidden_dim: int = 50
    conv_channels: tuple[int, ...] = (64, 64, 64, 64, 64, 64)
    kernel_widths: tuple[int, ...] = (7, 7, 3, 3, 3, 3)
    pool_after: tuple[int, ...] = (1, 2, 6)
    pool_width: int = 3
    fc_dims: tuple[int, ...] = (256, 256, 2)
    dropout_rate: float = 0.3
    learning_rate: float = 1e-3
    max_epochs: int = 10
    patience: int = 3
    batch_size: int = 32
    max_chars: int = 280

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        object.__setattr__(self, "kernel_widths", tuple(self.kernel_widths))
        object.__setattr__(self, "pool_after", tuple(self.pool_after))
        object.__setattr__(self, "fc_dims", tuple(self.fc_dims))
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown classifier variant {self.variant!r}")
        if len(self.conv_channels) != 6 or len(self.kernel_widths) != 6:
            raise ValueError("Char-CNN needs six convolution layers")
        if len(self.fc_dims) != 3 or self.fc_dims[-1] != 2:
            raise ValueError("Char-CNN needs three fully connected layers ending in 2 outputs")
        dims = (self.word_embedding_dim, self.lstm_hidden_dim, self.max_epochs, self.batch_size, self.pool_width)
        if min(dims + self.conv_channels + self.kernel_widths + self.fc_dims) < 1:
            raise ValueError("classifier dimensions must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.variant == CHAR_CNN and char_cnn_output_width(self) < 1:
            raise ValueError(f"max_chars={self.max_chars} is too short for the convolution stack")


def char_cnn_output_width(hp: ClassifierHyperparams) -> int:
    width = hp.max_chars
    for layer, k in enumerate(hp.kernel_widths, 1):
        width -= k - 1
        if layer in hp.pool_after:
            width //= hp.pool_width
        if width < 1:
            return 0
    return width


class WordBiLSTMNet(nn.Module):
    """Embedding -> BiLSTM -> FC hidden -> FC output (softmax applied by the loss / predictor)."""

    def __init__(self, n_words: int, hp: ClassifierHyperparams):
        super().__init__()
        self.embedding = nn.Embedding(n_words, hp.word_embedding_dim, padding_idx=PAD_ID)
        self.lstm = nn.LSTM(hp.word_embedding_dim, hp.lstm_hidden_dim, batch_first=True, bidirectional=True)
        self.dropout = nn.Dropout(hp.dropout_rate)
        self.hidden = nn.Linear(2 * hp.lstm_hidden_dim, 2 * hp.lstm_hidden_dim)
        self.out = nn.Linear(2 * hp.lstm_hidden_dim, 2)

    @property
    def output_dim(self) -> int:
        return 2 * self.lstm.hidden_size

    def forward(self, words: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        x = self.dropout(self.embedding(words))
        _, (h, _) = self.lstm(pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False))
        sent = torch.cat([h[0], h[1]], dim=-1)
        return self.out(torch.relu(self.hidden(self.dropout(sent))))


class CharCNNNet(nn.Module):
    """Six temporal convolutions over one-hot characters, three fully connected layers."""

    def __init__(self, hp: ClassifierHyperparams):
        super().__init__()
        convs = []
        in_ch = len(ALPHABET) + 1
        for out_ch, k in zip(hp.conv_channels, hp.kernel_widths):
            convs.append(nn.Conv1d(in_ch, out_ch, k))
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        self.pool_after = set(hp.pool_after)
        self.pool = nn.MaxPool1d(hp.pool_width)
        flat = in_ch * char_cnn_output_width(hp)
        self.fc1 = nn.Linear(flat, hp.fc_dims[0])
        self.fc2 = nn.Linear(hp.fc_dims[0], hp.fc_dims[1])
        self.fc3 = nn.Linear(hp.fc_dims[1], hp.fc_dims[2])
        self.dropout1 = nn.Dropout(hp.dropout_rate)
        self.dropout2 = nn.Dropout(hp.dropout_rate)
        self.n_symbols = len(ALPHABET) + 1

    def forward(self, chars: torch.Tensor) -> torch.Tensor:
        # chars: (batch, max_chars) symbol ids, -1 for padding
        x = nn.functional.one_hot(chars.clamp(min=0), self.n_symbols).to(self.fc1.weight.dtype)
        x = (x * (chars >= 0).unsqueeze(-1)).transpose(1, 2)
        for layer, conv in enumerate(self.convs, 1):
            x = torch.relu(conv(x))
            if layer in self.pool_after:
                x = self.pool(x)
        x = self.dropout1(torch.relu(self.fc1(x.flatten(1))))
        x = self.dropout2(torch.relu(self.fc2(x)))
        return self.fc3(x)


_CHAR_INDEX = {ch: i + 1 for i, ch in enumerate(ALPHABET)}


def encode_chars(texts: Sequence[str], max_chars: int) -> torch.Tensor:
    out = torch.full((len(texts), max_chars), -1, dtype=torch.long)
    for i, text in enumerate(texts):
        ids = [_CHAR_INDEX.get(ch, 0) for ch in text[:max_chars]]
        if ids:
            out[i, : len(ids)] = torch.tensor(ids)
    return out


@dataclass
class ClassifierModel:
    variant: str
    vocab: dict[str, int]
    hyperparams: ClassifierHyperparams
    seed: int
    network: nn.Module
    training_history: TrainingHistory = field(default_factory=TrainingHistory)

    def inputs(self, docs: Sequence) -> tuple[torch.Tensor, ...]:
        if self.variant == CHAR_CNN:
            return (encode_chars([" ".join(d.tokens) for d in docs], self.hyperparams.max_chars),)
        # Empty documents are fed a single PAD so the LSTM sees length 1.
        seqs = [[self.vocab.get(t, UNK_ID) for t in d.tokens] or [PAD_ID] for d in docs]
        t_max = max(len(s) for s in seqs)
        words = torch.zeros(len(seqs), t_max, dtype=torch.long)
        for i, s in enumerate(seqs):
            words[i, : len(s)] = torch.tensor(s)
        return words, torch.tensor([len(s) for s in seqs], dtype=torch.long)

    def logits(self, docs: Sequence) -> torch.Tensor:
        return self.network(*self.inputs(docs))

    def save(self, path: str | Path) -> None:
        write_checkpoint(
            path,
            kind="classifier",
            tensors=state_to_arrays(self.network.state_dict()),
            vocabularies={"word": self.vocab} if self.variant == WORD_BILSTM else {"char": _CHAR_INDEX},
            hyperparams=asdict(self.hyperparams),
            seed=self.seed,
            extra={"variant": self.variant, "history": self.training_history.to_dict()},
        )

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        header, tensors = read_checkpoint(path, kind="classifier")
        hp = ClassifierHyperparams(**header["hyperparams"])
        vocab = header["vocabularies"].get("word", {})
        net = build_network(hp, len(vocab))
        net.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
        net.eval()
        hist = TrainingHistory(**header["extra"].get("history", {}))
        return cls(hp.variant, vocab, hp, header["seed"], net, hist)


def build_network(hp: ClassifierHyperparams, n_words: int) -> nn.Module:
    if hp.variant == WORD_BILSTM:
        return WordBiLSTMNet(n_words, hp)
    return CharCNNNet(hp)


def build_word_vocab(docs: Sequence) -> dict[str, int]:
    words = sorted({t for d in docs for t in d.tokens})
    return {PAD: PAD_ID, UNK: UNK_ID, **{w: i + 2 for i, w in enumerate(words)}}


def train_classifier(
    corpus: Corpus,
    hyper: ClassifierHyperparams | None = None,
    seed: int = 0,
    embeddings_path: str | Path | None = None,
) -> ClassifierModel:
    """Cross-entropy training with Adam, 10% seeded validation split and early stopping."""
    hyper = hyper or ClassifierHyperparams()
    if len(corpus) == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    if not corpus.labeled:
        raise ValueError("training corpus must be labeled")
    labels = np.asarray(corpus.labels)
    if labels.min() == labels.max():
        raise SingleClassCorpus(f"corpus {corpus.name!r} contains a single class")
    docs = list(corpus)
    train_idx, val_idx = validation_split(len(docs), seed)
    vocab = build_word_vocab([docs[i] for i in train_idx]) if hyper.variant == WORD_BILSTM else {}
    y_all = torch.tensor(labels, dtype=torch.long)
    rng = np.random.default_rng(seed)
    with seeded(seed):
        net = build_network(hyper, len(vocab))
        model = ClassifierModel(hyper.variant, vocab, hyper, seed, net)
        if embeddings_path and hyper.variant == WORD_BILSTM:
            warm_start(net.embedding, embeddings_path, vocab)
        opt = torch.optim.Adam(net.parameters(), lr=hyper.learning_rate)
        eval_idx = val_idx or train_idx
        eval_chunks = [eval_idx[i : i + INFERENCE_BATCH] for i in range(0, len(eval_idx), INFERENCE_BATCH)]
        eval_inputs = [model.inputs([docs[i] for i in c]) for c in eval_chunks]

        def run_epoch(epoch):
            net.train()
            total = 0.0
            for idx in minibatches(train_idx, hyper.batch_size, rng):
                opt.zero_grad()
                loss = nn.functional.cross_entropy(model.logits([docs[i] for i in idx]), y_all[idx])
                loss.backward()
                opt.step()
                total += loss.item() * len(idx)
            return total / len(train_idx)

        @torch.no_grad()
        def validate():
            net.eval()
            total = 0.0
            for chunk, inp in zip(eval_chunks, eval_inputs):
                total += float(nn.functional.cross_entropy(net(*inp), y_all[chunk], reduction="sum"))
            return total / len(eval_idx)

        model.training_history = fit(net, run_epoch, validate, hyper.max_epochs, hyper.patience)
    net.eval()
    log.info(
        "%s trained on %d docs: %d epochs, best epoch %d",
        hyper.variant,
        len(docs),
        model.training_history.epochs_run,
        model.training_history.best_epoch,
    )
    return model


@torch.no_grad()
def predict_proba(model: ClassifierModel, docs: Sequence) -> np.ndarray:
    """(n, 2) class probabilities (non-hate, hate)."""
    model.network.eval()
    out = np.zeros((len(docs), 2))
    for start in range(0, len(docs), INFERENCE_BATCH):
        chunk = docs[start : start + INFERENCE_BATCH]
        logits = model.logits(chunk).double()
        out[start : start + len(chunk)] = torch.softmax(logits, dim=-1).numpy()
    return out


def predict(model: ClassifierModel, corpus: Corpus | Sequence) -> ScoreSet:
    docs = list(corpus)
    if not docs:
        return ScoreSet((), ())
    probs = predict_proba(model, docs)[:, 1]
    return ScoreSet([d.id for d in docs], np.clip(probs, 0.0, 1.0))


def import_scores(path: str | Path) -> ScoreSet:
    """Read ``doc_id,probability`` lines (no header), e.g. predictions from an external model."""
    ids, probs = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2 or not row[0]:
                raise MalformedScore(f"{path}:{lineno}: expected doc_id,probability")
            try:
                p = float(row[1])
            except ValueError:
                raise MalformedScore(f"{path}:{lineno}: {row[1]!r} is not a number") from None
            if not math.isfinite(p) or not 0.0 <= p <= 1.0:
                raise OutOfRange(f"{path}:{lineno}: probability {p} outside [0, 1]")
            ids.append(row[0])
            probs.append(p)
    return ScoreSet(ids, probs)


def write_scores(scores: ScoreSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for doc_id, p in scores:
            writer.writerow([doc_id, repr(float(p))])
