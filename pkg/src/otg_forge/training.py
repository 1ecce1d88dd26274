"""Shared training machinery: seeding, validation split, early stopping."""

from __future__ import annotations

import contextlib
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping

import numpy as np
import torch

log = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.1
THREADS_ENV = "OTG_FORGE_THREADS"


def configure_threads() -> int:
    """Cap torch intra-op threads from OTG_FORGE_THREADS, if set."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        n = max(1, int(raw))
        torch.set_num_threads(n)
    return torch.get_num_threads()


@contextlib.contextmanager
def seeded(seed: int) -> Iterator[None]:
    """Run a block under a fixed torch RNG state without leaking it to the caller."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def validation_split(n: int, seed: int, fraction: float = VALIDATION_FRACTION) -> tuple[list[int], list[int]]:
    """Seeded (train, validation) index split; validation gets floor(fraction*n), at least 1 when n >= 2."""
    if n < 2:
        return list(range(n)), []
    n_val = max(1, math.floor(fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    return sorted(perm[n_val:].tolist()), sorted(perm[:n_val].tolist())


def minibatches(indices: list[int], batch_size: int, rng: np.random.Generator) -> list[list[int]]:
    order = rng.permutation(len(indices))
    shuffled = [indices[i] for i in order]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]


@dataclass
class EarlyStopping:
    """Stop once the validation loss has not improved for ``patience`` consecutive epochs."""

    patience: int
    best_loss: float = math.inf
    best_epoch: int = 0
    bad_epochs: int = 0

    def update(self, epoch: int, loss: float) -> bool:
        if math.isfinite(loss) and loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
        }


def _snapshot(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in module.state_dict().items()}


def fit(
    module: torch.nn.Module,
    run_epoch: Callable[[int], float],
    validate: Callable[[], float],
    max_epochs: int,
    patience: int,
) -> TrainingHistory:
    """Epoch loop with early stopping; the best-validation parameters are loaded back into ``module``.

    ``run_epoch(epoch)`` trains one epoch and returns its mean loss,
    ``validate()`` returns the validation loss of the current parameters.
    """
    stopper = EarlyStopping(patience)
    history = TrainingHistory()
    best = _snapshot(module)
    for epoch in range(1, max_epochs + 1):
        history.train_loss.append(float(run_epoch(epoch)))
        val = float(validate())
        history.val_loss.append(val)
        history.epochs_run = epoch
        if stopper.update(epoch, val):
            best = _snapshot(module)
        log.debug("epoch %d train %.5f val %.5f", epoch, history.train_loss[-1], val)
        if stopper.should_stop:
            break
    module.load_state_dict(best)
    history.best_epoch = stopper.best_epoch
    return history


def load_embedding_file(path: str | Path, vocab: Mapping[str, int], dim: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Read ``word v1 ... vd`` lines into rows of a (len(vocab), dim) tensor.

    Returns the table and a boolean mask of the rows found in the file.
    """
    table = torch.zeros(len(vocab), dim)
    found = torch.zeros(len(vocab), dtype=torch.bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                if lineno == 1 and len(parts) == 2:
                    continue  # word2vec-style "count dim" header
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            idx = vocab.get(parts[0].lower())
            if idx is not None and idx > 1:
                table[idx] = torch.tensor([float(x) for x in parts[1:]])
                found[idx] = True
    return table, found


def warm_start(embedding: torch.nn.Embedding, path: str | Path, vocab: Mapping[str, int]) -> int:
    table, found = load_embedding_file(path, vocab, embedding.embedding_dim)
    with torch.no_grad():
        embedding.weight[found] = table[found]
    hits = int(found.sum())
    log.info("warm-started %d/%d embeddings from %s", hits, len(vocab), path)
    return hits
