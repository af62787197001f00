"""SGD training loop with per-epoch shuffling and per-epoch checkpoints.

Two modes share the loop: a fresh run initializes parameters from the
seed, and a continue run resumes a baseline checkpoint on new (typically
small in-domain) data with epoch numbering restarted at 1. Given the same
seed, config, and corpus, every emitted checkpoint is bit-identical
across runs; shuffle order is keyed by (seed, epoch) so a resumed run
retraces an uninterrupted one.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .data import SentencePair, make_batches
from .errors import ConfigError, NonFiniteGradientError
from .layers import sgd_update
from .network import ModelParams, batch_nll
from .vocab import Vocabulary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    clip_norm: float | None = 5.0
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    wall_seconds: float


def write_metrics_csv(records: Sequence[EpochRecord], path: str | Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_loss", "wall_seconds"])
        for r in records:
            writer.writerow([r.epoch, repr(r.mean_loss), f"{r.wall_seconds:.3f}"])


class Trainer:
    """Drives SGD over one parameter set.

    ``on_epoch`` (if given) receives (checkpoint, record) after each epoch;
    the default sink writes `epoch-NNN.ckpt` files plus a cumulative
    metrics CSV when ``out_dir`` is set.
    """

    def __init__(self, params: ModelParams, cfg: TrainConfig,
                 src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                 start_epoch: int = 0, wall_time: float = 0.0,
                 rng_state: dict | None = None, out_dir: str | Path | None = None,
                 records: Sequence[EpochRecord] | None = None):
        self.params = params
        self.cfg = cfg
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.epoch = start_epoch
        self.wall_time = wall_time
        self.rng_state = rng_state
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.records: list[EpochRecord] = list(records or [])

    def make_checkpoint(self, meta: dict | None = None) -> Checkpoint:
        return Checkpoint.from_params(
            self.params, self.src_vocab, self.tgt_vocab, epoch=self.epoch,
            rng_state=self.rng_state, wall_time=self.wall_time, meta=meta)

    def run_epoch(self, pairs: Sequence[SentencePair], epoch: int) -> EpochRecord:
        start = time.perf_counter()
        total_loss = 0.0
        batches = make_batches(pairs, self.cfg.batch_size, self.cfg.seed, epoch)
        for batch in batches:
            loss = batch_nll(self.params, batch.source_ids, batch.target_ids,
                             batch.source_pad_mask, batch.target_pad_mask)
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteGradientError(
                    f"non-finite loss at epoch {epoch}; last good checkpoint retained")
            total_loss += value * batch.size
            loss.backward()
            sgd_update(self.params.store, self.cfg.lr, self.cfg.clip_norm)
        elapsed = time.perf_counter() - start
        self.wall_time += elapsed
        return EpochRecord(epoch=epoch, mean_loss=total_loss / len(pairs),
                           wall_seconds=elapsed)

    def train(self, pairs: Sequence[SentencePair],
              on_epoch: Callable[[Checkpoint, EpochRecord], None] | None = None
              ) -> list[EpochRecord]:
        if not pairs:
            raise ConfigError("training corpus is empty")
        first = self.epoch + 1
        for epoch in range(first, first + self.cfg.epochs):
            record = self.run_epoch(pairs, epoch)
            self.epoch = epoch
            self.records.append(record)
            log.info("epoch %d: mean loss %.4f (%.1fs)", epoch, record.mean_loss,
                     record.wall_seconds)
            emit = (epoch - first + 1) % self.cfg.checkpoint_every == 0
            if emit or epoch == first + self.cfg.epochs - 1:
                ckpt = self.make_checkpoint()
                if self.out_dir is not None:
                    self.out_dir.mkdir(parents=True, exist_ok=True)
                    save_checkpoint(ckpt, self.out_dir / f"epoch-{epoch:03d}.ckpt")
                    write_metrics_csv(self.records, self.out_dir / "metrics.csv")
                if on_epoch is not None:
                    on_epoch(ckpt, record)
        return self.records


def train_fresh(pairs: Sequence[SentencePair], src_vocab: Vocabulary,
                tgt_vocab: Vocabulary, model_config, cfg: TrainConfig,
                out_dir: str | Path | None = None,
                on_epoch=None) -> tuple[Trainer, list[EpochRecord]]:
    """Initialize parameters from cfg.seed and run the full schedule."""
    params = ModelParams(model_config, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    trainer = Trainer(params, cfg, src_vocab, tgt_vocab,
                      rng_state=rng.bit_generator.state, out_dir=out_dir)
    records = trainer.train(pairs, on_epoch=on_epoch)
    return trainer, records


def continue_train(baseline: Checkpoint, pairs: Sequence[SentencePair],
                   cfg: TrainConfig, out_dir: str | Path | None = None,
                   on_epoch=None) -> tuple[Trainer, list[EpochRecord]]:
    """Resume a baseline checkpoint on new data; epochs restart at 1.

    The adaptation reuses the baseline's vocabularies and dimensions, so
    the in-domain corpus must already be encoded with those vocabularies.
    With epochs=0 this is the identity on parameters.
    """
    params = baseline.restore_params()
    trainer = Trainer(params, cfg, baseline.src_vocab, baseline.tgt_vocab,
                      start_epoch=0, wall_time=baseline.wall_time,
                      rng_state=baseline.rng_state, out_dir=out_dir)
    if cfg.epochs == 0:
        return trainer, []
    records = trainer.train(pairs, on_epoch=on_epoch)
    return trainer, records


def resume_train(ckpt: Checkpoint, pairs: Sequence[SentencePair], cfg: TrainConfig,
                 out_dir: str | Path | None = None,
                 records: Sequence[EpochRecord] | None = None,
                 on_epoch=None) -> tuple[Trainer, list[EpochRecord]]:
    """Pick up an interrupted run at ckpt.epoch and train cfg.epochs more."""
    params = ckpt.restore_params()
    trainer = Trainer(params, cfg, ckpt.src_vocab, ckpt.tgt_vocab,
                      start_epoch=ckpt.epoch, wall_time=ckpt.wall_time,
                      rng_state=ckpt.rng_state, out_dir=out_dir, records=records)
    trainer.train(pairs, on_epoch=on_epoch)
    return trainer, trainer.records
