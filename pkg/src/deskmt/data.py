"""Parallel corpus ingestion, padding, and epoch-shuffled mini-batches."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, VocabularyError
from .vocab import PAD_ID, Vocabulary, encode_sentence

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 64
DEFAULT_MAX_LEN = 50


@dataclass(frozen=True)
class SentencePair:
    source_ids: tuple[int, ...]
    target_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.source_ids or not self.target_ids:
            raise ValueError("empty side in sentence pair")


@dataclass
class Batch:
    """Up to batch_size pairs padded to common lengths.

    Masks are True exactly at real-token positions.
    """

    pairs: list[SentencePair]
    source_ids: np.ndarray       # (B, L) int64, PAD-filled
    target_ids: np.ndarray       # (B, M) int64, PAD-filled
    source_pad_mask: np.ndarray  # (B, L) bool
    target_pad_mask: np.ndarray  # (B, M) bool

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def padded_length_src(self) -> int:
        return self.source_ids.shape[1]

    @property
    def padded_length_tgt(self) -> int:
        return self.target_ids.shape[1]


@dataclass
class CorpusStats:
    sentence_count: int = 0
    running_words_src: int = 0
    running_words_tgt: int = 0
    vocab_size_src: int = 0
    vocab_size_tgt: int = 0


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return f.read().splitlines()


def tokenize(line: str) -> list[str]:
    # input is expected to be pre-tokenized; we only split on whitespace
    return line.split()


def load_parallel_tokens(src_path: str | Path, tgt_path: str | Path
                         ) -> list[tuple[list[str], list[str]]]:
    src_lines = read_lines(src_path)
    tgt_lines = read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise AlignmentError(
            f"{src_path}: {len(src_lines)} lines vs {tgt_path}: {len(tgt_lines)} lines")
    return [(tokenize(s), tokenize(t)) for s, t in zip(src_lines, tgt_lines)]


def encode_pairs(token_pairs: Sequence[tuple[list[str], list[str]]],
                 src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                 max_len: int = DEFAULT_MAX_LEN) -> tuple[list[SentencePair], int]:
    """Encode token pairs, skipping empty or over-length ones.

    Returns (pairs, skipped_count); skips are logged once in aggregate.
    """
    pairs: list[SentencePair] = []
    skipped = 0
    for src_tokens, tgt_tokens in token_pairs:
        if not src_tokens or not tgt_tokens:
            skipped += 1
            continue
        if len(src_tokens) > max_len or len(tgt_tokens) > max_len:
            skipped += 1
            continue
        pairs.append(SentencePair(
            source_ids=tuple(encode_sentence(src_tokens, src_vocab)),
            target_ids=tuple(encode_sentence(tgt_tokens, tgt_vocab)),
        ))
    if skipped:
        log.warning("skipped %d pairs (empty or longer than %d tokens)", skipped, max_len)
    return pairs, skipped


def pad_batch(pairs: list[SentencePair]) -> Batch:
    b = len(pairs)
    max_l = max(len(p.source_ids) for p in pairs)
    max_m = max(len(p.target_ids) for p in pairs)
    src = np.full((b, max_l), PAD_ID, dtype=np.int64)
    tgt = np.full((b, max_m), PAD_ID, dtype=np.int64)
    src_mask = np.zeros((b, max_l), dtype=bool)
    tgt_mask = np.zeros((b, max_m), dtype=bool)
    for i, p in enumerate(pairs):
        src[i, :len(p.source_ids)] = p.source_ids
        src_mask[i, :len(p.source_ids)] = True
        tgt[i, :len(p.target_ids)] = p.target_ids
        tgt_mask[i, :len(p.target_ids)] = True
    return Batch(pairs=pairs, source_ids=src, target_ids=tgt,
                 source_pad_mask=src_mask, target_pad_mask=tgt_mask)


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    """Shuffle order for one epoch; a pure function of (seed, epoch)."""
    return np.random.default_rng((seed, epoch)).permutation(n)


def make_batches(pairs: Sequence[SentencePair], batch_size: int = DEFAULT_BATCH_SIZE,
                 seed: int = 0, epoch: int = 1) -> list[Batch]:
    """Split a shuffled copy of ``pairs`` into padded batches.

    Every pair appears exactly once; the final batch may be short.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not pairs:
        return []
    order = epoch_permutation(len(pairs), seed, epoch)
    shuffled = [pairs[i] for i in order]
    return [pad_batch(shuffled[i:i + batch_size])
            for i in range(0, len(shuffled), batch_size)]


def corpus_stats(src_path: str | Path, tgt_path: str | Path) -> CorpusStats:
    """Sentence, running-word, and distinct-word counts for a parallel corpus."""
    token_pairs = load_parallel_tokens(src_path, tgt_path)
    stats = CorpusStats(sentence_count=len(token_pairs))
    src_types: set[str] = set()
    tgt_types: set[str] = set()
    for src_tokens, tgt_tokens in token_pairs:
        stats.running_words_src += len(src_tokens)
        stats.running_words_tgt += len(tgt_tokens)
        src_types.update(src_tokens)
        tgt_types.update(tgt_tokens)
    stats.vocab_size_src = len(src_types)
    stats.vocab_size_tgt = len(tgt_types)
    return stats


def check_ids_in_range(pairs: Sequence[SentencePair], src_vocab: Vocabulary,
                       tgt_vocab: Vocabulary):
    for p in pairs:
        if any(i >= src_vocab.size for i in p.source_ids):
            raise VocabularyError("source id out of vocabulary range")
        if any(i >= tgt_vocab.size for i in p.target_ids):
            raise VocabularyError("target id out of vocabulary range")
