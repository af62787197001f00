"""Frequency-cutoff vocabularies over whitespace-tokenized text.

Ids are dense. The four control tokens occupy fixed ids so serialized
models stay loadable: UNK=0, BOS=1, EOS=2, PAD=3. Regular entries follow,
most frequent first, ties broken by first occurrence in the corpus, so a
vocabulary build is a deterministic function of the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import VocabularyError

UNK_ID = 0
BOS_ID = 1
EOS_ID = 2
PAD_ID = 3

UNK_TOKEN = "<unk>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
PAD_TOKEN = "<pad>"

SPECIAL_TOKENS = (UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, PAD_TOKEN)


@dataclass
class Vocabulary:
    """Token/id bijection with reserved control ids 0..3."""

    entries: list[tuple[str, int]] = field(default_factory=list)  # (token, frequency), id order
    cutoff_n: int = 0
    token_to_id: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.token_to_id:
            self.token_to_id = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
            for offset, (token, _) in enumerate(self.entries):
                self.token_to_id[token] = len(SPECIAL_TOKENS) + offset

    @property
    def size(self) -> int:
        return len(SPECIAL_TOKENS) + len(self.entries)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        if idx < 0 or idx >= self.size:
            raise VocabularyError(f"id {idx} out of range for vocabulary of size {self.size}")
        if idx < len(SPECIAL_TOKENS):
            return SPECIAL_TOKENS[idx]
        return self.entries[idx - len(SPECIAL_TOKENS)][0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, Vocabulary)
                and self.entries == other.entries
                and self.cutoff_n == other.cutoff_n)

    def save(self, path: str | Path):
        """Write `token<TAB>frequency` lines in id order, specials first."""
        with open(path, "w", encoding="utf-8") as f:
            for tok in SPECIAL_TOKENS:
                f.write(f"{tok}\t0\n")
            for token, freq in self.entries:
                f.write(f"{token}\t{freq}\n")

    @classmethod
    def load(cls, path: str | Path, cutoff_n: int | None = None) -> "Vocabulary":
        entries: list[tuple[str, int]] = []
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        if len(lines) < len(SPECIAL_TOKENS):
            raise VocabularyError(f"{path}: missing specials header")
        for i, expected in enumerate(SPECIAL_TOKENS):
            token = lines[i].split("\t", 1)[0]
            if token != expected:
                raise VocabularyError(f"{path}: line {i + 1} should be {expected!r}, got {token!r}")
        for lineno, line in enumerate(lines[len(SPECIAL_TOKENS):], start=5):
            try:
                token, freq = line.split("\t")
                entries.append((token, int(freq)))
            except ValueError as e:
                raise VocabularyError(f"{path}: malformed line {lineno}: {line!r}") from e
        return cls(entries=entries, cutoff_n=cutoff_n if cutoff_n is not None else len(entries))


def build_vocabulary(corpus: Iterable[Sequence[str]], n: int) -> Vocabulary:
    """Keep the N most frequent tokens (fewer if the corpus is smaller).

    Ties are broken by first occurrence. The reserved control strings are
    never counted as regular entries.
    """
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    position = 0
    reserved = set(SPECIAL_TOKENS)
    for sentence in corpus:
        for token in sentence:
            if token in reserved:
                continue
            if token not in counts:
                counts[token] = 0
                first_seen[token] = position
                position += 1
            counts[token] += 1
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    entries = [(t, counts[t]) for t in ranked[:n]]
    return Vocabulary(entries=entries, cutoff_n=n)


def encode_sentence(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids; anything outside the vocabulary becomes UNK."""
    return [vocab.id_of(t) for t in tokens]


def decode_sentence(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token_of(i) for i in ids]
