"""Beam-search translation over one model or an ensemble, plus
attention-guided replacement of unknown-word outputs.

Ensembling averages the per-step posterior distributions of the member
models (arithmetic mean by default, geometric behind a flag) and scores
hypotheses by the summed log of the combined probabilities. Attention
vectors are arithmetic-averaged across members so each step has a single
source alignment for unknown-word replacement.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .checkpoint import Checkpoint
from .errors import EnsembleError
from .network import ModelParams, decoder_step, encode, initial_state
from .tensor import Tensor, softmax_values
from .vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary, encode_sentence

Array = np.ndarray


@dataclass
class Hypothesis:
    """A decoded sequence with its score and per-step attention.

    ``alignments[t]`` is the 1-based source position with the largest
    ensemble-averaged attention weight at step t.
    """

    token_ids: list[int]
    score: float
    attentions: list[Array] = field(default_factory=list)
    alignments: list[int] = field(default_factory=list)
    finished: bool = True

    def surface_ids(self) -> list[int]:
        """Generated ids without the terminating EOS."""
        ids = list(self.token_ids)
        if ids and ids[-1] == EOS_ID:
            ids.pop()
        return ids


class TranslationDictionary:
    """Source-to-target lexicon for unknown-word replacement.

    Lookups never fail; a miss returns None. Built externally (for
    example from a word-alignment model); duplicated source entries keep
    the first target seen.
    """

    def __init__(self, entries: dict[str, str] | None = None):
        self._entries = dict(entries or {})

    def lookup(self, source_word: str) -> str | None:
        return self._entries.get(source_word)

    def __len__(self):
        return len(self._entries)

    @classmethod
    def load(cls, path: str | Path) -> "TranslationDictionary":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                src, _, tgt = line.partition("\t")
                if src and src not in entries:
                    entries[src] = tgt
        return cls(entries)


class LoadedModel:
    """A checkpoint restored into live parameters, ready to decode."""

    def __init__(self, params: ModelParams, src_vocab: Vocabulary, tgt_vocab: Vocabulary):
        self.params = params
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "LoadedModel":
        return cls(ckpt.restore_params(), ckpt.src_vocab, ckpt.tgt_vocab)


def _as_models(models: Sequence) -> list[LoadedModel]:
    if not models:
        raise EnsembleError("need at least one model")
    out = []
    for m in models:
        out.append(m if isinstance(m, LoadedModel) else LoadedModel.from_checkpoint(m))
    first = out[0]
    for m in out[1:]:
        if m.tgt_vocab != first.tgt_vocab:
            raise EnsembleError("ensemble members disagree on the target vocabulary")
        if m.src_vocab != first.src_vocab:
            raise EnsembleError("ensemble members disagree on the source vocabulary")
    return out


class _EnsembleSession:
    """Per-sentence decode state for every ensemble member."""

    def __init__(self, models: list[LoadedModel], source_ids: Sequence[int],
                 combine: str = "arithmetic", weights: Sequence[float] | None = None):
        if combine not in ("arithmetic", "geometric"):
            raise ValueError(f"unknown combination rule {combine!r}")
        self.models = models
        self.combine = combine
        w = np.ones(len(models)) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (len(models),) or (w <= 0).any():
            raise EnsembleError("ensemble weights must be positive, one per model")
        self.weights = w / w.sum()
        ids = np.asarray(source_ids, dtype=np.int64).reshape(1, -1)
        self.encodings = [encode(m.params, ids) for m in models]
        self.states = [initial_state(m.params, enc).data
                       for m, enc in zip(models, self.encodings)]

    @property
    def source_length(self) -> int:
        return self.encodings[0].length

    def step(self, states: list[Array], prev_ids: Array) -> tuple[Array, Array, list[Array]]:
        """Combined distribution, averaged attention, and next states.

        ``states[m]`` holds one row per live hypothesis.
        """
        k = prev_ids.shape[0]
        mixed = None
        attn = None
        next_states = []
        for m, model in enumerate(self.models):
            enc = self.encodings[m].tiled(k) if k > 1 else self.encodings[m]
            out = decoder_step(model.params, Tensor(states[m]), prev_ids, enc)
            wm = self.weights[m]
            if self.combine == "arithmetic":
                part = wm * out.distribution
            else:
                part = wm * np.log(np.maximum(out.distribution, 1e-300))
            mixed = part if mixed is None else mixed + part
            attn = wm * out.alpha.data if attn is None else attn + wm * out.alpha.data
            next_states.append(out.state.data)
        if self.combine == "geometric":
            mixed = softmax_values(mixed)
        probs = mixed / mixed.sum(axis=1, keepdims=True)
        return probs, attn, next_states


def beam_search(models: Sequence, source_ids: Sequence[int], beam: int = 8,
                max_len: int | None = None, combine: str = "arithmetic",
                weights: Sequence[float] | None = None,
                length_norm: bool = False) -> Hypothesis:
    """Best-scoring translation of one source sentence.

    A hypothesis completes when it emits EOS; the search returns the
    completed hypothesis with the highest score, falling back to the best
    incomplete one if nothing finished within ``max_len`` steps. With
    beam=1 this is exactly stepwise greedy decoding.
    """
    if beam < 1:
        raise ValueError(f"beam must be >= 1, got {beam}")
    loaded = _as_models(models)
    if max_len is None:
        max_len = loaded[0].params.config.max_decode_len
    session = _EnsembleSession(loaded, source_ids, combine, weights)

    def final_score(score: float, n_tokens: int) -> float:
        return score / max(n_tokens, 1) if length_norm else score

    live_tokens: list[list[int]] = [[]]
    live_attn: list[list[Array]] = [[]]
    live_align: list[list[int]] = [[]]
    live_scores = np.zeros(1)
    states = [s.copy() for s in session.states]
    completed: list[Hypothesis] = []

    for _ in range(max_len):
        k = len(live_tokens)
        prev = np.array([toks[-1] if toks else BOS_ID for toks in live_tokens])
        probs, attn, next_states = session.step(states, prev)
        cand = live_scores[:, None] + np.log(probs)
        flat = cand.reshape(-1)
        order = np.argsort(-flat, kind="stable")[:beam]
        vocab_size = probs.shape[1]

        new_tokens, new_attn, new_align, new_scores, new_rows = [], [], [], [], []
        for pos in order:
            row, tok = divmod(int(pos), vocab_size)
            score = float(flat[pos])
            attn_vec = attn[row]
            align = int(np.argmax(attn_vec)) + 1
            tokens = live_tokens[row] + [tok]
            attns = live_attn[row] + [attn_vec]
            aligns = live_align[row] + [align]
            if tok == EOS_ID:
                completed.append(Hypothesis(tokens, score, attns, aligns, finished=True))
            else:
                new_tokens.append(tokens)
                new_attn.append(attns)
                new_align.append(aligns)
                new_scores.append(score)
                new_rows.append(row)
        if not new_tokens:
            break
        live_tokens, live_attn, live_align = new_tokens, new_attn, new_align
        live_scores = np.array(new_scores)
        rows = np.array(new_rows)
        states = [ns[rows] for ns in next_states]
        if completed:
            best_done = max(final_score(h.score, len(h.token_ids)) for h in completed)
            best_live = max(final_score(s, len(t) + 1)
                            for s, t in zip(live_scores, live_tokens))
            # scores only shrink as tokens are appended, so nothing live
            # can overtake a completed hypothesis that already leads
            if not length_norm and best_done >= best_live:
                break

    if completed:
        return max(completed, key=lambda h: final_score(h.score, len(h.token_ids)))
    best = int(np.argmax(live_scores))
    return Hypothesis(live_tokens[best], float(live_scores[best]),
                      live_attn[best], live_align[best], finished=False)


def force_score(models: Sequence, source_ids: Sequence[int],
                token_ids: Sequence[int], combine: str = "arithmetic",
                weights: Sequence[float] | None = None) -> float:
    """Log-probability the ensemble assigns to a fixed token sequence."""
    loaded = _as_models(models)
    session = _EnsembleSession(loaded, source_ids, combine, weights)
    seq = list(token_ids)
    if not seq or seq[-1] != EOS_ID:
        seq.append(EOS_ID)
    states = [s.copy() for s in session.states]
    prev = BOS_ID
    total = 0.0
    for tok in seq:
        probs, _, states = session.step(states, np.array([prev]))
        total += float(np.log(probs[0, tok]))
        prev = tok
    return total


def replace_unks(hyp: Hypothesis, source_tokens: Sequence[str],
                 dictionary: TranslationDictionary, tgt_vocab: Vocabulary) -> list[str]:
    """Render a hypothesis as tokens, patching UNK outputs.

    Each UNK is replaced by the dictionary translation of the source word
    its step attended to most, or by that source word itself when the
    dictionary has no entry. Token count is preserved.
    """
    out = []
    for t, tok in enumerate(hyp.surface_ids()):
        if tok != UNK_ID:
            out.append(tgt_vocab.token_of(tok))
            continue
        pos = hyp.alignments[t] if t < len(hyp.alignments) else 1
        pos = min(max(pos, 1), len(source_tokens)) - 1
        source_word = source_tokens[pos]
        out.append(dictionary.lookup(source_word) or source_word)
    return out


def alignment_line(hyp: Hypothesis) -> str:
    """`t-i` pairs (1-based target step, 1-based source position)."""
    return " ".join(f"{t + 1}-{i}" for t, i in enumerate(hyp.alignments[:len(hyp.surface_ids())]))


def translate_corpus(models: Sequence, source_lines: Iterable[str],
                     beam: int = 8, max_len: int | None = None,
                     dictionary: TranslationDictionary | None = None,
                     combine: str = "arithmetic",
                     weights: Sequence[float] | None = None,
                     length_norm: bool = False,
                     workers: int = 1) -> tuple[list[str], list[str]]:
    """Translate one sentence per line; outputs stay line-aligned.

    Returns (translations, alignment_lines). Decoding is deterministic
    and, with workers > 1, sentence-parallel with results emitted in
    input order. Empty input lines produce empty output lines.
    """
    loaded = _as_models(models)
    dictionary = dictionary or TranslationDictionary()
    src_vocab = loaded[0].src_vocab
    tgt_vocab = loaded[0].tgt_vocab
    lines = list(source_lines)

    def translate_one(line: str) -> tuple[str, str]:
        tokens = line.split()
        if not tokens:
            return "", ""
        ids = encode_sentence(tokens, src_vocab)
        hyp = beam_search(loaded, ids, beam=beam, max_len=max_len,
                          combine=combine, weights=weights, length_norm=length_norm)
        words = replace_unks(hyp, tokens, dictionary, tgt_vocab)
        return " ".join(words), alignment_line(hyp)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(translate_one, lines))
    else:
        results = [translate_one(line) for line in lines]
    translations = [r[0] for r in results]
    alignments = [r[1] for r in results]
    return translations, alignments
