"""Case-sensitive corpus BLEU and TER, their combination, and
learning-curve emission over a series of adaptation checkpoints.

BLEU is corpus-level BLEU-4: clipped modified n-gram precisions pooled
over the corpus, geometric mean, multiplied by the brevity penalty
exp(1 - ref_len/hyp_len) when the hypothesis side is shorter. TER counts
word insertions, deletions, substitutions, and block shifts (one point
each) per reference word; shifts are found greedily, best
edit-distance reduction first, and a shifted span must exactly match a
reference span while being misaligned at its current position.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from math import exp, log
from pathlib import Path
from typing import Sequence

TokenSeq = Sequence[str]

MAX_SHIFT_SPAN = 10


def _ngram_counts(tokens: TokenSeq, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hyps: Sequence[TokenSeq], refs: Sequence[TokenSeq],
         max_order: int = 4, smoothing: bool = False) -> float:
    """Corpus BLEU as a percentage in [0, 100]."""
    report = bleu_report(hyps, refs, max_order=max_order, smoothing=smoothing)
    return report[0]


def bleu_report(hyps, refs, max_order: int = 4, smoothing: bool = False
                ) -> tuple[float, list[float], float]:
    """(score, per-order precisions, brevity penalty)."""
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            hyp_counts = _ngram_counts(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())

    precisions = []
    for m, t in zip(matches, totals):
        if smoothing:
            precisions.append((m + 1) / (t + 1))
        else:
            precisions.append(m / t if t else 0.0)
    if hyp_len == 0:
        return 0.0, precisions, 0.0
    bp = 1.0 if hyp_len > ref_len else exp(1.0 - ref_len / hyp_len)
    if any(p == 0.0 for p in precisions):
        return 0.0, precisions, bp
    mean_log = sum(log(p) for p in precisions) / max_order
    return 100.0 * bp * exp(mean_log), precisions, bp


def edit_distance(a: TokenSeq, b: TokenSeq) -> int:
    """Word-level Levenshtein distance, unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, tok_b in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + (tok_a != tok_b))
        prev = cur
    return prev[len(b)]


def _edit_counts(a: TokenSeq, b: TokenSeq) -> tuple[int, int, int]:
    """(insertions, deletions, substitutions) turning hyp ``a`` into ref ``b``."""
    rows = len(a) + 1
    cols = len(b) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            dist[i][j] = min(dist[i - 1][j] + 1, dist[i][j - 1] + 1,
                             dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    ins = dels = subs = 0
    i, j = len(a), len(b)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            subs += a[i - 1] != b[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return ins, dels, subs


def _legal_shifts(seq: list, ref: list, max_span: int = MAX_SHIFT_SPAN):
    """Candidate block moves: a span of ``seq`` that exactly matches a
    reference span but is misaligned where it currently sits, moved so it
    starts at the matching reference position."""
    n = len(seq)
    for i in range(n):
        for span_len in range(1, min(max_span, n - i) + 1):
            span = seq[i:i + span_len]
            if i + span_len <= len(ref) and span == ref[i:i + span_len]:
                continue  # already aligned here
            for j in range(len(ref) - span_len + 1):
                if j == i or ref[j:j + span_len] != span:
                    continue
                rest = seq[:i] + seq[i + span_len:]
                pos = min(j, len(rest))
                yield rest[:pos] + span + rest[pos:]


def _greedy_shifts(hyp: TokenSeq, ref: TokenSeq) -> tuple[list, int]:
    """Apply the best edit-distance-reducing shift until none helps."""
    cur = list(hyp)
    ref = list(ref)
    shifts = 0
    dist = edit_distance(cur, ref)
    while True:
        best = None
        for candidate in _legal_shifts(cur, ref):
            d = edit_distance(candidate, ref)
            if d < dist and (best is None or d < best[0]):
                best = (d, candidate)
        if best is None:
            break
        dist, cur = best
        shifts += 1
    return cur, shifts


@dataclass
class EditBreakdown:
    insertions: int = 0
    deletions: int = 0
    substitutions: int = 0
    shifts: int = 0

    @property
    def total(self) -> int:
        return self.insertions + self.deletions + self.substitutions + self.shifts

    def add(self, other: "EditBreakdown"):
        self.insertions += other.insertions
        self.deletions += other.deletions
        self.substitutions += other.substitutions
        self.shifts += other.shifts


def sentence_edits(hyp: TokenSeq, ref: TokenSeq) -> EditBreakdown:
    shifted, shifts = _greedy_shifts(hyp, ref)
    ins, dels, subs = _edit_counts(shifted, ref)
    return EditBreakdown(insertions=ins, deletions=dels, substitutions=subs,
                         shifts=shifts)


def ter(hyps: Sequence[TokenSeq], refs: Sequence[TokenSeq]) -> float:
    """Corpus TER as a percentage (can exceed 100)."""
    return ter_report(hyps, refs)[0]


def ter_report(hyps, refs) -> tuple[float, EditBreakdown]:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    ref_words = sum(len(r) for r in refs)
    if ref_words == 0:
        raise ValueError("empty reference corpus")
    breakdown = EditBreakdown()
    for hyp, ref in zip(hyps, refs):
        breakdown.add(sentence_edits(hyp, ref))
    return 100.0 * breakdown.total / ref_words, breakdown


def combined(bleu_score: float, ter_score: float) -> float:
    """The learning-curve quantity (TER - BLEU) / 2; lower is better."""
    return (ter_score - bleu_score) / 2.0


@dataclass
class ScoreReport:
    bleu: float
    ter: float
    combined: float
    precisions: list[float]
    brevity_penalty: float
    edits: EditBreakdown

    @classmethod
    def from_corpora(cls, hyps: Sequence[TokenSeq], refs: Sequence[TokenSeq],
                     smoothing: bool = False) -> "ScoreReport":
        b, precisions, bp = bleu_report(hyps, refs, smoothing=smoothing)
        t, edits = ter_report(hyps, refs)
        return cls(bleu=b, ter=t, combined=combined(b, t),
                   precisions=precisions, brevity_penalty=bp, edits=edits)

    def one_line(self) -> str:
        return (f"BLEU {self.bleu:.1f}  TER {self.ter:.1f}  "
                f"(TER-BLEU)/2 {self.combined:.1f}")


def tokenize_corpus(lines: Sequence[str]) -> list[list[str]]:
    return [line.split() for line in lines]


@dataclass
class CurvePoint:
    epoch: int
    testset: str
    bleu: float
    ter: float
    combined: float


def learning_curve(baseline, epoch_checkpoints: Sequence[tuple[int, object]],
                   test_sets: dict[str, tuple[Sequence[str], Sequence[str]]],
                   ensemble: bool = False, beam: int = 8,
                   smoothing: bool = False) -> list[CurvePoint]:
    """Score the adaptation trajectory on each test set.

    Epoch 0 is the baseline alone; epoch k is either the continue model
    at epoch k or, with ``ensemble``, the baseline+epoch-k pair. Rows are
    ordered by (testset, epoch).
    """
    from .decoding import LoadedModel, translate_corpus

    base = baseline if isinstance(baseline, LoadedModel) else LoadedModel.from_checkpoint(baseline)
    series: list[tuple[int, list]] = [(0, [base])]
    for epoch, ckpt in sorted(epoch_checkpoints, key=lambda p: p[0]):
        model = ckpt if isinstance(ckpt, LoadedModel) else LoadedModel.from_checkpoint(ckpt)
        series.append((epoch, [base, model] if ensemble else [model]))

    points = []
    for name in sorted(test_sets):
        src_lines, ref_lines = test_sets[name]
        refs = tokenize_corpus(ref_lines)
        for epoch, models in series:
            hyps_lines, _ = translate_corpus(models, src_lines, beam=beam)
            hyps = tokenize_corpus(hyps_lines)
            b = bleu(hyps, refs, smoothing=smoothing)
            t = ter(hyps, refs)
            points.append(CurvePoint(epoch=epoch, testset=name, bleu=b, ter=t,
                                     combined=combined(b, t)))
    return points


def write_curve_csv(points: Sequence[CurvePoint], path: str | Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "testset", "bleu", "ter", "combined"])
        for p in points:
            writer.writerow([p.epoch, p.testset, repr(p.bleu), repr(p.ter),
                             repr(p.combined)])


def read_curve_csv(path: str | Path) -> list[CurvePoint]:
    points = []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            points.append(CurvePoint(epoch=int(row["epoch"]), testset=row["testset"],
                                     bleu=float(row["bleu"]), ter=float(row["ter"]),
                                     combined=float(row["combined"])))
    return points
