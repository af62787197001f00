"""Synthetic parallel corpora for trainer and adaptation experiments.

The two-domain corpus models a domain shift the way adaptation suites
need it: domain B reuses domain A's full vocabulary but swaps the
translations of a fraction of the content lexicon among themselves and
flips the order of the boundary function words, with the source-side
markers making the domain identifiable from the input.
"""

from dataclasses import dataclass

import numpy as np


def word_map_task(n_pairs, vocab=10, min_len=2, max_len=5, seed=0):
    """Deterministic word-for-word translation pairs (sN -> tN)."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        length = int(rng.integers(min_len, max_len + 1))
        idx = rng.integers(0, vocab, size=length)
        src = [f"s{i}" for i in idx]
        tgt = [f"t{i}" for i in idx]
        pairs.append((src, tgt))
    return pairs


@dataclass
class TwoDomainCorpus:
    train_a: list            # (src_tokens, tgt_tokens) pairs
    train_b: list
    test_a: tuple            # (src_lines, ref_lines)
    test_b: tuple
    swapped_words: list


def _lines(pairs):
    src = [" ".join(s) for s, _ in pairs]
    tgt = [" ".join(t) for _, t in pairs]
    return src, tgt


def two_domain_corpus(n_a=5000, n_b=500, n_test=150, content_vocab=30,
                      swap_fraction=0.3, min_len=2, max_len=5, seed=13):
    """Domain A and a 30%-lexicon-swapped, reordered domain B.

    Domain A sentences read  `um w... da`  ->  `su x... fin`.
    Domain B sentences read  `da w... um`  ->  `su x'... fin`
    so the source function words flip order (making the domain visible in
    the input) and x' swaps the translations of ``swap_fraction`` of the
    content words among themselves; B introduces no new vocabulary.
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(content_vocab)]
    base_map = {f"w{i}": f"x{i}" for i in range(content_vocab)}

    n_swap = int(round(swap_fraction * content_vocab))
    swapped = list(rng.choice(content_vocab, size=n_swap, replace=False))
    swap_map = dict(base_map)
    for pos, i in enumerate(swapped):
        j = swapped[(pos + 1) % n_swap]  # cyclic shift inside the swapped set
        swap_map[f"w{i}"] = base_map[f"w{j}"]

    def sample(n, mapping, front, back):
        pairs = []
        for _ in range(n):
            length = int(rng.integers(min_len, max_len + 1))
            content = [words[int(k)] for k in rng.integers(0, content_vocab, size=length)]
            src = [front] + content + [back]
            tgt = ["su"] + [mapping[w] for w in content] + ["fin"]
            pairs.append((src, tgt))
        return pairs

    train_a = sample(n_a, base_map, "um", "da")
    train_b = sample(n_b, swap_map, "da", "um")
    test_a = _lines(sample(n_test, base_map, "um", "da"))
    test_b = _lines(sample(n_test, swap_map, "da", "um"))
    return TwoDomainCorpus(train_a=train_a, train_b=train_b, test_a=test_a,
                           test_b=test_b, swapped_words=[words[i] for i in swapped])
