"""Vocabulary building, encoding, batching, and corpus statistics."""

import numpy as np
import pytest

from deskmt import data, vocab
from deskmt.errors import AlignmentError
from deskmt.vocab import (BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocabulary,
                          build_vocabulary, decode_sentence, encode_sentence)


def toks(*sentences):
    return [s.split() for s in sentences]


class TestBuildVocabulary:
    def test_frequency_cutoff_with_first_occurrence_tiebreak(self):
        v = build_vocabulary(toks("a b a", "a c"), n=2)
        # b and c both occur once; b appears first in the corpus
        assert v.entries == [("a", 3), ("b", 1)]
        assert v.size == 6

    def test_cutoff_above_distinct_count_keeps_everything(self):
        v = build_vocabulary(toks("x y"), n=10)
        assert [t for t, _ in v.entries] == ["x", "y"]
        assert v.cutoff_n == 10

    def test_empty_corpus_yields_specials_only(self):
        v = build_vocabulary([], n=5)
        assert v.size == 4
        assert v.entries == []

    def test_special_ids_are_fixed(self):
        v = build_vocabulary(toks("z"), n=1)
        assert (UNK_ID, BOS_ID, EOS_ID, PAD_ID) == (0, 1, 2, 3)
        assert v.id_of("<unk>") == 0
        assert v.id_of("z") == 4

    def test_deterministic_rebuild(self):
        corpus = toks("d c b a", "b a", "c b a")
        assert build_vocabulary(corpus, 3) == build_vocabulary(corpus, 3)

    def test_size_bound(self):
        v = build_vocabulary(toks("a b c d e f"), n=3)
        assert v.size <= 3 + 4


class TestEncodeDecode:
    def test_oov_maps_to_unk(self):
        v = build_vocabulary(toks("a b"), n=5)
        assert encode_sentence(["a", "c"], v) == [v.id_of("a"), UNK_ID]

    def test_empty_sentence(self):
        v = build_vocabulary(toks("a"), n=5)
        assert encode_sentence([], v) == []

    def test_repeated_token(self):
        v = build_vocabulary(toks("a"), n=5)
        assert encode_sentence(["a", "a"], v) == [v.id_of("a")] * 2

    def test_round_trip_in_vocabulary(self):
        v = build_vocabulary(toks("the cat sat on the mat"), n=10)
        tokens = "the mat sat".split()
        assert decode_sentence(encode_sentence(tokens, v), v) == tokens


class TestVocabularyFile:
    def test_round_trip(self, tmp_path):
        v = build_vocabulary(toks("b a b c b a"), n=3)
        path = tmp_path / "vocab.txt"
        v.save(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[:4] == ["<unk>\t0", "<s>\t0", "</s>\t0", "<pad>\t0"]
        assert lines[4] == "b\t3"
        loaded = Vocabulary.load(path, cutoff_n=3)
        assert loaded == v

    def test_corrupt_header_rejected(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("nope\t0\n", encoding="utf-8")
        with pytest.raises(vocab.VocabularyError):
            Vocabulary.load(path)


def id_pairs(n, rng=None):
    rng = rng or np.random.default_rng(0)
    out = []
    for _ in range(n):
        src = tuple(int(x) for x in rng.integers(4, 10, size=rng.integers(1, 6)))
        tgt = tuple(int(x) for x in rng.integers(4, 10, size=rng.integers(1, 6)))
        out.append(data.SentencePair(src, tgt))
    return out


class TestMakeBatches:
    def test_sizes_with_short_tail(self):
        batches = data.make_batches(id_pairs(130), batch_size=64, seed=1, epoch=1)
        assert [b.size for b in batches] == [64, 64, 2]

    def test_same_seed_epoch_is_identical(self):
        pairs = id_pairs(50)
        a = data.make_batches(pairs, 16, seed=7, epoch=3)
        b = data.make_batches(pairs, 16, seed=7, epoch=3)
        assert [x.pairs for x in a] == [y.pairs for y in b]

    def test_epochs_permute_differently(self):
        pairs = id_pairs(20)
        e1 = [p for b in data.make_batches(pairs, 64, seed=7, epoch=1) for p in b.pairs]
        e2 = [p for b in data.make_batches(pairs, 64, seed=7, epoch=2) for p in b.pairs]
        assert e1 != e2

    def test_shuffle_is_a_permutation(self):
        pairs = id_pairs(37)
        for epoch in (1, 2, 5):
            flat = [p for b in data.make_batches(pairs, 8, seed=3, epoch=epoch)
                    for p in b.pairs]
            assert sorted(flat, key=hash) == sorted(pairs, key=hash)

    def test_empty_input(self):
        assert data.make_batches([], 64, seed=0, epoch=1) == []

    def test_masks_mark_exactly_real_positions(self):
        pairs = [data.SentencePair((4, 5, 6), (7,)), data.SentencePair((8,), (9, 9))]
        batch = data.pad_batch(pairs)
        assert batch.source_pad_mask.tolist() == [[True, True, True], [True, False, False]]
        assert batch.target_pad_mask.tolist() == [[True, False], [True, True]]
        assert (batch.source_ids[~batch.source_pad_mask] == PAD_ID).all()


class TestCorpusStats:
    def test_hand_counts(self, tmp_path):
        (tmp_path / "c.src").write_text("a b\n", encoding="utf-8")
        (tmp_path / "c.tgt").write_text("c\n", encoding="utf-8")
        stats = data.corpus_stats(tmp_path / "c.src", tmp_path / "c.tgt")
        assert stats.sentence_count == 1
        assert (stats.running_words_src, stats.running_words_tgt) == (2, 1)
        # distinct-word counts, the quantity corpus-statistics tables report
        assert (stats.vocab_size_src, stats.vocab_size_tgt) == (2, 1)

    def test_empty_corpus(self, tmp_path):
        (tmp_path / "e.src").write_text("", encoding="utf-8")
        (tmp_path / "e.tgt").write_text("", encoding="utf-8")
        stats = data.corpus_stats(tmp_path / "e.src", tmp_path / "e.tgt")
        assert stats == data.CorpusStats()

    def test_misaligned_files_raise(self, tmp_path):
        (tmp_path / "m.src").write_text("a\nb\n", encoding="utf-8")
        (tmp_path / "m.tgt").write_text("a\n", encoding="utf-8")
        with pytest.raises(AlignmentError):
            data.corpus_stats(tmp_path / "m.src", tmp_path / "m.tgt")


class TestEncodePairs:
    def test_overlength_pairs_are_skipped_and_counted(self):
        v = build_vocabulary(toks("a b"), n=5)
        token_pairs = [(["a"] * 3, ["b"] * 3), (["a"] * 9, ["b"]), ([], ["b"])]
        pairs, skipped = data.encode_pairs(token_pairs, v, v, max_len=5)
        assert len(pairs) == 1 and skipped == 2
