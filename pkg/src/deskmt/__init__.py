"""Desk-scale neural machine translation with fast domain adaptation.

Train a recurrent attention translator on out-of-domain text, continue
training briefly on a small in-domain corpus, and decode with an
ensemble of both snapshots. Includes case-sensitive BLEU/TER scoring,
learning-curve tooling, and a blind human-evaluation service.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import CorpusStats, SentencePair, corpus_stats, make_batches
from .decoding import (Hypothesis, LoadedModel, TranslationDictionary,
                       beam_search, replace_unks, translate_corpus)
from .estimator import EnsembleTranslator, Seq2SeqTranslator
from .metrics import ScoreReport, bleu, combined, learning_curve, ter
from .network import ModelConfig, ModelParams
from .training import TrainConfig, Trainer, continue_train, train_fresh
from .vocab import Vocabulary, build_vocabulary, encode_sentence

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "CorpusStats", "EnsembleTranslator", "Hypothesis",
    "LoadedModel", "ModelConfig", "ModelParams", "ScoreReport",
    "SentencePair", "Seq2SeqTranslator", "TrainConfig", "Trainer",
    "TranslationDictionary", "Vocabulary", "beam_search", "bleu", "combined",
    "continue_train", "corpus_stats", "build_vocabulary", "encode_sentence",
    "learning_curve", "load_checkpoint", "make_batches", "replace_unks",
    "save_checkpoint", "ter", "train_fresh", "translate_corpus",
    "__version__",
]
