"""Estimator-style front door: fit a translator on parallel text, predict
translations, score with corpus BLEU.

The classes follow the scikit-learn protocol (plain-attribute
constructors, ``get_params``/``set_params``, learned state in
underscore-suffixed attributes) so they compose with `sklearn.clone`,
grid-search loops, and similar tooling, without depending on sklearn.

``warm_start=True`` turns a second ``fit`` call into continued training
on the new data with the vocabulary and parameters kept from the first
call, which is exactly the fast domain-adaptation recipe: fit the big
out-of-domain corpus once, then re-fit briefly on the small in-domain
corpus, and decode with an ensemble of the two snapshots.
"""

from __future__ import annotations

from pathlib import Path

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import encode_pairs
from .decoding import LoadedModel, TranslationDictionary, translate_corpus
from .metrics import bleu
from .network import ModelConfig
from .training import TrainConfig, Trainer, train_fresh
from .validation import check_is_fitted, check_parallel_text


class Seq2SeqTranslator:
    """Attention encoder-decoder translator with a fit/predict interface."""

    def __init__(self, embedding_dim=32, hidden_dim=64, attention_hidden=64,
                 readout_hidden=64, vocab_cutoff=10000, max_len=50,
                 max_decode_len=60, lr=0.1, clip_norm=5.0, batch_size=64,
                 epochs=5, seed=0, beam=8, warm_start=False):
        self.embedding_dim = embedding_dim
        self.hidden_dim = hidden_dim
        self.attention_hidden = attention_hidden
        self.readout_hidden = readout_hidden
        self.vocab_cutoff = vocab_cutoff
        self.max_len = max_len
        self.max_decode_len = max_decode_len
        self.lr = lr
        self.clip_norm = clip_norm
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.beam = beam
        self.warm_start = warm_start

    _param_names = ("embedding_dim", "hidden_dim", "attention_hidden",
                    "readout_hidden", "vocab_cutoff", "max_len", "max_decode_len",
                    "lr", "clip_norm", "batch_size", "epochs", "seed", "beam",
                    "warm_start")

    def get_params(self, deep=True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params) -> "Seq2SeqTranslator":
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, clip_norm=self.clip_norm,
                           batch_size=self.batch_size, epochs=self.epochs,
                           seed=self.seed)

    def fit(self, X, y) -> "Seq2SeqTranslator":
        """Train on parallel text (lists of sentences or token lists).

        With ``warm_start`` and a fitted model, training continues from
        the current parameters on the new data, reusing the fitted
        vocabularies; otherwise the model is rebuilt from scratch.
        """
        from .vocab import build_vocabulary

        src_tokens, tgt_tokens = check_parallel_text(X, y)
        continuing = self.warm_start and hasattr(self, "model_")
        if continuing:
            src_vocab, tgt_vocab = self.src_vocab_, self.tgt_vocab_
        else:
            src_vocab = build_vocabulary(src_tokens, self.vocab_cutoff)
            tgt_vocab = build_vocabulary(tgt_tokens, self.vocab_cutoff)
        pairs, skipped = encode_pairs(list(zip(src_tokens, tgt_tokens)),
                                      src_vocab, tgt_vocab, max_len=self.max_len)
        cfg = self._train_config()
        if continuing:
            trainer = Trainer(self.model_.params, cfg, src_vocab, tgt_vocab,
                              start_epoch=0)
            records = trainer.train(pairs)
        else:
            trainer, records = train_fresh(
                pairs, src_vocab, tgt_vocab,
                ModelConfig(src_vocab_size=src_vocab.size,
                            tgt_vocab_size=tgt_vocab.size,
                            embedding_dim=self.embedding_dim,
                            hidden_dim=self.hidden_dim,
                            attention_hidden=self.attention_hidden,
                            readout_hidden=self.readout_hidden,
                            max_decode_len=self.max_decode_len),
                cfg)
        self.src_vocab_ = src_vocab
        self.tgt_vocab_ = tgt_vocab
        self.model_ = LoadedModel(trainer.params, src_vocab, tgt_vocab)
        self.history_ = list(getattr(self, "history_", [])) + records if continuing \
            else list(records)
        self.skipped_pairs_ = skipped
        self._trainer = trainer
        return self

    def predict(self, X, dictionary: TranslationDictionary | None = None) -> list[str]:
        """Translate sentences; output is line-aligned with the input."""
        check_is_fitted(self)
        lines = [" ".join(t) for t in (x.split() if isinstance(x, str) else list(x)
                                       for x in X)]
        out, _ = translate_corpus([self.model_], lines, beam=self.beam,
                                  dictionary=dictionary)
        return out

    def score(self, X, y) -> float:
        """Corpus BLEU of predict(X) against y, in [0, 100]."""
        check_is_fitted(self)
        refs, _ = check_parallel_text(y, y)
        hyps = [h.split() for h in self.predict(X)]
        return bleu(hyps, refs)

    def to_checkpoint(self) -> Checkpoint:
        check_is_fitted(self)
        return Checkpoint.from_params(self.model_.params, self.src_vocab_,
                                      self.tgt_vocab_,
                                      epoch=getattr(self._trainer, "epoch", 0))

    def save(self, path: str | Path) -> Path:
        return save_checkpoint(self.to_checkpoint(), path)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint | str | Path, **params) -> "Seq2SeqTranslator":
        if not isinstance(ckpt, Checkpoint):
            ckpt = load_checkpoint(ckpt)
        est = cls(**params)
        est.set_params(embedding_dim=ckpt.config.embedding_dim,
                       hidden_dim=ckpt.config.hidden_dim,
                       attention_hidden=ckpt.config.attention_hidden,
                       readout_hidden=ckpt.config.readout_hidden,
                       max_decode_len=ckpt.config.max_decode_len)
        est.src_vocab_ = ckpt.src_vocab
        est.tgt_vocab_ = ckpt.tgt_vocab
        est.model_ = LoadedModel.from_checkpoint(ckpt)
        est.history_ = []
        est._trainer = Trainer(est.model_.params, est._train_config(),
                               ckpt.src_vocab, ckpt.tgt_vocab, start_epoch=ckpt.epoch,
                               wall_time=ckpt.wall_time, rng_state=ckpt.rng_state)
        return est


class EnsembleTranslator:
    """Decode with the averaged posteriors of several fitted translators."""

    def __init__(self, members=(), beam=8, combine="arithmetic", weights=None):
        self.members = list(members)
        self.beam = beam
        self.combine = combine
        self.weights = weights

    def get_params(self, deep=True) -> dict:
        return {"members": self.members, "beam": self.beam,
                "combine": self.combine, "weights": self.weights}

    def set_params(self, **params) -> "EnsembleTranslator":
        for name, value in params.items():
            if name not in self.get_params():
                raise ValueError(f"invalid parameter {name!r}")
            setattr(self, name, value)
        return self

    def _models(self) -> list[LoadedModel]:
        models = []
        for member in self.members:
            if isinstance(member, LoadedModel):
                models.append(member)
            elif isinstance(member, Checkpoint):
                models.append(LoadedModel.from_checkpoint(member))
            elif isinstance(member, (str, Path)):
                models.append(LoadedModel.from_checkpoint(load_checkpoint(member)))
            else:
                check_is_fitted(member)
                models.append(member.model_)
        if not models:
            raise ValueError("ensemble has no members")
        return models

    def predict(self, X, dictionary: TranslationDictionary | None = None) -> list[str]:
        lines = [" ".join(x.split()) if isinstance(x, str) else " ".join(x) for x in X]
        out, _ = translate_corpus(self._models(), lines, beam=self.beam,
                                  combine=self.combine, weights=self.weights,
                                  dictionary=dictionary)
        return out

    def score(self, X, y) -> float:
        refs, _ = check_parallel_text(y, y)
        hyps = [h.split() for h in self.predict(X)]
        return bleu(hyps, refs)
