"""Attention encoder-decoder: bidirectional GRU source encoder, additive
attention scored by a small feed-forward net, and a two-GRU conditional
decoder with a feed-forward readout.

The decoder treats each target step in two stages: the previous state and
previous target embedding are folded into an intermediate state, that
state queries the encoder through attention, and a second GRU consumes
the resulting context to produce the step state that feeds the readout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, VocabularyError
from .layers import Feedforward2Params, GruParams, ParameterStore, feedforward2, gru_step
from .tensor import Tensor
from .vocab import BOS_ID, EOS_ID, PAD_ID

Array = np.ndarray


@dataclass(frozen=True)
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    embedding_dim: int = 32
    hidden_dim: int = 64
    attention_hidden: int = 64
    readout_hidden: int = 64
    max_decode_len: int = 60

    def __post_init__(self):
        for name in ("src_vocab_size", "tgt_vocab_size", "embedding_dim",
                     "hidden_dim", "attention_hidden", "readout_hidden",
                     "max_decode_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class ModelParams:
    """All trainable tensors, registered once each in a ParameterStore."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        e, d = config.embedding_dim, config.hidden_dim
        self.src_emb = self.store.weight("src_emb", (config.src_vocab_size, e), rng)
        self.tgt_emb = self.store.weight("tgt_emb", (config.tgt_vocab_size, e), rng)
        self.enc_fwd = GruParams.create(self.store, "enc_fwd", e, d, rng)
        self.enc_bwd = GruParams.create(self.store, "enc_bwd", e, d, rng)
        self.dec_inter = GruParams.create(self.store, "dec_inter", e, d, rng)
        self.dec_main = GruParams.create(self.store, "dec_main", 2 * d, d, rng)
        self.att_net = Feedforward2Params.create(
            self.store, "att_net", d + 2 * d, config.attention_hidden, 1, rng)
        self.readout = Feedforward2Params.create(
            self.store, "readout", d + e + 2 * d, config.readout_hidden,
            config.readout_hidden, rng)
        self.proj_w = self.store.weight("proj_w", (config.readout_hidden,
                                                   config.tgt_vocab_size), rng)
        self.proj_b = self.store.bias("proj_b", config.tgt_vocab_size)
        self.init_w = self.store.weight("init_w", (d, d), rng)


@dataclass
class EncoderStates:
    """Per-position encoder outputs for one batch.

    ``concat[i]`` is [backward_i; forward_i]; ``stacked`` is the same
    sequence as one (B, L, 2D) tensor for attention.
    """

    forward: list[Tensor]
    backward: list[Tensor]
    concat: list[Tensor]
    stacked: Tensor
    mask: Array

    @property
    def length(self) -> int:
        return self.stacked.data.shape[1]

    def tiled(self, k: int) -> "EncoderStates":
        """Repeat a single-sentence encoding across k beam rows."""
        return EncoderStates(
            forward=[], backward=[], concat=[],
            stacked=Tensor(np.repeat(self.stacked.data, k, axis=0)),
            mask=np.repeat(self.mask, k, axis=0))


@dataclass
class DecoderStepState:
    intermediate: Tensor          # (B, D)
    state: Tensor                 # (B, D)
    context: Tensor               # (B, 2D)
    alpha: Tensor                 # (B, L)
    logits: Tensor                # (B, V)
    distribution: Array = field(init=False)

    def __post_init__(self):
        self.distribution = T.softmax_values(self.logits.data)


def _check_ids(ids: Array, vocab_size: int, side: str):
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise VocabularyError(f"{side} id out of range [0, {vocab_size})")


def encode(params: ModelParams, source_ids: Array,
           source_mask: Array | None = None) -> EncoderStates:
    """Run both directional GRUs over the source and concatenate states.

    Boundary states are zero. With a padding mask, padded steps carry the
    previous state through unchanged, so a padded batch row encodes
    exactly like the same sentence alone.
    """
    ids = np.atleast_2d(np.asarray(source_ids, dtype=np.int64))
    _check_ids(ids, params.config.src_vocab_size, "source")
    b, l = ids.shape
    mask = np.ones((b, l), dtype=bool) if source_mask is None else np.asarray(source_mask, dtype=bool)
    d = params.config.hidden_dim

    embs = [T.take_rows(params.src_emb, ids[:, i]) for i in range(l)]
    zero = T.constant(np.zeros((b, d)))

    fwd: list[Tensor] = [None] * l
    h = zero
    for i in range(l):
        step = gru_step(params.enc_fwd, embs[i], h)
        h = T.where_rows(mask[:, i], step, h) if not mask[:, i].all() else step
        fwd[i] = h

    bwd: list[Tensor] = [None] * l
    h = zero
    for i in range(l - 1, -1, -1):
        step = gru_step(params.enc_bwd, embs[i], h)
        h = T.where_rows(mask[:, i], step, h) if not mask[:, i].all() else step
        bwd[i] = h

    concat = [T.concat([bwd[i], fwd[i]]) for i in range(l)]
    stacked = T.stack(concat, axis=1)
    return EncoderStates(forward=fwd, backward=bwd, concat=concat,
                         stacked=stacked, mask=mask)


def initial_state(params: ModelParams, enc: EncoderStates) -> Tensor:
    """Decoder start state from the backward encoder state at position 1."""
    return T.tanh(T.linear(enc.backward[0], params.init_w))


def attend(params: ModelParams, intermediate: Tensor, enc: EncoderStates,
           mask: Array | None = None) -> tuple[Tensor, Tensor]:
    """Alignment weights and context for one decoder step.

    Scores each source position with the feed-forward net applied to
    [intermediate; h_i], normalizes over unmasked positions, and mixes
    the stacked states with the resulting weights.
    """
    mask = enc.mask if mask is None else np.asarray(mask, dtype=bool)
    b, l = intermediate.data.shape[0], enc.length
    tiled = T.expand_mid(intermediate, l)                   # (B, L, D)
    pair = T.concat([tiled, enc.stacked], axis=-1)          # (B, L, 3D)
    flat = T.reshape(pair, (b * l, pair.data.shape[-1]))
    scores = T.reshape(feedforward2(params.att_net, flat), (b, l))
    alpha = T.masked_softmax(scores, mask)
    context = T.attention_mix(alpha, enc.stacked)
    return alpha, context


def decoder_step(params: ModelParams, state_prev: Tensor, y_prev: Array,
                 enc: EncoderStates, mask: Array | None = None) -> DecoderStepState:
    """One target position: fold in the previous word, attend, readout."""
    y_prev = np.asarray(y_prev, dtype=np.int64)
    _check_ids(y_prev, params.config.tgt_vocab_size, "target")
    emb_prev = T.take_rows(params.tgt_emb, y_prev)
    intermediate = gru_step(params.dec_inter, emb_prev, state_prev)
    alpha, context = attend(params, intermediate, enc, mask)
    state = gru_step(params.dec_main, context, intermediate)
    readout_in = T.concat([state, emb_prev, context])
    logits = T.linear(feedforward2(params.readout, readout_in),
                      params.proj_w, params.proj_b)
    return DecoderStepState(intermediate=intermediate, state=state,
                            context=context, alpha=alpha, logits=logits)


def _teacher_forcing_arrays(target_ids: Array, target_mask: Array
                            ) -> tuple[Array, Array, Array]:
    """Input ids, gold ids, and loss weights for steps 0..M (EOS included)."""
    b, m = target_ids.shape
    lengths = target_mask.sum(axis=1)
    inputs = np.full((b, m + 1), PAD_ID, dtype=np.int64)
    gold = np.full((b, m + 1), PAD_ID, dtype=np.int64)
    inputs[:, 0] = BOS_ID
    inputs[:, 1:] = np.where(target_mask, target_ids, PAD_ID)
    gold[:, :m] = np.where(target_mask, target_ids, PAD_ID)
    gold[np.arange(b), lengths] = EOS_ID
    weights = (np.arange(m + 1)[None, :] <= lengths[:, None]).astype(float)
    return inputs, gold, weights


def batch_nll(params: ModelParams, source_ids: Array, target_ids: Array,
              source_mask: Array | None = None,
              target_mask: Array | None = None) -> Tensor:
    """Mean over sentences of token-summed negative log-likelihood.

    Targets are wrapped as BOS y_1..y_m EOS for teacher forcing; the EOS
    prediction is part of the loss. Padded positions contribute nothing.
    """
    src = np.atleast_2d(np.asarray(source_ids, dtype=np.int64))
    tgt = np.atleast_2d(np.asarray(target_ids, dtype=np.int64))
    _check_ids(tgt, params.config.tgt_vocab_size, "target")
    b = src.shape[0]
    smask = np.ones_like(src, dtype=bool) if source_mask is None else np.asarray(source_mask, bool)
    tmask = np.ones_like(tgt, dtype=bool) if target_mask is None else np.asarray(target_mask, bool)

    enc = encode(params, src, smask)
    state = initial_state(params, enc)
    inputs, gold, weights = _teacher_forcing_arrays(tgt, tmask)
    losses = []
    for t in range(inputs.shape[1]):
        step = decoder_step(params, state, inputs[:, t], enc)
        losses.append(T.nll_loss(step.logits, gold[:, t], weights[:, t]))
        state = step.state
    return T.affine(T.add_n(losses), scale=1.0 / b)


def sentence_nll(params: ModelParams, source_ids, target_ids) -> Tensor:
    """Negative log-likelihood of one pair (EOS prediction included)."""
    src = np.asarray(source_ids, dtype=np.int64).reshape(1, -1)
    tgt = np.asarray(target_ids, dtype=np.int64).reshape(1, -1)
    return batch_nll(params, src, tgt)
