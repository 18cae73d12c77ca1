"""Sender and receiver networks for the signaling game.

The sender embeds its view of the candidates, runs a 1-D convolution with a
sigmoid over the concatenated embeddings and maps the result to vocabulary
logits; a Gumbel-softmax channel turns the logits into a (relaxed) symbol.
The receiver embeds the symbol and each candidate into a shared space and
scores candidates by dot product.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ParameterError


class Variant(enum.Enum):
    SENDER_SEES_ALL = "sender-sees-all"
    SENDER_SEES_TARGET = "sender-sees-target"


class Mode(enum.Enum):
    TRAIN_SOFT = "train-soft"
    EVAL_HARD = "eval-hard"


@dataclass
class GameConfig:
    n_concepts: int = 5
    vocab_size: int = 100
    feature_dim: int = 28
    embed_dim: int = 15
    conv_filters: int = 20
    conv_width: int = 5
    temperature: float = 1.0
    variant: Variant = Variant.SENDER_SEES_ALL

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = Variant(self.variant)
        for name in ("n_concepts", "vocab_size", "feature_dim", "embed_dim",
                     "conv_filters", "conv_width"):
            if getattr(self, name) < 1:
                raise ParameterError("%s must be positive" % name)
        if self.temperature <= 0:
            raise ParameterError("temperature must be > 0")
        if self.vocab_size < self.n_concepts:
            raise ParameterError("vocab_size must be >= n_concepts")
        if self.conv_width > self.sender_seq_len():
            raise ParameterError(
                "conv_width %d exceeds sender sequence length %d"
                % (self.conv_width, self.sender_seq_len()))

    def sender_inputs(self):
        """Number of feature vectors the sender observes."""
        return self.n_concepts if self.variant is Variant.SENDER_SEES_ALL else 1

    def sender_seq_len(self):
        return self.sender_inputs() * self.embed_dim

    def conv_out_len(self):
        return self.sender_seq_len() - self.conv_width + 1

    def flattened_conv_len(self):
        return self.conv_filters * self.conv_out_len()

    def to_dict(self):
        d = {f: getattr(self, f) for f in (
            "n_concepts", "vocab_size", "feature_dim", "embed_dim",
            "conv_filters", "conv_width", "temperature")}
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SenderParams:
    embed_weight: Tensor
    embed_bias: Tensor
    conv_kernels: Tensor
    conv_bias: Tensor
    out_weight: Tensor
    out_bias: Tensor

    def named(self):
        return {"sender." + k: getattr(self, k) for k in (
            "embed_weight", "embed_bias", "conv_kernels", "conv_bias",
            "out_weight", "out_bias")}

    def copy(self):
        return SenderParams(**{k.split(".", 1)[1]: t.copy()
                               for k, t in self.named().items()})


@dataclass
class ReceiverParams:
    image_embed_weight: Tensor
    image_embed_bias: Tensor
    symbol_embed_weight: Tensor
    symbol_embed_bias: Tensor

    def named(self):
        return {"receiver." + k: getattr(self, k) for k in (
            "image_embed_weight", "image_embed_bias",
            "symbol_embed_weight", "symbol_embed_bias")}

    def copy(self):
        return ReceiverParams(**{k.split(".", 1)[1]: t.copy()
                                 for k, t in self.named().items()})


def named_params(sender, receiver):
    d = dict(sender.named())
    d.update(receiver.named())
    return d


def _glorot(rng, shape, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-a, a, size=shape), requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_params(cfg, seed):
    """Glorot-uniform weights, zero biases; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    e, f, v = cfg.embed_dim, cfg.feature_dim, cfg.vocab_size
    c, w = cfg.conv_filters, cfg.conv_width
    flat = cfg.flattened_conv_len()
    sender = SenderParams(
        embed_weight=_glorot(rng, (e, f), f, e),
        embed_bias=_zeros(e),
        conv_kernels=_glorot(rng, (c, 1, w), w, c * w),
        conv_bias=_zeros(c),
        out_weight=_glorot(rng, (v, flat), flat, v),
        out_bias=_zeros(v),
    )
    receiver = ReceiverParams(
        image_embed_weight=_glorot(rng, (e, f), f, e),
        image_embed_bias=_zeros(e),
        symbol_embed_weight=_glorot(rng, (e, v), v, e),
        symbol_embed_bias=_zeros(e),
    )
    return sender, receiver


def sender_forward(tape, params, cfg, inputs, mode, rng=None,
                   temperature=None, noise=None):
    """Produce a symbol over the vocabulary from the sender's view.

    `inputs` holds K feature vectors (target first) or just the target,
    depending on the game variant. Returns (symbol, logits); in EVAL_HARD
    mode the symbol is the deterministic one-hot argmax of the logits
    (lowest index on ties) and no noise is drawn.
    """
    if len(inputs) != cfg.sender_inputs():
        raise ContractError(
            "sender expects %d input vectors for variant %s, got %d"
            % (cfg.sender_inputs(), cfg.variant.value, len(inputs)))
    embeds = [ad.linear(tape, ad.as_tensor(x), params.embed_weight,
                        params.embed_bias) for x in inputs]
    seq = ad.reshape(tape, ad.concat(tape, embeds), (1, cfg.sender_seq_len()))
    feature_maps = ad.sigmoid(
        tape, ad.conv1d(tape, seq, params.conv_kernels, params.conv_bias))
    flat = ad.reshape(tape, feature_maps, (cfg.flattened_conv_len(),))
    logits = ad.linear(tape, flat, params.out_weight, params.out_bias)
    if mode is Mode.EVAL_HARD:
        symbol = Tensor(ad.one_hot(int(np.argmax(logits.data)), cfg.vocab_size))
    else:
        tau = cfg.temperature if temperature is None else temperature
        symbol = ad.gumbel_softmax(tape, logits, tau, hard=False,
                                   rng=rng, noise=noise)
    return symbol, logits


def receiver_forward(tape, params, cfg, symbol, candidates):
    """Log-probabilities over the K candidates given the symbol."""
    if len(candidates) != cfg.n_concepts:
        raise ContractError("receiver expects %d candidates, got %d"
                            % (cfg.n_concepts, len(candidates)))
    sym_embed = ad.linear(tape, symbol, params.symbol_embed_weight,
                          params.symbol_embed_bias)
    scores = []
    for cand in candidates:
        emb = ad.linear(tape, ad.as_tensor(cand), params.image_embed_weight,
                        params.image_embed_bias)
        scores.append(ad.dot(tape, sym_embed, emb))
    return ad.log_softmax(tape, ad.concat(tape, scores))
