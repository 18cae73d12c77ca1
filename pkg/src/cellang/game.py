"""Episode sampling and single-round play of the referential game."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .agents import Mode, Variant, receiver_forward, sender_forward
from .errors import ContractError, DataError


@dataclass
class Episode:
    """K candidate records (one per concept), a target, and the order in
    which the receiver will see the candidates."""
    candidates: list
    target_index: int
    receiver_permutation: np.ndarray


@dataclass
class RoundOutcome:
    loss: float
    receiver_guess: int
    correct: bool
    symbol_index: int
    target_label: str


def sample_episode(split, cfg, rng):
    """Draw one record per concept, a uniform target and a uniform
    permutation of the candidate slots shown to the receiver."""
    if len(split.concept_set) != cfg.n_concepts:
        raise ContractError("split has %d concepts, config expects %d"
                            % (len(split.concept_set), cfg.n_concepts))
    candidates = []
    for label in split.concept_set:
        pool = split.by_label(label)
        if not pool:
            raise DataError("concept %r has no records in this split" % label)
        candidates.append(pool[rng.integers(len(pool))])
    target = int(rng.integers(cfg.n_concepts))
    perm = rng.permutation(cfg.n_concepts)
    return Episode(candidates, target, perm)


def play_round(episode, sender, receiver, cfg, rng, mode,
               temperature=None, noise=None):
    """Play one round; returns (outcome, tape, loss tensor).

    The sender sees the candidates target-first (SENDER_SEES_ALL) or the
    target alone; the receiver sees the candidates under the episode's
    permutation and must point at the target's permuted position.
    """
    tape = ad.Tape()
    t = episode.target_index
    feats = [r.features for r in episode.candidates]
    if cfg.variant is Variant.SENDER_SEES_ALL:
        order = [t] + [i for i in range(cfg.n_concepts) if i != t]
        sender_in = [feats[i] for i in order]
    else:
        sender_in = [feats[t]]
    symbol, _logits = sender_forward(tape, sender, cfg, sender_in, mode,
                                     rng=rng, temperature=temperature,
                                     noise=noise)
    perm = episode.receiver_permutation
    recv_in = [feats[perm[i]] for i in range(cfg.n_concepts)]
    log_probs = receiver_forward(tape, receiver, cfg, symbol, recv_in)
    target_pos = int(np.nonzero(perm == t)[0][0])
    loss = ad.nll_loss(tape, log_probs, target_pos)
    guess = int(np.argmax(log_probs.data))
    outcome = RoundOutcome(
        loss=float(loss.data[0]),
        receiver_guess=guess,
        correct=guess == target_pos,
        symbol_index=int(np.argmax(symbol.data)),
        target_label=episode.candidates[t].label,
    )
    return outcome, tape, loss
