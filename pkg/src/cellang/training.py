"""End-to-end optimization: Adam, the training loop, evaluation and
single-file checkpointing with bit-exact resume."""

import json
import os
from dataclasses import dataclass

import numpy as np

from .agents import GameConfig, Mode, init_params, named_params
from .autodiff import backward
from .errors import CheckpointError, ContractError, ParameterError, TrainingError
from .game import play_round, sample_episode

CHECKPOINT_VERSION = 1
HISTORY_HEADER = "epoch,train_loss,val_accuracy,temperature"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_episodes: int = 32
    episodes_per_epoch: int = None  # None -> size of the training split
    max_epochs: int = 200
    early_stop_patience: int = 20
    temp_decay_epochs: int = 0  # 0 -> constant temperature
    temp_floor: float = 0.5
    eval_episodes: int = 200
    seed: int = 0
    init_seed: int = None
    episode_seed: int = None
    gumbel_seed: int = None
    val_seed: int = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ParameterError("beta1/beta2 must lie in (0, 1)")
        if self.batch_episodes < 1:
            raise ParameterError("batch_episodes must be >= 1")

    def resolved_seeds(self):
        """Named RNG seeds; unset ones are derived from the master seed."""
        derived = np.random.SeedSequence(self.seed).generate_state(4)
        names = ("init_seed", "episode_seed", "gumbel_seed", "val_seed")
        return {n: int(derived[i]) if getattr(self, n) is None
                else getattr(self, n) for i, n in enumerate(names)}

    def temperature_at(self, epoch, start):
        if self.temp_decay_epochs <= 0:
            return start
        frac = min(epoch / self.temp_decay_epochs, 1.0)
        return max(self.temp_floor, start - (start - self.temp_floor) * frac)

    def to_dict(self):
        return {f: getattr(self, f) for f in (
            "learning_rate", "beta1", "beta2", "epsilon", "batch_episodes",
            "episodes_per_epoch", "max_epochs", "early_stop_patience",
            "temp_decay_epochs", "temp_floor", "eval_episodes", "seed",
            "init_seed", "episode_seed", "gumbel_seed", "val_seed")}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Adam:
    """Adam with bias correction over a name -> Tensor parameter dict."""

    def __init__(self, params, cfg):
        self.params = params
        self.cfg = cfg
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self, grad_scale=1.0):
        c = self.cfg
        self.step_count += 1
        t = self.step_count
        for k, p in self.params.items():
            if p.grad is None:
                raise TrainingError("parameter %s has no gradient" % k)
            g = p.grad * grad_scale
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient in %s" % k)
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            m_hat = self.m[k] / (1 - c.beta1 ** t)
            v_hat = self.v[k] / (1 - c.beta2 ** t)
            p.data -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)

    def state_dict(self):
        return {"step": self.step_count,
                "m": {k: v.copy() for k, v in self.m.items()},
                "v": {k: v.copy() for k, v in self.v.items()}}

    def load_state_dict(self, state):
        self.step_count = state["step"]
        for k in self.m:
            self.m[k] = state["m"][k].copy()
            self.v[k] = state["v"][k].copy()


def evaluate(sender, receiver, split, game_cfg, n_episodes, seed):
    """Play n_episodes deterministic (hard-symbol) rounds; returns outcomes."""
    rng = np.random.default_rng(seed)
    outcomes = []
    for _ in range(n_episodes):
        episode = sample_episode(split, game_cfg, rng)
        outcome, _, _ = play_round(episode, sender, receiver, game_cfg,
                                   None, Mode.EVAL_HARD)
        outcomes.append(outcome)
    return outcomes


def accuracy_of(outcomes):
    if not outcomes:
        raise ContractError("empty outcome list")
    return sum(o.correct for o in outcomes) / len(outcomes)


def history_csv(history):
    lines = [HISTORY_HEADER]
    for row in history:
        lines.append("%d,%r,%r,%r" % (row["epoch"], row["train_loss"],
                                      row["val_accuracy"], row["temperature"]))
    return "\n".join(lines) + "\n"


def _rng_state(rng):
    return rng.bit_generator.state


def _rng_from_state(state):
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng


class TrainState:
    """Everything needed to continue training bit-exactly."""

    def __init__(self, game_cfg, train_cfg, train_size, extra_meta=None):
        self.game_cfg = game_cfg
        self.train_cfg = train_cfg
        self.extra_meta = extra_meta or {}
        seeds = train_cfg.resolved_seeds()
        self.seeds = seeds
        self.sender, self.receiver = init_params(game_cfg, seeds["init_seed"])
        self.optimizer = Adam(named_params(self.sender, self.receiver), train_cfg)
        self.episode_rng = np.random.default_rng(seeds["episode_seed"])
        self.gumbel_rng = np.random.default_rng(seeds["gumbel_seed"])
        self.epoch = 0
        self.history = []
        self.best_val_accuracy = -1.0
        self.best_sender = None
        self.best_receiver = None
        self.stale_epochs = 0
        self.episodes_per_epoch = (train_cfg.episodes_per_epoch
                                   if train_cfg.episodes_per_epoch is not None
                                   else train_size)

    def best(self):
        if self.best_sender is None:
            return self.sender, self.receiver
        return self.best_sender, self.best_receiver


def train(train_split, val_split, game_cfg, train_cfg,
          checkpoint_path=None, resume_from=None, log=None, extra_meta=None):
    """Optimize the agents on the training split.

    Keeps the parameters with the best validation accuracy (hard-symbol
    evaluation); stops at max_epochs or after early_stop_patience epochs
    without improvement. Returns (best sender, best receiver, history).
    """
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        # The caller's config governs loop control (e.g. a raised
        # max_epochs); saved seeds and RNG states still rule the run.
        if train_cfg is not None:
            state.train_cfg = train_cfg
    else:
        state = TrainState(game_cfg, train_cfg, len(train_split),
                           extra_meta=extra_meta)
    cfg, tcfg = state.game_cfg, state.train_cfg
    while state.epoch < tcfg.max_epochs:
        tau = tcfg.temperature_at(state.epoch, cfg.temperature)
        losses = []
        remaining = state.episodes_per_epoch
        while remaining > 0:
            batch = min(tcfg.batch_episodes, remaining)
            remaining -= batch
            state.optimizer.zero_grad()
            for _ in range(batch):
                episode = sample_episode(train_split, cfg, state.episode_rng)
                outcome, tape, loss = play_round(
                    episode, state.sender, state.receiver, cfg,
                    state.gumbel_rng, Mode.TRAIN_SOFT, temperature=tau)
                if not np.isfinite(outcome.loss):
                    if checkpoint_path is not None:
                        save_checkpoint(checkpoint_path, state)
                    raise TrainingError("non-finite loss at epoch %d"
                                        % state.epoch)
                backward(tape, loss)
                losses.append(outcome.loss)
            state.optimizer.step(grad_scale=1.0 / batch)
        val_outcomes = evaluate(state.sender, state.receiver, val_split, cfg,
                                tcfg.eval_episodes, state.seeds["val_seed"])
        val_acc = accuracy_of(val_outcomes)
        row = {"epoch": state.epoch, "train_loss": float(np.mean(losses)),
               "val_accuracy": val_acc, "temperature": tau}
        state.history.append(row)
        if log is not None:
            log(row)
        if val_acc > state.best_val_accuracy:
            state.best_val_accuracy = val_acc
            state.best_sender = state.sender.copy()
            state.best_receiver = state.receiver.copy()
            state.stale_epochs = 0
        else:
            state.stale_epochs += 1
        state.epoch += 1
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, state)
        if state.stale_epochs >= tcfg.early_stop_patience:
            break
    sender, receiver = state.best()
    return sender, receiver, state.history


def _params_to_arrays(prefix, params):
    return {prefix + k: t.data for k, t in params.named().items()}


def save_checkpoint(path, state):
    """Single-file .npz container: named little-endian float64 arrays plus a
    JSON metadata blob under the 'meta' key."""
    arrays = {}
    arrays.update(_params_to_arrays("cur/", state.sender))
    arrays.update(_params_to_arrays("cur/", state.receiver))
    if state.best_sender is not None:
        arrays.update(_params_to_arrays("best/", state.best_sender))
        arrays.update(_params_to_arrays("best/", state.best_receiver))
    opt = state.optimizer.state_dict()
    for k, v in opt["m"].items():
        arrays["adam_m/" + k] = v
    for k, v in opt["v"].items():
        arrays["adam_v/" + k] = v
    meta = {
        "version": CHECKPOINT_VERSION,
        "game_cfg": state.game_cfg.to_dict(),
        "train_cfg": state.train_cfg.to_dict(),
        "seeds": state.seeds,
        "epoch": state.epoch,
        "history": state.history,
        "best_val_accuracy": state.best_val_accuracy,
        "has_best": state.best_sender is not None,
        "stale_epochs": state.stale_epochs,
        "episodes_per_epoch": state.episodes_per_epoch,
        "extra": state.extra_meta,
        "adam_step": opt["step"],
        "episode_rng": _rng_state(state.episode_rng),
        "gumbel_rng": _rng_state(state.gumbel_rng),
    }
    arrays["meta"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def _assign_params(params, arrays, prefix):
    for k, t in params.named().items():
        key = prefix + k
        if key not in arrays:
            raise CheckpointError("checkpoint is missing array %r" % key)
        t.data = np.array(arrays[key], dtype=np.float64)


def load_checkpoint(path):
    """Rebuild a TrainState; resuming from it continues training bit-exactly."""
    try:
        with np.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files}
    except Exception as exc:
        raise CheckpointError("cannot read checkpoint %s: %s" % (path, exc))
    if "meta" not in arrays:
        raise CheckpointError("checkpoint %s has no metadata" % path)
    meta = json.loads(bytes(arrays["meta"].tobytes()).decode("utf-8"))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError("unsupported checkpoint version %r"
                              % meta.get("version"))
    game_cfg = GameConfig.from_dict(meta["game_cfg"])
    train_cfg = TrainConfig.from_dict(meta["train_cfg"])
    state = TrainState(game_cfg, train_cfg, meta["episodes_per_epoch"],
                       extra_meta=meta.get("extra"))
    state.seeds = meta["seeds"]
    state.episodes_per_epoch = meta["episodes_per_epoch"]
    _assign_params(state.sender, arrays, "cur/")
    _assign_params(state.receiver, arrays, "cur/")
    if meta["has_best"]:
        state.best_sender = state.sender.copy()
        state.best_receiver = state.receiver.copy()
        _assign_params(state.best_sender, arrays, "best/")
        _assign_params(state.best_receiver, arrays, "best/")
    opt_state = {"step": meta["adam_step"],
                 "m": {k: arrays["adam_m/" + k] for k in state.optimizer.m},
                 "v": {k: arrays["adam_v/" + k] for k in state.optimizer.v}}
    try:
        state.optimizer.load_state_dict(opt_state)
    except KeyError as exc:
        raise CheckpointError("checkpoint is missing optimizer state %s" % exc)
    state.episode_rng = _rng_from_state(meta["episode_rng"])
    state.gumbel_rng = _rng_from_state(meta["gumbel_rng"])
    state.epoch = meta["epoch"]
    state.history = meta["history"]
    state.best_val_accuracy = meta["best_val_accuracy"]
    state.stale_epochs = meta["stale_epochs"]
    return state
