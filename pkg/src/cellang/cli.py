"""Command-line entry point: `gen-data`, `train` and `eval` subcommands.

Model hyperparameters live in a flat key=value config file; flags carry only
paths, seeds and episode counts. Every run directory receives a manifest
that reproduces the run bit-exactly when fed back as the config.
"""

import argparse
import sys
from pathlib import Path

from . import __version__
from .agents import GameConfig
from .analysis import build_report, export_symbol_distribution, write_report
from .data import (DEFAULT_COUNTS, DEFAULT_LABELS, SyntheticSpec,
                   generate_synthetic, load_table, save_table,
                   standardize, stratified_split)
from .errors import (CheckpointError, ConfigError, ContractError, DataError,
                     DimensionError, ParameterError, TrainingError)
from .training import (TrainConfig, evaluate, history_csv, load_checkpoint,
                       train)

_SPLIT_NAMES = ("train", "val", "test")

# key -> (section attribute name, converter); "none" means unset for the
# optional integer knobs.
_INT, _FLOAT, _STR = int, float, str


def _opt_int(s):
    return None if s.lower() == "none" else int(s)


def _bool(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError("expected a boolean")


_GAME_KEYS = {
    "n_concepts": _INT, "vocab_size": _INT, "feature_dim": _INT,
    "embed_dim": _INT, "conv_filters": _INT, "conv_width": _INT,
    "temperature": _FLOAT, "variant": _STR,
}
_TRAIN_KEYS = {
    "learning_rate": _FLOAT, "beta1": _FLOAT, "beta2": _FLOAT,
    "epsilon": _FLOAT, "batch_episodes": _INT, "episodes_per_epoch": _opt_int,
    "max_epochs": _INT, "early_stop_patience": _INT,
    "temp_decay_epochs": _INT, "temp_floor": _FLOAT, "eval_episodes": _INT,
    "seed": _INT, "init_seed": _opt_int, "episode_seed": _opt_int,
    "gumbel_seed": _opt_int, "val_seed": _opt_int,
}
_DATA_KEYS = {"split_seed": _INT, "standardize": _bool, "labels": _STR}


def parse_config_text(text, source="<config>"):
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("%s line %d: expected key=value, got %r"
                              % (source, lineno, line))
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    return kv


def resolve_configs(kv, source="<config>"):
    """Turn flat key=value pairs into (GameConfig, TrainConfig, data dict)."""
    sections = {"game": ({}, _GAME_KEYS), "train": ({}, _TRAIN_KEYS),
                "data": ({}, _DATA_KEYS)}
    for key, value in kv.items():
        prefix, _, name = key.partition(".")
        if prefix not in sections or not name:
            raise ConfigError("%s: unknown key %r" % (source, key))
        values, known = sections[prefix]
        if name not in known:
            raise ConfigError("%s: unknown key %r" % (source, key))
        try:
            values[name] = known[name](value)
        except (ValueError, TypeError):
            raise ConfigError("%s: bad value for key %r: %r"
                              % (source, key, value))
    game_kv, train_kv, data_kv = (sections[s][0] for s in ("game", "train", "data"))
    if "variant" not in game_kv:
        raise ConfigError("%s: missing required key 'game.variant'" % source)
    try:
        game_cfg = GameConfig(**game_kv)
        train_cfg = TrainConfig(**train_kv)
    except (ParameterError, ValueError) as exc:
        raise ConfigError("%s: %s" % (source, exc))
    data_cfg = {"split_seed": data_kv.get("split_seed", 0),
                "standardize": data_kv.get("standardize", True),
                "labels": ([s for s in data_kv["labels"].split(",") if s]
                           if "labels" in data_kv else None)}
    return game_cfg, train_cfg, data_cfg


def _manifest_lines(game_cfg, train_cfg, data_cfg):
    lines = []
    for key, value in game_cfg.to_dict().items():
        lines.append("game.%s=%s" % (key, value))
    resolved = dict(train_cfg.to_dict())
    resolved.update(train_cfg.resolved_seeds())
    for key, value in resolved.items():
        lines.append("train.%s=%s" % (key, "none" if value is None else value))
    lines.append("data.split_seed=%d" % data_cfg["split_seed"])
    lines.append("data.standardize=%s" % str(data_cfg["standardize"]).lower())
    if data_cfg["labels"]:
        lines.append("data.labels=%s" % ",".join(data_cfg["labels"]))
    return lines


def _write_manifest(path, header_pairs, config_lines):
    lines = ["# cellang %s" % __version__]
    lines += ["# %s=%s" % (k, v) for k, v in header_pairs]
    lines += config_lines
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _prepare_splits(data_path, game_cfg, data_cfg):
    dataset = load_table(data_path, concepts=data_cfg["labels"],
                         feature_dim=game_cfg.feature_dim)
    splits = stratified_split(dataset, seed=data_cfg["split_seed"])
    if data_cfg["standardize"]:
        splits = standardize(*splits)
    return splits


def cmd_gen_data(args):
    counts = tuple(int(v) for v in args.counts.split(","))
    labels = tuple(args.labels.split(","))
    try:
        spec = SyntheticSpec(n_per_class=counts, labels=labels,
                             class_separation=args.delta,
                             noise_sigma=args.sigma, seed=args.seed,
                             feature_dim=args.feature_dim)
    except DataError as exc:
        raise ConfigError(str(exc))
    dataset = generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_table(dataset, out)
    echo = ["counts=%s" % ",".join(str(c) for c in counts),
            "labels=%s" % ",".join(labels),
            "delta=%r" % args.delta, "sigma=%r" % args.sigma,
            "seed=%d" % args.seed, "feature_dim=%d" % args.feature_dim]
    Path(str(out) + ".spec").write_text("\n".join(echo) + "\n",
                                        encoding="utf-8")
    print("wrote %d records to %s" % (len(dataset), out))
    return 0


def cmd_train(args):
    text = Path(args.config).read_text(encoding="utf-8")
    game_cfg, train_cfg, data_cfg = resolve_configs(
        parse_config_text(text, args.config), args.config)
    train_split, val_split, _ = _prepare_splits(args.data, game_cfg, data_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out / "manifest.txt",
                    [("command", "train"), ("data", args.data)],
                    _manifest_lines(game_cfg, train_cfg, data_cfg))
    extra = {"data": {"split_seed": data_cfg["split_seed"],
                      "standardize": data_cfg["standardize"],
                      "labels": data_cfg["labels"]}}

    def log(row):
        if not args.quiet:
            print("epoch %3d  loss %.4f  val_acc %.3f" %
                  (row["epoch"], row["train_loss"], row["val_accuracy"]))

    _, _, history = train(train_split, val_split, game_cfg, train_cfg,
                          checkpoint_path=out / "checkpoint.npz",
                          resume_from=args.resume, log=log, extra_meta=extra)
    (out / "history.csv").write_text(history_csv(history), encoding="utf-8")
    print("best val accuracy: %.4f" % max(r["val_accuracy"] for r in history))
    return 0


def cmd_eval(args):
    state = load_checkpoint(args.checkpoint)
    game_cfg = state.game_cfg
    data_cfg = state.extra_meta.get("data")
    if data_cfg is None:
        raise CheckpointError("checkpoint carries no data configuration")
    splits = _prepare_splits(args.data, game_cfg,
                             {"split_seed": data_cfg["split_seed"],
                              "standardize": data_cfg["standardize"],
                              "labels": data_cfg.get("labels")})
    split = splits[_SPLIT_NAMES.index(args.split)]
    sender, receiver = state.best()
    outcomes = evaluate(sender, receiver, split, game_cfg,
                        args.episodes, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(outcomes, split.concept_set, game_cfg.vocab_size)
    write_report(report, out / "report.txt")
    export_symbol_distribution(outcomes, out / "symbols.csv",
                               labels=split.concept_set,
                               vocab_size=game_cfg.vocab_size)
    _write_manifest(out / "manifest.txt",
                    [("command", "eval"), ("checkpoint", args.checkpoint),
                     ("data", args.data), ("split", args.split),
                     ("episodes", args.episodes), ("seed", args.seed)],
                    [])
    print("accuracy %.4f  symbols used %.3f  MI %.3f bits"
          % (report.identification_accuracy, report.symbols_used_fraction,
             report.mutual_information_bits))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="cellang",
                     description="Two-agent signaling games over cell "
                                 "feature vectors.")
    parser.add_argument("--version", action="version",
                        version="cellang " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic feature table")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=5.0,
                   help="class separation")
    p.add_argument("--sigma", type=float, default=1.0, help="noise stddev")
    p.add_argument("--counts", default=",".join(str(c) for c in DEFAULT_COUNTS))
    p.add_argument("--labels", default=",".join(DEFAULT_LABELS))
    p.add_argument("--feature-dim", type=int, default=28)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train sender and receiver")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None,
                   help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and report "
                                    "language metrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=_SPLIT_NAMES, default="test")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 2
    except (TrainingError, CheckpointError, DimensionError, ContractError,
            ParameterError, OSError) as exc:
        print("runtime error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
