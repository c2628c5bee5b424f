"""Command-line entry point.

Subcommands: synth | split | train | eval | predict | fewshot | sweep |
gradcheck | dump-embeddings. Configuration resolves in precedence order
preset < config file < command-line flags, and every run writes the fully
resolved configuration to ``<out>/resolved_config.json``. The environment
variable ``ZSRE_LOG`` (error|info|debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation
from .dataset import (
    SyntheticConfig,
    generate_synthetic,
    load_instances,
    load_relations,
    load_split,
    make_zero_shot_split,
    save_instances,
    save_relations,
    save_split,
)
from .encoding import attribute_matrix, load_hidden_states
from .inference import build_relation_index, embed_new_sentence, predict
from .optim import (
    PRESETS,
    CheckpointError,
    TrainConfig,
    TrainingError,
    grad_check,
    init_encoder_params,
    init_head_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .encoding import build_vocab
from .optim import ModelParams
from .validation import ConfigError, DatasetError

log = logging.getLogger("zsre")

DIST_FLAGS = {"nip": "neg_inner_product", "euclid": "euclidean", "cosine": "cosine"}


@dataclass
class RunConfig:
    """Fully resolved run configuration: paths, hyperparameters, protocol."""

    preset: str = "desk"
    instances: str | None = None
    relations: str | None = None
    out_dir: str | None = None
    split: str | None = None
    hidden_states: str | None = None
    learning_rate: float = 1e-3
    batch_size: int = 4
    gamma: float = 7.5
    alpha: float = 0.4
    epochs: int = 50
    seed: int = 0
    hidden_size: int = 32
    attr_dim: int = 64
    dist_kind: str = "neg_inner_product"
    encoder_trainable: bool = True
    mixing_layer: bool = False
    description_mode: str = "identity"
    clip_grad: float = 0.0
    m: int = 5
    repeats: int = 5
    fractions: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1])
    sweep_axis: str | None = None
    sweep_values: list | None = None
    jobs: int = 1

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            gamma=self.gamma, alpha=self.alpha, epochs=self.epochs,
            seed=self.seed, hidden_size=self.hidden_size, attr_dim=self.attr_dim,
            dist_kind=self.dist_kind, encoder_trainable=self.encoder_trainable,
            mixing_layer=self.mixing_layer, description_mode=self.description_mode,
            clip_grad=self.clip_grad,
        )


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def read_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path}: expected a JSON object")
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"config file {path}: unknown keys {unknown}")
    return raw


def resolve_config(file_values: dict, flag_values: dict | None = None) -> RunConfig:
    """Merge preset defaults, config-file values, and flag overrides."""
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None}
    preset = flag_values.get("preset") or file_values.get("preset") or "desk"
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    merged: dict = {"preset": preset, **PRESETS[preset]}
    merged.update({k: v for k, v in file_values.items() if k != "preset"})
    merged.update({k: v for k, v in flag_values.items() if k != "preset"})
    config = RunConfig(**merged)
    config.train_config()  # validates numeric ranges early
    if config.repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {config.repeats}")
    if config.m < 1:
        raise ConfigError(f"m must be >= 1, got {config.m}")
    return config


def load_config(path) -> RunConfig:
    """Read a config file and apply preset defaults (no flag overrides)."""
    return resolve_config(read_config_file(path))


def _setup_logging() -> None:
    level = os.environ.get("ZSRE_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"ZSRE_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s")


def _out_dir(config: RunConfig, required: bool = True) -> Path | None:
    if config.out_dir is None:
        if required:
            raise ConfigError("an output directory is required (--out or config out_dir)")
        return None
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(config: RunConfig, out: Path | None) -> None:
    if out is not None:
        (out / "resolved_config.json").write_text(
            json.dumps(asdict(config), indent=2) + "\n", encoding="utf-8"
        )


def _load_corpus(config: RunConfig):
    if not config.instances or not config.relations:
        raise ConfigError("both instances and relations paths are required")
    instances = load_instances(config.instances)
    relations = load_relations(config.relations)
    return instances, relations


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", choices=sorted(PRESETS))
    parser.add_argument("--instances", help="instances JSONL path")
    parser.add_argument("--relations", help="relations JSONL path")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--split", help="split JSON path")
    parser.add_argument("--hidden-states", dest="hidden_states",
                        help="precomputed hidden-state JSONL path")
    parser.add_argument("--lr", dest="learning_rate", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--hidden-size", dest="hidden_size", type=int)
    parser.add_argument("--attr-dim", dest="attr_dim", type=int)
    parser.add_argument("--dist", dest="dist_kind", choices=sorted(DIST_FLAGS),
                        help="distance function: nip | euclid | cosine")
    parser.add_argument("--description-mode", dest="description_mode",
                        choices=("precomputed", "hashed", "identity"))
    parser.add_argument("--m", type=int, help="number of unseen relations")
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--jobs", type=int, help="parallel repeats (default 1)")


def _flags_dict(args: argparse.Namespace) -> dict:
    keys = _CONFIG_FIELDS & set(vars(args))
    flags = {k: getattr(args, k) for k in keys}
    if flags.get("dist_kind") in DIST_FLAGS:
        flags["dist_kind"] = DIST_FLAGS[flags["dist_kind"]]
    return flags


def _resolve_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    return resolve_config(file_values, _flags_dict(args))


def _get_split(config: RunConfig, instances, relations, out: Path | None):
    if config.split:
        return load_split(config.split)
    split = make_zero_shot_split(instances, relations, config.m, config.seed)
    if out is not None:
        save_split(split, out / "split.json")
    return split


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = SyntheticConfig(
        n_relations=args.relations, instances_per_relation=args.per_relation,
        vocab_size=args.vocab_size, d_attr=args.attr_dim,
        noise_scale=args.noise, seed=args.seed,
    )
    instances, relations = generate_synthetic(config)
    save_instances(instances, out / "instances.jsonl")
    save_relations(relations, out / "relations.jsonl")
    (out / "resolved_config.json").write_text(
        json.dumps({"command": "synth", **asdict(config)}, indent=2) + "\n",
        encoding="utf-8",
    )
    log.info("wrote %d instances and %d relations to %s",
             len(instances), len(relations), out)
    return 0


def cmd_split(args) -> int:
    config = _resolve_from_args(args)
    out = _out_dir(config)
    instances, relations = _load_corpus(config)
    split = make_zero_shot_split(instances, relations, config.m, config.seed)
    save_split(split, out / "split.json")
    _write_resolved(config, out)
    log.info("split: %d seen, %d unseen, %d train, %d test",
             len(split.seen_ids), len(split.unseen_ids),
             len(split.train_idx), len(split.test_idx))
    return 0


def cmd_train(args) -> int:
    config = _resolve_from_args(args)
    out = _out_dir(config)
    instances, relations = _load_corpus(config)
    split = _get_split(config, instances, relations, out)
    hidden_lookup = load_hidden_states(config.hidden_states) if config.hidden_states else None
    params, history = train(
        instances, relations, split, config.train_config(),
        hidden_lookup=hidden_lookup, log_path=out / "train_log.jsonl",
    )
    save_checkpoint(params, params.vocab, config.train_config(), out / "checkpoint.json")
    _write_resolved(config, out)
    final = history.epochs[-1].total if history.epochs else float("nan")
    log.info("trained %d epochs; final epoch loss %.6f; checkpoint at %s",
             len(history.epochs), final, out / "checkpoint.json")
    return 0


def cmd_eval(args) -> int:
    config = _resolve_from_args(args)
    out = _out_dir(config)
    instances, relations = _load_corpus(config)
    report = evaluation.run_experiment(
        instances, relations, config.train_config(), config.m,
        repeats=config.repeats, jobs=config.jobs,
    )
    evaluation.write_report(report, out / "report.json")
    _write_resolved(config, out)
    log.info("mean macro F1 over %d repeats: %.4f (std %.4f)",
             config.repeats, report.mean_macro_f1, report.std_macro_f1)
    return 0


def cmd_predict(args) -> int:
    params, ckpt_config = load_checkpoint(args.checkpoint)
    relations = load_relations(args.relations)
    instances = load_instances(args.input)
    dist_kind = DIST_FLAGS[args.dist]
    index = build_relation_index(
        relations, list(relations), ckpt_config.description_mode,
        ckpt_config.attr_dim, dist_kind,
    )
    lines = []
    for i, inst in enumerate(instances):
        a_hat = embed_new_sentence(inst, params.vocab, params.encoder, params.head)
        pred = predict(a_hat, index)
        lines.append(json.dumps({
            "index": i,
            "predicted": pred.relation_id,
            "ranking": [[rel_id, dist] for rel_id, dist in pred.ranking],
        }))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "predictions.jsonl").write_text(text, encoding="utf-8")
        log.info("wrote %d predictions to %s", len(lines), out / "predictions.jsonl")
    else:
        sys.stdout.write(text)
    return 0


def cmd_fewshot(args) -> int:
    config = _resolve_from_args(args)
    if args.fractions:
        config.fractions = args.fractions
    out = _out_dir(config)
    instances, relations = _load_corpus(config)
    rows = evaluation.run_fewshot_curve(
        instances, relations, config.train_config(), config.m,
        config.fractions, repeats=config.repeats,
    )
    evaluation.write_sweep_csv(rows, out / "fewshot_curve.csv", value_name="fraction")
    _write_resolved(config, out)
    for row in rows:
        log.info("fraction %.3f: mean macro F1 %.4f", row["fraction"], row["mean_macro_f1"])
    return 0


def cmd_sweep(args) -> int:
    config = _resolve_from_args(args)
    axis = args.axis or config.sweep_axis
    values = args.values or config.sweep_values
    if not axis or not values:
        raise ConfigError("sweep needs an axis and at least one value")
    if axis in ("gamma", "alpha"):
        values = [float(v) for v in values]
    else:
        values = [DIST_FLAGS.get(str(v), str(v)) for v in values]
    config.sweep_axis, config.sweep_values = axis, values
    out = _out_dir(config)
    instances, relations = _load_corpus(config)
    rows = evaluation.run_sweep(
        instances, relations, config.train_config(), axis, values,
        config.m, repeats=config.repeats,
    )
    evaluation.write_sweep_csv(rows, out / f"sweep_{axis}.csv")
    _write_resolved(config, out)
    for row in rows:
        log.info("%s=%s: mean macro F1 %.4f", axis, row["value"], row["mean_macro_f1"])
    return 0


def cmd_gradcheck(args) -> int:
    config = _resolve_from_args(args)
    out = _out_dir(config, required=False)
    instances, relations = _load_corpus(config)
    split = _get_split(config, instances, relations, out)
    train_config = config.train_config()

    train_instances = [instances[i] for i in split.train_idx[:config.batch_size]]
    vocab = build_vocab([instances[i] for i in split.train_idx])
    encoder = init_encoder_params(vocab, train_config.hidden_size, train_config.seed,
                                  mixing=train_config.mixing_layer)
    classes = tuple(sorted({instances[i].relation_id for i in split.train_idx}))
    head = init_head_params(train_config.hidden_size, train_config.attr_dim,
                            len(classes), train_config.seed)
    params = ModelParams(vocab=vocab, encoder=encoder, head=head, classes=classes)
    attrs_all = attribute_matrix(relations, classes, train_config.description_mode,
                                 train_config.attr_dim)
    labels = np.array([classes.index(inst.relation_id) for inst in train_instances])
    report = grad_check(
        params, train_instances, attrs_all[labels], labels, train_config,
        h=args.h, tol=args.tol, seed=train_config.seed,
    )
    print(f"{'tensor':<12} {'max_rel_error':>14} {'checked':>8} {'skipped':>8}")
    for name, check in sorted(report.per_tensor.items()):
        print(f"{name:<12} {check.max_rel_error:>14.3e} {check.n_checked:>8} {check.n_skipped:>8}")
    print(f"overall max relative error {report.max_rel_error:.3e} "
          f"(tol {report.tol:.1e}) -> {'PASS' if report.passed else 'FAIL'}")
    if out is not None:
        _write_resolved(config, out)
    return 0 if report.passed else 1


def cmd_dump_embeddings(args) -> int:
    instances = load_instances(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.dump_embeddings(args.checkpoint, instances, out / "embeddings.jsonl")
    log.info("wrote %d embeddings to %s", len(instances), out / "embeddings.jsonl")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsre",
        description="zero-shot relation extraction: train, evaluate, predict",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic separable corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--relations", type=int, default=12, help="number of relations")
    p.add_argument("--per-relation", type=int, default=50, dest="per_relation")
    p.add_argument("--vocab-size", type=int, default=96, dest="vocab_size")
    p.add_argument("--attr-dim", type=int, default=64, dest="attr_dim")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    for name, func, extra in (
        ("split", cmd_split, None),
        ("train", cmd_train, None),
        ("eval", cmd_eval, None),
        ("fewshot", cmd_fewshot, "fractions"),
        ("sweep", cmd_sweep, "sweep"),
        ("gradcheck", cmd_gradcheck, "gradcheck"),
    ):
        p = sub.add_parser(name)
        _add_override_flags(p)
        if extra == "fractions":
            p.add_argument("--fractions", type=float, nargs="+")
        elif extra == "sweep":
            p.add_argument("--axis", choices=("gamma", "alpha", "dist"))
            p.add_argument("--values", nargs="+")
        elif extra == "gradcheck":
            p.add_argument("--h", type=float, default=1e-5)
            p.add_argument("--tol", type=float, default=1e-4)
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="nearest-neighbor prediction from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--relations", required=True, help="candidate relations JSONL")
    p.add_argument("--input", required=True, help="instances JSONL")
    p.add_argument("--dist", choices=sorted(DIST_FLAGS), default="nip")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("dump-embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_embeddings)

    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, DatasetError, TrainingError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
