"""Metrics and the repeated zero-shot / few-shot / sweep protocols.

Macro precision/recall/F1 (unweighted mean over unseen relations with test
support) are the headline numbers; micro values are also reported. Each
experiment repeat derives its split and training seed as ``base_seed + r`` so
any single repeat can be replayed in isolation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import SplitSpec, make_few_shot_split, make_zero_shot_split
from .inference import build_relation_index, embed_new_sentence, predict
from .optim import ModelParams, TrainConfig, load_checkpoint, train
from .validation import ConfigError, DatasetError


@dataclass(frozen=True)
class RelationScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    per_relation: dict[str, RelationScore]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def to_dict(self) -> dict:
        return {
            "per_relation": {
                rel: vars(score) for rel, score in self.per_relation.items()
            },
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
        }


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def compute_metrics(gold, pred, unseen_ids) -> Metrics:
    """Per-relation confusion counts and macro/micro averages.

    Macro averages run over unseen relations with test support > 0; relations
    never appearing as gold are excluded even if they were predicted.
    """
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise DatasetError(f"gold ({len(gold)}) and pred ({len(pred)}) lengths differ")
    unseen = set(unseen_ids)
    outside = [g for g in gold if g not in unseen]
    if outside:
        raise DatasetError(f"gold label {outside[0]!r} is not in the unseen set")

    counts = {rel: [0, 0, 0] for rel in sorted(unseen)}  # tp, fp, fn
    for g, p in zip(gold, pred):
        if g == p:
            counts[g][0] += 1
        else:
            counts[g][2] += 1
            if p in counts:
                counts[p][1] += 1

    support = {rel: sum(1 for g in gold if g == rel) for rel in counts}
    per_relation = {}
    for rel, (tp, fp, fn) in counts.items():
        p, r, f1 = _prf(tp, fp, fn)
        per_relation[rel] = RelationScore(tp=tp, fp=fp, fn=fn, precision=p,
                                          recall=r, f1=f1, support=support[rel])
    present = [rel for rel in per_relation if support[rel] > 0]
    if not present:
        raise DatasetError("no unseen relation has test support")
    macro_p = float(np.mean([per_relation[r].precision for r in present]))
    macro_r = float(np.mean([per_relation[r].recall for r in present]))
    macro_f1 = float(np.mean([per_relation[r].f1 for r in present]))

    tp_total = sum(c[0] for c in counts.values())
    fp_total = sum(c[1] for c in counts.values())
    fn_total = sum(c[2] for c in counts.values())
    micro_p, micro_r, micro_f1 = _prf(tp_total, fp_total, fn_total)
    return Metrics(
        per_relation=per_relation,
        macro_precision=macro_p, macro_recall=macro_r, macro_f1=macro_f1,
        micro_precision=micro_p, micro_recall=micro_r, micro_f1=micro_f1,
    )


@dataclass
class ExperimentReport:
    repeats: list[Metrics]
    split_seeds: tuple[int, ...]
    m: int
    mean_macro_precision: float
    mean_macro_recall: float
    mean_macro_f1: float
    std_macro_f1: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "split_seeds": list(self.split_seeds),
            "mean_macro_precision": self.mean_macro_precision,
            "mean_macro_recall": self.mean_macro_recall,
            "mean_macro_f1": self.mean_macro_f1,
            "std_macro_f1": self.std_macro_f1,
            "config": self.config,
            "repeats": [m.to_dict() for m in self.repeats],
        }


def evaluate_split(instances, relations, split: SplitSpec, config: TrainConfig,
                   *, hidden_lookup=None):
    """Train on the split and score zero-shot predictions on its test side."""
    params, history = train(
        instances, relations, split, config, hidden_lookup=hidden_lookup
    )
    metrics = score_model(instances, relations, split, params, config)
    return metrics, params, history


def score_model(instances, relations, split: SplitSpec, params: ModelParams,
                config: TrainConfig) -> Metrics:
    index = build_relation_index(
        relations, sorted(split.unseen_ids), config.description_mode,
        config.attr_dim, config.dist_kind,
    )
    gold, pred = [], []
    for i in split.test_idx:
        inst = instances[i]
        a_hat = embed_new_sentence(inst, params.vocab, params.encoder, params.head)
        gold.append(inst.relation_id)
        pred.append(predict(a_hat, index).relation_id)
    return compute_metrics(gold, pred, split.unseen_ids)


def run_single_repeat(instances, relations, config: TrainConfig, m: int,
                      seed: int, fraction: float = 0.0) -> Metrics:
    """One repeat of the protocol: split, (optionally) move few-shot data, train, score."""
    split = make_zero_shot_split(instances, relations, m, seed)
    if fraction > 0.0:
        split = make_few_shot_split(split, instances, fraction, seed)
    repeat_config = replace(config, seed=seed)
    metrics, _, _ = evaluate_split(instances, relations, split, repeat_config)
    return metrics


def _aggregate(repeats: list[Metrics], seeds, m: int, config: TrainConfig) -> ExperimentReport:
    f1s = [met.macro_f1 for met in repeats]
    return ExperimentReport(
        repeats=repeats,
        split_seeds=tuple(seeds),
        m=m,
        mean_macro_precision=float(np.mean([met.macro_precision for met in repeats])),
        mean_macro_recall=float(np.mean([met.macro_recall for met in repeats])),
        mean_macro_f1=float(np.mean(f1s)),
        std_macro_f1=float(np.std(f1s)),
        config=vars(config).copy(),
    )


def run_experiment(instances, relations, config: TrainConfig, m: int,
                   repeats: int = 5, jobs: int = 1) -> ExperimentReport:
    """Repeat the zero-shot protocol with split seeds base_seed + r."""
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    seeds = [config.seed + r for r in range(repeats)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(
                _repeat_worker,
                [(instances, relations, config, m, s) for s in seeds],
            ))
    else:
        metrics = [run_single_repeat(instances, relations, config, m, s) for s in seeds]
    return _aggregate(metrics, seeds, m, config)


def _repeat_worker(args):
    instances, relations, config, m, seed = args
    return run_single_repeat(instances, relations, config, m, seed)


def run_fewshot_curve(instances, relations, config: TrainConfig, m: int,
                      fractions, repeats: int = 5) -> list[dict]:
    """Mean macro F1 as a function of the fraction of unseen data made trainable.

    Fraction 0.0 is the plain zero-shot protocol; positive fractions move the
    sampled instances into training (the classifier head grows accordingly)
    and evaluate on the reduced test set.
    """
    fractions = list(fractions)
    if fractions != sorted(fractions):
        raise ConfigError("fractions must be sorted ascending")
    if any(not (0.0 <= f < 1.0) for f in fractions):
        raise ConfigError("each fraction must be in [0, 1)")
    rows = []
    for fraction in fractions:
        per_repeat = [
            run_single_repeat(instances, relations, config, m, config.seed + r, fraction)
            for r in range(repeats)
        ]
        f1s = [met.macro_f1 for met in per_repeat]
        rows.append({
            "fraction": float(fraction),
            "mean_macro_f1": float(np.mean(f1s)),
            "std_macro_f1": float(np.std(f1s)),
        })
    return rows


SWEEP_AXES = ("gamma", "alpha", "dist")


def run_sweep(instances, relations, config: TrainConfig, axis: str, values,
              m: int, repeats: int = 5) -> list[dict]:
    """Re-run the protocol varying one hyperparameter (gamma, alpha, or dist)."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for value in values:
        if axis == "gamma":
            cfg = replace(config, gamma=float(value))
        elif axis == "alpha":
            cfg = replace(config, alpha=float(value))
        else:
            cfg = replace(config, dist_kind=str(value))
        report = run_experiment(instances, relations, cfg, m, repeats)
        rows.append({
            "value": value,
            "mean_macro_f1": report.mean_macro_f1,
            "std_macro_f1": report.std_macro_f1,
        })
    return rows


def write_sweep_csv(rows, path, value_name: str = "value") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([value_name, "mean_macro_F1", "std_macro_F1"])
        for row in rows:
            key = "fraction" if "fraction" in row else "value"
            writer.writerow([row[key], row["mean_macro_f1"], row["std_macro_f1"]])


def dump_embeddings(checkpoint_path, instances, path) -> None:
    """Emit one JSONL record per instance with its trained sentence embedding."""
    params, _config = load_checkpoint(checkpoint_path)
    with open(path, "w", encoding="utf-8") as fh:
        for i, inst in enumerate(instances):
            a_hat = embed_new_sentence(inst, params.vocab, params.encoder, params.head)
            fh.write(json.dumps({
                "index": i,
                "relation": inst.relation_id,
                "embedding": a_hat.tolist(),
            }) + "\n")


def write_report(report: ExperimentReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
