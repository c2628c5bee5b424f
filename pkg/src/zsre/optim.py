"""Adam, the training loop, gradient checking, and checkpoint persistence."""

from __future__ import annotations

import base64
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Instance, SplitSpec
from .encoding import (
    EncoderParams,
    Vocab,
    attribute_matrix,
    build_vocab,
    encode_tokens,
    encoded_from_hidden,
    init_encoder_params,
)
from .head import HeadParams, forward, init_head_params
from .losses import Batch, backward, joint_loss, kink_signature
from .validation import ConfigError, check_instances_have_relations

_SHUFFLE_STREAM = 3
_GRADCHECK_STREAM = 4

CHECKPOINT_VERSION = "1"

PRESETS = {
    # paper-scale defaults target fine-tuning a large pretrained encoder
    "paper": dict(learning_rate=5e-6, batch_size=4, gamma=7.5, alpha=0.4,
                  hidden_size=768, attr_dim=1024, epochs=50),
    # desk-scale defaults train the toy encoder from scratch
    "desk": dict(learning_rate=1e-3, batch_size=4, gamma=7.5, alpha=0.4,
                 hidden_size=32, attr_dim=64, epochs=50),
}


class TrainingError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass
class TrainConfig:
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

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "TrainConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        values = dict(PRESETS[name])
        values.update(overrides)
        return cls(**values)


@dataclass
class ModelParams:
    """Everything learned (or fixed at init) that prediction needs."""

    vocab: Vocab
    encoder: EncoderParams
    head: HeadParams
    classes: tuple[str, ...]

    def named(self) -> dict[str, np.ndarray]:
        return {**self.encoder.named(), **self.head.named()}


@dataclass
class EpochStats:
    epoch: int
    margin_term: float
    ce_term: float
    total: float
    seconds: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    eval_metrics: list = field(default_factory=list)

    def totals(self) -> list[float]:
        return [row.total for row in self.epochs]


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam_state(named_tensors: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(a) for k, a in named_tensors.items()},
        v={k: np.zeros_like(a) for k, a in named_tensors.items()},
    )


def adam_step(params: ModelParams, grads: dict[str, np.ndarray],
              state: AdamState, lr: float):
    """Standard bias-corrected Adam update, applied in place."""
    tensors = params.named()
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        if g.shape != tensors[name].shape:
            raise ConfigError(f"gradient shape mismatch for {name}")
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        tensors[name] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def _encode(instance: Instance, global_index: int, params: ModelParams,
            hidden_lookup=None):
    if hidden_lookup is not None:
        try:
            return encoded_from_hidden(instance, hidden_lookup[global_index])
        except KeyError:
            raise ConfigError(f"no precomputed hidden states for instance {global_index}")
    return encode_tokens(instance, params.vocab, params.encoder)


def make_batch(global_indices, instances, params: ModelParams,
               attr_rows: np.ndarray, class_index: dict[str, int],
               hidden_lookup=None) -> Batch:
    """Encode and run the head forward over one batch of instance indices."""
    batch_insts = tuple(instances[i] for i in global_indices)
    traces = []
    labels = []
    for gi, inst in zip(global_indices, batch_insts):
        encoded = _encode(inst, gi, params, hidden_lookup)
        traces.append(forward(inst, encoded, params.head))
        labels.append(class_index[inst.relation_id])
    labels = np.asarray(labels, dtype=np.int64)
    return Batch(
        instances=batch_insts, traces=tuple(traces),
        attrs=attr_rows[labels], labels=labels,
    )


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def train(instances, relations, split: SplitSpec, config: TrainConfig,
          *, hidden_lookup=None, log_path=None):
    """Train the head (and optionally the toy encoder) on the split's train side.

    Description attribute vectors are resolved once before the first epoch and
    never updated. Returns ``(ModelParams, TrainHistory)``; the result is a
    pure function of (instances, relations, split, config).
    """
    train_instances = [instances[i] for i in split.train_idx]
    if not train_instances:
        raise TrainingError("split has no training instances")
    check_instances_have_relations(train_instances, relations)

    vocab = build_vocab(train_instances)
    encoder = init_encoder_params(
        vocab, config.hidden_size, config.seed, mixing=config.mixing_layer
    )
    classes = tuple(sorted({inst.relation_id for inst in train_instances}))
    class_index = {rel_id: i for i, rel_id in enumerate(classes)}
    head = init_head_params(config.hidden_size, config.attr_dim, len(classes), config.seed)
    params = ModelParams(vocab=vocab, encoder=encoder, head=head, classes=classes)

    attr_rows = attribute_matrix(
        relations, classes, config.description_mode, config.attr_dim
    )

    trainable_encoder = config.encoder_trainable and hidden_lookup is None
    state = init_adam_state(
        params.named() if trainable_encoder else params.head.named()
    )
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _SHUFFLE_STREAM]))
    history = TrainHistory()
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(config.epochs):
            started = time.perf_counter()
            order = rng.permutation(len(split.train_idx))
            margin_sum = ce_sum = total_sum = 0.0
            for start in range(0, len(order), config.batch_size):
                batch_ids = [split.train_idx[j] for j in order[start:start + config.batch_size]]
                batch = make_batch(
                    batch_ids, instances, params, attr_rows, class_index, hidden_lookup
                )
                report = joint_loss(batch, config.gamma, config.alpha)
                if not np.isfinite(report.total):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch starting at "
                        f"instance {batch_ids[0]} (total={report.total})"
                    )
                grads = backward(
                    batch, params.encoder, params.head,
                    config.gamma, config.alpha, encoder_trainable=trainable_encoder,
                )
                if config.clip_grad > 0:
                    _clip_gradients(grads, config.clip_grad)
                adam_step(params, grads, state, config.learning_rate)
                margin_sum += report.margin_term
                ce_sum += report.ce_term
                total_sum += report.total
            stats = EpochStats(
                epoch=epoch, margin_term=margin_sum, ce_term=ce_sum,
                total=total_sum, seconds=time.perf_counter() - started,
            )
            history.epochs.append(stats)
            if log_fh is not None:
                log_fh.write(json.dumps(asdict(stats)) + "\n")
                log_fh.flush()
    finally:
        if log_fh is not None:
            log_fh.close()
    return params, history


def full_train_split(instances) -> SplitSpec:
    """A degenerate split that sends every instance to training (estimator use)."""
    return SplitSpec(
        seed=0, m=0,
        seen_ids=frozenset(inst.relation_id for inst in instances),
        unseen_ids=frozenset(),
        train_idx=tuple(range(len(instances))),
        test_idx=(),
    )


# --- gradient checking -------------------------------------------------------

@dataclass
class TensorCheck:
    max_rel_error: float
    n_checked: int
    n_skipped: int


@dataclass
class GradCheckReport:
    per_tensor: dict[str, TensorCheck]
    h: float
    tol: float

    @property
    def max_rel_error(self) -> float:
        checked = [c.max_rel_error for c in self.per_tensor.values() if c.n_checked]
        return max(checked, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def central_difference(fn, x: float, h: float) -> float:
    """(f(x+h) - f(x-h)) / 2h for a scalar function; the probe used throughout."""
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def grad_check(params: ModelParams, instances, attrs: np.ndarray,
               labels: np.ndarray, config: TrainConfig,
               h: float = 1e-5, tol: float = 1e-4,
               coords_per_tensor: int = 32, seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Samples at least ``coords_per_tensor`` coordinates per tensor. Coordinates
    whose perturbation flips a non-smooth gate (hinge activity, negative
    argmax, CE clamp) are reported as skipped rather than compared.
    """
    if h <= 0:
        raise ConfigError("finite-difference step h must be > 0")
    labels = np.asarray(labels, dtype=np.int64)

    def evaluate():
        traces = tuple(
            forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
            for inst in instances
        )
        batch = Batch(instances=tuple(instances), traces=traces, attrs=attrs, labels=labels)
        report = joint_loss(batch, config.gamma, config.alpha)
        return batch, report

    base_batch, _ = evaluate()
    analytic = backward(
        base_batch, params.encoder, params.head, config.gamma, config.alpha,
        encoder_trainable=config.encoder_trainable,
    )

    rng = np.random.default_rng(np.random.SeedSequence([seed, _GRADCHECK_STREAM]))
    per_tensor: dict[str, TensorCheck] = {}
    tensors = params.named()
    for name, grad in analytic.items():
        arr = tensors[name]
        size = arr.size
        n = min(coords_per_tensor, size)
        coords = rng.choice(size, size=n, replace=False)
        max_err = 0.0
        checked = skipped = 0
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for c in coords:
            original = flat[c]
            flat[c] = original + h
            batch_plus, rep_plus = evaluate()
            sig_plus = kink_signature(batch_plus, rep_plus)
            flat[c] = original - h
            batch_minus, rep_minus = evaluate()
            sig_minus = kink_signature(batch_minus, rep_minus)
            flat[c] = original
            if sig_plus != sig_minus:
                skipped += 1
                continue
            fd = (rep_plus.total - rep_minus.total) / (2.0 * h)
            a = grad_flat[c]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            max_err = max(max_err, rel)
            checked += 1
        per_tensor[name] = TensorCheck(max_rel_error=max_err, n_checked=checked,
                                       n_skipped=skipped)
    return GradCheckReport(per_tensor=per_tensor, h=h, tol=tol)


# --- checkpoints --------------------------------------------------------------

def _tensor_to_record(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "dtype": "<f8",
            "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _tensor_from_record(record: dict) -> np.ndarray:
    raw = base64.b64decode(record["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(record["shape"])


def save_checkpoint(params: ModelParams, vocab: Vocab, config: TrainConfig, path) -> None:
    """Serialize params/vocab/config to a versioned JSON container.

    Tensors are stored as base64 of little-endian float64 bytes, so a
    save/load round trip is bit-exact.
    """
    record = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "seed": config.seed,
        "classes": list(params.classes),
        "vocab": list(vocab.index_to_token),
        "mixing": params.encoder.mixing,
        "tensors": {name: _tensor_to_record(arr) for name, arr in params.named().items()},
    }
    Path(path).write_text(json.dumps(record) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (ModelParams, TrainConfig)."""
    try:
        record = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint file: {exc}") from exc
    version = record.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version!r}; expected {CHECKPOINT_VERSION!r}"
        )
    try:
        config = TrainConfig(**record["config"])
        tokens = tuple(record["vocab"])
        vocab = Vocab(
            token_to_index={tok: i for i, tok in enumerate(tokens)},
            index_to_token=tokens,
        )
        tensors = {name: _tensor_from_record(rec) for name, rec in record["tensors"].items()}
        encoder = EncoderParams(
            embedding=tensors["embedding"],
            mix_weight=tensors.get("mix_weight"),
            mix_bias=tensors.get("mix_bias"),
        )
        head = HeadParams(
            cls_weight=tensors["cls_weight"], cls_bias=tensors["cls_bias"],
            ent_weight=tensors["ent_weight"], ent_bias=tensors["ent_bias"],
            out_weight=tensors["out_weight"], out_bias=tensors["out_bias"],
            clf_weight=tensors["clf_weight"], clf_bias=tensors["clf_bias"],
        )
        classes = tuple(record["classes"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint contents: {exc}") from exc
    return ModelParams(vocab=vocab, encoder=encoder, head=head, classes=classes), config
