"""Joint training objective and its exact analytic gradients.

The objective over a batch is ``(1 - alpha) * margin + alpha * cross_entropy``
where the margin term ranks each sentence embedding's inner product with its
own relation attribute above the best mismatched attribute/embedding pairing
in the batch, by at least ``gamma``:

    term_i = max(0, gamma - a_i . e_i + max_{label(j) != label(i)} a_i . e_j)

Attribute vectors receive no gradient; they are fixed inputs. Subgradient
conventions: an inactive or exactly-zero hinge contributes nothing, and the
max over negatives routes gradient only to the argmax (ties break to the
lowest batch index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import EncoderParams
from .head import ForwardTrace, HeadParams
from .validation import ConfigError

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class Batch:
    """Forward traces plus per-instance relation attributes and class labels."""

    instances: tuple
    traces: tuple[ForwardTrace, ...]
    attrs: np.ndarray   # (B, d) row i = attribute of instance i's relation
    labels: np.ndarray  # (B,) seen-class indices

    def __post_init__(self):
        b = len(self.instances)
        if not (len(self.traces) == self.attrs.shape[0] == self.labels.shape[0] == b):
            raise ConfigError("batch fields disagree on batch size")
        if b < 1:
            raise ConfigError("batch must contain at least one instance")

    @property
    def size(self) -> int:
        return len(self.instances)

    def embeddings(self) -> np.ndarray:
        return np.stack([t.a_hat for t in self.traces])


@dataclass(frozen=True)
class LossReport:
    margin_term: float
    ce_term: float
    total: float
    per_instance_margin: tuple[float, ...]
    argmax_negative: tuple[int | None, ...]


def margin_ranking_loss(batch: Batch, gamma: float):
    """Hinge over within-batch negatives; returns (value, per-instance, argmax)."""
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    e = batch.embeddings()                  # (B, d)
    scores = batch.attrs @ e.T              # scores[i, j] = a_i . e_j
    pos = np.diag(scores)
    mismatch = batch.labels[None, :] != batch.labels[:, None]

    terms, argmaxes = [], []
    for i in range(batch.size):
        negs = np.where(mismatch[i], scores[i], -np.inf)
        if not mismatch[i].any():
            terms.append(0.0)
            argmaxes.append(None)
            continue
        j_star = int(np.argmax(negs))       # first max: ties to lowest index
        term = max(0.0, gamma - pos[i] + negs[j_star])
        terms.append(float(term))
        argmaxes.append(j_star)
    return float(sum(terms)), tuple(terms), tuple(argmaxes)


def cross_entropy(probs: np.ndarray, label_index: int) -> float:
    """Negative log likelihood with the probability clamped at 1e-12."""
    if not (0 <= label_index < probs.shape[0]):
        raise ConfigError(f"label index {label_index} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(float(probs[label_index]), PROB_CLAMP)))


def joint_loss(batch: Batch, gamma: float, alpha: float) -> LossReport:
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    margin, per_instance, argmaxes = margin_ranking_loss(batch, gamma)
    ce = sum(cross_entropy(t.probs, int(y)) for t, y in zip(batch.traces, batch.labels))
    total = (1.0 - alpha) * margin + alpha * ce
    return LossReport(
        margin_term=margin, ce_term=float(ce), total=float(total),
        per_instance_margin=per_instance, argmax_negative=argmaxes,
    )


def kink_signature(batch: Batch, report: LossReport) -> tuple:
    """Discrete state of every non-smooth gate; used to detect unreliable
    finite-difference coordinates (hinge activity, argmax routing, CE clamp)."""
    actives = tuple(t > 0.0 for t in report.per_instance_margin)
    clamped = tuple(
        float(t.probs[int(y)]) < PROB_CLAMP for t, y in zip(batch.traces, batch.labels)
    )
    return (actives, report.argmax_negative, clamped)


def backward(batch: Batch, encoder: EncoderParams, head: HeadParams,
             gamma: float, alpha: float, encoder_trainable: bool = True):
    """Exact gradients of the joint loss for every trainable tensor.

    Returns a dict keyed like ``head.named()`` (plus ``encoder.named()`` when
    the encoder is trainable). Attribute vectors get no gradient.
    """
    report = joint_loss(batch, gamma, alpha)
    h = head.hidden_size
    grads = {name: np.zeros_like(arr) for name, arr in head.named().items()}
    if encoder_trainable:
        for name, arr in encoder.named().items():
            grads[name] = np.zeros_like(arr)

    d_a_hat = np.zeros((batch.size, head.attr_dim))

    # cross-entropy through the classifier
    if alpha > 0.0:
        for k, (trace, y) in enumerate(zip(batch.traces, batch.labels)):
            if float(trace.probs[int(y)]) < PROB_CLAMP:
                continue  # clamped: the loss is locally constant
            dlogits = alpha * trace.probs.copy()
            dlogits[int(y)] -= alpha
            grads["clf_weight"] += np.outer(dlogits, trace.tanh_a_hat)
            grads["clf_bias"] += dlogits
            d_a_hat[k] += (head.clf_weight.T @ dlogits) * (1.0 - trace.tanh_a_hat ** 2)

    # margin term: each active hinge pushes its own embedding toward the
    # attribute and the argmax negative's embedding away from it
    if alpha < 1.0:
        for i, (term, j_star) in enumerate(
            zip(report.per_instance_margin, report.argmax_negative)
        ):
            if term <= 0.0 or j_star is None:
                continue
            d_a_hat[i] -= (1.0 - alpha) * batch.attrs[i]
            d_a_hat[j_star] += (1.0 - alpha) * batch.attrs[i]

    # propagate each instance's embedding gradient through the head (and
    # optionally the encoder)
    for k, trace in enumerate(batch.traces):
        g = d_a_hat[k]
        if not g.any():
            continue
        grads["out_weight"] += np.outer(g, trace.tanh_concat)
        grads["out_bias"] += g
        dconcat = (head.out_weight.T @ g) * (1.0 - trace.tanh_concat ** 2)
        dh0p, dent1, dent2 = dconcat[:h], dconcat[h:2 * h], dconcat[2 * h:]

        grads["cls_weight"] += np.outer(dh0p, trace.tanh_h0)
        grads["cls_bias"] += dh0p
        dh0 = (head.cls_weight.T @ dh0p) * (1.0 - trace.tanh_h0 ** 2)

        dmeans = []
        for t_mean, dent in ((trace.tanh_means[0], dent1), (trace.tanh_means[1], dent2)):
            grads["ent_weight"] += np.outer(dent, t_mean)
            grads["ent_bias"] += dent
            dmeans.append((head.ent_weight.T @ dent) * (1.0 - t_mean ** 2))

        if not encoder_trainable:
            continue
        hidden = trace.encoded.hidden
        n_tok = hidden.shape[0] - 2
        dhidden = np.zeros_like(hidden)
        dhidden[1:n_tok + 1] += dh0 / n_tok  # CLS row is the token-row mean
        for span, dmean in zip((trace.head_span, trace.tail_span), dmeans):
            q, r = span
            dhidden[q + 1:r + 2] += dmean / (r - q + 1)

        idx = list(trace.encoded.token_indices)
        if not idx:
            raise ConfigError(
                "cannot train the encoder on externally supplied hidden states"
            )
        if encoder.mixing:
            raw = encoder.embedding[idx[1:]]
            ds = dhidden[1:] * (1.0 - hidden[1:] ** 2)
            grads["mix_weight"] += ds.T @ raw
            grads["mix_bias"] += ds.sum(axis=0)
            np.add.at(grads["embedding"], idx[1:], ds @ encoder.mix_weight)
        else:
            np.add.at(grads["embedding"], idx[1:], dhidden[1:])

    return grads
