"""The trainable alignment head.

Pipeline per sentence: project the CLS hidden state, average-pool each entity
span (both spans share one set of pooling parameters), concatenate the three
vectors, and project the tanh of the concatenation into attribute space to get
the sentence embedding. A softmax layer over the seen relations provides the
auxiliary classification distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Instance
from .encoding import EncodedSentence
from .validation import DatasetError

_HEAD_STREAM = 2


@dataclass
class HeadParams:
    cls_weight: np.ndarray    # (h, h)
    cls_bias: np.ndarray      # (h,)
    ent_weight: np.ndarray    # (h, h), shared by both entity slots
    ent_bias: np.ndarray      # (h,)
    out_weight: np.ndarray    # (d, 3h)
    out_bias: np.ndarray      # (d,)
    clf_weight: np.ndarray    # (n, d)
    clf_bias: np.ndarray      # (n,)

    @property
    def hidden_size(self) -> int:
        return self.cls_weight.shape[0]

    @property
    def attr_dim(self) -> int:
        return self.out_weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.clf_weight.shape[0]

    def named(self) -> dict[str, np.ndarray]:
        return {
            "cls_weight": self.cls_weight, "cls_bias": self.cls_bias,
            "ent_weight": self.ent_weight, "ent_bias": self.ent_bias,
            "out_weight": self.out_weight, "out_bias": self.out_bias,
            "clf_weight": self.clf_weight, "clf_bias": self.clf_bias,
        }


@dataclass
class ForwardTrace:
    """Forward outputs plus the pre-activations the backward pass needs."""

    encoded: EncodedSentence
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    tanh_h0: np.ndarray
    h0_proj: np.ndarray
    span_means: tuple[np.ndarray, np.ndarray]
    tanh_means: tuple[np.ndarray, np.ndarray]
    ent1: np.ndarray
    ent2: np.ndarray
    tanh_concat: np.ndarray
    a_hat: np.ndarray
    tanh_a_hat: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def init_head_params(hidden_size: int, attr_dim: int, n_classes: int,
                     seed: int) -> HeadParams:
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases zero."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _HEAD_STREAM]))

    def _mat(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    return HeadParams(
        cls_weight=_mat(hidden_size, hidden_size),
        cls_bias=np.zeros(hidden_size),
        ent_weight=_mat(hidden_size, hidden_size),
        ent_bias=np.zeros(hidden_size),
        out_weight=_mat(attr_dim, 3 * hidden_size),
        out_bias=np.zeros(attr_dim),
        clf_weight=_mat(n_classes, attr_dim),
        clf_bias=np.zeros(n_classes),
    )


def cls_projection(h0: np.ndarray, params: HeadParams) -> np.ndarray:
    """Affine projection of tanh(CLS hidden state)."""
    if h0.shape[0] != params.hidden_size:
        raise DatasetError(f"CLS vector length {h0.shape[0]} != hidden size {params.hidden_size}")
    return params.cls_weight @ np.tanh(h0) + params.cls_bias


def entity_pool(hidden: np.ndarray, span: tuple[int, int], params: HeadParams) -> np.ndarray:
    """Mean over the span's hidden rows, tanh, then the shared affine layer.

    ``span`` is in token coordinates; hidden row t+1 holds token t.
    """
    q, r = span
    if q < 0 or r + 2 > hidden.shape[0]:
        raise DatasetError(f"entity span ({q},{r}) outside hidden rows")
    mean = hidden[q + 1:r + 2].mean(axis=0)
    return params.ent_weight @ np.tanh(mean) + params.ent_bias


def sentence_embedding(h0_proj: np.ndarray, ent1: np.ndarray, ent2: np.ndarray,
                       params: HeadParams) -> np.ndarray:
    """Project tanh of (CLS projection | entity 1 | entity 2) into attribute space."""
    concat = np.concatenate([h0_proj, ent1, ent2])
    if concat.shape[0] != params.out_weight.shape[1]:
        raise DatasetError(
            f"concat length {concat.shape[0]} != projection columns {params.out_weight.shape[1]}"
        )
    return params.out_weight @ np.tanh(concat) + params.out_bias


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def classify_seen(a_hat: np.ndarray, params: HeadParams) -> np.ndarray:
    """Softmax distribution over seen relations, stabilized by max-subtraction."""
    return softmax(params.clf_weight @ np.tanh(a_hat) + params.clf_bias)


def forward(instance: Instance, encoded: EncodedSentence, params: HeadParams) -> ForwardTrace:
    """Run the full head on one encoded sentence, caching intermediates."""
    hidden = encoded.hidden
    h0 = hidden[0]
    tanh_h0 = np.tanh(h0)
    h0_proj = params.cls_weight @ tanh_h0 + params.cls_bias

    means, tanh_means, ents = [], [], []
    for span in (instance.head_span, instance.tail_span):
        q, r = span
        mean = hidden[q + 1:r + 2].mean(axis=0)
        t_mean = np.tanh(mean)
        means.append(mean)
        tanh_means.append(t_mean)
        ents.append(params.ent_weight @ t_mean + params.ent_bias)

    concat = np.concatenate([h0_proj, ents[0], ents[1]])
    tanh_concat = np.tanh(concat)
    a_hat = params.out_weight @ tanh_concat + params.out_bias
    tanh_a_hat = np.tanh(a_hat)
    logits = params.clf_weight @ tanh_a_hat + params.clf_bias
    probs = softmax(logits)

    return ForwardTrace(
        encoded=encoded,
        head_span=instance.head_span,
        tail_span=instance.tail_span,
        tanh_h0=tanh_h0,
        h0_proj=h0_proj,
        span_means=(means[0], means[1]),
        tanh_means=(tanh_means[0], tanh_means[1]),
        ent1=ents[0],
        ent2=ents[1],
        tanh_concat=tanh_concat,
        a_hat=a_hat,
        tanh_a_hat=tanh_a_hat,
        logits=logits,
        probs=probs,
    )
