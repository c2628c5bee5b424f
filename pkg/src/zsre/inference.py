"""Nearest-neighbor prediction over candidate relation attribute vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Instance
from .encoding import EncoderParams, Vocab, attribute_matrix, encode_tokens
from .head import HeadParams, forward
from .validation import ConfigError, DatasetError

DIST_KINDS = ("neg_inner_product", "euclidean", "cosine")


@dataclass(frozen=True)
class RelationIndex:
    """Immutable ordered table of (relation id, attribute vector) candidates."""

    ids: tuple[str, ...]
    vectors: np.ndarray  # (m, d)
    dist_kind: str = "neg_inner_product"

    def __post_init__(self):
        if len(self.ids) != self.vectors.shape[0]:
            raise DatasetError("index ids and vectors disagree on length")
        if len(set(self.ids)) != len(self.ids):
            raise DatasetError("index relation ids must be unique")
        if self.dist_kind not in DIST_KINDS:
            raise ConfigError(
                f"unknown distance kind {self.dist_kind!r}; expected one of {DIST_KINDS}"
            )

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Prediction:
    relation_id: str
    score: float
    ranking: tuple[tuple[str, float], ...]


def build_relation_index(relations, rel_ids, mode: str, dim: int,
                         dist_kind: str = "neg_inner_product") -> RelationIndex:
    ids = tuple(sorted(rel_ids))
    if not ids:
        raise DatasetError("relation index needs at least one candidate relation")
    vectors = attribute_matrix(relations, ids, mode, dim)
    return RelationIndex(ids=ids, vectors=vectors, dist_kind=dist_kind)


def distance(u: np.ndarray, v: np.ndarray, kind: str) -> float:
    """Pairwise distance: negative inner product, euclidean, or cosine distance."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DatasetError(f"distance operands disagree on shape: {u.shape} vs {v.shape}")
    if kind == "neg_inner_product":
        return float(-np.dot(u, v))
    if kind == "euclidean":
        return float(np.linalg.norm(u - v))
    if kind == "cosine":
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return 1.0
        return float(1.0 - np.dot(u, v) / (nu * nv))
    raise ConfigError(f"unknown distance kind {kind!r}; expected one of {DIST_KINDS}")


def _all_distances(a_hat: np.ndarray, index: RelationIndex) -> np.ndarray:
    if index.dist_kind == "neg_inner_product":
        return -(index.vectors @ a_hat)
    if index.dist_kind == "euclidean":
        return np.linalg.norm(index.vectors - a_hat, axis=1)
    norms = np.linalg.norm(index.vectors, axis=1) * np.linalg.norm(a_hat)
    dots = index.vectors @ a_hat
    out = np.ones(len(index))
    nonzero = norms > 0.0
    out[nonzero] = 1.0 - dots[nonzero] / norms[nonzero]
    return out


def predict(a_hat: np.ndarray, index: RelationIndex) -> Prediction:
    """Exhaustive scan for the nearest candidate; ties break to list position."""
    if len(index) == 0:
        raise DatasetError("cannot predict against an empty relation index")
    dists = _all_distances(np.asarray(a_hat, dtype=np.float64), index)
    order = np.argsort(dists, kind="stable")
    ranking = tuple((index.ids[j], float(dists[j])) for j in order)
    best = int(order[0])
    return Prediction(relation_id=index.ids[best], score=float(dists[best]),
                      ranking=ranking)


def embed_new_sentence(instance: Instance, vocab: Vocab,
                       encoder_params: EncoderParams,
                       head_params: HeadParams) -> np.ndarray:
    """Sentence embedding at inference time; shares the training forward path."""
    encoded = encode_tokens(instance, vocab, encoder_params)
    return forward(instance, encoded, head_params).a_hat
