"""Token-side contextual encoding and fixed description encoding.

The token encoder is a small trainable stand-in for a pretrained contextual
model: an embedding lookup, an optional tanh mixing layer, and a sentence-level
CLS row computed as the mean of the token rows. The head downstream is
encoder-agnostic; precomputed hidden states can be swapped in from a JSONL
file (one ``{"index": i, "hidden": [[...]]}`` record per instance index).

Description encoding is fixed for the lifetime of a run: ``precomputed`` and
``identity`` return the vector stored on the relation, ``hashed`` derives a
deterministic unit-norm vector from the description text (a test fixture).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .dataset import Instance, RelationMeta
from .validation import ConfigError, DatasetError

PAD, UNK, CLS, SEP = 0, 1, 2, 3
RESERVED = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")

DESCRIPTION_MODES = ("precomputed", "hashed", "identity")

# fixed seed stream tags so every module draws from its own PCG64 stream
_ENCODER_STREAM = 1


@dataclass(frozen=True)
class Vocab:
    token_to_index: dict[str, int]
    index_to_token: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.index_to_token)

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK)


@dataclass
class EncoderParams:
    """Trainable token-encoder tensors: embedding table plus optional mixing layer."""

    embedding: np.ndarray                 # (|V|, h)
    mix_weight: np.ndarray | None = None  # (h, h)
    mix_bias: np.ndarray | None = None    # (h,)

    @property
    def hidden_size(self) -> int:
        return self.embedding.shape[1]

    @property
    def mixing(self) -> bool:
        return self.mix_weight is not None

    def named(self) -> dict[str, np.ndarray]:
        tensors = {"embedding": self.embedding}
        if self.mixing:
            tensors["mix_weight"] = self.mix_weight
            tensors["mix_bias"] = self.mix_bias
        return tensors


@dataclass(frozen=True)
class EncodedSentence:
    """Per-position hidden states, (L+2) x h with row 0 = CLS and row L+1 = SEP.

    ``token_indices`` caches the vocab lookup (CLS + tokens + SEP) so the
    backward pass can route gradients into the embedding table.
    """

    hidden: np.ndarray
    entity_marker: np.ndarray
    token_indices: tuple[int, ...]


def build_vocab(instances) -> Vocab:
    """Collect every distinct training token in first-occurrence order."""
    if not instances:
        raise DatasetError("cannot build a vocabulary from an empty instance list")
    token_to_index = {tok: i for i, tok in enumerate(RESERVED)}
    for inst in instances:
        for tok in inst.tokens:
            if tok not in token_to_index:
                token_to_index[tok] = len(token_to_index)
    index_to_token = tuple(token_to_index)
    return Vocab(token_to_index=token_to_index, index_to_token=index_to_token)


def init_encoder_params(vocab: Vocab, hidden_size: int, seed: int,
                        mixing: bool = False) -> EncoderParams:
    """Seeded uniform init in [-1/sqrt(h), 1/sqrt(h)]; mixing bias starts at zero."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _ENCODER_STREAM]))
    bound = 1.0 / np.sqrt(hidden_size)
    embedding = rng.uniform(-bound, bound, size=(len(vocab), hidden_size))
    mix_weight = mix_bias = None
    if mixing:
        mix_weight = rng.uniform(-bound, bound, size=(hidden_size, hidden_size))
        mix_bias = np.zeros(hidden_size)
    return EncoderParams(embedding=embedding, mix_weight=mix_weight, mix_bias=mix_bias)


def encode_tokens(instance: Instance, vocab: Vocab, params: EncoderParams) -> EncodedSentence:
    """Embed one sentence; the CLS row becomes the mean of the token rows."""
    if params.embedding.shape[0] != len(vocab):
        raise DatasetError(
            f"embedding rows ({params.embedding.shape[0]}) != vocab size ({len(vocab)})"
        )
    idx = (CLS, *(vocab.index(t) for t in instance.tokens), SEP)
    rows = params.embedding[list(idx)]
    if params.mixing:
        rows = np.tanh(rows @ params.mix_weight.T + params.mix_bias)
    hidden = np.array(rows, dtype=np.float64)
    n_tok = len(instance.tokens)
    hidden[0] = hidden[1:n_tok + 1].mean(axis=0)

    marker = np.zeros(n_tok + 2, dtype=np.int64)
    q, r = instance.head_span
    marker[q + 1:r + 2] = 1
    q, r = instance.tail_span
    marker[q + 1:r + 2] = 2
    return EncodedSentence(hidden=hidden, entity_marker=marker, token_indices=idx)


def encode_description(rel: RelationMeta, mode: str, dim: int = 64) -> np.ndarray:
    """Produce the relation's fixed attribute vector.

    ``precomputed``/``identity`` return the stored vector verbatim; ``hashed``
    derives a unit-norm vector from the description text alone.
    """
    if mode not in DESCRIPTION_MODES:
        raise ConfigError(f"unknown description mode {mode!r}; expected one of {DESCRIPTION_MODES}")
    if mode in ("precomputed", "identity"):
        if rel.attribute is None:
            raise DatasetError(
                f"relation {rel.id}: description mode {mode!r} requires a stored attribute"
            )
        return rel.attribute
    digest = hashlib.blake2b(rel.description.encode("utf-8"), digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    vec.setflags(write=False)
    return vec


def attribute_matrix(relations, rel_ids, mode: str, dim: int) -> np.ndarray:
    """Stack attribute vectors for the given relation ids; rows are read-only."""
    rows = []
    for rel_id in rel_ids:
        vec = encode_description(relations[rel_id], mode, dim=dim)
        if vec.shape[0] != dim:
            raise DatasetError(
                f"relation {rel_id}: attribute length {vec.shape[0]} != configured {dim}"
            )
        rows.append(vec)
    attrs = np.array(rows, dtype=np.float64)
    attrs.setflags(write=False)
    return attrs


def save_hidden_states(encoded_by_index: dict[int, np.ndarray], path) -> None:
    """Write precomputed hidden states, one JSONL record per instance index."""
    with open(path, "w", encoding="utf-8") as fh:
        for index in sorted(encoded_by_index):
            fh.write(json.dumps({
                "index": index,
                "hidden": np.asarray(encoded_by_index[index], dtype=np.float64).tolist(),
            }) + "\n")


def load_hidden_states(path) -> dict[int, np.ndarray]:
    """Read precomputed hidden states keyed by instance index."""
    lookup: dict[int, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            hidden = np.asarray(record["hidden"], dtype=np.float64)
            if hidden.ndim != 2:
                raise DatasetError(f"line {lineno}: hidden states must be a 2-d array")
            lookup[int(record["index"])] = hidden
    return lookup


def encoded_from_hidden(instance: Instance, hidden: np.ndarray) -> EncodedSentence:
    """Wrap externally computed hidden states for one instance."""
    n_tok = len(instance.tokens)
    if hidden.shape[0] != n_tok + 2:
        raise DatasetError(
            f"hidden state rows ({hidden.shape[0]}) != tokens + 2 ({n_tok + 2})"
        )
    marker = np.zeros(n_tok + 2, dtype=np.int64)
    q, r = instance.head_span
    marker[q + 1:r + 2] = 1
    q, r = instance.tail_span
    marker[q + 1:r + 2] = 2
    return EncodedSentence(hidden=hidden, entity_marker=marker, token_indices=())
