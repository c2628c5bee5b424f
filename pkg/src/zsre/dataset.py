"""Corpus loading, zero-shot/few-shot splitting, and synthetic data generation.

File formats (UTF-8 JSONL, one object per line):

* instances: ``{"tokens": [...], "head": [q, r], "tail": [q, r], "relation": id}``
  with inclusive 0-based token spans. Unknown keys are ignored.
* relations: ``{"id": ..., "name": ..., "description": ..., "attribute": [...]}``
  where ``attribute`` is optional.
* split: a JSON object mirroring :class:`SplitSpec`, for exact replay.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import (
    DatasetError,
    check_attribute_vector,
    check_instances_have_relations,
    check_span,
)

# PRNG used for all seeded sampling in this module, recorded in SplitSpec so a
# split file documents how it was drawn.
RNG_ALGORITHM = "numpy-pcg64"


@dataclass(frozen=True)
class Instance:
    """One relation-labeled sentence with two inclusive entity token spans."""

    tokens: tuple[str, ...]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    relation_id: str

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise DatasetError("instance has no tokens")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        head = check_span(self.head_span, len(self.tokens), "head")
        tail = check_span(self.tail_span, len(self.tokens), "tail")
        object.__setattr__(self, "head_span", head)
        object.__setattr__(self, "tail_span", tail)


@dataclass(frozen=True)
class RelationMeta:
    """A relation label with its textual description and optional attribute vector."""

    id: str
    name: str
    description: str
    attribute: np.ndarray | None = None

    def __post_init__(self):
        if not self.description:
            raise DatasetError(f"relation {self.id}: empty description")
        if self.attribute is not None:
            vec = check_attribute_vector(self.attribute, None, self.id)
            vec.setflags(write=False)
            object.__setattr__(self, "attribute", vec)


@dataclass(frozen=True)
class SplitSpec:
    """Seen/unseen relation sets plus train/test instance index lists."""

    seed: int
    m: int
    seen_ids: frozenset[str]
    unseen_ids: frozenset[str]
    train_idx: tuple[int, ...]
    test_idx: tuple[int, ...]
    fewshot_fraction: float = 0.0
    rng: str = RNG_ALGORITHM

    def __post_init__(self):
        if self.seen_ids & self.unseen_ids:
            raise DatasetError("seen and unseen relation sets overlap")
        if set(self.train_idx) & set(self.test_idx):
            raise DatasetError("train and test index lists overlap")


@dataclass(frozen=True)
class SyntheticConfig:
    n_relations: int = 12
    instances_per_relation: int = 50
    vocab_size: int = 444
    d_attr: int = 64
    noise_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_relations", "instances_per_relation", "vocab_size", "d_attr"):
            if getattr(self, name) < 1:
                raise DatasetError(f"{name} must be >= 1")
        if self.noise_scale < 0:
            raise DatasetError("noise_scale must be >= 0")
        if self.vocab_size < 2 * self.n_relations:
            raise DatasetError("vocab_size must be at least 2 * n_relations")


def load_instances(path) -> list[Instance]:
    """Read instances from a JSONL file, validating spans line by line."""
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                inst = Instance(
                    tokens=tuple(record["tokens"]),
                    head_span=tuple(record["head"]),
                    tail_span=tuple(record["tail"]),
                    relation_id=str(record["relation"]),
                )
            except KeyError as exc:
                raise DatasetError(f"line {lineno}: missing key {exc}") from exc
            except DatasetError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
            instances.append(inst)
    return instances


def load_relations(path, d_attr: int | None = None) -> dict[str, RelationMeta]:
    """Read the relation table from JSONL; ids must be unique."""
    table: dict[str, RelationMeta] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            rel_id = str(record.get("id", ""))
            if not rel_id:
                raise DatasetError(f"line {lineno}: missing relation id")
            if rel_id in table:
                raise DatasetError(f"line {lineno}: duplicate relation id {rel_id!r}")
            attr = record.get("attribute")
            if attr is not None:
                attr = check_attribute_vector(attr, d_attr, rel_id)
            try:
                table[rel_id] = RelationMeta(
                    id=rel_id,
                    name=str(record.get("name", rel_id)),
                    description=str(record.get("description", "")),
                    attribute=attr,
                )
            except DatasetError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
    return table


def make_zero_shot_split(instances, relations, m: int, seed: int) -> SplitSpec:
    """Pick m unseen relations uniformly at random; their instances all go to test.

    Deterministic given (instances, m, seed): the unseen set is sampled without
    replacement from the sorted distinct relation ids present in ``instances``.
    """
    check_instances_have_relations(instances, relations)
    present = sorted({inst.relation_id for inst in instances})
    if m >= len(present):
        raise DatasetError(
            f"m={m} must be smaller than the number of distinct relations ({len(present)})"
        )
    if m < 1:
        raise DatasetError("m must be >= 1")
    rng = np.random.default_rng(seed)
    unseen = frozenset(rng.choice(present, size=m, replace=False).tolist())
    seen = frozenset(present) - unseen
    train_idx = tuple(i for i, inst in enumerate(instances) if inst.relation_id in seen)
    test_idx = tuple(i for i, inst in enumerate(instances) if inst.relation_id in unseen)
    return SplitSpec(
        seed=seed, m=m, seen_ids=seen, unseen_ids=unseen,
        train_idx=train_idx, test_idx=test_idx,
    )


def make_few_shot_split(split: SplitSpec, instances, fraction: float, seed: int) -> SplitSpec:
    """Move ceil(fraction * count) test instances of each unseen relation to train."""
    if not (0.0 < fraction < 1.0):
        raise DatasetError(f"few-shot fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    moved: list[int] = []
    for rel_id in sorted(split.unseen_ids):
        rel_test = [i for i in split.test_idx if instances[i].relation_id == rel_id]
        if not rel_test:
            continue
        k = math.ceil(fraction * len(rel_test))
        moved.extend(rng.choice(rel_test, size=k, replace=False).tolist())
    moved_set = set(moved)
    train_idx = tuple(sorted(set(split.train_idx) | moved_set))
    test_idx = tuple(i for i in split.test_idx if i not in moved_set)
    return SplitSpec(
        seed=split.seed, m=split.m, seen_ids=split.seen_ids,
        unseen_ids=split.unseen_ids, train_idx=train_idx, test_idx=test_idx,
        fewshot_fraction=float(fraction),
    )


def save_split(split: SplitSpec, path) -> None:
    record = {
        "seed": split.seed,
        "m": split.m,
        "seen_ids": sorted(split.seen_ids),
        "unseen_ids": sorted(split.unseen_ids),
        "train_idx": list(split.train_idx),
        "test_idx": list(split.test_idx),
        "fewshot_fraction": split.fewshot_fraction,
        "rng": split.rng,
    }
    Path(path).write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")


def load_split(path) -> SplitSpec:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    return SplitSpec(
        seed=int(record["seed"]),
        m=int(record["m"]),
        seen_ids=frozenset(record["seen_ids"]),
        unseen_ids=frozenset(record["unseen_ids"]),
        train_idx=tuple(record["train_idx"]),
        test_idx=tuple(record["test_idx"]),
        fewshot_fraction=float(record.get("fewshot_fraction", 0.0)),
        rng=str(record.get("rng", RNG_ALGORITHM)),
    )


# --- synthetic corpus -------------------------------------------------------
#
# The generator builds a miniature world in which zero-shot transfer is
# actually possible: each relation is a composition over a small set of
# shared "topic" token pools, plus a disjoint cluster of relation-specific
# tokens that hosts the entity mentions. Sentences of unseen relations
# therefore contain shared topic tokens whose semantics the model can learn
# from seen relations, while the relation-specific clusters stay disjoint.
#
# Compositions are equal-norm permutations of one base profile, so the map
# from a sentence's topic histogram to its relation attribute is linear and
# recoverable from the seen relations alone. Attributes are unit-norm vectors
# a_k = normalize(U c_k + delta * eps_k) where U is a seeded orthonormal
# basis, c_k the relation's topic composition and eps_k a tiny independent
# residual. The residual keeps the attribute matrix full rank, so the one-hot
# cluster centroids are an exact fixed linear image of the attributes
# (centroids = M @ attrs for M = centroids @ pinv(attrs)).

SEMANTIC_TOPICS = 6
TOPIC_TOKENS_PER_SENTENCE = 20
ATTRIBUTE_RESIDUAL = 0.02
_PROFILE_DECAY = 0.55


def _topic_compositions(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    """n well-separated permutations of one decaying base profile.

    All rows share the same multiset of values (hence the same norm), chosen
    by farthest-point greedy selection over the permutation pool.
    """
    base = _PROFILE_DECAY ** np.arange(rank)
    base /= base.sum()

    from itertools import permutations

    pool = np.unique(np.array(list(permutations(base))), axis=0)
    if len(pool) < n:
        raise DatasetError(
            f"cannot build {n} distinct topic compositions at rank {rank}"
        )
    start = int(rng.integers(len(pool)))
    dists = np.linalg.norm(pool[:, None, :] - pool[None, :, :], axis=2)
    chosen = [start]
    while len(chosen) < n:
        min_d = dists[:, chosen].min(axis=1)
        min_d[chosen] = -1.0
        chosen.append(int(np.argmax(min_d)))
    return pool[rng.permutation(chosen)]


def _token_partition(config: SyntheticConfig):
    """Seeded disjoint relation clusters plus shared topic pools.

    Topic pools get a small fixed budget; the clusters share the rest, so
    with a generous vocabulary individual entity tokens are rare and carry
    little training signal compared to the shared topics.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 11]))
    tokens = [f"tok{i:03d}" for i in range(config.vocab_size)]
    order = rng.permutation(config.vocab_size)
    n = config.n_relations
    rank = min(SEMANTIC_TOPICS, config.d_attr, max(1, n - 1))
    topic_budget = min(rank * 8, max(0, config.vocab_size - 2 * n))
    cluster_size = (config.vocab_size - topic_budget) // n
    clusters = [
        [tokens[j] for j in order[k * cluster_size:(k + 1) * cluster_size]]
        for k in range(n)
    ]
    rest = order[n * cluster_size:]
    topic_pools = [[tokens[j] for j in rest[t::rank]] for t in range(rank)]
    return tokens, clusters, topic_pools, rank


def generate_synthetic(config: SyntheticConfig):
    """Build (instances, relations) for a separable zero-shot benchmark.

    Deterministic given ``config``; every relation carries its attribute vector
    so the corpus pairs with the identity description encoder. Each sentence
    holds two entity spans drawn from the relation's cluster, a fixed number
    of topic tokens following the relation's composition, and uniform noise
    tokens at rate ``noise_scale``.
    """
    rng = np.random.default_rng(config.seed)
    n, d = config.n_relations, config.d_attr
    tokens, clusters, topic_pools, rank = _token_partition(config)
    has_topics = all(len(p) > 0 for p in topic_pools)

    mixtures = _topic_compositions(rng, n, rank)

    # every cluster token also acts as a topic carrier across the whole
    # corpus (affiliation drawn from its relation's composition), so no
    # single token identifies a relation and entity mentions of unseen
    # relations still arrive with trained, topic-consistent embeddings
    extended_pools = [list(pool) for pool in topic_pools]
    if has_topics:
        for k in range(n):
            affiliations = rng.choice(rank, size=len(clusters[k]), p=mixtures[k])
            for tok, t in zip(clusters[k], affiliations):
                extended_pools[int(t)].append(tok)

    # centering drops the constant simplex component shared by every relation,
    # spreading the attributes apart without breaking the affine
    # histogram -> attribute relationship the head has to learn
    centered = mixtures - mixtures.mean(axis=1, keepdims=True)
    basis = np.linalg.qr(rng.standard_normal((d, rank)))[0]
    residuals = rng.standard_normal((n, d))
    residuals /= np.linalg.norm(residuals, axis=1, keepdims=True)
    attrs = centered @ basis.T + ATTRIBUTE_RESIDUAL * residuals
    attrs /= np.linalg.norm(attrs, axis=1, keepdims=True)

    relations: dict[str, RelationMeta] = {}
    for k in range(n):
        rel_id = f"R{k:02d}"
        sample = ", ".join(clusters[k][:3])
        relations[rel_id] = RelationMeta(
            id=rel_id,
            name=f"synthetic-relation-{k:02d}",
            description=f"links entities mentioned with terms such as {sample}",
            attribute=attrs[k],
        )

    instances: list[Instance] = []
    for k, rel_id in enumerate(relations):
        cluster = clusters[k]
        weights = mixtures[k]
        for _ in range(config.instances_per_relation):
            background: list[str] = []
            if has_topics:
                counts = rng.multinomial(TOPIC_TOKENS_PER_SENTENCE, weights)
                for t in range(rank):
                    pool = extended_pools[t]
                    background.extend(
                        pool[int(rng.integers(len(pool)))] for _ in range(counts[t])
                    )
            else:
                background.extend(
                    cluster[int(rng.integers(len(cluster)))]
                    for _ in range(TOPIC_TOKENS_PER_SENTENCE)
                )
            n_noise = int(rng.binomial(TOPIC_TOKENS_PER_SENTENCE, config.noise_scale))
            background.extend(
                tokens[int(rng.integers(config.vocab_size))] for _ in range(n_noise)
            )
            background = [background[j] for j in rng.permutation(len(background))]

            head_len = 1 if rng.random() < 0.9 else 2
            tail_len = 1 if rng.random() < 0.9 else 2
            head_tokens = [cluster[int(rng.integers(len(cluster)))] for _ in range(head_len)]
            tail_tokens = [cluster[int(rng.integers(len(cluster)))] for _ in range(tail_len)]
            cut1, cut2 = sorted(rng.integers(0, len(background) + 1, size=2).tolist())
            sent = (background[:cut1] + head_tokens + background[cut1:cut2]
                    + tail_tokens + background[cut2:])
            head = (cut1, cut1 + head_len - 1)
            tail = (cut2 + head_len, cut2 + head_len + tail_len - 1)
            instances.append(
                Instance(tokens=tuple(sent), head_span=head, tail_span=tail,
                         relation_id=rel_id)
            )
    return instances, relations


def synthetic_cluster_tokens(config: SyntheticConfig) -> dict[str, set[str]]:
    """The relation -> cluster-token assignment used by generate_synthetic."""
    _, clusters, _, _ = _token_partition(config)
    return {f"R{k:02d}": set(c) for k, c in enumerate(clusters)}


def synthetic_topic_tokens(config: SyntheticConfig) -> set[str]:
    """All shared topic-pool tokens used by generate_synthetic."""
    _, _, topic_pools, _ = _token_partition(config)
    return {tok for pool in topic_pools for tok in pool}


def save_instances(instances, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps({
                "tokens": list(inst.tokens),
                "head": list(inst.head_span),
                "tail": list(inst.tail_span),
                "relation": inst.relation_id,
            }) + "\n")


def save_relations(relations, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rel in relations.values():
            record = {"id": rel.id, "name": rel.name, "description": rel.description}
            if rel.attribute is not None:
                record["attribute"] = rel.attribute.tolist()
            fh.write(json.dumps(record) + "\n")
