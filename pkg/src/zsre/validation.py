"""Input validation helpers shared by loaders, splitters, and the estimator."""

from __future__ import annotations

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed instance/relation records or invalid splits."""


class ConfigError(ValueError):
    """Raised for invalid or unknown configuration values."""


def check_span(span, n_tokens: int, name: str) -> tuple[int, int]:
    """Validate an inclusive (start, end) token span against a sentence length."""
    try:
        q, r = int(span[0]), int(span[1])
    except (TypeError, ValueError, IndexError):
        raise DatasetError(f"{name} span must be a (start, end) pair, got {span!r}")
    if q > r:
        raise DatasetError(f"{name} span start exceeds end: ({q},{r})")
    if q < 0 or r >= n_tokens:
        raise DatasetError(
            f"{name} span out of range: ({q},{r}) for sentence of {n_tokens} tokens"
        )
    return q, r


def check_instances_have_relations(instances, relations) -> None:
    """Every instance's relation id must exist in the relation table."""
    known = set(relations)
    for i, inst in enumerate(instances):
        if inst.relation_id not in known:
            raise DatasetError(
                f"instance {i} has relation {inst.relation_id!r} "
                "missing from the relation table"
            )


def check_attribute_vector(attr, d_attr: int | None, rel_id: str) -> np.ndarray:
    """Coerce a relation attribute to a finite float64 vector."""
    vec = np.asarray(attr, dtype=np.float64)
    if vec.ndim != 1:
        raise DatasetError(f"relation {rel_id}: attribute must be a flat vector")
    if not np.all(np.isfinite(vec)):
        raise DatasetError(f"relation {rel_id}: attribute contains non-finite entries")
    if d_attr is not None and vec.shape[0] != d_attr:
        raise DatasetError(
            f"relation {rel_id}: attribute length {vec.shape[0]} != expected {d_attr}"
        )
    return vec


def check_probability(value: float, name: str, *, low=0.0, high=1.0) -> float:
    value = float(value)
    if not (low <= value <= high):
        raise ConfigError(f"{name} must be in [{low}, {high}], got {value}")
    return value
