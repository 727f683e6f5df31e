"""Key-value cache of few-shot representations and exact neighbor search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Dataset, Embedding
from .errors import DimensionMismatch, EmptyDatastore, InvalidInput, MissingLabel

# Maps an (..., dim_in) array of embeddings to an (..., dim_out) array.
Transform = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DatastoreRecord:
    """One cached (representation, label) pair from a single variant."""

    key: np.ndarray
    value: int
    source_instance: str
    variant_index: int


@dataclass(frozen=True)
class Datastore:
    """Immutable record list plus stacked arrays for vectorized search.

    Records keep dataset file order (instance order, then variant index), so
    rebuilding from the same dataset always yields the same store.
    """

    dim: int
    records: tuple[DatastoreRecord, ...]
    keys: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if self.dim <= 0:
            raise InvalidInput("datastore dim must be positive")
        for rec in records:
            if rec.key.shape != (self.dim,):
                raise DimensionMismatch(
                    f"record from {rec.source_instance!r} has key shape {rec.key.shape}, expected ({self.dim},)"
                )
        keys = np.stack([r.key for r in records]) if records else np.empty((0, self.dim))
        values = np.array([r.value for r in records], dtype=np.int64)
        keys.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class NeighborList:
    """Search result sorted ascending by (distance, record_index)."""

    distances: np.ndarray
    values: np.ndarray
    record_indices: np.ndarray

    def __post_init__(self):
        for name in ("distances", "values", "record_indices"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (len(self.distances) == len(self.values) == len(self.record_indices)):
            raise InvalidInput("neighbor list arrays must have equal length")

    def __len__(self) -> int:
        return len(self.distances)


def build_datastore(
    dataset: Dataset,
    include: Callable[[str], bool],
    transform: Optional[Transform] = None,
) -> Datastore:
    """Cache one record per (instance, variant) pair whose id passes ``include``.

    ``transform`` (for example the learned feature projection) is applied to
    the stacked key matrix; it must map an (n, dim) array to (n, dim').
    """

    selected = [inst for inst in dataset.instances if include(inst.id)]
    for inst in selected:
        if inst.label is None:
            raise MissingLabel(f"instance {inst.id!r} selected for the datastore but has no label")
    raw = []
    meta = []
    for inst in selected:
        value = dataset.label_space.index_of(inst.label)
        for j, variant in enumerate(inst.variants):
            raw.append(variant.embedding.values)
            meta.append((value, inst.id, j))
    if not raw:
        return Datastore(dim=dataset.dim, records=())
    keys = np.stack(raw)
    if transform is not None:
        keys = np.asarray(transform(keys), dtype=np.float64)
        if keys.ndim != 2 or keys.shape[0] != len(raw):
            raise DimensionMismatch(
                f"transform returned shape {keys.shape}, expected ({len(raw)}, dim')"
            )
    records = tuple(
        DatastoreRecord(key=keys[i].copy(), value=v, source_instance=iid, variant_index=j)
        for i, (v, iid, j) in enumerate(meta)
    )
    return Datastore(dim=keys.shape[1], records=records)


def search(
    store: Datastore,
    query: Embedding | np.ndarray,
    k: int,
    exclude_instance: Optional[str] = None,
) -> NeighborList:
    """Exact k smallest euclidean distances; ties broken by record index.

    Returns fewer than k entries only when the searchable pool is smaller.
    """

    q = query.values if isinstance(query, Embedding) else np.asarray(query, dtype=np.float64)
    if k <= 0:
        raise InvalidInput(f"k must be positive, got {k}")
    if q.shape != (store.dim,):
        raise DimensionMismatch(f"query has shape {q.shape}, store dim is {store.dim}")
    if exclude_instance is None:
        candidates = np.arange(len(store))
    else:
        candidates = np.array(
            [i for i, r in enumerate(store.records) if r.source_instance != exclude_instance],
            dtype=np.int64,
        )
    if candidates.size == 0:
        raise EmptyDatastore("no searchable records (store empty or fully excluded)")
    diffs = store.keys[candidates] - q
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    # Stable sort on candidate order == tie-break by ascending record index.
    order = np.argsort(dists, kind="stable")[:k]
    chosen = candidates[order]
    return NeighborList(
        distances=dists[order],
        values=store.values[chosen],
        record_indices=chosen,
    )


def search_batch(
    store: Datastore,
    queries: np.ndarray,
    k: int,
    exclude_instance: Optional[str] = None,
) -> list[NeighborList]:
    """``search`` for a (n, dim) block of queries in one distance computation.

    Row i of the result equals ``search(store, queries[i], ...)``; the batched
    path exists purely to amortize the per-call overhead during evaluation.
    """

    q = np.asarray(queries, dtype=np.float64)
    if k <= 0:
        raise InvalidInput(f"k must be positive, got {k}")
    if q.ndim != 2 or q.shape[1] != store.dim:
        raise DimensionMismatch(f"query block has shape {q.shape}, store dim is {store.dim}")
    if exclude_instance is None:
        candidates = np.arange(len(store))
    else:
        candidates = np.array(
            [i for i, r in enumerate(store.records) if r.source_instance != exclude_instance],
            dtype=np.int64,
        )
    if candidates.size == 0:
        raise EmptyDatastore("no searchable records (store empty or fully excluded)")
    diffs = store.keys[candidates][None, :, :] - q[:, None, :]
    dists = np.sqrt(np.einsum("qij,qij->qi", diffs, diffs))
    order = np.argsort(dists, axis=1, kind="stable")[:, :k]
    out = []
    for i in range(q.shape[0]):
        chosen = candidates[order[i]]
        out.append(
            NeighborList(
                distances=dists[i, order[i]],
                values=store.values[chosen],
                record_indices=chosen,
            )
        )
    return out


def distinct_count_features(neighbors: NeighborList, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-prefix distance and distinct-label-count feature vectors.

    ``d[i]`` is the i-th neighbor distance and ``c[i]`` the number of distinct
    labels among the first i+1 neighbors. When fewer than ``k_max`` neighbors
    exist, both vectors are right-padded with their last real entry so the
    feature length stays fixed.
    """

    if len(neighbors) == 0:
        raise InvalidInput("cannot derive features from an empty neighbor list")
    if k_max <= 0:
        raise InvalidInput("k_max must be positive")
    n = min(len(neighbors), k_max)
    d = np.empty(k_max, dtype=np.float64)
    c = np.empty(k_max, dtype=np.float64)
    d[:n] = neighbors.distances[:n]
    seen: set[int] = set()
    for i in range(n):
        seen.add(int(neighbors.values[i]))
        c[i] = len(seen)
    d[n:] = d[n - 1]
    c[n:] = c[n - 1]
    return d, c
