"""Domain types, probability distributions, and deterministic RNG contracts.

All numerics are float64. Randomness everywhere in the package flows through
:func:`seeded_rng` (numpy's PCG64 generator) so that identical seeds produce
identical streams across runs and platforms; derived seeds for sub-tasks come
from :func:`derive_seed`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidInput

SPLITS = ("train", "dev", "test")


def _as_f64(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of class identifiers; order is fixed at load time."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise InvalidInput("a label space needs at least two classes")
        if len(set(labels)) != len(labels):
            raise InvalidInput("label space contains duplicate labels")
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidInput(f"unknown label {label!r}") from None


@dataclass(frozen=True)
class Distribution:
    """Probability vector over an ordered label space.

    Entries must be non-negative and sum to 1 within 1e-9.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_f64(self.probs, "probs")
        object.__setattr__(self, "probs", probs)
        if not np.all(np.isfinite(probs)):
            raise InvalidInput("distribution entries must be finite")
        if np.any(probs < 0):
            raise InvalidInput("distribution entries must be non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidInput(f"distribution sums to {total!r}, expected 1 within 1e-9")

    def __len__(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class Embedding:
    """A finite float64 vector living in one declared representation space."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_f64(self.values, "values")
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise InvalidInput("embedding entries must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Variant:
    """One (embedding, base-model logits) pair for one demonstration sampling."""

    embedding: Embedding
    plm_logits: np.ndarray

    def __post_init__(self):
        logits = _as_f64(self.plm_logits, "plm_logits")
        object.__setattr__(self, "plm_logits", logits)
        if not np.all(np.isfinite(logits)):
            raise InvalidInput("plm_logits must be finite")


@dataclass(frozen=True)
class Instance:
    id: str
    split: str
    label: Optional[str]
    variants: tuple[Variant, ...]

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        if self.split not in SPLITS:
            raise InvalidInput(f"unknown split {self.split!r}")
        if self.split in ("train", "dev") and self.label is None:
            raise InvalidInput(f"instance {self.id!r}: {self.split} instances must carry a label")
        if not self.variants:
            raise InvalidInput(f"instance {self.id!r} has no variants")
        dims = {len(v.embedding) for v in self.variants}
        if len(dims) != 1:
            raise InvalidInput(f"instance {self.id!r} mixes embedding dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        return len(self.variants[0].embedding)


@dataclass(frozen=True)
class Dataset:
    """A validated bundle of instances over one label space.

    The train and dev splits each hold exactly ``k_shots`` labeled instances
    per class; no instance carries more than ``k_shots`` variants.
    """

    label_space: LabelSpace
    dim: int
    k_shots: int
    instances: tuple[Instance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.dim <= 0 or self.k_shots <= 0:
            raise InvalidInput("dim and k_shots must be positive")
        seen_ids = set()
        per_class = {s: {lab: 0 for lab in self.label_space.labels} for s in ("train", "dev")}
        for inst in self.instances:
            if inst.id in seen_ids:
                raise InvalidInput(f"duplicate instance id {inst.id!r}")
            seen_ids.add(inst.id)
            if inst.dim != self.dim:
                raise DimensionMismatch(
                    f"instance {inst.id!r} has dim {inst.dim}, dataset declares {self.dim}"
                )
            if len(inst.variants) > self.k_shots:
                raise InvalidInput(
                    f"instance {inst.id!r} has {len(inst.variants)} variants, more than k_shots={self.k_shots}"
                )
            if inst.label is not None:
                self.label_space.index_of(inst.label)
            for v in inst.variants:
                if len(v.plm_logits) != len(self.label_space):
                    raise DimensionMismatch(
                        f"instance {inst.id!r}: logits length {len(v.plm_logits)} != |labels| {len(self.label_space)}"
                    )
            if inst.split in per_class:
                per_class[inst.split][inst.label] += 1
        for split, counts in per_class.items():
            for lab, n in counts.items():
                if n != self.k_shots:
                    raise InvalidInput(
                        f"{split} split has {n} instances of class {lab!r}, expected exactly {self.k_shots}"
                    )

    def split_instances(self, split: str) -> tuple[Instance, ...]:
        return tuple(inst for inst in self.instances if inst.split == split)

    def label_index(self, inst: Instance) -> int:
        if inst.label is None:
            raise InvalidInput(f"instance {inst.id!r} has no label")
        return self.label_space.index_of(inst.label)


@dataclass(frozen=True)
class Hyperparams:
    """Knobs shared by retrieval, interpolation, and the two trainable modules."""

    lam: float = 0.5
    tau: float = 5.0
    k: int = 8
    k_max: int = 16
    z_dim: int = 32
    ans_hidden: int = 32
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    # Sensitivity switches, all off by default (see README).
    ensemble: str = "probs"
    ans_standardize_features: bool = False
    fr_full_softmax: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInput(f"lam must lie in [0, 1], got {self.lam}")
        if self.tau <= 0:
            raise InvalidInput("tau must be positive")
        for name in ("k", "k_max", "z_dim", "ans_hidden", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"{name} must be positive")
        if self.k > self.k_max:
            raise InvalidInput(f"k={self.k} exceeds k_max={self.k_max}")
        if self.k_max % 4 != 0:
            raise InvalidInput(f"k_max must be divisible by 4, got {self.k_max}")
        if self.ensemble not in ("probs", "logits"):
            raise InvalidInput(f"ensemble must be 'probs' or 'logits', got {self.ensemble!r}")

    def with_seed(self, seed: int) -> "Hyperparams":
        return replace(self, seed=seed)


def softmax(logits, temperature: float = 1.0) -> Distribution:
    """Temperature softmax with max-subtraction for stability."""

    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("softmax input must be finite")
    if not temperature > 0:
        raise InvalidInput(f"temperature must be positive, got {temperature}")
    return Distribution(softmax_array(arr, temperature))


def softmax_array(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Unchecked array-level softmax; callers guarantee finite input."""

    scaled = logits / temperature
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    exp = np.exp(scaled)
    return exp / exp.sum(axis=-1, keepdims=True)


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64); identical seeds give identical streams."""

    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(base_seed: int, *path: int) -> int:
    """Derive an independent child seed from a base seed and an index path.

    Uses numpy's SeedSequence spawn keys, so (base, path) pairs map to
    well-separated streams and the derivation is stable across platforms.
    """

    seq = np.random.SeedSequence(base_seed, spawn_key=tuple(path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
