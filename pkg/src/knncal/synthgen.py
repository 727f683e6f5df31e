"""Synthetic embedding-world datasets with a controllable, miscalibratable
simulated base model.

Embeddings are class-clustered gaussians; each instance gets one variant per
demonstration sampling (base point plus variant noise). Simulated base-model
logits come from a linear readout whose rows can be rotated inside the
class-mean plane and offset by a per-class bias: rotation and bias corrupt the
logits without touching the embeddings, so retrieval stays informative while
the base model turns systematically wrong. Embedding draws use their own
derived RNG stream, which keeps them bit-identical across readout settings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Embedding, Instance, LabelSpace, Variant, derive_seed, seeded_rng
from .errors import InvalidConfig, InvalidInput

READOUT_GAIN = 1.0


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 16
    n_classes: int = 2
    k_shots: int = 16
    n_test: int = 200
    class_sep: float = 4.0
    variant_noise: float = 1.2
    cluster_noise: float = 1.0
    readout_bias: float = 0.0
    readout_rotation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise InvalidConfig("need at least two classes")
        if self.dim < self.n_classes:
            raise InvalidConfig(f"dim {self.dim} must be >= n_classes {self.n_classes}")
        if self.k_shots < 2:
            raise InvalidConfig("k_shots must be at least 2")
        if self.n_test < 0:
            raise InvalidConfig("n_test must be non-negative")
        if self.variant_noise < 0 or self.cluster_noise < 0:
            raise InvalidConfig("noise scales must be non-negative")
        if self.class_sep < 0:
            raise InvalidConfig("class_sep must be non-negative")


def class_means(config: SynthConfig) -> np.ndarray:
    """One mean per class on orthogonal axes; pairwise distances = class_sep."""

    means = np.zeros((config.n_classes, config.dim))
    for y in range(config.n_classes):
        means[y, y] = config.class_sep / np.sqrt(2.0)
    return means


def _readout(config: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Rotated readout matrix and bias vector.

    The aligned readout points each class row at its own mean axis. The
    rotation acts inside the class-axis subspace (2x2 blocks over consecutive
    class axes); the bias is added to class 0's logit.
    """

    w = np.zeros((config.n_classes, config.dim))
    for y in range(config.n_classes):
        w[y, y] = READOUT_GAIN
    rot = np.eye(config.dim)
    c, s = np.cos(config.readout_rotation), np.sin(config.readout_rotation)
    for a in range(0, config.n_classes - 1, 2):
        rot[a, a], rot[a, a + 1] = c, -s
        rot[a + 1, a], rot[a + 1, a + 1] = s, c
    w = w @ rot.T
    bias = np.zeros(config.n_classes)
    bias[0] = config.readout_bias
    return w, bias


def generate(config: SynthConfig) -> Dataset:
    """Deterministic dataset: train and dev hold k_shots instances per class,
    test holds n_test instances with round-robin labels; every instance
    carries k_shots variants."""

    labels = tuple(f"y{i}" for i in range(config.n_classes))
    space = LabelSpace(labels)
    means = class_means(config)
    readout, bias = _readout(config)
    emb_rng = seeded_rng(derive_seed(config.seed, 0))

    def build_instance(iid: str, split: str, y: int | None, mean: np.ndarray) -> Instance:
        base = mean + config.cluster_noise * emb_rng.normal(size=config.dim)
        offsets = config.variant_noise * emb_rng.normal(size=(config.k_shots, config.dim))
        points = base + offsets
        logits = points @ readout.T + bias
        variants = tuple(
            Variant(embedding=Embedding(points[v]), plm_logits=logits[v])
            for v in range(config.k_shots)
        )
        return Instance(id=iid, split=split, label=None if y is None else labels[y], variants=variants)

    instances = []
    for split in ("train", "dev"):
        for y in range(config.n_classes):
            for i in range(config.k_shots):
                instances.append(build_instance(f"{split}-{labels[y]}-{i}", split, y, means[y]))
    for j in range(config.n_test):
        y = j % config.n_classes
        instances.append(build_instance(f"test-{j}", "test", y, means[y]))
    return Dataset(label_space=space, dim=config.dim, k_shots=config.k_shots, instances=tuple(instances))


def biased_plm_preset(seed: int = 0) -> SynthConfig:
    """Separable embeddings with a deliberately miscalibrated readout.

    Constants frozen from a pre-build sweep (scripts/tune_synth_preset.py):
    the simulated base model lands near 0.65 test accuracy while the
    nearest-centroid oracle stays above 0.95 across seeds.
    """

    return SynthConfig(
        dim=64,
        n_classes=2,
        k_shots=16,
        n_test=500,
        class_sep=6.0,
        variant_noise=1.0,
        cluster_noise=0.8,
        readout_bias=0.0,
        readout_rotation=0.88,
        seed=seed,
    )


def noiseless_preset(seed: int = 0) -> SynthConfig:
    """Sanity preset: zero noise and an aligned readout, so every method
    including the plain base model should score 1.0."""

    return SynthConfig(
        dim=16,
        n_classes=2,
        k_shots=16,
        n_test=100,
        class_sep=4.0,
        variant_noise=0.0,
        cluster_noise=0.0,
        readout_bias=0.0,
        readout_rotation=0.0,
        seed=seed,
    )


def centroid_oracle(dataset: Dataset) -> float:
    """Nearest-train-centroid accuracy on mean-of-variants test embeddings."""

    train = dataset.split_instances("train")
    test = dataset.split_instances("test")
    if not train or not test:
        raise InvalidInput("centroid oracle needs labeled train and test splits")
    n_labels = len(dataset.label_space)
    sums = np.zeros((n_labels, dataset.dim))
    counts = np.zeros(n_labels)
    for inst in train:
        y = dataset.label_index(inst)
        sums[y] += np.mean([v.embedding.values for v in inst.variants], axis=0)
        counts[y] += 1
    centroids = sums / counts[:, None]
    correct = 0
    for inst in test:
        if inst.label is None:
            raise InvalidInput(f"test instance {inst.id!r} has no label")
        point = np.mean([v.embedding.values for v in inst.variants], axis=0)
        pred = int(np.argmin(np.linalg.norm(centroids - point, axis=1)))
        correct += pred == dataset.label_index(inst)
    return correct / len(test)


def generate_coincident(
    n_pairs: int = 16,
    dim: int = 6,
    signal: float = 1.0,
    nuisance: float = 4.0,
    seed: int = 0,
) -> Dataset:
    """Paired task where raw geometry confounds labels but one coordinate fixes it.

    Each pair shares a random nuisance position in the first dim-1 coordinates;
    its two members differ only in the last coordinate (+signal vs -signal) and
    carry opposite labels. A query's nearest raw neighbor is therefore its
    opposite-label twin, so raw within-class mean distance exceeds
    between-class mean distance. A projection that amplifies the last
    coordinate flips that ordering, which is what feature training must find.
    One variant per instance.
    """

    if n_pairs < 2:
        raise InvalidConfig("need at least two pairs")
    if dim < 2:
        raise InvalidConfig("need at least one nuisance coordinate plus the signal one")
    space = LabelSpace(("y0", "y1"))
    rng = seeded_rng(derive_seed(seed, 1))
    instances = []
    for split in ("train", "dev"):
        for j in range(n_pairs):
            u = np.zeros(dim)
            u[:-1] = nuisance * rng.normal(size=dim - 1)
            for y, sign in ((0, signal), (1, -signal)):
                point = u.copy()
                point[-1] = sign
                variants = (Variant(embedding=Embedding(point), plm_logits=np.zeros(2)),)
                instances.append(
                    Instance(id=f"{split}-y{y}-{j}", split=split, label=f"y{y}", variants=variants)
                )
    return Dataset(label_space=space, dim=dim, k_shots=n_pairs, instances=tuple(instances))


def coincident_split(dataset: Dataset) -> tuple[set[str], set[str]]:
    """Fixed query/store halves for the coincident task.

    Pair members alternate sides by pair parity, so every query's coincident
    twin sits in the store with the opposite label — the worst case raw
    retrieval can face.
    """

    store_ids, query_ids = set(), set()
    for inst in dataset.split_instances("train"):
        j = int(inst.id.rsplit("-", 1)[1])
        is_y0 = inst.label == "y0"
        if (j % 2 == 0) == is_y0:
            store_ids.add(inst.id)
        else:
            query_ids.add(inst.id)
    return query_ids, store_ids
