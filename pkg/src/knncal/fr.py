"""Feature regularization: a learned ReLU projection trained so that nearest
neighbors of a query in the projected space carry the query's label.

The loss is the negative log of the neighbor-vote probability of the gold
class. Neighbor selection is recomputed every optimization step in the current
projected space and treated as constant within the step; gradients flow
through the selected distances only. Setting ``fr_full_softmax`` skips the
selection and votes over the entire store, which is fully differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Embedding, Hyperparams, Instance, seeded_rng
from .datastore import Transform
from .errors import DimensionMismatch, InvalidInput, OverlapError
from .optim import PROB_FLOOR, AdamState, ParamVector, adam_step, minibatches


@dataclass(frozen=True)
class FrModel:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DimensionMismatch(f"weight {w.shape} and bias {b.shape} are inconsistent")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InvalidInput("model parameters must be finite")
        w = w.copy(); w.flags.writeable = False
        b = b.copy(); b.flags.writeable = False
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def z_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


def init_fr_model(in_dim: int, z_dim: int, rng: np.random.Generator) -> FrModel:
    lim = 1.0 / np.sqrt(in_dim)
    return FrModel(
        weight=rng.uniform(-lim, lim, size=(z_dim, in_dim)),
        bias=rng.uniform(-lim, lim, size=z_dim),
    )


def fr_transform_array(model: FrModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.in_dim:
        raise DimensionMismatch(f"input dim {x.shape[-1]}, model expects {model.in_dim}")
    return np.maximum(x @ model.weight.T + model.bias, 0.0)


def fr_transform(model: FrModel, h: Embedding) -> Embedding:
    """Project one embedding into the learned non-negative feature space."""

    return Embedding(fr_transform_array(model, h.values))


def as_transform(model: FrModel) -> Transform:
    """Adapter for datastore building and query-side projection."""

    return lambda x: fr_transform_array(model, x)


def _params_of(model: FrModel) -> ParamVector:
    return ParamVector.from_tensors([("weight", model.weight), ("bias", model.bias)])


def fr_select(
    params: ParamVector, qx: np.ndarray, sx: np.ndarray, k: int
) -> np.ndarray:
    """Indices of the k nearest store rows per query, in the current space.

    Ties break by ascending store index (stable sort).
    """

    w = params.tensor("weight")
    b = params.tensor("bias")
    uq = np.maximum(qx @ w.T + b, 0.0)
    us = np.maximum(sx @ w.T + b, 0.0)
    d2 = (
        np.einsum("bz,bz->b", uq, uq)[:, None]
        + np.einsum("sz,sz->s", us, us)[None, :]
        - 2.0 * uq @ us.T
    )
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def fr_loss_grad_fixed(
    params: ParamVector,
    qx: np.ndarray,
    q_labels: np.ndarray,
    sx: np.ndarray,
    s_labels: np.ndarray,
    sel: np.ndarray,
    tau: float,
) -> tuple[float, np.ndarray]:
    """Mean loss and gradient with the neighbor selection ``sel`` held fixed.

    ``sel`` has one row of store indices per query. Rows whose gold
    probability hits the clamp are locally flat and contribute zero gradient.
    """

    w = params.tensor("weight")
    b = params.tensor("bias")
    n_batch = qx.shape[0]

    zq = qx @ w.T + b
    uq = np.maximum(zq, 0.0)
    mq = (zq > 0.0).astype(np.float64)
    zs = sx @ w.T + b
    us = np.maximum(zs, 0.0)
    ms = (zs > 0.0).astype(np.float64)

    delta = uq[:, None, :] - us[sel]           # (B, k, Z)
    s = np.einsum("bkz,bkz->bk", delta, delta)
    shifted = s - s.min(axis=1, keepdims=True)
    a = np.exp(-shifted / tau)                 # largest weight exactly 1
    gold = (s_labels[sel] == q_labels[:, None]).astype(np.float64)
    total = a.sum(axis=1)
    gold_mass = (a * gold).sum(axis=1)
    p = gold_mass / total
    flat = p < PROB_FLOOR
    losses = -np.log(np.maximum(p, PROB_FLOOR))

    # dL/ds_j = (-a_j/tau) * (1/total - [gold_j]/gold_mass); the shift in the
    # exponent cancels exactly, so using the shifted weights is safe. Rows with
    # gold_mass == 0 are flat and get zeroed below.
    safe_gold = np.where(gold_mass > 0.0, gold_mass, 1.0)
    gamma = (-a / tau) * (1.0 / total[:, None] - gold / safe_gold[:, None])
    gamma[flat] = 0.0

    t = np.einsum("bk,bkz->bz", gamma, delta)
    q_side = 2.0 * t * mq                       # (B, Z)
    dw = np.einsum("bz,bh->zh", q_side, qx)
    db = q_side.sum(axis=0)
    c = -2.0 * gamma[:, :, None] * delta * ms[sel]
    dw += np.einsum("bkz,bkh->zh", c, sx[sel])
    db += c.sum(axis=(0, 1))
    grad = np.concatenate([dw.ravel(), db.ravel()]) / n_batch
    return float(losses.mean()), grad


def _store_arrays(
    instances: Sequence[Instance], label_index
) -> tuple[np.ndarray, np.ndarray]:
    xs, labels = [], []
    for inst in instances:
        lab = label_index(inst)
        for v in inst.variants:
            xs.append(v.embedding.values)
            labels.append(lab)
    return np.stack(xs), np.asarray(labels, dtype=np.int64)


def fr_loss(
    model: FrModel,
    query: tuple[Embedding, int],
    store_raw: Sequence[tuple[Embedding, int]],
    k: int,
    tau: float,
) -> float:
    """Loss for one labeled query against a raw store, end to end.

    Selection happens inside, in the space induced by ``model``.
    """

    if not store_raw:
        raise InvalidInput("empty store")
    q_emb, q_label = query
    qx = np.asarray(q_emb.values if isinstance(q_emb, Embedding) else q_emb)[None, :]
    sx = np.stack([e.values if isinstance(e, Embedding) else np.asarray(e) for e, _ in store_raw])
    s_labels = np.asarray([lab for _, lab in store_raw], dtype=np.int64)
    params = _params_of(model)
    sel = fr_select(params, qx, sx, min(k, len(store_raw)))
    loss, _ = fr_loss_grad_fixed(
        params, qx, np.asarray([q_label]), sx, s_labels, sel, tau
    )
    return loss


@dataclass(frozen=True)
class FrTrainResult:
    model: FrModel
    epoch_losses: tuple[float, ...]


def train_fr(
    queries: Sequence[Instance],
    store_instances: Sequence[Instance],
    hp: Hyperparams,
    label_index,
) -> FrTrainResult:
    """Fit the projection on disjoint query and store halves.

    One training row per (query instance, variant); the store side keeps raw
    embeddings and is re-projected with the current parameters every step.
    """

    queries = list(queries)
    store_instances = list(store_instances)
    if not queries or not store_instances:
        raise InvalidInput("both query and store halves must be non-empty")
    shared = {i.id for i in queries} & {i.id for i in store_instances}
    if shared:
        raise OverlapError(f"query and store halves share instances: {sorted(shared)[:3]}")

    qx, q_labels = _store_arrays(queries, label_index)
    sx, s_labels = _store_arrays(store_instances, label_index)
    rng = seeded_rng(hp.seed)
    model = init_fr_model(qx.shape[1], hp.z_dim, rng)
    params = _params_of(model)
    state = AdamState.fresh(len(params))
    k_eff = len(sx) if hp.fr_full_softmax else min(hp.k, len(sx))
    n = qx.shape[0]
    epoch_losses = []
    for _ in range(hp.epochs):
        total = 0.0
        for batch in minibatches(n, hp.batch_size, rng):
            sel = fr_select(params, qx[batch], sx, k_eff)
            loss, grad = fr_loss_grad_fixed(
                params, qx[batch], q_labels[batch], sx, s_labels, sel, hp.tau
            )
            total += loss * len(batch)
            params, state = adam_step(params, grad, state, hp.lr)
        epoch_losses.append(total / n)
    return FrTrainResult(
        model=FrModel(weight=params.tensor("weight"), bias=params.tensor("bias")),
        epoch_losses=tuple(epoch_losses),
    )
