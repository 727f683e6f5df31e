"""Adaptive neighbor selection: a two-layer gate over candidate neighbor counts.

The gate scores each k in {0, 4, 8, ..., k_max} from the query's neighbor
distance and distinct-label-count profiles, then mixes the corresponding
predictions; k=0 stands for trusting the base model alone. All candidate kNN
distributions reuse one k_max search by prefix truncation, since exact
neighbor sets are nested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calibrate import knn_probs_array
from .core import Distribution, Hyperparams, Instance, seeded_rng, softmax_array
from .datastore import Datastore, NeighborList, Transform, distinct_count_features, search
from .errors import DimensionMismatch, InvalidInput, OverlapError
from .optim import PROB_FLOOR, AdamState, ParamVector, adam_step, minibatches


def k_choices_for(k_max: int) -> tuple[int, ...]:
    return (0,) + tuple(range(4, k_max + 1, 4))


@dataclass(frozen=True)
class AnsModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    k_choices: tuple[int, ...]
    feature_shift: Optional[np.ndarray] = None
    feature_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise InvalidInput(f"{name} contains non-finite values")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "k_choices", tuple(int(k) for k in self.k_choices))
        kc = self.k_choices
        if not kc or kc != k_choices_for(kc[-1]):
            raise InvalidInput(f"k_choices must be 0,4,8,...,k_max, got {kc}")
        hidden, n_in = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (len(kc), hidden) or self.b2.shape != (len(kc),):
            raise DimensionMismatch("inconsistent layer shapes")
        if n_in != 2 * kc[-1]:
            raise DimensionMismatch(
                f"w1 expects {n_in} inputs but k_choices imply {2 * kc[-1]}"
            )
        if self.feature_shift is not None:
            for name in ("feature_shift", "feature_scale"):
                arr = np.asarray(getattr(self, name), dtype=np.float64)
                if arr.shape != (n_in,):
                    raise DimensionMismatch(f"{name} must have length {n_in}")
                arr = arr.copy()
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def k_max(self) -> int:
        return self.k_choices[-1]


def init_ans_model(hp: Hyperparams, rng: np.random.Generator) -> AnsModel:
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer."""

    kc = k_choices_for(hp.k_max)
    n_in = 2 * hp.k_max
    lim1 = 1.0 / np.sqrt(n_in)
    lim2 = 1.0 / np.sqrt(hp.ans_hidden)
    return AnsModel(
        w1=rng.uniform(-lim1, lim1, size=(hp.ans_hidden, n_in)),
        b1=rng.uniform(-lim1, lim1, size=hp.ans_hidden),
        w2=rng.uniform(-lim2, lim2, size=(len(kc), hp.ans_hidden)),
        b2=rng.uniform(-lim2, lim2, size=len(kc)),
        k_choices=kc,
    )


def _features_matrix(model: AnsModel, x: np.ndarray) -> np.ndarray:
    if model.feature_shift is not None:
        return (x - model.feature_shift) / model.feature_scale
    return x


def ans_forward_array(model: AnsModel, x: np.ndarray) -> np.ndarray:
    """Row-wise gate distribution for a (n, 2*k_max) feature matrix."""

    x = _features_matrix(model, x)
    hidden = np.maximum(x @ model.w1.T + model.b1, 0.0)
    return softmax_array(hidden @ model.w2.T + model.b2)

def ans_forward(model: AnsModel, d: np.ndarray, c: np.ndarray) -> Distribution:
    """Gate distribution over the candidate k values for one query."""

    d = np.asarray(d, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if d.shape != (model.k_max,) or c.shape != (model.k_max,):
        raise DimensionMismatch(
            f"expected d and c of length {model.k_max}, got {d.shape} and {c.shape}"
        )
    return Distribution(ans_forward_array(model, np.concatenate([d, c])[None, :])[0])


def candidate_distributions(
    model: AnsModel,
    p_lm_row: np.ndarray,
    distances: np.ndarray,
    values: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Stack of per-choice distributions: row i is p_{k_i NN} (row 0 is p_lm)."""

    n_labels = len(p_lm_row)
    out = np.empty((len(model.k_choices), n_labels))
    out[0] = p_lm_row
    for i, k in enumerate(model.k_choices[1:], start=1):
        n = min(k, len(distances))
        out[i] = knn_probs_array(distances[:n], values[:n], tau, n_labels)
    return out


def ans_aggregate_array(
    model: AnsModel,
    p_lm_row: np.ndarray,
    distances: np.ndarray,
    values: np.ndarray,
    tau: float,
) -> np.ndarray:
    d, c = distinct_count_features(
        NeighborList(distances=distances, values=values, record_indices=np.arange(len(values))),
        model.k_max,
    )
    gate = ans_forward_array(model, np.concatenate([d, c])[None, :])[0]
    return gate @ candidate_distributions(model, p_lm_row, distances, values, tau)


def ans_aggregate(
    model: AnsModel, p_lm: Distribution, neighbors_kmax: NeighborList, tau: float
) -> Distribution:
    """Gate-weighted mixture of the base-model and nested-kNN predictions."""

    if len(neighbors_kmax) == 0:
        raise InvalidInput("ans_aggregate needs at least one neighbor")
    return Distribution(
        ans_aggregate_array(model, p_lm.probs, neighbors_kmax.distances, neighbors_kmax.values, tau)
    )


@dataclass(frozen=True)
class AnsTrainResult:
    model: AnsModel
    epoch_losses: tuple[float, ...]


def _params_of(model: AnsModel) -> ParamVector:
    return ParamVector.from_tensors(
        [("w1", model.w1), ("b1", model.b1), ("w2", model.w2), ("b2", model.b2)]
    )


def _model_from(params: ParamVector, template: AnsModel) -> AnsModel:
    return AnsModel(
        w1=params.tensor("w1"),
        b1=params.tensor("b1"),
        w2=params.tensor("w2"),
        b2=params.tensor("b2"),
        k_choices=template.k_choices,
        feature_shift=template.feature_shift,
        feature_scale=template.feature_scale,
    )


def ans_training_rows(
    queries: Sequence[Instance],
    store: Datastore,
    hp: Hyperparams,
    label_index,
    transform: Optional[Transform] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Precompute (features X, gold-probability columns Qg) for every row.

    The store is frozen during gate training, so each row's candidate
    distributions are constants; only the gate output varies with parameters.
    Row order: query file order, then variant index.
    """

    kc = k_choices_for(hp.k_max)
    xs, qgs = [], []
    for inst in queries:
        gold = label_index(inst)
        embs = np.stack([v.embedding.values for v in inst.variants])
        if transform is not None:
            embs = np.asarray(transform(embs), dtype=np.float64)
        logits = np.stack([v.plm_logits for v in inst.variants])
        p_lm_rows = softmax_array(logits)
        for vi in range(embs.shape[0]):
            nb = search(store, embs[vi], k=hp.k_max)
            d, c = distinct_count_features(nb, hp.k_max)
            xs.append(np.concatenate([d, c]))
            qg = np.empty(len(kc))
            qg[0] = p_lm_rows[vi, gold]
            for i, k in enumerate(kc[1:], start=1):
                n = min(k, len(nb))
                qg[i] = knn_probs_array(
                    nb.distances[:n], nb.values[:n], hp.tau, p_lm_rows.shape[1]
                )[gold]
            qgs.append(qg)
    return np.stack(xs), np.stack(qgs)


def ans_batch_loss_grad(
    params: ParamVector, x: np.ndarray, qg: np.ndarray, template: AnsModel
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of the aggregated gold probability, with gradient."""

    model = _model_from(params, template)
    xs = _features_matrix(model, x)
    z1 = xs @ model.w1.T + model.b1
    u = np.maximum(z1, 0.0)
    gate = softmax_array(u @ model.w2.T + model.b2)
    p_gold = np.einsum("bi,bi->b", gate, qg)
    clamped = p_gold < PROB_FLOOR
    losses = -np.log(np.maximum(p_gold, PROB_FLOOR))
    n = x.shape[0]

    # d(loss_b)/d(gate_b) = -qg_b / p_b; clamped rows are locally flat.
    dgate = -qg / np.maximum(p_gold, PROB_FLOOR)[:, None]
    dgate[clamped] = 0.0
    inner = np.einsum("bi,bi->b", gate, dgate)
    dz2 = gate * (dgate - inner[:, None]) / n
    dw2 = dz2.T @ u
    db2 = dz2.sum(axis=0)
    du = dz2 @ model.w2
    dz1 = du * (z1 > 0.0)
    dw1 = dz1.T @ xs
    db1 = dz1.sum(axis=0)
    grad = np.concatenate([dw1.ravel(), db1.ravel(), dw2.ravel(), db2.ravel()])
    return float(losses.mean()), grad


def train_ans(
    queries: Sequence[Instance],
    store: Datastore,
    hp: Hyperparams,
    label_index,
    transform: Optional[Transform] = None,
) -> AnsTrainResult:
    """Train the gate on held-out queries against a frozen datastore.

    ``label_index`` maps an instance to its gold class index (usually
    ``dataset.label_index``). The store must not contain records from the
    query instances; training is deterministic given ``hp.seed``.
    """

    queries = list(queries)
    if not queries:
        raise InvalidInput("no training queries")
    query_ids = {inst.id for inst in queries}
    store_ids = {rec.source_instance for rec in store.records}
    shared = query_ids & store_ids
    if shared:
        raise OverlapError(f"store and queries share instances: {sorted(shared)[:3]}")

    x, qg = ans_training_rows(queries, store, hp, label_index, transform)
    rng = seeded_rng(hp.seed)
    model = init_ans_model(hp, rng)
    if hp.ans_standardize_features:
        shift = x.mean(axis=0)
        scale = np.maximum(x.std(axis=0), 1e-8)
        model = AnsModel(
            w1=model.w1, b1=model.b1, w2=model.w2, b2=model.b2,
            k_choices=model.k_choices, feature_shift=shift, feature_scale=scale,
        )
    params = _params_of(model)
    state = AdamState.fresh(len(params))
    epoch_losses = []
    n = x.shape[0]
    for _ in range(hp.epochs):
        total = 0.0
        for batch in minibatches(n, hp.batch_size, rng):
            loss, grad = ans_batch_loss_grad(params, x[batch], qg[batch], model)
            total += loss * len(batch)
            params, state = adam_step(params, grad, state, hp.lr)
        epoch_losses.append(total / n)
    return AnsTrainResult(model=_model_from(params, model), epoch_losses=tuple(epoch_losses))
