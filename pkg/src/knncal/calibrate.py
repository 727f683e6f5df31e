"""Inference core: kNN distribution, interpolation, ICL baseline, ensembling.

Per-variant distributions are ensembled by arithmetic mean with argmax taken
after averaging; the interpolation endpoints therefore reduce exactly (λ=1 is
bitwise the ICL baseline, λ=0 bitwise the pure kNN prediction).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, TYPE_CHECKING

import numpy as np

from .core import Distribution, Hyperparams, Instance, softmax_array
from .datastore import Datastore, NeighborList, Transform, search_batch
from .errors import DimensionMismatch, EmptyDatastore, InvalidConfig, InvalidInput

if TYPE_CHECKING:  # circular at runtime: ans imports calibrate helpers
    from .ans import AnsModel


class PredictionMode(enum.Enum):
    """How one instance's final distribution is produced."""

    ICL = "icl"
    KNN_ONLY = "knn_only"
    FIXED_LAMBDA = "fixed_lambda"
    ANS_AGGREGATED = "ans_aggregated"


@dataclass(frozen=True)
class CalibratedPrediction:
    final: Distribution
    p_knn: Optional[Distribution]
    p_lm: Distribution
    neighbors_used: int


def knn_probs_array(
    distances: np.ndarray, values: np.ndarray, tau: float, n_labels: int
) -> np.ndarray:
    """Class weights exp(-d_i^2/tau) summed per neighbor label, normalized.

    The smallest squared distance is subtracted inside the exponent so the
    largest weight is exactly 1; the shift cancels under normalization.
    """

    sq = distances * distances
    w = np.exp(-(sq - sq.min()) / tau)
    per_class = np.bincount(values, weights=w, minlength=n_labels)
    return per_class / per_class.sum()


def knn_distribution(neighbors: NeighborList, tau: float, label_space_size: int) -> Distribution:
    """Neighbor-vote distribution; classes absent from the neighbors get exactly 0."""

    if len(neighbors) == 0:
        raise InvalidInput("cannot form a kNN distribution from zero neighbors")
    if not tau > 0:
        raise InvalidInput(f"tau must be positive, got {tau}")
    if label_space_size <= int(neighbors.values.max()):
        raise InvalidInput("label_space_size too small for the neighbor values present")
    return Distribution(knn_probs_array(neighbors.distances, neighbors.values, tau, label_space_size))


def interpolate(p_knn: Distribution, p_lm: Distribution, lam: float) -> Distribution:
    if not 0.0 <= lam <= 1.0:
        raise InvalidInput(f"lambda must lie in [0, 1], got {lam}")
    if len(p_knn) != len(p_lm):
        raise DimensionMismatch(f"distribution lengths differ: {len(p_knn)} vs {len(p_lm)}")
    return Distribution((1.0 - lam) * p_knn.probs + lam * p_lm.probs)


def ensemble_mean(per_variant: np.ndarray) -> np.ndarray:
    """Mean over axis 0; both baseline and calibrated paths share this so the
    λ endpoints stay bitwise comparable."""

    return per_variant.mean(axis=0)


def _variant_arrays(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    embs = np.stack([v.embedding.values for v in instance.variants])
    logits = np.stack([v.plm_logits for v in instance.variants])
    return embs, logits


def icl_baseline(instance: Instance, ensemble: str = "probs") -> Distribution:
    """Ensembled base-model prediction over the instance's demonstration variants."""

    if not instance.variants:
        raise InvalidInput(f"instance {instance.id!r} has no variants")
    _, logits = _variant_arrays(instance)
    if ensemble == "logits":
        return Distribution(softmax_array(ensemble_mean(logits)))
    return Distribution(ensemble_mean(softmax_array(logits)))


def predict_instance(
    instance: Instance,
    store: Optional[Datastore],
    hp: Hyperparams,
    transform: Optional[Transform] = None,
    ans: Optional["AnsModel"] = None,
    mode: PredictionMode = PredictionMode.FIXED_LAMBDA,
    exclude_self: bool = False,
) -> CalibratedPrediction:
    """Predict one instance under the given mode, ensembling over variants.

    ``transform`` maps raw embeddings into the store's key space and must have
    been applied to the store at build time. ``exclude_self`` drops the
    instance's own records when it is part of the store.
    """

    embs, logits = _variant_arrays(instance)
    p_lm_rows = softmax_array(logits)
    p_lm = Distribution(ensemble_mean(p_lm_rows))

    if mode is PredictionMode.ICL:
        return CalibratedPrediction(
            final=icl_baseline(instance, ensemble=hp.ensemble),
            p_knn=None,
            p_lm=p_lm,
            neighbors_used=0,
        )

    if store is None:
        raise InvalidConfig(f"mode {mode.value} requires a datastore")
    if mode is PredictionMode.ANS_AGGREGATED and ans is None:
        raise InvalidConfig("ANS_AGGREGATED mode requires a trained AnsModel")

    if transform is not None:
        embs = np.asarray(transform(embs), dtype=np.float64)
    if embs.shape[1] != store.dim:
        raise DimensionMismatch(
            f"query space has dim {embs.shape[1]}, store has dim {store.dim}"
        )
    exclude = instance.id if exclude_self else None
    n_labels = p_lm_rows.shape[1]

    k_search = hp.k_max if mode is PredictionMode.ANS_AGGREGATED else hp.k
    final_rows = np.empty_like(p_lm_rows)
    knn_rows = np.empty_like(p_lm_rows)
    neighbors_used = 0
    neighbor_lists = search_batch(store, embs, k=k_search, exclude_instance=exclude)
    for i, nb in enumerate(neighbor_lists):
        neighbors_used = max(neighbors_used, len(nb))
        if mode is PredictionMode.ANS_AGGREGATED:
            from .ans import ans_aggregate_array

            final_rows[i] = ans_aggregate_array(
                ans, p_lm_rows[i], nb.distances, nb.values, hp.tau
            )
            knn_rows[i] = knn_probs_array(
                nb.distances[: hp.k], nb.values[: hp.k], hp.tau, n_labels
            )
        else:
            knn_rows[i] = knn_probs_array(nb.distances, nb.values, hp.tau, n_labels)
            if mode is PredictionMode.KNN_ONLY:
                final_rows[i] = knn_rows[i]
            else:
                final_rows[i] = (1.0 - hp.lam) * knn_rows[i] + hp.lam * p_lm_rows[i]
    return CalibratedPrediction(
        final=Distribution(ensemble_mean(final_rows)),
        p_knn=Distribution(ensemble_mean(knn_rows)),
        p_lm=p_lm,
        neighbors_used=neighbors_used,
    )
