"""Finite-difference verification of the two analytic gradients.

Each check builds a random problem from a seed, computes the analytic
gradient, and compares against central differences. Neighbor selection is
held fixed inside the projection loss, which is exactly the regime the
training loop differentiates.
"""

from __future__ import annotations

from .ans import ans_batch_loss_grad, init_ans_model, k_choices_for
from .core import Hyperparams, seeded_rng
from .fr import fr_loss_grad_fixed, fr_select, init_fr_model
from .optim import ParamVector, finite_diff_check


def check_fr_gradient(
    seed: int,
    n_queries: int = 6,
    n_store: int = 12,
    in_dim: int = 5,
    z_dim: int = 4,
    k: int = 4,
    tau: float = 5.0,
) -> float:
    """Max relative gradient error for one random projection problem."""

    rng = seeded_rng(seed)
    qx = rng.normal(size=(n_queries, in_dim))
    q_labels = rng.integers(0, 2, size=n_queries)
    sx = rng.normal(size=(n_store, in_dim))
    s_labels = rng.integers(0, 2, size=n_store)
    model = init_fr_model(in_dim, z_dim, rng)
    params = ParamVector.from_tensors([("weight", model.weight), ("bias", model.bias)])
    sel = fr_select(params, qx, sx, k=min(k, n_store))
    _, grad = fr_loss_grad_fixed(params, qx, q_labels, sx, s_labels, sel, tau)
    return finite_diff_check(
        lambda p: fr_loss_grad_fixed(p, qx, q_labels, sx, s_labels, sel, tau)[0],
        params,
        grad,
    )


def check_ans_gradient(
    seed: int,
    n_rows: int = 8,
    k_max: int = 8,
    hidden: int = 6,
) -> float:
    """Max relative gradient error for one random gate problem.

    Features and candidate gold probabilities are random constants, exactly as
    they are during training where the datastore is frozen.
    """

    rng = seeded_rng(seed)
    hp = Hyperparams(k_max=k_max, ans_hidden=hidden)
    n_choices = len(k_choices_for(k_max))
    x = rng.normal(size=(n_rows, 2 * k_max))
    qg = rng.uniform(0.05, 0.95, size=(n_rows, n_choices))
    model = init_ans_model(hp, rng)
    params = ParamVector.from_tensors(
        [("w1", model.w1), ("b1", model.b1), ("w2", model.w2), ("b2", model.b2)]
    )
    _, grad = ans_batch_loss_grad(params, x, qg, model)
    return finite_diff_check(
        lambda p: ans_batch_loss_grad(p, x, qg, model)[0], params, grad
    )
