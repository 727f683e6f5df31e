"""Training infrastructure: flat parameter vectors, Adam, loss helpers, and a
central-difference gradient checker.

The two trainable modules keep their parameters in a single flat array with a
named-slice manifest, so the optimizer and the checker never need to know the
network shapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .core import Distribution
from .errors import DimensionMismatch, InvalidInput, NumericalError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ParamVector:
    """Flat f64 parameter array plus a manifest of named tensor slices."""

    flat: np.ndarray
    manifest: tuple[tuple[str, int, tuple[int, ...]], ...]

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.ndim != 1:
            raise InvalidInput("parameter array must be flat")
        flat = flat.copy()
        flat.flags.writeable = False
        object.__setattr__(self, "flat", flat)
        offset = 0
        for name, start, shape in self.manifest:
            if start != offset:
                raise InvalidInput(f"manifest slice for {name!r} is not contiguous")
            offset += int(np.prod(shape))
        if offset != len(flat):
            raise InvalidInput("manifest does not cover the parameter array")

    @classmethod
    def from_tensors(cls, tensors: Sequence[tuple[str, np.ndarray]]) -> "ParamVector":
        manifest = []
        parts = []
        offset = 0
        for name, arr in tensors:
            arr = np.asarray(arr, dtype=np.float64)
            manifest.append((name, offset, arr.shape))
            parts.append(arr.ravel())
            offset += arr.size
        return cls(flat=np.concatenate(parts), manifest=tuple(manifest))

    def tensor(self, name: str) -> np.ndarray:
        for n, start, shape in self.manifest:
            if n == name:
                size = int(np.prod(shape))
                return self.flat[start : start + size].reshape(shape)
        raise InvalidInput(f"no tensor named {name!r}")

    def with_flat(self, flat: np.ndarray) -> "ParamVector":
        if flat.shape != self.flat.shape:
            raise DimensionMismatch("replacement flat array has a different length")
        return ParamVector(flat=flat, manifest=self.manifest)

    def __len__(self) -> int:
        return len(self.flat)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), **kwargs)


def cross_entropy(pred: Distribution | np.ndarray, gold: int) -> float:
    """Negative log probability of the gold class, floored at 1e-12."""

    probs = pred.probs if isinstance(pred, Distribution) else np.asarray(pred, dtype=np.float64)
    if not 0 <= gold < len(probs):
        raise InvalidInput(f"gold index {gold} out of range for {len(probs)} classes")
    return float(-np.log(max(float(probs[gold]), PROB_FLOOR)))


def adam_step(
    params: ParamVector, grads: np.ndarray, state: AdamState, lr: float
) -> tuple[ParamVector, AdamState]:
    """One bias-corrected Adam update; pure, returns new params and state."""

    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.flat.shape:
        raise DimensionMismatch(
            f"gradient length {grads.shape} does not match parameters {params.flat.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_flat = params.flat - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return params.with_flat(new_flat), new_state


def finite_diff_check(
    loss: Callable[[ParamVector], float],
    params: ParamVector,
    analytic_grad: np.ndarray,
    h: float = 1e-5,
    subsample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between central differences and the analytic gradient.

    With ``subsample`` set, at least 50 random coordinates are checked instead
    of all of them (``rng`` required in that case).
    """

    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if analytic_grad.shape != params.flat.shape:
        raise DimensionMismatch("analytic gradient length does not match parameters")
    n = len(params)
    if subsample is not None and subsample < n:
        if rng is None:
            raise InvalidInput("subsampled checking needs an rng")
        coords = rng.choice(n, size=max(50, subsample), replace=False) if n > max(50, subsample) else np.arange(n)
    else:
        coords = np.arange(n)
    worst = 0.0
    base = params.flat
    for i in coords:
        bumped = base.copy()
        bumped[i] = base[i] + h
        up = loss(params.with_flat(bumped))
        bumped[i] = base[i] - h
        down = loss(params.with_flat(bumped))
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericalError(f"loss not finite when perturbing coordinate {i}")
        fd = (up - down) / (2.0 * h)
        an = analytic_grad[i]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, rel)
    return worst


def minibatches(n_rows: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Seeded shuffle split into batches; the last partial batch is kept."""

    if n_rows <= 0 or batch_size <= 0:
        raise InvalidInput("n_rows and batch_size must be positive")
    order = rng.permutation(n_rows)
    for start in range(0, n_rows, batch_size):
        yield order[start : start + batch_size]
