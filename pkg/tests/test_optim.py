import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knncal.core import Distribution, seeded_rng
from knncal.errors import DimensionMismatch, InvalidInput, NumericalError
from knncal.optim import (
    AdamState,
    ParamVector,
    adam_step,
    cross_entropy,
    finite_diff_check,
    minibatches,
)


def reference_adam(theta, grads_per_step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook Adam, written independently of the implementation under test."""

    theta = np.asarray(theta, dtype=np.float64).copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t, g in enumerate(grads_per_step, start=1):
        g = np.asarray(g, dtype=np.float64)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta


class TestParamVector:
    def test_roundtrip(self):
        pv = ParamVector.from_tensors([("w", np.arange(6.0).reshape(2, 3)), ("b", np.ones(2))])
        assert pv.tensor("w").shape == (2, 3)
        assert pv.tensor("w")[1, 2] == 5.0
        assert pv.tensor("b").tolist() == [1.0, 1.0]
        assert len(pv) == 8

    def test_unknown_name(self):
        pv = ParamVector.from_tensors([("w", np.zeros(3))])
        with pytest.raises(InvalidInput):
            pv.tensor("nope")

    def test_manifest_must_cover(self):
        with pytest.raises(InvalidInput):
            ParamVector(flat=np.zeros(5), manifest=(("w", 0, (3,)),))

    def test_with_flat_length_checked(self):
        pv = ParamVector.from_tensors([("w", np.zeros(3))])
        with pytest.raises(DimensionMismatch):
            pv.with_flat(np.zeros(4))


class TestCrossEntropy:
    def test_one_hot_zero_loss(self):
        assert cross_entropy(Distribution(np.array([0.0, 1.0])), 1) == 0.0

    def test_uniform(self):
        assert abs(cross_entropy(Distribution(np.array([0.5, 0.5])), 0) - math.log(2)) < 1e-12

    def test_confidently_wrong(self):
        got = cross_entropy(Distribution(np.array([0.9, 0.1])), 1)
        assert abs(got - 2.302585) < 1e-5

    def test_floor_prevents_inf(self):
        got = cross_entropy(Distribution(np.array([1.0, 0.0])), 1)
        assert got == pytest.approx(-math.log(1e-12))

    def test_index_range(self):
        with pytest.raises(InvalidInput):
            cross_entropy(Distribution(np.array([0.5, 0.5])), 2)


class TestAdam:
    def pv(self, values):
        return ParamVector.from_tensors([("theta", np.asarray(values, dtype=np.float64))])

    def test_zero_gradient_fixed_point(self):
        pv = self.pv([1.0, -2.0])
        state = AdamState.fresh(2)
        out, new_state = adam_step(pv, np.zeros(2), state, lr=0.1)
        assert out.flat.tolist() == [1.0, -2.0]
        assert new_state.t == 1

    def test_single_step_magnitude(self):
        pv = self.pv([0.0])
        out, _ = adam_step(pv, np.array([1.0]), AdamState.fresh(1), lr=1e-3)
        # Bias correction makes the first step almost exactly -lr.
        assert abs(out.flat[0] + 1e-3) < 1e-8
        assert np.allclose(out.flat, reference_adam([0.0], [[1.0]], 1e-3))

    def test_multi_step_against_reference(self):
        rng = seeded_rng(11)
        theta = rng.normal(size=5)
        grads = [rng.normal(size=5) for _ in range(20)]
        pv = self.pv(theta)
        state = AdamState.fresh(5)
        for g in grads:
            pv, state = adam_step(pv, g, state, lr=0.01)
        assert np.allclose(pv.flat, reference_adam(theta, grads, 0.01), atol=1e-12)

    def test_deterministic(self):
        pv = self.pv([0.3, 0.7])
        g = np.array([0.5, -0.2])
        a, _ = adam_step(pv, g, AdamState.fresh(2), lr=0.01)
        b, _ = adam_step(pv, g, AdamState.fresh(2), lr=0.01)
        assert a.flat.tolist() == b.flat.tolist()

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            adam_step(self.pv([0.0]), np.zeros(2), AdamState.fresh(1), lr=0.1)

    def test_gradient_scale_consistency(self):
        # With eps tiny, scaling all gradients by c leaves the step unchanged.
        rng = seeded_rng(4)
        theta = rng.normal(size=6)
        g = rng.normal(size=6)
        s = AdamState.fresh(6, eps=1e-16)
        a, _ = adam_step(self.pv(theta), g, s, lr=0.01)
        b, _ = adam_step(self.pv(theta), 10.0 * g, s, lr=0.01)
        assert np.allclose(a.flat, b.flat, rtol=1e-6)


class TestFiniteDiffCheck:
    def test_quadratic(self):
        pv = ParamVector.from_tensors([("x", np.array([3.0]))])
        err = finite_diff_check(lambda p: float(p.flat[0] ** 2), pv, np.array([6.0]))
        assert err < 1e-8

    def test_negative_control_detects_wrong_gradient(self):
        pv = ParamVector.from_tensors([("x", np.array([3.0]))])
        err = finite_diff_check(lambda p: float(p.flat[0] ** 2), pv, np.array([12.0]))
        assert abs(err - 0.5) < 1e-6

    def test_multivariate(self):
        rng = seeded_rng(9)
        theta = rng.normal(size=10)
        a = rng.normal(size=10)

        def loss(p):
            return float(np.sin(p.flat) @ a)

        pv = ParamVector.from_tensors([("x", theta)])
        err = finite_diff_check(loss, pv, a * np.cos(theta))
        assert err < 1e-7

    def test_subsample(self):
        rng = seeded_rng(2)
        theta = rng.normal(size=200)
        pv = ParamVector.from_tensors([("x", theta)])
        err = finite_diff_check(
            lambda p: float((p.flat**2).sum()), pv, 2 * theta, subsample=60, rng=seeded_rng(0)
        )
        assert err < 1e-6

    def test_nonfinite_loss_rejected(self):
        pv = ParamVector.from_tensors([("x", np.array([0.0]))])
        with pytest.raises(NumericalError):
            finite_diff_check(lambda p: float("nan"), pv, np.array([0.0]))


class TestMinibatches:
    @given(n=st.integers(1, 200), bs=st.integers(1, 64), seed=st.integers(0, 999))
    @settings(max_examples=100, deadline=None)
    def test_partition_exact(self, n, bs, seed):
        batches = list(minibatches(n, bs, seeded_rng(seed)))
        flat = np.concatenate(batches)
        assert sorted(flat.tolist()) == list(range(n))
        assert all(len(b) == bs for b in batches[:-1])
        assert 1 <= len(batches[-1]) <= bs

    def test_deterministic_given_seed(self):
        a = [b.tolist() for b in minibatches(50, 8, seeded_rng(5))]
        b = [b.tolist() for b in minibatches(50, 8, seeded_rng(5))]
        assert a == b

    def test_shuffles(self):
        batches = list(minibatches(100, 100, seeded_rng(1)))
        assert batches[0].tolist() != list(range(100))
