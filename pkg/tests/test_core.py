import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knncal.core import (
    Dataset,
    Distribution,
    Embedding,
    Hyperparams,
    Instance,
    LabelSpace,
    Variant,
    derive_seed,
    seeded_rng,
    softmax,
)
from knncal.errors import DimensionMismatch, InvalidInput

from conftest import make_dataset, make_instance


class TestSoftmax:
    def test_uniform_for_equal_logits(self):
        d = softmax([0.0, 0.0])
        assert np.allclose(d.probs, [0.5, 0.5], atol=1e-15)

    def test_log3_example(self):
        d = softmax([math.log(3.0), 0.0])
        assert np.allclose(d.probs, [0.75, 0.25], atol=1e-12)

    def test_temperature_flattens(self):
        # Independent recomputation: exp((x - max)/T) normalized.
        logits = np.array([2.0, 1.0, 0.0])
        expected = np.exp((logits - 2.0) / 5.0)
        expected /= expected.sum()
        d = softmax(logits, temperature=5.0)
        assert np.allclose(d.probs, expected, atol=1e-12)
        assert np.allclose(d.probs, [0.401760, 0.328933, 0.269307], atol=5e-7)

    def test_large_logits_stable(self):
        d = softmax([1000.0, 999.0])
        assert np.all(np.isfinite(d.probs))
        assert abs(d.probs[0] - 1.0 / (1.0 + math.exp(-1.0))) < 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInput):
            softmax([np.inf, 0.0])
        with pytest.raises(InvalidInput):
            softmax([np.nan, 0.0])

    def test_rejects_bad_temperature(self):
        with pytest.raises(InvalidInput):
            softmax([0.0, 1.0], temperature=0.0)
        with pytest.raises(InvalidInput):
            softmax([0.0, 1.0], temperature=-2.0)

    @given(
        logits=st.lists(st.floats(-50, 50), min_size=2, max_size=8),
        temp=st.floats(0.1, 20.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_sums_to_one(self, logits, temp):
        d = softmax(logits, temperature=temp)
        assert abs(d.probs.sum() - 1.0) <= 1e-9

    @given(logits=st.lists(st.floats(-50, 50), min_size=2, max_size=8), shift=st.floats(-100, 100))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance(self, logits, shift):
        a = softmax(logits).probs
        b = softmax([x + shift for x in logits]).probs
        assert np.allclose(a, b, atol=1e-9)

    @given(logits=st.lists(st.floats(-50, 50), min_size=2, max_size=8), seed=st.integers(0, 1000))
    @settings(max_examples=100, deadline=None)
    def test_permutation_equivariance(self, logits, seed):
        perm = seeded_rng(seed).permutation(len(logits))
        a = softmax(np.asarray(logits)[perm]).probs
        b = softmax(logits).probs[perm]
        assert np.allclose(a, b, atol=1e-12)


class TestDistribution:
    def test_rejects_negative(self):
        with pytest.raises(InvalidInput):
            Distribution(np.array([-0.1, 1.1]))

    def test_rejects_drift(self):
        with pytest.raises(InvalidInput):
            Distribution(np.array([0.5, 0.5 + 1e-6]))

    def test_accepts_tiny_drift(self):
        Distribution(np.array([0.5, 0.5 + 1e-10]))

    def test_argmax(self):
        assert Distribution(np.array([0.2, 0.7, 0.1])).argmax() == 1

    def test_immutable(self):
        d = Distribution(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            d.probs[0] = 1.0


class TestLabelSpace:
    def test_index_of(self):
        space = LabelSpace(("neg", "pos"))
        assert space.index_of("pos") == 1

    def test_unknown_label(self):
        with pytest.raises(InvalidInput):
            LabelSpace(("neg", "pos")).index_of("meh")

    def test_rejects_duplicates(self):
        with pytest.raises(InvalidInput):
            LabelSpace(("x", "x"))

    def test_rejects_singleton(self):
        with pytest.raises(InvalidInput):
            LabelSpace(("only",))


class TestDatasetValidation:
    def test_valid_roundtrip(self, tiny_dataset):
        assert len(tiny_dataset.split_instances("train")) == 4
        assert len(tiny_dataset.split_instances("test")) == 2

    def test_unlabeled_train_rejected(self):
        with pytest.raises(InvalidInput):
            make_instance("x", "train", None, [[0.0, 0.0]])

    def test_unlabeled_test_allowed(self):
        inst = make_instance("x", "test", None, [[0.0, 0.0]])
        assert inst.label is None

    def test_wrong_class_count(self):
        train = {"A": [[[0.0, 0.0]]], "B": [[[1.0, 0.0]], [[2.0, 0.0]]]}
        with pytest.raises(InvalidInput, match="expected exactly"):
            make_dataset(train, k_shots=2)

    def test_dim_mismatch(self):
        space = LabelSpace(("A", "B"))
        inst = make_instance("x", "train", "A", [[0.0, 0.0, 0.0]])
        with pytest.raises(DimensionMismatch):
            Dataset(label_space=space, dim=2, k_shots=1, instances=(inst,))

    def test_variant_budget(self):
        train = {"A": [[[0.0, 0.0], [0.1, 0.0]]], "B": [[[1.0, 0.0]]]}
        with pytest.raises(InvalidInput, match="variants"):
            make_dataset(train, k_shots=1)

    def test_duplicate_ids(self):
        space = LabelSpace(("A", "B"))
        a = make_instance("same", "train", "A", [[0.0, 0.0]])
        b = make_instance("same", "train", "B", [[1.0, 0.0]])
        with pytest.raises(InvalidInput, match="duplicate"):
            Dataset(label_space=space, dim=2, k_shots=1, instances=(a, b))

    def test_logit_length_checked(self):
        space = LabelSpace(("A", "B"))
        v = Variant(embedding=Embedding(np.zeros(2)), plm_logits=np.zeros(3))
        inst = Instance(id="x", split="test", label=None, variants=(v,))
        with pytest.raises(DimensionMismatch):
            Dataset(label_space=space, dim=2, k_shots=1, instances=(inst,))


class TestHyperparams:
    def test_defaults(self):
        hp = Hyperparams()
        assert (hp.tau, hp.k, hp.k_max, hp.z_dim) == (5.0, 8, 16, 32)
        assert (hp.ans_hidden, hp.lr, hp.batch_size, hp.epochs) == (32, 1e-3, 64, 30)

    def test_k_exceeds_k_max(self):
        with pytest.raises(InvalidInput):
            Hyperparams(k=20, k_max=16)

    def test_k_max_divisibility(self):
        with pytest.raises(InvalidInput):
            Hyperparams(k_max=10)

    def test_lam_range(self):
        with pytest.raises(InvalidInput):
            Hyperparams(lam=1.5)

    def test_with_seed(self):
        hp = Hyperparams().with_seed(7)
        assert hp.seed == 7 and hp.tau == 5.0


class TestRng:
    def test_same_seed_same_stream(self):
        a = seeded_rng(123).random(16)
        b = seeded_rng(123).random(16)
        assert np.array_equal(a, b)

    def test_different_seed_differs(self):
        assert not np.array_equal(seeded_rng(1).random(8), seeded_rng(2).random(8))

    def test_pinned_shuffle(self):
        # Frozen expectation for the PCG64 contract; a silent generator swap
        # would otherwise invalidate every recorded result.
        perm = seeded_rng(42).permutation(8)
        assert perm.tolist() == np.random.Generator(np.random.PCG64(np.random.SeedSequence(42))).permutation(8).tolist()

    def test_derive_seed_deterministic(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
        assert derive_seed(5, 1, 2) != derive_seed(5, 1, 3)
        assert derive_seed(5, 1) != derive_seed(6, 1)

    def test_derive_seed_differs_from_base(self):
        assert derive_seed(5) != 5
