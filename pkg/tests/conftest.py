import numpy as np
import pytest

from knncal.core import Dataset, Embedding, Instance, LabelSpace, Variant


def make_variant(embedding, logits=(0.0, 0.0)):
    return Variant(embedding=Embedding(np.asarray(embedding, dtype=np.float64)), plm_logits=np.asarray(logits, dtype=np.float64))


def make_instance(iid, split, label, embeddings, logits=None):
    """Build an instance from a list of per-variant embeddings."""

    if logits is None:
        logits = [(0.0, 0.0)] * len(embeddings)
    variants = tuple(make_variant(e, l) for e, l in zip(embeddings, logits))
    return Instance(id=iid, split=split, label=label, variants=variants)


def make_dataset(train_embs, dev_embs=None, test_embs=None, labels=("A", "B"),
                 k_shots=None, logits_for=None):
    """Assemble a dataset from dicts label -> list of per-instance embedding lists.

    ``train_embs[label][i]`` is the list of variant embeddings for the i-th
    train instance of that class. ``test_embs`` is a list of (label_or_None,
    variant embedding list) pairs. ``logits_for`` optionally maps a label to
    the logits every variant of that class should carry (default zeros).
    """

    space = LabelSpace(tuple(labels))
    if dev_embs is None:
        dev_embs = train_embs
    if k_shots is None:
        k_shots = len(next(iter(train_embs.values())))
    logits_for = logits_for or {}

    def logits_list(lab, embs):
        if lab in logits_for:
            return [logits_for[lab]] * len(embs)
        return None

    instances = []
    for split, table in (("train", train_embs), ("dev", dev_embs)):
        for lab in labels:
            for i, embs in enumerate(table[lab]):
                instances.append(
                    make_instance(f"{split}-{lab}-{i}", split, lab, embs, logits_list(lab, embs))
                )
    for j, (lab, embs) in enumerate(test_embs or []):
        instances.append(make_instance(f"test-{j}", "test", lab, embs, logits_list(lab, embs)))
    dim = len(instances[0].variants[0].embedding)
    return Dataset(label_space=space, dim=dim, k_shots=k_shots, instances=tuple(instances))


@pytest.fixture
def tiny_dataset():
    """Two classes, two shots each, one variant per instance, dim 2."""

    train = {
        "A": [[[0.0, 0.0]], [[0.0, 1.0]]],
        "B": [[[3.0, 0.0]], [[3.0, 1.0]]],
    }
    test = [("A", [[0.1, 0.5]]), ("B", [[2.9, 0.5]])]
    return make_dataset(train, test_embs=test)
