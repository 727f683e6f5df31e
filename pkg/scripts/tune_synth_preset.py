"""Sweep readout rotation/bias for the biased-readout preset and report the
simulated base-model accuracy and nearest-centroid accuracy over seeds.

The accuracy computations here are deliberately self-contained (no imports
from the calibration or evaluation code) so the preset constants are pinned by
an independent oracle. Run from the repository root:

    python3 scripts/tune_synth_preset.py [--sweep]
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

from knncal.synthgen import SynthConfig, biased_plm_preset, generate


def icl_accuracy(dataset) -> float:
    """Mean-of-softmaxes argmax over each test instance's variants."""

    correct = 0
    test = dataset.split_instances("test")
    for inst in test:
        probs = []
        for v in inst.variants:
            z = v.plm_logits - v.plm_logits.max()
            e = np.exp(z)
            probs.append(e / e.sum())
        mean = np.mean(probs, axis=0)
        pred = int(np.argmax(mean))
        correct += pred == dataset.label_space.index_of(inst.label)
    return correct / len(test)


def centroid_accuracy(dataset) -> float:
    per_class = {}
    for inst in dataset.split_instances("train"):
        point = np.mean([v.embedding.values for v in inst.variants], axis=0)
        per_class.setdefault(inst.label, []).append(point)
    labels = list(dataset.label_space.labels)
    centroids = np.stack([np.mean(per_class[lab], axis=0) for lab in labels])
    correct = 0
    test = dataset.split_instances("test")
    for inst in test:
        point = np.mean([v.embedding.values for v in inst.variants], axis=0)
        pred = labels[int(np.argmin(np.linalg.norm(centroids - point, axis=1)))]
        correct += pred == inst.label
    return correct / len(test)


def evaluate(config_fn, seeds):
    icl, cen = [], []
    for seed in seeds:
        ds = generate(config_fn(seed))
        icl.append(icl_accuracy(ds))
        cen.append(centroid_accuracy(ds))
    return np.mean(icl), np.min(icl), np.max(icl), np.mean(cen), np.min(cen)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sweep", action="store_true", help="grid over rotation/bias")
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()
    seeds = list(range(args.seeds))

    if args.sweep:
        base = biased_plm_preset(0)
        print("rotation  bias  icl_mean  icl_min  icl_max  centroid_mean  centroid_min")
        for rot in (0.80, 0.85, 0.88, 0.90, 0.93, 0.95, 1.00):
            for bias in (0.0, 0.3, 0.6):
                fn = lambda s: SynthConfig(
                    dim=base.dim, n_classes=base.n_classes, k_shots=base.k_shots,
                    n_test=base.n_test, class_sep=base.class_sep,
                    variant_noise=base.variant_noise, cluster_noise=base.cluster_noise,
                    readout_bias=bias, readout_rotation=rot, seed=s,
                )
                im, ilo, ihi, cm, clo = evaluate(fn, seeds)
                print(f"{rot:7.2f} {bias:5.2f} {im:9.4f} {ilo:8.4f} {ihi:8.4f} {cm:13.4f} {clo:12.4f}")
    else:
        im, ilo, ihi, cm, clo = evaluate(biased_plm_preset, seeds)
        print(f"preset over {len(seeds)} seeds:")
        print(f"  simulated-ICL accuracy: mean {im:.4f}  min {ilo:.4f}  max {ihi:.4f}")
        print(f"  centroid accuracy:      mean {cm:.4f}  min {clo:.4f}")


if __name__ == "__main__":
    main()
