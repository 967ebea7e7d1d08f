"""Attack one image end to end and narrate what the optimizer did.

Builds a ten-class synthetic world, compresses one image, then runs the
differential-evolution search over (x, y, index) against the builtin
linear-softmax oracle. Prints the fitness trajectory and the winning
one-index perturbation.

    python3 demos/single_attack.py
"""

import numpy as np

from vqattack import (
    AttackContext,
    DEConfig,
    class_templates,
    de_attack,
    decode,
    encode,
    fixture_from_templates,
    make_dataset,
    remap_indices,
    sort_codebook,
    train_codebook_lbg,
)


def main():
    templates = class_templates(10, 32, 32, 1, seed=0)
    images, labels = make_dataset(templates, 100, seed=0, noise=12)
    oracle = fixture_from_templates(templates, temperature=10.0)
    codebook = train_codebook_lbg(images, 256, 4, 4, seed=0)
    sorted_cb, permutation = sort_codebook(codebook)

    image, label = images[0], labels[0]
    idx = remap_indices(encode(image, codebook), permutation, sorted_cb.content_id)
    baseline = oracle.classify(decode(idx, sorted_cb))
    print(f"image of class {label}: baseline true-class prob {baseline[label]:.4f}")

    context = AttackContext(oracle, sorted_cb, idx, label)
    result = de_attack(context, DEConfig(population_size=50, generations=10),
                       rng=np.random.default_rng(0))

    print("\npopulation-best fitness per generation:")
    for g, fit in enumerate(result.trajectory):
        bar = "#" * int(50 * fit / result.trajectory[0])
        print(f"  gen {g:2d}  {fit:.4f} |{bar}")

    p = result.perturbation
    old = int(idx.indices[p.y, p.x, 0])
    print(f"\n{'SUCCESS' if result.success else 'no flip'}: "
          f"cell (x={p.x}, y={p.y}) index {old} -> {p.values[0]}")
    print(f"predicted class {result.predicted_label}, "
          f"true-class prob {result.fitness:.4f}")
    print(f"evaluations {result.evaluations}, "
          f"oracle queries {result.oracle_queries} (cache absorbs repeats)")


if __name__ == "__main__":
    main()
