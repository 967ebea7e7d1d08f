"""Show what sorting a codebook does to the index axis.

After sorting, codewords are ordered along their first principal
component, so the distance from codeword 0 grows roughly monotonically
with the index. On the unsorted codebook the same profile is noise.

    python3 demos/sorting_profile.py
"""

import numpy as np

from vqattack import (
    center_codewords,
    contrast_ladder_images,
    distance_profile,
    first_pc_scores,
    sort_codebook,
    train_codebook_lbg,
)


def spearman(a, b):
    ra = np.argsort(np.argsort(a))
    rb = np.argsort(np.argsort(b))
    return float(np.corrcoef(ra, rb)[0, 1])


def sparkline(values, width=64):
    chars = " .:-=+*#%@"
    bins = np.array_split(np.asarray(values), width)
    means = np.array([b.mean() for b in bins])
    span = means.max() - means.min()
    scaled = (means - means.min()) / (span if span else 1.0)
    return "".join(chars[int(s * (len(chars) - 1))] for s in scaled)


def main():
    train = contrast_ladder_images(80, 32, 32, 1, seed=0)
    codebook = train_codebook_lbg(train, 64, 4, 4, seed=0)
    sorted_cb, permutation = sort_codebook(codebook)

    before = distance_profile(codebook, 0).distances
    after = distance_profile(sorted_cb, 0).distances
    print("distance from codeword 0 across the index axis")
    print(f"  unsorted |{sparkline(before)}|")
    print(f"  sorted   |{sparkline(after)}|")

    idx = np.arange(64)
    print(f"\nSpearman(index, distance):"
          f" unsorted {spearman(idx, before):+.3f},"
          f" sorted {spearman(idx, after):+.3f}")

    scores = first_pc_scores(center_codewords(codebook))
    print(f"\nfirst-PC scores span [{scores.min():.1f}, {scores.max():.1f}]; "
          f"sorting permutes codewords into ascending score order")
    assert np.array_equal(np.argsort(scores, kind="stable"), np.argsort(permutation))
    print("permutation check passed: old->new follows the score order")


if __name__ == "__main__":
    main()
