"""PCA codebook sorting: eigensolver, ordering, remapping.

The leading eigenvector is cross-checked with a power-iteration oracle
and the full spectrum against numpy's LAPACK-based solver, both
independent of the Jacobi implementation under test.
"""

import numpy as np
import pytest

from vqattack.codec import Codebook, CodecError, decode, encode
from vqattack.sorting import (
    DistanceProfile,
    EigensolverError,
    center_codewords,
    distance_profile,
    first_pc_scores,
    jacobi_eigh,
    remap_indices,
    sort_codebook,
)

# ---------------------------------------------------------------- oracles


def oracle_power_iteration(matrix, iters=10000):
    """Dominant eigenvector of an SPD matrix by plain power iteration."""
    v = np.full(len(matrix), 1.0 / np.sqrt(len(matrix)))
    for _ in range(iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v
        v = w / norm
    return v


def fix_sign(v):
    """The sign convention under test: largest-magnitude component positive."""
    lead = int(np.argmax(np.abs(v)))
    return -v if v[lead] < 0 else v


# ------------------------------------------------------------ eigensolver


@pytest.mark.parametrize("n", [2, 5, 16])
def test_jacobi_matches_numpy_spectrum(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(5):
        m = rng.normal(size=(n, n))
        m = m @ m.T
        vals, vecs = jacobi_eigh(m)
        assert np.allclose(np.sort(vals), np.linalg.eigvalsh(m),
                           rtol=1e-10, atol=1e-10 * abs(m).max())
        assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
        assert np.allclose(m @ vecs, vecs * vals, atol=1e-8 * abs(m).max())


def test_jacobi_diagonal_matrix_is_fixed_point():
    d = np.diag([3.0, 1.0, 2.0])
    vals, vecs = jacobi_eigh(d)
    assert np.array_equal(vals, [3.0, 1.0, 2.0])
    assert np.array_equal(vecs, np.eye(3))


def test_jacobi_handles_large_scale_matrices():
    # pixel-scale covariances have entries around 1e4; the stopping rule
    # must not demand more precision than float64 can represent
    rng = np.random.default_rng(200)
    m = rng.normal(scale=5e3, size=(48, 48))
    m = m @ m.T / 48
    vals, _ = jacobi_eigh(m)
    assert np.allclose(np.sort(vals), np.linalg.eigvalsh(m),
                       rtol=1e-9, atol=1e-9 * abs(m).max())


def test_jacobi_rejects_bad_input():
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_jacobi_raises_when_sweeps_exhausted():
    rng = np.random.default_rng(7)
    m = rng.normal(size=(6, 6))
    m = m @ m.T
    with pytest.raises(EigensolverError):
        jacobi_eigh(m, max_sweeps=0)


# --------------------------------------------------------------- scoring


def test_center_codewords_removes_row_means(gray_codebook):
    centered = center_codewords(gray_codebook)
    assert np.allclose(centered.mean(axis=1), 0.0, atol=1e-9)
    assert np.allclose(
        centered,
        gray_codebook.codewords.astype(np.float64)
        - gray_codebook.codewords.astype(np.float64).mean(axis=1, keepdims=True),
    )


def test_first_pc_scores_match_power_iteration(gray_codebook):
    centered = center_codewords(gray_codebook)
    col_centered = centered - centered.mean(axis=0, keepdims=True)
    cov = (col_centered.T @ col_centered) / (len(centered) - 1)
    v_oracle = fix_sign(oracle_power_iteration(cov))
    expected = centered @ v_oracle
    assert np.allclose(first_pc_scores(centered), expected, atol=1e-6)


def test_first_pc_scores_tied_eigenvalues_prefer_earliest_axis():
    # exactly spherical covariance: eigenvalues tie, so the rule picks the
    # eigenvector whose largest component has the smallest index -> axis 0
    p = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0]])
    assert np.array_equal(first_pc_scores(p), p[:, 0])


def test_first_pc_sign_is_deterministic():
    rng = np.random.default_rng(31)
    base = rng.normal(size=(10, 6))
    scores_a = first_pc_scores(base)
    scores_b = first_pc_scores(base.copy())
    assert np.array_equal(scores_a, scores_b)
    lead = np.argmax(np.abs(scores_a))  # scores follow the fixed-sign vector
    assert scores_a[lead] != 0.0


# ---------------------------------------------------------------- sorting


def test_sort_preserves_codeword_multiset(gray_codebook):
    sorted_cb, _ = sort_codebook(gray_codebook)
    original = sorted(map(tuple, gray_codebook.codewords.tolist()))
    rearranged = sorted(map(tuple, sorted_cb.codewords.tolist()))
    assert original == rearranged


def test_sort_permutation_maps_old_to_new(gray_codebook):
    sorted_cb, perm = sort_codebook(gray_codebook)
    assert np.array_equal(sorted_cb.permutation, perm)
    for old in range(gray_codebook.length):
        assert np.array_equal(
            sorted_cb.codewords[perm[old]], gray_codebook.codewords[old]
        )


def test_sort_orders_scores_ascending(gray_codebook):
    sorted_cb, _ = sort_codebook(gray_codebook)
    scores = first_pc_scores(center_codewords(gray_codebook))
    sorted_scores = scores[np.argsort(scores, kind="stable")]
    assert np.all(np.diff(sorted_scores) >= 0)
    # the sorted codebook's rows realize exactly that score order
    resorted = first_pc_scores(center_codewords(sorted_cb))
    assert np.allclose(resorted, sorted_scores, atol=1e-9)


def test_sort_ties_keep_original_order():
    row = np.arange(4, dtype=np.float32)
    cw = np.stack([row + 50, row, row + 25, row])  # rows 1 and 3 identical
    cb = Codebook(codewords=cw, block_w=2, block_h=2)
    _, perm = sort_codebook(cb)
    # identical rows tie on score; stable sort keeps row 1 before row 3
    assert perm[1] < perm[3]


def test_sort_rejects_already_sorted(gray_codebook):
    sorted_cb, _ = sort_codebook(gray_codebook)
    with pytest.raises(CodecError):
        sort_codebook(sorted_cb)


# --------------------------------------------------------------- remapping


def test_remap_then_decode_is_identical(gray_codebook, gray_images):
    sorted_cb, perm = sort_codebook(gray_codebook)
    for img in gray_images[:6]:
        idx = encode(img, gray_codebook)
        remapped = remap_indices(idx, perm, sorted_cb.content_id)
        assert np.array_equal(decode(idx, gray_codebook), decode(remapped, sorted_cb))


def test_remap_rewrites_indices_through_permutation(gray_codebook, gray_images):
    _, perm = sort_codebook(gray_codebook)
    idx = encode(gray_images[0], gray_codebook)
    remapped = remap_indices(idx, perm)
    assert np.array_equal(remapped.indices, perm[idx.indices])
    assert remapped.codebook_id == idx.codebook_id  # unchanged without new id


def test_remap_rejects_non_bijections(gray_codebook, gray_images):
    idx = encode(gray_images[0], gray_codebook)
    with pytest.raises(CodecError):
        remap_indices(idx, np.zeros(gray_codebook.length, dtype=np.uint32))
    with pytest.raises(CodecError):
        remap_indices(idx, np.arange(gray_codebook.length - 1, dtype=np.uint32))


# --------------------------------------------------------- distance profile


def test_distance_profile_matches_direct_norms(gray_codebook):
    profile = distance_profile(gray_codebook, 3)
    cw = gray_codebook.codewords.astype(np.float64)
    expected = np.array([np.linalg.norm(cw[i] - cw[3]) for i in range(len(cw))])
    assert profile.reference == 3
    assert np.allclose(profile.distances, expected, atol=1e-9)
    assert profile.distances[3] == 0.0


def test_distance_profile_rejects_out_of_range(gray_codebook):
    with pytest.raises(IndexError):
        distance_profile(gray_codebook, gray_codebook.length)


def test_distance_profile_validates_invariants():
    with pytest.raises(ValueError):
        DistanceProfile(reference=0, distances=np.array([1.0, 2.0]))
