"""Codebook sorting by first principal component.

Reordering codewords so that numerically adjacent indices hold similar
block vectors gives the index axis a geometry: the Euclidean distance
between two codewords then tends to grow with their index gap. This is
what makes neighborhood moves in index space meaningful for the
evolutionary attack optimizer.
"""

import math
from dataclasses import dataclass

import numpy as np

from .codec import Codebook, CodecError, IndexTensor

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


class EigensolverError(RuntimeError):
    """Jacobi iteration failed to reach the off-diagonal tolerance."""


@dataclass(frozen=True)
class DistanceProfile:
    """Euclidean distances from one reference codeword to every codeword."""

    reference: int
    distances: np.ndarray  # (L,) float64

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d[self.reference] != 0.0 or d.min() < 0:
            raise ValueError("distances must be non-negative with zero at reference")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)


def center_codewords(cb: Codebook) -> np.ndarray:
    """Subtract each codeword's own component mean, shape (L, dim) float64."""
    cw = cb.codewords.astype(np.float64)
    return cw - cw.mean(axis=1, keepdims=True)


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns. Stops
    when the off-diagonal Frobenius norm drops below `tol` relative to the
    matrix's own Frobenius norm (so convergence does not depend on scale);
    raises EigensolverError if `max_sweeps` full sweeps are not enough.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-8 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    threshold = tol * max(1.0, float(np.sqrt(np.sum(a * a))))

    # summing the off-diagonal entries themselves avoids the cancellation
    # that sqrt(sum(A^2) - sum(diag^2)) suffers once they are near zero
    off_mask = ~np.eye(n, dtype=bool)

    def off_norm(m):
        return float(np.sqrt(np.sum(m[off_mask] ** 2)))

    for _ in range(max_sweeps):
        if off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                # rotation angle from the classic two-by-two subproblem;
                # plain floats so an overflowing ratio stays silent
                theta = (float(a[q, q]) - float(a[p, p])) / (2.0 * apq)
                if not math.isfinite(theta):
                    continue
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                a[p, :], a[q, :] = c * a[p, :] - s * a[q, :], s * a[p, :] + c * a[q, :]
                v[:, p], v[:, q] = c * v[:, p] - s * v[:, q], s * v[:, p] + c * v[:, q]
    if off_norm(a) > threshold:
        raise EigensolverError(
            f"off-diagonal norm {off_norm(a):.3e} above {threshold:.3e}"
            f" after {max_sweeps} sweeps"
        )
    return a.diagonal().copy(), v


def _dominant_eigenvector(cov: np.ndarray) -> np.ndarray:
    """Leading eigenvector with a deterministic sign and tie-break rule."""
    eigvals, eigvecs = jacobi_eigh(cov)
    top = np.flatnonzero(eigvals == eigvals.max())
    if len(top) > 1:
        # tied leading eigenvalues: prefer the eigenvector whose largest
        # component magnitude sits at the smallest component index
        top = sorted(top, key=lambda i: int(np.argmax(np.abs(eigvecs[:, i]))))
    v1 = eigvecs[:, top[0]].copy()
    lead = int(np.argmax(np.abs(v1)))
    if v1[lead] < 0:
        v1 = -v1
    return v1


def first_pc_scores(centered: np.ndarray) -> np.ndarray:
    """Projection of each centered codeword on the first principal component.

    The sample covariance is taken over the L centered vectors; the leading
    eigenvector's sign is fixed so its largest-magnitude component is
    positive, making scores reproducible.
    """
    p = np.asarray(centered, dtype=np.float64)
    if p.ndim != 2 or len(p) < 2:
        raise ValueError("need at least 2 centered vectors")
    col_centered = p - p.mean(axis=0, keepdims=True)
    cov = (col_centered.T @ col_centered) / (len(p) - 1)
    v1 = _dominant_eigenvector(cov)
    return p @ v1


def sort_codebook(cb: Codebook) -> tuple[Codebook, np.ndarray]:
    """Reorder codewords by ascending first-PC score.

    Returns the sorted codebook and the permutation mapping old index to
    new index (also carried on the codebook). Ties keep their old order.
    """
    if cb.sorted:
        raise CodecError("codebook is already sorted")
    scores = first_pc_scores(center_codewords(cb))
    order = np.argsort(scores, kind="stable")
    permutation = np.empty(cb.length, dtype=np.uint32)
    permutation[order] = np.arange(cb.length, dtype=np.uint32)
    sorted_cb = Codebook(
        codewords=cb.codewords[order],
        block_w=cb.block_w,
        block_h=cb.block_h,
        sorted=True,
        permutation=permutation,
    )
    return sorted_cb, permutation


def remap_indices(
    idx: IndexTensor, permutation: np.ndarray, codebook_id: bytes | None = None
) -> IndexTensor:
    """Rewrite every index through `permutation` (old index -> new index).

    Pass the sorted codebook's `content_id` as `codebook_id` to bind the
    result to it; decoding then reproduces the unsorted decode exactly.
    """
    perm = np.asarray(permutation)
    if perm.shape != (idx.codebook_length,):
        raise CodecError(
            f"permutation length {perm.shape} does not match L={idx.codebook_length}"
        )
    if not np.array_equal(np.sort(perm), np.arange(idx.codebook_length)):
        raise CodecError("permutation must be a bijection on [0, L)")
    return IndexTensor(
        indices=perm[idx.indices].astype(np.uint16),
        codebook_length=idx.codebook_length,
        codebook_id=idx.codebook_id if codebook_id is None else codebook_id,
    )


def distance_profile(cb: Codebook, ref: int) -> DistanceProfile:
    """Euclidean distance from codeword `ref` to every codeword."""
    if not 0 <= ref < cb.length:
        raise IndexError(f"reference {ref} out of range for L={cb.length}")
    cw = cb.codewords.astype(np.float64)
    diff = cw - cw[ref]
    return DistanceProfile(
        reference=ref, distances=np.sqrt(np.sum(diff * diff, axis=1))
    )
