"""Vector quantization codec: LBG codebook training, encode, decode.

A codebook holds L codewords, each a flattened block of block_h * block_w
pixel values. Encoding maps every non-overlapping block of every channel to
the index of its Euclidean-nearest codeword, producing an (s, t, C) index
grid; decoding writes codewords back into place. One codebook is shared by
all channels.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .image_io import validate_image

CODEBOOK_MAGIC = b"VQCB"
INDICES_MAGIC = b"VQIX"
FORMAT_VERSION = 1

SPLIT_DELTA = 0.01


class CodecError(ValueError):
    """Base class for codec failures."""


class DimensionMismatchError(CodecError):
    """Image dimensions not divisible by block dimensions, or shape clash."""


class CodebookMismatchError(CodecError):
    """Index tensor is bound to a different codebook."""


class InsufficientDataError(CodecError):
    """Fewer training vectors than requested codewords."""


class FileFormatError(CodecError):
    """Bad magic, version, or length in a serialized codebook/index file."""


@dataclass(frozen=True)
class Codebook:
    """L codewords of dimension block_h * block_w, values in [0, 255].

    `permutation` maps old index -> new index when the codebook was produced
    by sorting; it is carried so existing index streams stay decodable.
    """

    codewords: np.ndarray  # (L, block_h * block_w) float32
    block_w: int
    block_h: int
    sorted: bool = False
    permutation: np.ndarray | None = None  # (L,) uint32, old -> new

    def __post_init__(self):
        cw = np.ascontiguousarray(self.codewords, dtype=np.float32)
        if cw.ndim != 2:
            raise CodecError(f"codewords must be 2-D, got shape {cw.shape}")
        if len(cw) < 2:
            raise CodecError(f"codebook length must be >= 2, got {len(cw)}")
        if self.block_w < 1 or self.block_h < 1:
            raise CodecError("block dimensions must be positive")
        if cw.shape[1] != self.block_w * self.block_h:
            raise CodecError(
                f"codeword dimension {cw.shape[1]} != block "
                f"{self.block_w}x{self.block_h}"
            )
        if not np.all(np.isfinite(cw)) or cw.min() < 0 or cw.max() > 255:
            raise CodecError("codeword components must be finite and in [0, 255]")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        if self.sorted:
            if self.permutation is None:
                raise CodecError("sorted codebook requires a permutation")
            perm = np.ascontiguousarray(self.permutation, dtype=np.uint32)
            if perm.shape != (len(cw),) or not np.array_equal(
                np.sort(perm), np.arange(len(cw), dtype=np.uint32)
            ):
                raise CodecError("permutation must be a bijection on [0, L)")
            perm.setflags(write=False)
            object.__setattr__(self, "permutation", perm)
        elif self.permutation is not None:
            raise CodecError("unsorted codebook must not carry a permutation")

    @property
    def length(self) -> int:
        return len(self.codewords)

    @property
    def dim(self) -> int:
        return self.block_w * self.block_h

    @property
    def content_id(self) -> bytes:
        """SHA-256 of the serialized codebook; binds index streams to it."""
        return hashlib.sha256(write_codebook(self)).digest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        if (self.block_w, self.block_h, self.sorted) != (
            other.block_w,
            other.block_h,
            other.sorted,
        ):
            return False
        if not np.array_equal(self.codewords, other.codewords):
            return False
        if self.permutation is None:
            return other.permutation is None
        return other.permutation is not None and np.array_equal(
            self.permutation, other.permutation
        )

    __hash__ = None


@dataclass(frozen=True)
class IndexTensor:
    """(s, t, C) grid of codeword indices bound to one codebook."""

    indices: np.ndarray  # (s, t, C) uint16
    codebook_length: int
    codebook_id: bytes = field(repr=False)

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.uint16)
        if idx.ndim != 3 or idx.shape[2] not in (1, 3):
            raise CodecError(f"indices must have shape (s, t, C), got {idx.shape}")
        if self.codebook_length < 2:
            raise CodecError("codebook length must be >= 2")
        if idx.size and idx.max() >= self.codebook_length:
            raise CodecError(
                f"index {idx.max()} out of range for L={self.codebook_length}"
            )
        if len(self.codebook_id) != 32:
            raise CodecError("codebook_id must be a 32-byte digest")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def s(self) -> int:
        return self.indices.shape[0]

    @property
    def t(self) -> int:
        return self.indices.shape[1]

    @property
    def channels(self) -> int:
        return self.indices.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexTensor):
            return NotImplemented
        return (
            self.codebook_length == other.codebook_length
            and self.codebook_id == other.codebook_id
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


def image_blocks(img: np.ndarray, block_w: int, block_h: int) -> np.ndarray:
    """Flattened block vectors of every channel, shape (C, s, t, dim) float64.

    Blocks are flattened row by row within the block.
    """
    img = validate_image(img)
    height, width, channels = img.shape
    if height % block_h or width % block_w:
        raise DimensionMismatchError(
            f"image {height}x{width} not divisible by block {block_h}x{block_w}"
        )
    s, t = height // block_h, width // block_w
    # (H, W, C) -> (s, bh, t, bw, C) -> (C, s, t, bh, bw)
    arr = img.reshape(s, block_h, t, block_w, channels)
    arr = arr.transpose(4, 0, 2, 1, 3)
    return arr.reshape(channels, s, t, block_h * block_w).astype(np.float64)


def _nearest_codeword(vectors: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    """Index of the Euclidean-nearest codeword for each row of `vectors`.

    Ties break toward the smallest index. Squared distances are accumulated
    component by component so results do not depend on a summation strategy.
    """
    n = len(vectors)
    cw = codewords.astype(np.float64)
    dist2 = np.empty((n, len(cw)), dtype=np.float64)
    for j in range(len(cw)):
        diff = vectors - cw[j]
        acc = np.zeros(n, dtype=np.float64)
        for k in range(vectors.shape[1]):
            acc += diff[:, k] * diff[:, k]
        dist2[:, j] = acc
    return np.argmin(dist2, axis=1)


def encode(img: np.ndarray, cb: Codebook) -> IndexTensor:
    """Quantize an image to an index tensor against `cb`."""
    blocks = image_blocks(img, cb.block_w, cb.block_h)
    channels, s, t, dim = blocks.shape
    flat = blocks.reshape(channels * s * t, dim)
    assigned = _nearest_codeword(flat, cb.codewords)
    indices = assigned.reshape(channels, s, t).transpose(1, 2, 0)
    return IndexTensor(
        indices=indices.astype(np.uint16),
        codebook_length=cb.length,
        codebook_id=cb.content_id,
    )


def decode(idx: IndexTensor, cb: Codebook) -> np.ndarray:
    """Reconstruct the image for an index tensor.

    Codeword components are rounded half-up and clamped to [0, 255].
    """
    if idx.codebook_id != cb.content_id:
        raise CodebookMismatchError("index tensor is bound to a different codebook")
    if idx.codebook_length != cb.length:
        raise CodebookMismatchError("codebook length mismatch")
    s, t, channels = idx.indices.shape
    blocks = cb.codewords.astype(np.float64)[idx.indices]  # (s, t, C, dim)
    pixels = np.clip(np.floor(blocks + 0.5), 0, 255).astype(np.uint8)
    pixels = pixels.reshape(s, t, channels, cb.block_h, cb.block_w)
    # (s, t, C, bh, bw) -> (s, bh, t, bw, C)
    img = pixels.transpose(0, 3, 1, 4, 2)
    return np.ascontiguousarray(
        img.reshape(s * cb.block_h, t * cb.block_w, channels)
    )


def distortion(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all pixel positions and channels."""
    a = validate_image(a)
    b = validate_image(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def _mean_distortion(vectors: np.ndarray, codewords: np.ndarray, assign: np.ndarray) -> float:
    """Per-component MSE of `vectors` against their assigned codewords."""
    diff = vectors - codewords[assign]
    return float(np.mean(diff * diff))


def _split_codebook(
    codewords: np.ndarray, target: int, vectors: np.ndarray, assign: np.ndarray
) -> np.ndarray:
    """Split codewords toward `target` cells.

    All cells split while the result stays within `target`; otherwise only
    the cells contributing the most distortion split, so non-power-of-two
    lengths are reachable.
    """
    m = len(codewords)
    if 2 * m <= target:
        split_ids = np.arange(m)
    else:
        cell_cost = np.zeros(m)
        diff = vectors - codewords[assign]
        cost = np.sum(diff * diff, axis=1)
        np.add.at(cell_cost, assign, cost)
        split_ids = np.argsort(-cell_cost, kind="stable")[: target - m]
    keep = codewords[np.setdiff1d(np.arange(m), split_ids)]
    plus = codewords[split_ids] * (1.0 + SPLIT_DELTA)
    minus = codewords[split_ids] * (1.0 - SPLIT_DELTA)
    return np.concatenate([keep, plus, minus], axis=0)


def train_codebook_lbg(
    training_images,
    L: int,
    block_w: int,
    block_h: int,
    epsilon: float = 1e-3,
    max_iters: int = 50,
    seed: int = 0,
    history: list | None = None,
) -> Codebook:
    """Train an unsorted codebook with the splitting LBG algorithm.

    Starts from the global centroid, repeatedly splits codewords by a factor
    of (1 +/- 0.01), and refines each stage with Lloyd iterations until the
    relative distortion improvement falls below `epsilon` or `max_iters` is
    reached. Empty cells are re-seeded with a random training vector from
    the highest-distortion cell. Deterministic for a fixed seed.

    `history`, if given, collects one list of per-iteration mean distortions
    per stage; within every stage the sequence is non-increasing (enforced).
    """
    if L < 2:
        raise CodecError(f"codebook length must be >= 2, got {L}")
    if epsilon < 0:
        raise CodecError("epsilon must be non-negative")
    if max_iters < 1:
        raise CodecError("max_iters must be >= 1")
    vector_groups = [
        image_blocks(img, block_w, block_h).reshape(-1, block_w * block_h)
        for img in training_images
    ]
    if not vector_groups:
        raise InsufficientDataError("no training images")
    vectors = np.concatenate(vector_groups, axis=0)
    if len(vectors) < L:
        raise InsufficientDataError(
            f"{len(vectors)} training vectors for {L} codewords"
        )

    rng = np.random.default_rng(seed)
    codewords = vectors.mean(axis=0, keepdims=True)
    assign = np.zeros(len(vectors), dtype=np.intp)

    while True:
        stage_log: list[float] = []
        prev = np.inf
        for _ in range(max_iters):
            assign = _nearest_codeword(vectors, codewords)
            cur = _mean_distortion(vectors, codewords, assign)
            if cur > prev:
                raise RuntimeError(
                    f"distortion increased within a Lloyd stage: {prev} -> {cur}"
                )
            stage_log.append(cur)
            if prev == 0.0 or (np.isfinite(prev) and (prev - cur) / prev < epsilon):
                prev = cur
                break
            prev = cur
            codewords = _update_centroids(vectors, codewords, assign, rng)
        if history is not None:
            history.append(stage_log)
        if len(codewords) >= L:
            break
        codewords = _split_codebook(codewords, L, vectors, assign)

    final = np.clip(codewords, 0.0, 255.0).astype(np.float32)
    return Codebook(codewords=final, block_w=block_w, block_h=block_h)


def _update_centroids(
    vectors: np.ndarray,
    codewords: np.ndarray,
    assign: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    m, dim = codewords.shape
    counts = np.bincount(assign, minlength=m).astype(np.float64)
    sums = np.zeros((m, dim))
    np.add.at(sums, assign, vectors)
    updated = codewords.copy()
    occupied = counts > 0
    updated[occupied] = sums[occupied] / counts[occupied, None]
    empty = np.flatnonzero(~occupied)
    if len(empty):
        cell_cost = np.zeros(m)
        diff = vectors - updated[assign]
        np.add.at(cell_cost, assign, np.sum(diff * diff, axis=1))
        # only occupied cells can donate a vector
        worst = int(np.argmax(np.where(occupied, cell_cost, -1.0)))
        members = np.flatnonzero(assign == worst)
        for cell in empty:
            pick = members[rng.integers(0, len(members))]
            updated[cell] = vectors[pick]
    return updated


def write_codebook(cb: Codebook) -> bytes:
    """Serialize a codebook; byte-identical for identical codebooks."""
    out = bytearray()
    out += CODEBOOK_MAGIC
    out += struct.pack("<BIHHB", FORMAT_VERSION, cb.length, cb.block_w, cb.block_h, int(cb.sorted))
    out += cb.codewords.astype("<f4").tobytes()
    if cb.sorted:
        out += cb.permutation.astype("<u4").tobytes()
    return bytes(out)


def read_codebook(data: bytes) -> Codebook:
    if data[:4] != CODEBOOK_MAGIC:
        raise FileFormatError(f"bad codebook magic {data[:4]!r}")
    header = struct.Struct("<BIHHB")
    if len(data) < 4 + header.size:
        raise FileFormatError("codebook header truncated")
    version, length, block_w, block_h, sorted_flag = header.unpack_from(data, 4)
    if version != FORMAT_VERSION:
        raise FileFormatError(f"unsupported codebook version {version}")
    if sorted_flag not in (0, 1):
        raise FileFormatError(f"bad sorted flag {sorted_flag}")
    pos = 4 + header.size
    dim = block_w * block_h
    n_cw = length * dim * 4
    n_perm = length * 4 if sorted_flag else 0
    if len(data) != pos + n_cw + n_perm:
        raise FileFormatError(
            f"codebook payload length {len(data) - pos}, expected {n_cw + n_perm}"
        )
    codewords = np.frombuffer(data, dtype="<f4", count=length * dim, offset=pos)
    codewords = codewords.reshape(length, dim).copy()
    permutation = None
    if sorted_flag:
        permutation = np.frombuffer(
            data, dtype="<u4", count=length, offset=pos + n_cw
        ).copy()
    return Codebook(
        codewords=codewords,
        block_w=block_w,
        block_h=block_h,
        sorted=bool(sorted_flag),
        permutation=permutation,
    )


def write_indices(idx: IndexTensor) -> bytes:
    """Serialize an index tensor; (row, col, channel) order, little-endian."""
    out = bytearray()
    out += INDICES_MAGIC
    out += struct.pack(
        "<BHHBI", FORMAT_VERSION, idx.s, idx.t, idx.channels, idx.codebook_length
    )
    out += idx.codebook_id
    out += idx.indices.astype("<u2").tobytes()
    return bytes(out)


def read_indices(data: bytes) -> IndexTensor:
    if data[:4] != INDICES_MAGIC:
        raise FileFormatError(f"bad index magic {data[:4]!r}")
    header = struct.Struct("<BHHBI")
    if len(data) < 4 + header.size + 32:
        raise FileFormatError("index header truncated")
    version, s, t, channels, length = header.unpack_from(data, 4)
    if version != FORMAT_VERSION:
        raise FileFormatError(f"unsupported index version {version}")
    pos = 4 + header.size
    codebook_id = data[pos : pos + 32]
    pos += 32
    n = s * t * channels * 2
    if len(data) != pos + n:
        raise FileFormatError(f"index payload length {len(data) - pos}, expected {n}")
    indices = np.frombuffer(data, dtype="<u2", count=s * t * channels, offset=pos)
    return IndexTensor(
        indices=indices.reshape(s, t, channels).copy(),
        codebook_length=length,
        codebook_id=codebook_id,
    )
