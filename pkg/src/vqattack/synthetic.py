"""Synthetic images, datasets, and classifiers for hermetic experiments.

Everything here is deterministic under a seed. Images are smooth
low-frequency fields, which vector quantization compresses faithfully,
so a classifier that works on the originals keeps working after
compression and attack campaigns measure the attack, not codec damage.
"""

import numpy as np

from .oracle import FixtureOracle


def _bilinear_upsample(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Resize a coarse (gh, gw, c) grid to (height, width, c)."""
    gh, gw = grid.shape[:2]
    ys = np.linspace(0.0, gh - 1.0, height)
    xs = np.linspace(0.0, gw - 1.0, width)
    y0 = np.minimum(ys.astype(np.int64), gh - 2)
    x0 = np.minimum(xs.astype(np.int64), gw - 2)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x0 + 1] * fx
    bottom = grid[y0 + 1][:, x0] * (1 - fx) + grid[y0 + 1][:, x0 + 1] * fx
    return top * (1 - fy) + bottom * fy


def smooth_field(rng: np.random.Generator, height: int, width: int,
                 channels: int, cell: int = 8) -> np.ndarray:
    """Low-frequency field in [-1, 1]: coarse noise upsampled bilinearly."""
    gh = max(height // cell, 1) + 1
    gw = max(width // cell, 1) + 1
    coarse = rng.uniform(-1.0, 1.0, size=(gh, gw, channels))
    return _bilinear_upsample(coarse, height, width)


def smooth_image(rng: np.random.Generator, height: int, width: int,
                 channels: int, cell: int = 8) -> np.ndarray:
    """A single smooth uint8 image centered around mid-gray."""
    field = smooth_field(rng, height, width, channels, cell)
    return quantize_pixels(128.0 + 100.0 * field)


def quantize_pixels(values: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the uint8 range."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5),
                   0, 255).astype(np.uint8)


def class_templates(num_classes: int, height: int, width: int, channels: int,
                    seed: int = 0, cell: int = 8, block: int = 4,
                    background_amplitude: float = 25.0,
                    feature_amplitude: float = 220.0,
                    feature_sigma: float = 1.3,
                    lobe_split: float = 0.75) -> np.ndarray:
    """Float templates of shape (K, H, W, C): shared background plus one
    signed two-lobe class spot.

    Every class shares one smooth background and differs only by a spot
    with a class-specific sign, split across two block-aligned cells: a
    major lobe carrying `lobe_split` of the spot's squared norm and a
    minor lobe carrying the rest. The lobe pattern is a Gaussian minus
    its own block mean, so a spot changes local contrast, not local
    brightness. Those two choices shape the attack surface: blanking
    the major lobe removes only part of the class evidence and shifting
    block brightness removes none, so flipping the label requires a
    replacement block that actively paints the opposite contrast
    pattern into the major-lobe cell, and only a few codewords in a
    trained codebook look like that. Signs alternate across classes so
    opposite-lobe material exists in any dataset built from the
    templates.

    `feature_amplitude` is the Euclidean norm of the whole spot. All
    classes use the same norm, so every pair of templates is equally
    far apart and no class is a universally easy target or source.
    """
    grid_h, grid_w = height // block, width // block
    if 2 * num_classes > grid_h * grid_w:
        raise ValueError(
            f"{num_classes} classes need {2 * num_classes} distinct cells, "
            f"grid has {grid_h * grid_w}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 71]))
    background = 128.0 + background_amplitude * smooth_field(
        rng, height, width, channels, cell)
    offsets = np.arange(block) - (block - 1) / 2.0
    lobe = np.exp(-(offsets[:, None] ** 2 + offsets[None, :] ** 2)
                  / (2.0 * feature_sigma ** 2))
    lobe -= lobe.mean()
    lobe /= np.linalg.norm(lobe)
    cells = rng.permutation(grid_h * grid_w)[: 2 * num_classes]
    out = np.empty((num_classes, height, width, channels), dtype=np.float64)
    for k in range(num_classes):
        spot = np.zeros((height, width))
        for cell_id, share in ((cells[2 * k], lobe_split),
                               (cells[2 * k + 1], 1.0 - lobe_split)):
            r, c = divmod(int(cell_id), grid_w)
            spot[r * block:(r + 1) * block,
                 c * block:(c + 1) * block] = np.sqrt(share) * lobe
        sign = 1.0 if k % 2 == 0 else -1.0
        out[k] = background + sign * feature_amplitude * spot[:, :, None]
    return out


def contrast_ladder_images(num_images: int, height: int, width: int,
                           channels: int = 1, seed: int = 0, block: int = 4,
                           amplitude: float = 120.0, noise: float = 3.0,
                           lo: float = 0.15, hi: float = 1.0) -> list:
    """Images sharing one tiled block texture at evenly graded contrast.

    One zero-mean random texture the size of a codec block is tiled over
    the frame; image i scales it by a contrast factor stepping from `lo`
    to `hi`, plus light pixel noise. Every block of every image is then
    the same pattern at some gain, so a codebook trained on the family
    is a contrast ladder: codewords differ along a single direction and
    inter-codeword distance grows with the gain gap. That makes the
    family a clean probe for codeword-ordering behavior, where distance
    structure should be readable from the index sequence alone.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 73]))
    pattern = rng.uniform(-1.0, 1.0, size=(block, block, channels))
    pattern -= pattern.mean(axis=(0, 1))
    pattern /= np.abs(pattern).max()
    tiled = np.tile(pattern, (height // block, width // block, 1))
    gains = np.linspace(lo, hi, num_images)
    return [
        quantize_pixels(128.0 + gain * amplitude * tiled
                        + noise * rng.standard_normal(tiled.shape))
        for gain in gains
    ]


def make_dataset(templates: np.ndarray, num_images: int, seed: int = 0,
                 noise: float = 35.0, cell: int = 8):
    """Round-robin labels; each image is its template plus smooth noise."""
    k, height, width, channels = templates.shape
    rng = np.random.default_rng(np.random.SeedSequence([seed, 72]))
    images = []
    labels = []
    for i in range(num_images):
        label = i % k
        field = smooth_field(rng, height, width, channels, cell)
        images.append(quantize_pixels(templates[label] + noise * field))
        labels.append(label)
    return images, labels


def fixture_from_templates(templates: np.ndarray,
                           temperature: float = 1.0) -> FixtureOracle:
    """Linear-softmax oracle that scores inputs by template proximity.

    Row k of the weights is temperature * (T_k - mean(T)) / 255; the bias
    -temperature * ||T_k / 255||^2 / 2 completes the square, so argmax
    equals nearest-template classification and the logit gap between two
    classes is temperature * ||T_j - T_k||^2 / (2 * 255^2). `temperature`
    therefore sets how peaked the probabilities are.
    """
    t = np.asarray(templates, dtype=np.float64)
    k = t.shape[0]
    mean = t.mean(axis=0)
    weights = ((t - mean) / 255.0).reshape(k, -1) * temperature
    scaled = t.reshape(k, -1) / 255.0
    bias = -0.5 * temperature * np.sum(scaled * scaled, axis=1)
    return FixtureOracle(weights, bias, expected_shape=t.shape[1:])
