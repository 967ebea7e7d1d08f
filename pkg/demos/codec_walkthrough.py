"""Train a small VQ codebook, compress an image, and inspect the loss.

Run from the repository root:

    python3 demos/codec_walkthrough.py
"""

import numpy as np

from vqattack import (
    decode,
    distortion,
    encode,
    read_codebook,
    smooth_image,
    train_codebook_lbg,
    write_codebook,
)


def main():
    rng = np.random.default_rng(42)
    train = [smooth_image(rng, 32, 32, 1) for _ in range(12)]
    target = smooth_image(rng, 32, 32, 1)

    print("training LBG codebooks on 12 smooth 32x32 images")
    print(f"{'L':>4} {'mean distortion':>16}")
    for length in (4, 16, 64):
        history = []
        cb = train_codebook_lbg(train, length, 4, 4, seed=0, history=history)
        idx = encode(target, cb)
        err = distortion(target, decode(idx, cb))
        print(f"{length:>4} {err:>16.2f}")
        iterations = sum(len(stage) for stage in history)
        worst = max(
            (np.diff(stage).max() for stage in history if len(stage) > 1),
            default=0.0,
        )
        print(f"     {len(history)} split stages, {iterations} Lloyd iterations, "
              f"max within-stage change {worst:+.6f} (never positive)")

    cb = train_codebook_lbg(train, 64, 4, 4, seed=0)
    idx = encode(target, cb)
    raw = target.nbytes
    packed = idx.indices.size * 2  # u16 per block index
    print(f"\nstored size: {raw} raw bytes -> {packed} index bytes "
          f"(codebook amortized across images)")

    blob = write_codebook(cb)
    again = read_codebook(blob)
    assert again == cb
    print(f"codebook serializes to {len(blob)} bytes and round-trips exactly")
    assert np.array_equal(decode(idx, cb), decode(encode(target, again), again))
    print("decode after file round trip is byte-identical")


if __name__ == "__main__":
    main()
