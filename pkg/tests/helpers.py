"""Shared factories for test data. All randomness is Philox-seeded."""

import numpy as np

from serialpoint.serialize import PointCloud


def philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def split_sizes(rng, n, parts):
    """Partition n into `parts` positive chunk sizes."""
    cuts = np.sort(rng.choice(np.arange(1, n), size=parts - 1, replace=False)) if parts > 1 else np.array([], int)
    return np.diff(np.concatenate([[0], cuts, [n]])).astype(int)


def uniform_cloud(seed, n=256, batches=1, channels=3, lo=0.0, hi=1.0):
    rng = philox(seed)
    pos = rng.uniform(lo, hi, size=(n, 3))
    feats = rng.standard_normal((n, channels)).astype(np.float32)
    batch = None
    if batches > 1:
        batch = np.repeat(np.arange(batches, dtype=np.uint16), split_sizes(rng, n, batches))
        rng.shuffle(batch)
    return PointCloud(pos, feats, batch)


def distinct_cell_cloud(seed, n=200, bits=8, grid_size=0.125, channels=2):
    """Cloud whose points occupy pairwise distinct grid cells (distinct codes).

    The first point sits exactly at the origin so the translation corner is
    (0, 0, 0) and the constructed cell indices survive the floor intact.
    """
    rng = philox(seed)
    side = 1 << bits
    flat = rng.choice(side ** 3 - 1, size=n - 1, replace=False) + 1
    cells = np.stack([flat % side, (flat // side) % side, flat // side ** 2], axis=1)
    pos = (cells + rng.uniform(0.1, 0.9, size=(n - 1, 3))) * grid_size
    pos = np.vstack([np.zeros(3), pos])
    feats = rng.standard_normal((n, channels)).astype(np.float32)
    return PointCloud(pos, feats)
