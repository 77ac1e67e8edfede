"""Synthetic point clouds for demos and benchmarks.

Three shapes: uniform noise in the unit cube, Gaussian blobs, and a bumpy
height-field that mimics the structure of a surface scan (most points near a
2-d manifold). Everything is driven by a Philox generator, so a (kind, n,
seed, params) tuple always produces the same cloud.
"""

import numpy as np

from .serialize import PointCloud

KINDS = ("uniform", "clusters", "surface")


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _assign_batches(rng, n, batches):
    if batches < 1:
        raise ValueError("batches must be >= 1")
    if batches > n:
        raise ValueError(f"cannot split {n} points into {batches} non-empty batches")
    if batches == 1:
        return None
    cuts = np.sort(rng.choice(np.arange(1, n), size=batches - 1, replace=False))
    sizes = np.diff(np.concatenate([[0], cuts, [n]]))
    return np.repeat(np.arange(batches, dtype=np.uint16), sizes)


def uniform(n, seed, batches=1):
    rng = _rng(seed)
    pos = rng.uniform(0.0, 1.0, size=(n, 3))
    return PointCloud(pos, batch=_assign_batches(rng, n, batches))


def clusters(n, seed, blobs=4, sigma=0.03, batches=1):
    if blobs < 1:
        raise ValueError("blobs must be >= 1")
    if sigma < 0:
        raise ValueError("sigma cannot be negative")
    rng = _rng(seed)
    means = rng.uniform(0.0, 1.0, size=(blobs, 3))
    which = rng.integers(0, blobs, size=n)
    pos = means[which] + rng.normal(0.0, sigma, size=(n, 3))
    return PointCloud(pos, batch=_assign_batches(rng, n, batches))


def surface(n, seed, noise=0.005, batches=1):
    """Points on z = h(x, y) for a seeded sum of sinusoids, plus noise."""
    if noise < 0:
        raise ValueError("noise cannot be negative")
    rng = _rng(seed)
    amp = rng.uniform(0.02, 0.08, size=3)
    freq = rng.uniform(1.0, 4.0, size=(3, 2))
    phase = rng.uniform(0.0, 2 * np.pi, size=3)
    xy = rng.uniform(0.0, 1.0, size=(n, 2))
    z = np.full(n, 0.5)
    for a, (fx, fy), p in zip(amp, freq, phase):
        z = z + a * np.sin(2 * np.pi * (fx * xy[:, 0] + fy * xy[:, 1]) + p)
    pos = np.column_stack([xy, z]) + rng.normal(0.0, noise, size=(n, 3))
    return PointCloud(pos, batch=_assign_batches(rng, n, batches))


def generate(kind, n, seed, batches=1, blobs=4, sigma=0.03, noise=0.005):
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind == "uniform":
        return uniform(n, seed, batches)
    if kind == "clusters":
        return clusters(n, seed, blobs, sigma, batches)
    if kind == "surface":
        return surface(n, seed, noise, batches)
    raise ValueError(f"unknown generator kind {kind!r}; expected one of {KINDS}")
