"""Batch-aware serialization of point clouds along space-filling curves.

A cloud is gridded by translating it to its minimum corner and flooring
``(p - corner) / grid_size``. Each point then gets a 64-bit code

    code = (batch << 48) | curve_key

with the curve key in the low 48 bits (so bits_per_axis <= 16) and the batch
index in the high 16. A stable argsort of the codes gives the serialized
order; because the batch field dominates the comparison, points of batch j
always precede points of batch j+1, and within a batch the chosen curve
decides the traversal. Orders are recorded as index permutations; the point
data itself is never reordered.
"""

from dataclasses import dataclass

import numpy as np

from . import sfc

BATCH_SHIFT = 48
AXES = "xyz"


class ExtentOverflowError(ValueError):
    """The gridded cloud does not fit the configured bits per axis."""


@dataclass
class PointCloud:
    """Positions (n, 3) float64, features (n, C) float, batch (n,) uint16.

    Batch indices must form a contiguous range starting at 0. If features
    are omitted, a single constant channel of ones is attached so that every
    cloud has C >= 1.
    """

    positions: np.ndarray
    features: np.ndarray = None
    batch: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got {self.positions.shape}")
        n = len(self.positions)
        if n < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.isfinite(self.positions).all():
            raise ValueError("positions must be finite")
        if self.features is None:
            self.features = np.ones((n, 1), dtype=np.float32)
        else:
            self.features = np.asarray(self.features)
            if self.features.dtype.kind != "f":
                self.features = self.features.astype(np.float32)
            if self.features.ndim == 1:
                self.features = self.features[:, None]
            if self.features.ndim != 2 or len(self.features) != n or self.features.shape[1] < 1:
                raise ValueError(f"features must be (n, C) with C >= 1, got {self.features.shape}")
            if not np.isfinite(self.features).all():
                raise ValueError("features must be finite")
        if self.batch is None:
            self.batch = np.zeros(n, dtype=np.uint16)
        else:
            b = np.asarray(self.batch)
            if b.shape != (n,):
                raise ValueError(f"batch must be (n,), got {b.shape}")
            if b.dtype.kind not in "ui" or (b.dtype.kind == "i" and (b < 0).any()):
                raise ValueError("batch indices must be non-negative integers")
            if (b.astype(np.int64) >= (1 << 16)).any():
                raise ValueError("batch indices must fit in 16 bits")
            self.batch = b.astype(np.uint16)
            uniq = np.unique(self.batch)
            if uniq[0] != 0 or uniq[-1] != len(uniq) - 1:
                raise ValueError("batch indices must be contiguous from 0")

    @property
    def n(self):
        return len(self.positions)

    @property
    def channels(self):
        return self.features.shape[1]

    @property
    def num_batches(self):
        return int(self.batch.max()) + 1

    def min_corner(self):
        return self.positions.min(axis=0)


@dataclass
class SerializationConfig:
    grid_size: float
    bits_per_axis: int = 16
    patterns: tuple = sfc.PATTERNS

    def __post_init__(self):
        self.grid_size = float(self.grid_size)
        if not (self.grid_size > 0 and np.isfinite(self.grid_size)):
            raise ValueError(f"grid_size must be a positive finite real, got {self.grid_size}")
        self.bits_per_axis = sfc.check_bits(self.bits_per_axis)
        self.patterns = tuple(self.patterns)
        if not self.patterns:
            raise ValueError("at least one curve pattern is required")
        if len(set(self.patterns)) != len(self.patterns):
            raise ValueError(f"duplicate curve patterns in {self.patterns}")
        for p in self.patterns:
            sfc.check_pattern(p)


@dataclass
class SerializedOrder:
    """One pattern's codes plus the forward/inverse permutations.

    ``order[i]`` is the original index of the i-th point along the curve;
    ``inverse[j]`` is the serialized position of original point j.
    """

    pattern: str
    codes: np.ndarray
    order: np.ndarray
    inverse: np.ndarray

    @property
    def n(self):
        return len(self.codes)


def grid_cells(cloud, grid_size, bits_per_axis, corner=None):
    """Integer cell indices of every point, validated against bits_per_axis.

    corner defaults to the cloud's own minimum corner; callers that need
    grids at several resolutions to nest pass the same corner everywhere.
    """
    if corner is None:
        corner = cloud.min_corner()
    cells = np.floor((cloud.positions - np.asarray(corner, dtype=np.float64)) / grid_size)
    if (cells < 0).any():
        raise ValueError("positions fall below the translation corner")
    top = cells.max(axis=0)
    for axis in range(3):
        if top[axis] >= (1 << bits_per_axis):
            need = int(top[axis]).bit_length()
            raise ExtentOverflowError(
                f"{AXES[axis]} extent needs {need} bits per axis at grid_size "
                f"{grid_size!r} but only {bits_per_axis} are configured; "
                f"raise grid_size or bits_per_axis"
            )
    return cells.astype(np.int64)


def compute_codes(cloud, pattern, cfg, corner=None):
    """Pack (batch << 48) | curve_key for every point."""
    cells = grid_cells(cloud, cfg.grid_size, cfg.bits_per_axis, corner)
    keys = sfc.encode(pattern, cells, cfg.bits_per_axis)
    return (cloud.batch.astype(np.uint64) << np.uint64(BATCH_SHIFT)) | keys


def argsort_codes(codes):
    """Stable sort; returns (order, inverse) as mutually inverse permutations."""
    codes = np.asarray(codes)
    if codes.ndim != 1 or len(codes) == 0:
        raise ValueError("codes must be a nonempty 1-d sequence")
    order = np.argsort(codes, kind="stable").astype(np.int64)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order), dtype=np.int64)
    return order, inverse


def serialize_all(cloud, cfg, corner=None):
    """One SerializedOrder per configured pattern, all on the same grid."""
    if corner is None:
        corner = cloud.min_corner()
    out = []
    for pattern in cfg.patterns:
        codes = compute_codes(cloud, pattern, cfg, corner)
        order, inverse = argsort_codes(codes)
        out.append(SerializedOrder(pattern, codes, order, inverse))
    return out
