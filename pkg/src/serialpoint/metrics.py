"""Locality measurements, a brute-force KNN oracle, and wall-time benchmarks.

The KNN oracle is the ground truth that serialized neighborhoods get compared
against. It is an exhaustive quadratic scan, compiled with numba, with a
fully specified tie rule (smaller original index wins) so an independent
implementation can reproduce it bit for bit.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def _knn_scan(x, y, z, k, out):
    n = x.shape[0]
    d2 = np.empty(n, np.float64)
    for i in range(n):
        xi = x[i]
        yi = y[i]
        zi = z[i]
        for j in range(n):
            dx = x[j] - xi
            dy = y[j] - yi
            dz = z[j] - zi
            d2[j] = dx * dx + dy * dy + dz * dz
        d2[i] = np.inf
        bestd = np.full(k, np.inf)
        besti = np.full(k, -1, np.int64)
        for j in range(n):
            v = d2[j]
            # strict comparisons keep the earliest index on equal distances
            if v < bestd[k - 1]:
                p = k - 1
                while p > 0 and bestd[p - 1] > v:
                    bestd[p] = bestd[p - 1]
                    besti[p] = besti[p - 1]
                    p -= 1
                bestd[p] = v
                besti[p] = j
        out[i, :] = besti


def knn_oracle(cloud, k):
    """Exact k nearest neighbors per point (same batch, self excluded).

    Returns an (n, k) int64 array of original point indices, nearest first.
    Ties are broken toward the smaller index.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    counts = np.bincount(cloud.batch, minlength=cloud.num_batches)
    if counts.min() <= k:
        small = int(np.argmin(counts))
        raise ValueError(
            f"k={k} needs more than k points per batch; batch {small} has {counts.min()}"
        )
    out = np.empty((cloud.n, k), dtype=np.int64)
    for b in range(cloud.num_batches):
        idx = np.flatnonzero(cloud.batch == b)
        pos = cloud.positions[idx]
        local = np.empty((len(idx), k), dtype=np.int64)
        _knn_scan(
            np.ascontiguousarray(pos[:, 0]),
            np.ascontiguousarray(pos[:, 1]),
            np.ascontiguousarray(pos[:, 2]),
            k,
            local,
        )
        out[idx] = idx[local]
    return out


def serial_locality(cloud, order):
    """Mean and 95th percentile of consecutive-pair distances along an order.

    Pairs whose endpoints sit in different batches are skipped; what remains
    measures how far apart curve-adjacent points land in space.
    """
    if cloud.n < 2:
        raise ValueError("locality needs at least 2 points")
    seq = order.order if hasattr(order, "order") else np.asarray(order)
    a = seq[:-1]
    b = seq[1:]
    same = cloud.batch[a] == cloud.batch[b]
    if not same.any():
        raise ValueError("no two consecutive points share a batch")
    d = np.linalg.norm(cloud.positions[a[same]] - cloud.positions[b[same]], axis=1)
    return float(d.mean()), float(np.percentile(d, 95))


def patch_knn_overlap(plan, knn, cloud):
    """Mean fraction of each point's k nearest neighbors found among its
    patch-mates.

    A point's patch-mates are every distinct other index that shares a patch
    with one of its non-borrowed occurrences. Borrowed occurrences still make
    a point visible as a mate to others, but do not earn it any mates.
    """
    knn = np.asarray(knn)
    k = knn.shape[1]
    if k >= plan.patch_size:
        raise ValueError(f"k={k} must be smaller than the patch size {plan.patch_size}")
    patches = plan.patches()
    mask = plan.borrow_mask.reshape(patches.shape)
    mates = {}
    for p in range(plan.num_patches):
        vals = patches[p]
        uniq = set(int(v) for v in vals)
        for s in range(plan.patch_size):
            if not mask[p, s]:
                mates.setdefault(int(vals[s]), set()).update(uniq)
    total = 0.0
    for i in range(cloud.n):
        m = mates.get(i)
        if m is None:
            raise ValueError("plan does not cover every point of the cloud")
        total += sum(1 for j in knn[i] if int(j) in m) / k
    return total / cloud.n


@dataclass
class TimingRecord:
    label: str
    iterations: int
    mean_s: float
    std_s: float


def bench(label, setup, routine, iterations):
    """Time routine(setup()) with a monotonic clock.

    The first iteration is always discarded as warm-up; mean and std cover
    the remaining iterations-1 runs.
    """
    if iterations < 2:
        raise ValueError("need at least 2 iterations (the first is discarded)")
    arg = setup()
    times = []
    for _ in range(iterations):
        t0 = time.monotonic()
        routine(arg)
        times.append(time.monotonic() - t0)
    kept = np.array(times[1:])
    return TimingRecord(label, iterations, float(kept.mean()), float(kept.std()))


@dataclass
class MetricsReport:
    pattern: str
    mean_consecutive_distance: float
    p95_consecutive_distance: float
    patch_knn_overlap: float = math.nan
    timings: list = field(default_factory=list)

    def __post_init__(self):
        if self.mean_consecutive_distance < 0 or self.p95_consecutive_distance < 0:
            raise ValueError("distances cannot be negative")
        if not math.isnan(self.patch_knn_overlap) and not 0.0 <= self.patch_knn_overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")


def report_payload(report):
    """Plain-dict form of a report, ready for key-sorted JSON."""
    payload = {
        "pattern": report.pattern,
        "mean_consecutive_distance": report.mean_consecutive_distance,
        "p95_consecutive_distance": report.p95_consecutive_distance,
        "timings": [
            {"label": t.label, "iterations": t.iterations, "mean_s": t.mean_s, "std_s": t.std_s}
            for t in report.timings
        ],
    }
    if not math.isnan(report.patch_knn_overlap):
        payload["patch_knn_overlap"] = report.patch_knn_overlap
    return payload


def report_text(report):
    """Stable key-sorted JSON rendering used by the CLI and golden tests."""
    return json.dumps(report_payload(report), sort_keys=True, indent=2) + "\n"
