"""One serialized-attention block, forward only.

The block follows the pre-norm layout

    x  <- xcpe(x)                      positional encoding with skip inside
    x  <- x + attention(LN1(x))        multi-head, within serialized patches
    x  <- x + mlp(LN2(x))              4x expansion, smooth gelu

All weight matrices are stored (out_features, in_features) and applied to
row-stacked features as ``x @ W.T``, i.e. the column-vector convention
``out = W @ x`` per point. Computation runs in float64.

The positional encoding is a submanifold 3x3x3 grid convolution: every point
gathers, for each of the 27 cell offsets, the transformed feature sum of the
same-batch points whose cell is its own cell plus that offset. Points
sharing a cell contribute by plain summation, and the identity skip is added
on top. Cells come from the same translate-then-floor rule the serializer
uses; pass ``corner`` to keep grids aligned across resolutions.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .patch import plan_for_block

LN_EPS = 1e-5

OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.int64)

# Soft cap (in float64 elements) for the attention score scratch buffer;
# patches are processed in chunks so memory stays flat in patch size.
_SCORE_BUDGET = 16_000_000


def offset_index(dx, dy, dz):
    """Slot of a (dx, dy, dz) offset in a 27-slot conv kernel."""
    return (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1)


@dataclass
class BlockParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln1_scale: np.ndarray
    ln1_bias: np.ndarray
    ln2_scale: np.ndarray
    ln2_bias: np.ndarray
    cpe_kernel: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    heads: int

    def __post_init__(self):
        c = self.wq.shape[0]
        shapes = {
            "wq": (c, c), "wk": (c, c), "wv": (c, c), "wo": (c, c),
            "ln1_scale": (c,), "ln1_bias": (c,), "ln2_scale": (c,), "ln2_bias": (c,),
            "cpe_kernel": (27, c, c),
            "mlp_w1": (4 * c, c), "mlp_b1": (4 * c,),
            "mlp_w2": (c, 4 * c), "mlp_b2": (c,),
        }
        for name, want in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != want:
                raise ValueError(f"{name} must have shape {want}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        if self.heads < 1 or c % self.heads != 0:
            raise ValueError(f"heads ({self.heads}) must divide channels ({c})")

    @property
    def channels(self):
        return self.wq.shape[0]


def init_block_params(channels, heads, seed):
    """Seeded Gaussian weights, std 1/sqrt(fan_in); unit LN scales, zero biases.

    Draw order is fixed (wq, wk, wv, wo, cpe, mlp_w1, mlp_w2) so a given seed
    always produces the same block.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    c = channels

    def gauss(*shape):
        return rng.normal(0.0, 1.0 / math.sqrt(shape[-1]), size=shape)

    return BlockParams(
        wq=gauss(c, c), wk=gauss(c, c), wv=gauss(c, c), wo=gauss(c, c),
        ln1_scale=np.ones(c), ln1_bias=np.zeros(c),
        ln2_scale=np.ones(c), ln2_bias=np.zeros(c),
        cpe_kernel=gauss(27, c, c),
        mlp_w1=gauss(4 * c, c), mlp_b1=np.zeros(4 * c),
        mlp_w2=gauss(c, 4 * c), mlp_b2=np.zeros(c),
        heads=heads,
    )


def layer_norm(x, scale, bias, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * scale + bias


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _softmax_inplace(scores):
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    return scores


def softmax(scores):
    """Numerically stable softmax over the last axis."""
    return _softmax_inplace(np.array(scores, dtype=np.float64))


def _check_finite(x, where):
    if not np.isfinite(x).all():
        raise ValueError(f"non-finite values {where}")


def _cell_keys(cloud, grid_size, corner):
    """Collision-free int64 key per point from (batch, cell), plus the
    key increments of the three axes so neighbour cells are key offsets."""
    if corner is None:
        corner = cloud.min_corner()
    cells = np.floor((cloud.positions - np.asarray(corner, dtype=np.float64)) / grid_size)
    cells = cells.astype(np.int64)
    cells -= cells.min(axis=0)
    spans = cells.max(axis=0) + 3  # one-cell margin on both sides
    if int(cloud.num_batches) * int(spans[0]) * int(spans[1]) * int(spans[2]) >= 1 << 62:
        raise ValueError("grid extent too large to key positions")
    sx = int(spans[1] * spans[2])
    sy = int(spans[2])
    keys = (
        cloud.batch.astype(np.int64) * int(spans[0]) * sx
        + (cells[:, 0] + 1) * sx
        + (cells[:, 1] + 1) * sy
        + (cells[:, 2] + 1)
    )
    return keys, (sx, sy, 1)


def xcpe(cloud, feats, grid_size, kernel, corner=None):
    """Sparse 27-offset grid convolution with identity skip."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 3 or kernel.shape[0] != 27 or kernel.shape[1] != kernel.shape[2]:
        raise ValueError(f"kernel must be (27, C, C), got {kernel.shape}")
    if grid_size <= 0:
        raise ValueError("grid_size must be positive")
    x = np.asarray(feats, dtype=np.float64)
    keys, strides = _cell_keys(cloud, grid_size, corner)
    uniq, inv = np.unique(keys, return_inverse=True)
    sums = np.zeros((len(uniq), x.shape[1]), dtype=np.float64)
    np.add.at(sums, inv, x)
    out = x.copy()
    for o, (dx, dy, dz) in enumerate(OFFSETS):
        shifted = keys + (dx * strides[0] + dy * strides[1] + dz * strides[2])
        idx = np.searchsorted(uniq, shifted)
        idx[idx == len(uniq)] = 0
        found = uniq[idx] == shifted
        if found.any():
            out[found] += sums[idx[found]] @ kernel[o].T
    return out


def patch_attention(feats, plan, params, scale=None, checked=False, with_weights=False):
    """Scaled dot-product attention within each patch of the plan.

    Results are scattered back through the plan's non-borrowed slots, which
    must cover every feature row exactly once. with_weights additionally
    returns the (num_patches, heads, s, s) attention weights; that
    materializes everything at once, so keep it to diagnostic-sized inputs.
    """
    x = np.asarray(feats, dtype=np.float64)
    if checked:
        _check_finite(x, "in attention input")
    n, c = x.shape
    if c != params.channels:
        raise ValueError(f"feature width {c} does not match params ({params.channels})")
    keep = ~plan.borrow_mask
    targets = plan.padded[keep]
    if keep.sum() != n or np.bincount(targets, minlength=n).min() != 1:
        raise ValueError("plan does not cover the feature rows exactly once")
    s = plan.patch_size
    h = params.heads
    hd = c // h
    if scale is None:
        scale = 1.0 / math.sqrt(hd)

    gathered = x[plan.padded]
    num = plan.num_patches

    def split(w):
        return (gathered @ w.T).reshape(num, s, h, hd).transpose(0, 2, 1, 3)

    q = split(params.wq)
    k = split(params.wk)
    v = split(params.wv)

    merged = np.empty((num, h, s, hd), dtype=np.float64)
    weights = np.empty((num, h, s, s), dtype=np.float64) if with_weights else None
    chunk = max(1, _SCORE_BUDGET // (h * s * s))
    for lo in range(0, num, chunk):
        hi = min(num, lo + chunk)
        scores = q[lo:hi] @ k[lo:hi].swapaxes(-1, -2)
        scores *= scale
        _softmax_inplace(scores)
        if with_weights:
            weights[lo:hi] = scores
        merged[lo:hi] = scores @ v[lo:hi]

    flat = merged.transpose(0, 2, 1, 3).reshape(num * s, c) @ params.wo.T
    out = np.empty_like(x)
    out[targets] = flat[keep]
    if checked:
        _check_finite(out, "after attention")
    return (out, weights) if with_weights else out


def block_forward(cloud, feats, orders, block_index, interaction, params, patch_size,
                  grid_size, corner=None, perm=None, checked=False):
    """Full pre-norm block: xcpe, patch attention, feed-forward.

    ``orders`` holds one SerializedOrder per configured pattern; the
    interaction strategy picks which one this block groups by. ``perm`` is
    the forward pass's shuffle permutation when the strategy needs one.
    """
    x = xcpe(cloud, feats, grid_size, params.cpe_kernel, corner)
    if checked:
        _check_finite(x, "after positional encoding")
    _, plan = plan_for_block(orders, block_index, patch_size, interaction, perm)
    x = x + patch_attention(layer_norm(x, params.ln1_scale, params.ln1_bias), plan, params,
                            checked=checked)
    y = layer_norm(x, params.ln2_scale, params.ln2_bias)
    y = gelu(y @ params.mlp_w1.T + params.mlp_b1) @ params.mlp_w2.T + params.mlp_b2
    x = x + y
    if checked:
        _check_finite(x, "after feed-forward")
    return x
