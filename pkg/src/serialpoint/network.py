"""Grid pooling, unpooling, and the forward-only U-Net assembly.

The network embeds input features at full resolution, then runs four
encoder stages, each of which first pools onto a grid twice as coarse
(merging points that share a cell, mean position, projected + batch
normalized mean feature) and then applies a stack of serialized-attention
blocks. Four decoder stages walk back up: each unpools through the matching
pool map (concatenate skip features with the parent's coarse features and
project), then applies its own blocks. The translation corner is computed
once from the input cloud and reused at every scale so the grids nest.

Serialization orders are recomputed whenever the resolution changes, and the
shuffle-order pattern permutation is redrawn at each pooling; decoder stages
reuse the orders and permutation cached for their resolution level on the
way down. Batch normalization is population statistics over the points of
the current forward pass (no running averages, nothing is trained).
"""

from dataclasses import dataclass

import numpy as np

from .attn import BlockParams, block_forward, init_block_params, xcpe
from .patch import Interaction
from .serialize import PointCloud, SerializationConfig, compute_codes, serialize_all
from . import sfc

BN_EPS = 1e-5


@dataclass
class PoolMap:
    parent: np.ndarray
    counts: np.ndarray

    @property
    def coarse_n(self):
        return len(self.counts)


@dataclass
class NetworkConfig:
    grid_size: float
    enc_depths: tuple = (2, 2, 6, 2)
    dec_depths: tuple = (1, 1, 1, 1)
    enc_channels: tuple = (32, 64, 128, 256)
    dec_channels: tuple = (256, 128, 64, 32)
    enc_heads: tuple = (2, 4, 8, 16)
    dec_heads: tuple = (16, 8, 4, 2)
    grid_multipliers: tuple = (2, 2, 2, 2)
    bits_per_axis: int = 16
    patterns: tuple = sfc.PATTERNS
    patch_size: int = 32
    interaction: Interaction = Interaction("shuffle-order")
    seed: int = 0

    def __post_init__(self):
        self.grid_size = float(self.grid_size)
        if not self.grid_size > 0:
            raise ValueError("grid_size must be positive")
        stages = len(self.enc_depths)
        for name in ("enc_channels", "enc_heads", "grid_multipliers",
                     "dec_depths", "dec_channels", "dec_heads"):
            if len(getattr(self, name)) != stages:
                raise ValueError(f"{name} must list {stages} stages like enc_depths")
        for c, h in zip(self.enc_channels + self.dec_channels, self.enc_heads + self.dec_heads):
            if c % h != 0:
                raise ValueError(f"stage width {c} is not divisible by its head count {h}")
        if any(m <= 1 for m in self.grid_multipliers):
            raise ValueError("grid multipliers must enlarge the grid (> 1)")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        sfc.check_bits(self.bits_per_axis)
        SerializationConfig(self.grid_size, self.bits_per_axis, self.patterns)

    @property
    def stages(self):
        return len(self.enc_depths)


@dataclass
class NetworkParams:
    embed_w: np.ndarray
    embed_b: np.ndarray
    embed_cpe: np.ndarray
    pool_w: list
    pool_b: list
    pool_bn_scale: list
    pool_bn_bias: list
    enc_blocks: list
    dec_w: list
    dec_b: list
    dec_blocks: list


def init_network_params(cfg, in_channels, seed):
    """Deterministic seeded weights for the whole network.

    Every component gets its own child of one seed sequence, spawned in a
    fixed order, so a (config, seed) pair always yields the same network.
    """
    root = np.random.SeedSequence(seed)

    def gen(child):
        return np.random.Generator(np.random.Philox(child))

    def gauss(child, *shape):
        return gen(child).normal(0.0, 1.0 / np.sqrt(shape[-1]), size=shape)

    c0 = cfg.enc_channels[0]
    children = iter(root.spawn(2 + 2 * cfg.stages + sum(cfg.enc_depths) + sum(cfg.dec_depths)))
    embed_w = gauss(next(children), c0, in_channels)
    embed_cpe = gauss(next(children), 27, c0, c0)

    pool_w, pool_b, pool_s, pool_o = [], [], [], []
    widths_in = (c0,) + cfg.enc_channels[:-1]
    for i in range(cfg.stages):
        pool_w.append(gauss(next(children), cfg.enc_channels[i], widths_in[i]))
        pool_b.append(np.zeros(cfg.enc_channels[i]))
        pool_s.append(np.ones(cfg.enc_channels[i]))
        pool_o.append(np.zeros(cfg.enc_channels[i]))

    enc_blocks = [
        [init_block_params(cfg.enc_channels[i], cfg.enc_heads[i], next(children))
         for _ in range(cfg.enc_depths[i])]
        for i in range(cfg.stages)
    ]

    dec_w, dec_b = [], []
    skip_widths = (cfg.enc_channels[0],) + cfg.enc_channels[:-1]  # level 0 .. level stages-1
    coarse = cfg.enc_channels[-1]
    for j in range(cfg.stages):
        skip = skip_widths[cfg.stages - 1 - j]
        dec_w.append(gauss(next(children), cfg.dec_channels[j], skip + coarse))
        dec_b.append(np.zeros(cfg.dec_channels[j]))
        coarse = cfg.dec_channels[j]

    dec_blocks = [
        [init_block_params(cfg.dec_channels[j], cfg.dec_heads[j], next(children))
         for _ in range(cfg.dec_depths[j])]
        for j in range(cfg.stages)
    ]

    return NetworkParams(
        embed_w=embed_w, embed_b=np.zeros(c0), embed_cpe=embed_cpe,
        pool_w=pool_w, pool_b=pool_b, pool_bn_scale=pool_s, pool_bn_bias=pool_o,
        enc_blocks=enc_blocks, dec_w=dec_w, dec_b=dec_b, dec_blocks=dec_blocks,
    )


def batch_norm(x, scale, bias, eps=BN_EPS):
    """Per-channel normalization with statistics of the given activations."""
    mu = x.mean(axis=0)
    var = x.var(axis=0)
    return (x - mu) / np.sqrt(var + eps) * scale + bias


def grid_pool(cloud, feats, g_new, weight, bias, bn_scale, bn_bias, corner=None, bits_per_axis=16):
    """Merge points sharing a (batch, cell) at the coarser grid.

    Returns the pooled cloud (mean member positions), the pooled features
    (projected, batch normalized mean member features), and the PoolMap
    linking every fine point to its pooled parent.
    """
    scfg = SerializationConfig(g_new, bits_per_axis, patterns=("Z",))
    codes = compute_codes(cloud, "Z", scfg, corner)
    uniq, parent, counts = np.unique(codes, return_inverse=True, return_counts=True)
    m = len(uniq)

    pos_sum = np.zeros((m, 3))
    np.add.at(pos_sum, parent, cloud.positions)
    pooled_pos = pos_sum / counts[:, None]

    x = np.asarray(feats, dtype=np.float64)
    feat_sum = np.zeros((m, x.shape[1]))
    np.add.at(feat_sum, parent, x)
    pooled = (feat_sum / counts[:, None]) @ np.asarray(weight).T + bias
    pooled = batch_norm(pooled, bn_scale, bn_bias)

    pooled_cloud = PointCloud(pooled_pos, pooled, (uniq >> np.uint64(48)).astype(np.uint16))
    return pooled_cloud, pooled, PoolMap(parent.astype(np.int64), counts.astype(np.int64))


def grid_unpool(pool_map, coarse_feats, skip_feats, weight, bias):
    """Project concat(skip, parent's coarse feature) back to fine points."""
    parent = pool_map.parent
    if len(pool_map.counts) != len(coarse_feats):
        raise ValueError("pool map does not match the coarse features")
    if len(parent) != len(skip_feats):
        raise ValueError("pool map does not match the skip features")
    both = np.concatenate([np.asarray(skip_feats, float), np.asarray(coarse_feats, float)[parent]], axis=1)
    return both @ np.asarray(weight).T + bias


def unet_forward(cloud, cfg, params=None, seed=None, checked=False, return_trace=False):
    """Run the full encoder/decoder. Deterministic given (cloud, cfg, seed).

    seed drives the shuffle-order permutations and, when params is None, the
    generated weights too; it defaults to cfg.seed. return_trace also yields
    per-level diagnostics (point counts, grid sizes, chosen orders).
    """
    if seed is None:
        seed = cfg.seed
    if params is None:
        params = init_network_params(cfg, cloud.channels, seed)
    # keyed apart from the weight-init streams inside init_network_params
    forward_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x0FD5])))
    npat = len(cfg.patterns)
    corner = cloud.min_corner()
    stages = cfg.stages

    x = cloud.features.astype(np.float64) @ params.embed_w.T + params.embed_b
    x = xcpe(cloud, x, cfg.grid_size, params.embed_cpe, corner)

    # level 0 is the input resolution; levels 1..stages follow the pools
    clouds = [cloud]
    grids = [cfg.grid_size]
    orders = [serialize_all(cloud, SerializationConfig(cfg.grid_size, cfg.bits_per_axis, cfg.patterns), corner)]
    perms = [forward_rng.permutation(npat)]
    skips = []
    maps = []

    g = cfg.grid_size
    for i in range(stages):
        skips.append(x)
        g = g * cfg.grid_multipliers[i]
        pooled_cloud, x, pmap = grid_pool(
            clouds[-1], x, g, params.pool_w[i], params.pool_b[i],
            params.pool_bn_scale[i], params.pool_bn_bias[i], corner, cfg.bits_per_axis,
        )
        clouds.append(pooled_cloud)
        grids.append(g)
        maps.append(pmap)
        orders.append(serialize_all(pooled_cloud, SerializationConfig(g, cfg.bits_per_axis, cfg.patterns), corner))
        perms.append(forward_rng.permutation(npat))
        for b, bp in enumerate(params.enc_blocks[i]):
            x = block_forward(pooled_cloud, x, orders[-1], b, cfg.interaction, bp,
                              cfg.patch_size, g, corner, perms[-1], checked)

    for j in range(stages):
        level = stages - 1 - j
        x = grid_unpool(maps[level], x, skips[level], params.dec_w[j], params.dec_b[j])
        for b, bp in enumerate(params.dec_blocks[j]):
            x = block_forward(clouds[level], x, orders[level], b, cfg.interaction, bp,
                              cfg.patch_size, grids[level], corner, perms[level], checked)

    if return_trace:
        trace = {
            "level_counts": [c.n for c in clouds],
            "grid_sizes": grids,
            "corner": corner,
        }
        return x, trace
    return x


def _block_tensor_items(prefix, bp):
    for name in ("wq", "wk", "wv", "wo", "ln1_scale", "ln1_bias", "ln2_scale",
                 "ln2_bias", "cpe_kernel", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
        yield f"{prefix}.{name}", getattr(bp, name)


def params_to_tensors(params):
    """Flatten network weights into an ordered name -> array mapping."""
    out = {"embed.w": params.embed_w, "embed.b": params.embed_b, "embed.cpe": params.embed_cpe}
    for i in range(len(params.pool_w)):
        out[f"pool{i}.w"] = params.pool_w[i]
        out[f"pool{i}.b"] = params.pool_b[i]
        out[f"pool{i}.bn_scale"] = params.pool_bn_scale[i]
        out[f"pool{i}.bn_bias"] = params.pool_bn_bias[i]
    for i, blocks in enumerate(params.enc_blocks):
        for b, bp in enumerate(blocks):
            out.update(_block_tensor_items(f"enc{i}.block{b}", bp))
    for j in range(len(params.dec_w)):
        out[f"dec{j}.w"] = params.dec_w[j]
        out[f"dec{j}.b"] = params.dec_b[j]
    for j, blocks in enumerate(params.dec_blocks):
        for b, bp in enumerate(blocks):
            out.update(_block_tensor_items(f"dec{j}.block{b}", bp))
    return out


def params_from_tensors(tensors, cfg):
    """Rebuild NetworkParams from a name -> array mapping plus the config
    (head counts are architecture, not weights, so they come from cfg)."""

    def block(prefix, heads):
        fields = {name.split(".")[-1]: np.asarray(tensors[f"{prefix}.{name}"], np.float64)
                  for name in ("wq", "wk", "wv", "wo", "ln1_scale", "ln1_bias", "ln2_scale",
                               "ln2_bias", "cpe_kernel", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2")}
        return BlockParams(heads=heads, **fields)

    try:
        return NetworkParams(
            embed_w=np.asarray(tensors["embed.w"], np.float64),
            embed_b=np.asarray(tensors["embed.b"], np.float64),
            embed_cpe=np.asarray(tensors["embed.cpe"], np.float64),
            pool_w=[np.asarray(tensors[f"pool{i}.w"], np.float64) for i in range(cfg.stages)],
            pool_b=[np.asarray(tensors[f"pool{i}.b"], np.float64) for i in range(cfg.stages)],
            pool_bn_scale=[np.asarray(tensors[f"pool{i}.bn_scale"], np.float64) for i in range(cfg.stages)],
            pool_bn_bias=[np.asarray(tensors[f"pool{i}.bn_bias"], np.float64) for i in range(cfg.stages)],
            enc_blocks=[[block(f"enc{i}.block{b}", cfg.enc_heads[i]) for b in range(cfg.enc_depths[i])]
                        for i in range(cfg.stages)],
            dec_w=[np.asarray(tensors[f"dec{j}.w"], np.float64) for j in range(cfg.stages)],
            dec_b=[np.asarray(tensors[f"dec{j}.b"], np.float64) for j in range(cfg.stages)],
            dec_blocks=[[block(f"dec{j}.block{b}", cfg.dec_heads[j]) for b in range(cfg.dec_depths[j])]
                        for j in range(cfg.stages)],
        )
    except KeyError as missing:
        raise ValueError(f"parameter file is missing tensor {missing}") from None
