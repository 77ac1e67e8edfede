"""Point-cloud serialization over space-filling curves, patch attention,
and a forward-only point U-Net, with locality metrics and benchmarks."""

__version__ = "0.1.0"

from .sfc import PATTERNS, decode, encode
from .serialize import (
    ExtentOverflowError,
    PointCloud,
    SerializationConfig,
    SerializedOrder,
    serialize_all,
)
from .patch import Interaction, PatchPlan, pad_and_group, plan_for_block
from .attn import BlockParams, block_forward, init_block_params, patch_attention, xcpe
from .network import NetworkConfig, grid_pool, grid_unpool, init_network_params, unet_forward
from .metrics import bench, knn_oracle, patch_knn_overlap, serial_locality

__all__ = [
    "PATTERNS", "encode", "decode",
    "PointCloud", "SerializationConfig", "SerializedOrder", "ExtentOverflowError",
    "serialize_all",
    "Interaction", "PatchPlan", "pad_and_group", "plan_for_block",
    "BlockParams", "init_block_params", "patch_attention", "block_forward", "xcpe",
    "NetworkConfig", "grid_pool", "grid_unpool", "init_network_params", "unet_forward",
    "knn_oracle", "serial_locality", "patch_knn_overlap", "bench",
    "__version__",
]
