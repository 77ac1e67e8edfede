"""File formats: binary cloud/order/parameter/feature dumps and the text
forms (.xyz clouds, patch-plan listings).

All binary formats are little-endian with a 4-byte magic. Writers are
atomic: content goes to a temporary file in the destination directory and is
renamed into place, so readers never observe a half-written file.

PCB1  point cloud      u64 n, u32 C, u8 position width (8 = f64),
                       n*3 f64 positions, n*C f32 features, n u16 batch
SER1  serialized order u64 n, u8 pattern id, u8 bits per axis, f64 grid,
                       n u64 codes, n u32 order, n u32 inverse
PTW1  network weights  repeated (u16 name length, name bytes, u8 rank,
                       rank u32 dims, f32 data row-major) until EOF
FTR1  output features  u64 n, u32 C, n*C f32
"""

import os
import struct
import tempfile

import numpy as np

from .serialize import PointCloud, SerializedOrder
from .patch import PatchPlan
from . import sfc


class FormatError(ValueError):
    """Raised when a file does not parse as the format it claims to be."""


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


class _Reader:
    def __init__(self, data, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, nbytes, what):
        if self.off + nbytes > len(self.data):
            raise FormatError(f"{self.path}: truncated while reading {what}")
        chunk = self.data[self.off:self.off + nbytes]
        self.off += nbytes
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt), what))

    def array(self, dtype, count, what):
        dtype = np.dtype(dtype)
        raw = self.take(dtype.itemsize * count, what)
        return np.frombuffer(raw, dtype=dtype).copy()

    def expect_magic(self, magic):
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(f"{self.path}: expected {magic.decode()} file, found {got!r}")

    def done(self):
        if self.off != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.off} trailing bytes")


def _load(path):
    with open(path, "rb") as handle:
        return _Reader(handle.read(), os.fspath(path))


# -- PCB1 ---------------------------------------------------------------

def cloud_to_bytes(cloud):
    head = b"PCB1" + struct.pack("<QIB", cloud.n, cloud.channels, 8)
    return (head
            + cloud.positions.astype("<f8").tobytes()
            + cloud.features.astype("<f4").tobytes()
            + cloud.batch.astype("<u2").tobytes())


def cloud_from_bytes(data, path="<bytes>"):
    r = _Reader(data, path)
    r.expect_magic(b"PCB1")
    n, c, width = r.unpack("QIB", "header")
    if width != 8:
        raise FormatError(f"{path}: unsupported position width {width}")
    pos = r.array("<f8", n * 3, "positions").reshape(n, 3)
    feats = r.array("<f4", n * c, "features").reshape(n, c)
    batch = r.array("<u2", n, "batch")
    r.done()
    try:
        return PointCloud(pos.astype(np.float64), feats, batch.astype(np.uint16))
    except ValueError as bad:
        raise FormatError(f"{path}: {bad}") from None


def write_cloud_binary(path, cloud):
    atomic_write_bytes(path, cloud_to_bytes(cloud))


def read_cloud_binary(path):
    r = _load(path)
    return cloud_from_bytes(r.data, r.path)


# -- text .xyz ----------------------------------------------------------

def cloud_to_text(cloud):
    lines = []
    for i in range(cloud.n):
        parts = [f"{v:.9g}" for v in cloud.positions[i]]
        parts += [f"{v:.9g}" for v in cloud.features[i]]
        if cloud.num_batches > 1:
            parts.append(f"#{cloud.batch[i]}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def cloud_from_text(text, path="<text>"):
    positions, features, batches = [], [], []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        batch = None
        if tokens[-1].startswith("#"):
            try:
                batch = int(tokens[-1][1:])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad batch token {tokens[-1]!r}") from None
            tokens = tokens[:-1]
        if len(tokens) < 3:
            raise FormatError(f"{path}:{lineno}: need at least x y z")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} columns, found {len(tokens)}")
        try:
            values = [float(t) for t in tokens]
        except ValueError as bad:
            raise FormatError(f"{path}:{lineno}: {bad}") from None
        positions.append(values[:3])
        features.append(values[3:])
        batches.append(batch)
    if not positions:
        raise FormatError(f"{path}: no points")
    has_batch = [b is not None for b in batches]
    if any(has_batch) and not all(has_batch):
        raise FormatError(f"{path}: batch column present on some lines but not all")
    feats = np.array(features, dtype=np.float32) if features[0] else None
    batch = np.array(batches, dtype=np.uint16) if all(has_batch) else None
    try:
        return PointCloud(np.array(positions, dtype=np.float64), feats, batch)
    except ValueError as bad:
        raise FormatError(f"{path}: {bad}") from None


def write_cloud_text(path, cloud):
    atomic_write_text(path, cloud_to_text(cloud))


def read_cloud_text(path):
    with open(path, "r", encoding="utf-8") as handle:
        return cloud_from_text(handle.read(), os.fspath(path))


def read_cloud(path):
    """Sniff the magic: PCB1 binary, anything else parses as text."""
    with open(path, "rb") as handle:
        head = handle.read(4)
    if head == b"PCB1":
        return read_cloud_binary(path)
    return read_cloud_text(path)


def write_cloud(path, cloud):
    if os.fspath(path).endswith(".xyz"):
        write_cloud_text(path, cloud)
    else:
        write_cloud_binary(path, cloud)


# -- SER1 ---------------------------------------------------------------

def order_to_bytes(order, bits_per_axis, grid_size):
    n = len(order.codes)
    if n >= 1 << 32:
        raise ValueError("SER1 stores order indices as u32; cloud is too large")
    head = b"SER1" + struct.pack(
        "<QBBd", n, sfc.PATTERN_IDS[order.pattern], bits_per_axis, grid_size
    )
    return (head
            + order.codes.astype("<u8").tobytes()
            + order.order.astype("<u4").tobytes()
            + order.inverse.astype("<u4").tobytes())


def order_from_bytes(data, path="<bytes>"):
    r = _Reader(data, path)
    r.expect_magic(b"SER1")
    n, pattern_id, bits, grid = r.unpack("QBBd", "header")
    if pattern_id >= len(sfc.PATTERNS):
        raise FormatError(f"{path}: unknown pattern id {pattern_id}")
    codes = r.array("<u8", n, "codes")
    order = r.array("<u4", n, "order").astype(np.int64)
    inverse = r.array("<u4", n, "inverse").astype(np.int64)
    r.done()
    return SerializedOrder(sfc.PATTERNS[pattern_id], codes, order, inverse), bits, grid


def write_order(path, order, bits_per_axis, grid_size):
    atomic_write_bytes(path, order_to_bytes(order, bits_per_axis, grid_size))


def read_order(path):
    r = _load(path)
    return order_from_bytes(r.data, r.path)


# -- PTW1 ---------------------------------------------------------------

def tensors_to_bytes(tensors):
    out = [b"PTW1"]
    for name, array in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:40]}...")
        array = np.asarray(array, dtype="<f4")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<B", array.ndim))
        out.append(struct.pack(f"<{array.ndim}I", *array.shape))
        out.append(array.tobytes(order="C"))
    return b"".join(out)


def tensors_from_bytes(data, path="<bytes>"):
    r = _Reader(data, path)
    r.expect_magic(b"PTW1")
    tensors = {}
    while r.off < len(r.data):
        (name_len,) = r.unpack("H", "tensor name length")
        name = r.take(name_len, "tensor name").decode("utf-8")
        (rank,) = r.unpack("B", f"rank of {name}")
        dims = r.unpack(f"{rank}I", f"shape of {name}") if rank else ()
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        flat = r.array("<f4", count, f"data of {name}")
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor {name!r}")
        tensors[name] = flat.reshape(dims)
    return tensors


def write_tensors(path, tensors):
    atomic_write_bytes(path, tensors_to_bytes(tensors))


def read_tensors(path):
    r = _load(path)
    return tensors_from_bytes(r.data, r.path)


# -- FTR1 ---------------------------------------------------------------

def features_to_bytes(feats):
    feats = np.asarray(feats)
    if feats.ndim != 2:
        raise ValueError("features must be a 2-d array")
    head = b"FTR1" + struct.pack("<QI", feats.shape[0], feats.shape[1])
    return head + feats.astype("<f4").tobytes()


def features_from_bytes(data, path="<bytes>"):
    r = _Reader(data, path)
    r.expect_magic(b"FTR1")
    n, c = r.unpack("QI", "header")
    feats = r.array("<f4", n * c, "features").reshape(n, c)
    r.done()
    return feats


def write_features(path, feats):
    atomic_write_bytes(path, features_to_bytes(feats))


def read_features(path):
    r = _load(path)
    return features_from_bytes(r.data, r.path)


# -- patch plan text ----------------------------------------------------

def plan_to_text(plan):
    """One line per patch; borrowed entries carry a trailing ``*``."""
    rows = plan.patches()
    mask = plan.borrow_mask.reshape(rows.shape)
    lines = []
    for p in range(plan.num_patches):
        lines.append(" ".join(
            f"{rows[p, s]}*" if mask[p, s] else str(rows[p, s])
            for s in range(plan.patch_size)
        ))
    return "\n".join(lines) + "\n"


def plan_from_text(text, path="<text>"):
    padded, mask, width = [], [], None
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise FormatError(f"{path}:{lineno}: ragged patch of {len(tokens)} entries")
        for token in tokens:
            borrowed = token.endswith("*")
            try:
                padded.append(int(token.rstrip("*")))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad index {token!r}") from None
            mask.append(borrowed)
    if width is None:
        raise FormatError(f"{path}: no patches")
    return PatchPlan(width, np.array(padded, dtype=np.int64), np.array(mask, dtype=bool))
