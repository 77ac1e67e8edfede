"""Space-filling curve codes for 3D grid cells.

Two curve families, each with a transposed variant, all bijective between
grid coordinates in [0, 2^b)^3 and keys in [0, 2^(3b)):

``Z``
    Morton order. The key interleaves coordinate bits with x in the least
    significant slot of each triple: key bit 3j is x bit j, 3j+1 is y bit j,
    3j+2 is z bit j. So (1,0,0) -> 1, (0,1,0) -> 2, (0,0,1) -> 4, and x
    varies fastest along the curve.

``H``
    Hilbert order, built with the transpose construction (per bit plane,
    rotate/reflect the subcube so consecutive keys always land in
    face-adjacent cells). The curve starts at the origin.

``TZ`` / ``TH``
    The same curves with x and y swapped before encoding, so the y axis
    takes traversal priority. ``encode("TZ", (x, y, z), b)`` equals
    ``encode("Z", (y, x, z), b)`` by definition.

Keys are uint64 and use only the low 3*b bits; b is capped at 16 so a key
always fits the low 48 bits of a packed serialization code.

All functions accept a single coordinate triple / key or an array batch.
Batched inputs run fully vectorized (the Hilbert transform is O(b) array
passes, not O(n*b) scalar work).
"""

import numpy as np

PATTERNS = ("Z", "TZ", "H", "TH")
PATTERN_IDS = {"Z": 0, "TZ": 1, "H": 2, "TH": 3}
MAX_BITS = 16

# Bit-spreading masks for 3D Morton interleave, good up to 21 bits per axis.
_SPREAD_MASKS = (
    (32, 0x1F00000000FFFF),
    (16, 0x1F0000FF0000FF),
    (8, 0x100F00F00F00F00F),
    (4, 0x10C30C30C30C30C3),
    (2, 0x1249249249249249),
)


def check_bits(bits):
    if not isinstance(bits, (int, np.integer)) or not 1 <= int(bits) <= MAX_BITS:
        raise ValueError(f"bits per axis must be an integer in [1, {MAX_BITS}], got {bits!r}")
    return int(bits)


def check_pattern(pattern):
    if pattern not in PATTERN_IDS:
        raise ValueError(f"unknown curve pattern {pattern!r}; expected one of {PATTERNS}")
    return pattern


def _spread(v):
    """Insert two zero bits above every bit of v (low 21 bits)."""
    v = v & np.uint64(0x1FFFFF)
    for shift, mask in _SPREAD_MASKS:
        v = (v | (v << np.uint64(shift))) & np.uint64(mask)
    return v


_COMPACT_MASKS = (
    (2, 0x10C30C30C30C30C3),
    (4, 0x100F00F00F00F00F),
    (8, 0x1F0000FF0000FF),
    (16, 0x1F00000000FFFF),
    (32, 0x1FFFFF),
)


def _compact(v):
    """Inverse of _spread: gather every third bit down to a dense word."""
    v = v & np.uint64(0x1249249249249249)
    for shift, mask in _COMPACT_MASKS:
        v = (v | (v >> np.uint64(shift))) & np.uint64(mask)
    return v


def _morton_encode(x, y, z):
    return _spread(x) | (_spread(y) << np.uint64(1)) | (_spread(z) << np.uint64(2))


def _morton_decode(key):
    return _compact(key), _compact(key >> np.uint64(1)), _compact(key >> np.uint64(2))


def _hilbert_encode(x, y, z, bits):
    # Fold axes into the transpose representation: walk bit planes from the
    # most significant down, rotating/reflecting the low planes so that the
    # recursive subcube orientation is undone.
    X = [x.copy(), y.copy(), z.copy()]
    q = 1 << (bits - 1)
    while q > 1:
        p = np.uint64(q - 1)
        qq = np.uint64(q)
        high = (X[0] & qq) != 0
        X[0] = np.where(high, X[0] ^ p, X[0])
        for i in (1, 2):
            high = (X[i] & qq) != 0
            t = np.where(high, np.uint64(0), (X[0] ^ X[i]) & p)
            X[0] = np.where(high, X[0] ^ p, X[0] ^ t)
            X[i] = X[i] ^ t
        q >>= 1
    # Gray encode
    X[1] = X[1] ^ X[0]
    X[2] = X[2] ^ X[1]
    t = np.zeros_like(X[2])
    q = 1 << (bits - 1)
    while q > 1:
        high = (X[2] & np.uint64(q)) != 0
        t = t ^ np.where(high, np.uint64(q - 1), np.uint64(0))
        q >>= 1
    for i in range(3):
        X[i] = X[i] ^ t
    # The transpose word X[i] holds key bits 3j + (2 - i).
    return (_spread(X[0]) << np.uint64(2)) | (_spread(X[1]) << np.uint64(1)) | _spread(X[2])


def _hilbert_decode(key, bits):
    X = [_compact(key >> np.uint64(2)), _compact(key >> np.uint64(1)), _compact(key)]
    # Gray decode
    t = X[2] >> np.uint64(1)
    X[2] = X[2] ^ X[1]
    X[1] = X[1] ^ X[0]
    X[0] = X[0] ^ t
    # Redo the per-plane rotations, least significant plane upwards.
    q = 2
    while q != (1 << bits):
        p = np.uint64(q - 1)
        qq = np.uint64(q)
        for i in (2, 1):
            high = (X[i] & qq) != 0
            t = np.where(high, np.uint64(0), (X[0] ^ X[i]) & p)
            X[0] = np.where(high, X[0] ^ p, X[0] ^ t)
            X[i] = X[i] ^ t
        high = (X[0] & qq) != 0
        X[0] = np.where(high, X[0] ^ p, X[0])
        q <<= 1
    return X[0], X[1], X[2]


def encode(pattern, coords, bits):
    """Map grid coordinates to curve keys.

    coords may be a single (x, y, z) triple or an (n, 3) array of unsigned
    cell indices; every component must lie in [0, 2^bits). Returns a python
    int for a single triple, else a uint64 array of shape (n,).
    """
    check_pattern(pattern)
    bits = check_bits(bits)
    coords = np.asarray(coords)
    if coords.dtype.kind not in "ui":
        raise ValueError(f"grid coordinates must be integers, got dtype {coords.dtype}")
    single = coords.ndim == 1
    coords = np.atleast_2d(coords)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise ValueError(f"expected (n, 3) coordinates, got shape {coords.shape}")
    if coords.dtype.kind == "i" and (coords < 0).any():
        raise ValueError("grid coordinates must be non-negative")
    coords = coords.astype(np.uint64)
    if (coords >= (1 << bits)).any():
        raise ValueError(f"grid coordinate >= 2^{bits} out of range for {bits} bits per axis")
    x, y, z = (coords[:, i] for i in range(3))
    if pattern in ("TZ", "TH"):
        x, y = y, x
    if pattern in ("Z", "TZ"):
        keys = _morton_encode(x, y, z)
    else:
        keys = _hilbert_encode(x, y, z, bits)
    return int(keys[0]) if single else keys


def decode(pattern, keys, bits):
    """Map curve keys back to grid coordinates.

    keys may be a single integer or an array; every key must lie in
    [0, 2^(3*bits)). Returns an (x, y, z) tuple of python ints for a single
    key, else a uint64 array of shape (n, 3).
    """
    check_pattern(pattern)
    bits = check_bits(bits)
    keys = np.asarray(keys)
    if keys.dtype.kind not in "ui":
        raise ValueError(f"curve keys must be integers, got dtype {keys.dtype}")
    single = keys.ndim == 0
    keys = np.atleast_1d(keys)
    if keys.dtype.kind == "i" and (keys < 0).any():
        raise ValueError("curve keys must be non-negative")
    limit = 1 << (3 * bits)
    if (keys.astype(np.uint64) >= limit).any():
        raise ValueError(f"curve key >= 2^{3 * bits} out of range for {bits} bits per axis")
    keys = keys.astype(np.uint64)
    if pattern in ("Z", "TZ"):
        x, y, z = _morton_decode(keys)
    else:
        x, y, z = _hilbert_decode(keys, bits)
    if pattern in ("TZ", "TH"):
        x, y = y, x
    if single:
        return int(x[0]), int(y[0]), int(z[0])
    return np.stack([x, y, z], axis=1)
