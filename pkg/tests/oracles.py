"""Independent scalar reference implementations used as test oracles.

Everything in here is deliberately written the slow, obvious way (per-bit
loops, tuple sorts, plain floats) so it shares no code and no vectorization
tricks with the library. Tests compare the fast paths against these.
"""

import math

PATTERNS = ("Z", "TZ", "H", "TH")


def morton_key_scalar(x: int, y: int, z: int, bits: int) -> int:
    """Bit-interleave with x in the least significant slot of each triple."""
    key = 0
    for j in range(bits):
        key |= ((x >> j) & 1) << (3 * j)
        key |= ((y >> j) & 1) << (3 * j + 1)
        key |= ((z >> j) & 1) << (3 * j + 2)
    return key


def morton_coord_scalar(key: int, bits: int) -> tuple[int, int, int]:
    x = y = z = 0
    for j in range(bits):
        x |= ((key >> (3 * j)) & 1) << j
        y |= ((key >> (3 * j + 1)) & 1) << j
        z |= ((key >> (3 * j + 2)) & 1) << j
    return x, y, z


def hilbert_key_scalar(x: int, y: int, z: int, bits: int) -> int:
    """Skilling's transpose construction, scalar form.

    The axes are first folded into the "transpose" representation (each axis
    word holds every third bit of the final key, X[0] most significant), then
    the transpose is interleaved into one integer.
    """
    X = [x, y, z]
    m = 1 << (bits - 1)
    # fold: undo excess work, most significant plane downwards
    q = m
    while q > 1:
        p = q - 1
        for i in range(3):
            if X[i] & q:
                X[0] ^= p
            else:
                t = (X[0] ^ X[i]) & p
                X[0] ^= t
                X[i] ^= t
        q >>= 1
    # Gray encode
    X[1] ^= X[0]
    X[2] ^= X[1]
    t = 0
    q = m
    while q > 1:
        if X[2] & q:
            t ^= q - 1
        q >>= 1
    for i in range(3):
        X[i] ^= t
    key = 0
    for j in range(bits):
        for i in range(3):
            key |= ((X[i] >> j) & 1) << (3 * j + (2 - i))
    return key


def hilbert_coord_scalar(key: int, bits: int) -> tuple[int, int, int]:
    X = [0, 0, 0]
    for j in range(bits):
        for i in range(3):
            X[i] |= ((key >> (3 * j + (2 - i))) & 1) << j
    n = 1 << bits
    # Gray decode
    t = X[2] >> 1
    X[2] ^= X[1]
    X[1] ^= X[0]
    X[0] ^= t
    # redo excess work, least significant plane upwards
    q = 2
    while q != n:
        p = q - 1
        for i in (2, 1, 0):
            if X[i] & q:
                X[0] ^= p
            else:
                t = (X[0] ^ X[i]) & p
                X[0] ^= t
                X[i] ^= t
        q <<= 1
    return X[0], X[1], X[2]


def curve_key_scalar(pattern: str, x: int, y: int, z: int, bits: int) -> int:
    if pattern == "Z":
        return morton_key_scalar(x, y, z, bits)
    if pattern == "TZ":
        return morton_key_scalar(y, x, z, bits)
    if pattern == "H":
        return hilbert_key_scalar(x, y, z, bits)
    if pattern == "TH":
        return hilbert_key_scalar(y, x, z, bits)
    raise ValueError(pattern)


def curve_coord_scalar(pattern: str, key: int, bits: int) -> tuple[int, int, int]:
    if pattern == "Z":
        return morton_coord_scalar(key, bits)
    if pattern == "TZ":
        x, y, z = morton_coord_scalar(key, bits)
        return y, x, z
    if pattern == "H":
        return hilbert_coord_scalar(key, bits)
    if pattern == "TH":
        x, y, z = hilbert_coord_scalar(key, bits)
        return y, x, z
    raise ValueError(pattern)


def serialized_code_scalar(pattern, position, batch, mins, grid_size, bits):
    """The packed 64-bit code, recomputed with plain python floats."""
    cx = math.floor((position[0] - mins[0]) / grid_size)
    cy = math.floor((position[1] - mins[1]) / grid_size)
    cz = math.floor((position[2] - mins[2]) / grid_size)
    for c in (cx, cy, cz):
        if not 0 <= c < (1 << bits):
            raise ValueError("cell out of range")
    return (batch << 48) | curve_key_scalar(pattern, cx, cy, cz, bits)


def knn_rescan(positions, batch, k):
    """Quadratic nearest neighbours, ties broken by smaller index.

    positions is any (n, 3) sequence; returns a list of k-lists of indices.
    Same-batch only, self excluded.
    """
    n = len(positions)
    out = []
    for i in range(n):
        cand = []
        px, py, pz = positions[i]
        for j in range(n):
            if j == i or batch[j] != batch[i]:
                continue
            dx = positions[j][0] - px
            dy = positions[j][1] - py
            dz = positions[j][2] - pz
            cand.append((dx * dx + dy * dy + dz * dz, j))
        cand.sort()
        out.append([j for _, j in cand[:k]])
    return out
