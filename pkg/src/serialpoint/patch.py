"""Patch layouts over a serialized order, plus the block-to-block
interaction strategies that let information cross patch boundaries.

A patch plan pads the serialized sequence to a multiple of the patch size s
and groups it into consecutive s-blocks. Padding borrows backwards: the
final patch is always the last s entries of the sequence, so its leading
slots repeat entries already present in the previous patch and are flagged
in ``borrow_mask``. Downstream consumers scatter results through the
non-borrowed slots, which hold every original index exactly once.

Four interaction kinds are supported:

- ``shift-order``: the curve pattern cycles through the configured list,
  one step per attention block.
- ``shuffle-order``: same cycling, but the list is permuted once per forward
  pass by a seeded Philox draw.
- ``shift-dilation``: even blocks use plain grouping; odd blocks regroup the
  sequence as a d-column matrix read column-wise, so patch mates sit d steps
  apart along the curve. The pattern stays fixed at the first configured one.
- ``shift-patch``: even blocks use plain grouping; odd blocks rotate the
  sequence left by floor(s/2) before grouping (the half-window shift). The
  pattern stays fixed at the first configured one.
"""

from dataclasses import dataclass

import numpy as np

KINDS = ("shift-order", "shuffle-order", "shift-dilation", "shift-patch")


@dataclass
class PatchPlan:
    patch_size: int
    padded: np.ndarray
    borrow_mask: np.ndarray

    @property
    def num_patches(self):
        return len(self.padded) // self.patch_size

    def patches(self):
        """View of the padded indices as (num_patches, patch_size)."""
        return self.padded.reshape(-1, self.patch_size)


@dataclass(frozen=True)
class Interaction:
    kind: str
    dilation: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown interaction kind {self.kind!r}; expected one of {KINDS}")
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")


def _sequence(order):
    """Accept a SerializedOrder or a bare array of original indices."""
    seq = getattr(order, "order", order)
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or len(seq) == 0:
        raise ValueError("serialized sequence must be a nonempty 1-d index array")
    return seq


def pad_and_group(order, patch_size):
    seq = _sequence(order)
    s = int(patch_size)
    if s < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    n = len(seq)
    if n % s == 0:
        padded = seq.copy()
        mask = np.zeros(n, dtype=bool)
    elif n > s:
        full = (n // s) * s
        padded = np.concatenate([seq[:full], seq[n - s:]])
        mask = np.zeros(len(padded), dtype=bool)
        mask[full:full + (s - n % s)] = True
    else:
        padded = np.concatenate([np.repeat(seq[0], s - n), seq])
        mask = np.zeros(s, dtype=bool)
        mask[: s - n] = True
    return PatchPlan(s, padded, mask)


def dilated_plan(order, patch_size, dilation):
    """Regroup the sequence as a dilation-column matrix read column-wise."""
    seq = _sequence(order)
    d = int(dilation)
    if d < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    pos = np.arange(len(seq))
    perm = np.lexsort((pos // d, pos % d))
    return pad_and_group(seq[perm], patch_size)


def shifted_patch_plan(order, patch_size):
    """Rotate the sequence left by floor(s/2), then group."""
    seq = _sequence(order)
    s = int(patch_size)
    if s < 2:
        raise ValueError(f"shifted patches need patch_size >= 2, got {patch_size}")
    return pad_and_group(np.roll(seq, -(s // 2)), s)


def shuffle_permutation(num_patterns, seed):
    """The once-per-forward-pass pattern shuffle, Philox-seeded."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.permutation(num_patterns)


def select_pattern(block_index, patterns, interaction, perm=None):
    """Which serialization pattern an attention block should group by.

    For shuffle-order, perm is the permutation drawn for the current forward
    pass; when omitted it is derived from interaction.seed directly.
    """
    patterns = list(patterns)
    if not patterns:
        raise ValueError("patterns must be nonempty")
    if interaction.kind == "shuffle-order":
        if perm is None:
            perm = shuffle_permutation(len(patterns), interaction.seed)
        patterns = [patterns[j] for j in perm]
    elif interaction.kind in ("shift-dilation", "shift-patch"):
        return patterns[0]
    return patterns[block_index % len(patterns)]


def plan_for_block(orders, block_index, patch_size, interaction, perm=None):
    """Pick the block's order and build its patch plan.

    orders is the list of SerializedOrder for the configured patterns.
    Returns (order, plan). Odd blocks get the dilated / shifted layout under
    those kinds; shift-patch falls back to plain grouping at patch_size 1,
    where no rotation exists.
    """
    chosen = select_pattern(block_index, [o.pattern for o in orders], interaction, perm)
    order = next(o for o in orders if o.pattern == chosen)
    augmented = block_index % 2 == 1
    if interaction.kind == "shift-dilation" and augmented:
        plan = dilated_plan(order, patch_size, interaction.dilation)
    elif interaction.kind == "shift-patch" and augmented and patch_size >= 2:
        plan = shifted_patch_plan(order, patch_size)
    else:
        plan = pad_and_group(order, patch_size)
    return order, plan
