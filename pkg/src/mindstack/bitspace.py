"""Addressed bit arrays (layers), partial-pattern masks, and block detection.

A layer is a fixed-length array of bits. A mask is a partial pattern over
relative offsets; offsets missing from the mask are wildcards. Detecting a
mask on a layer yields blocks: contiguous, pairwise-disjoint ranges, one per
match. Regions written by forcible excitation are remembered on the layer and
skipped by all subsequent detection until the bookkeeping is cleared (once
per engine tick).

All values are immutable; every mutation returns a new layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import AddressError, ArgumentError, OverlapError

Bit = int

__all__ = [
    "Bit",
    "Block",
    "Layer",
    "Mask",
    "cover_layer",
    "detect_mask",
    "excite_mask",
    "make_layer",
    "read_block",
    "write_points",
]


def _check_bit(value: int) -> Bit:
    if value not in (0, 1):
        raise ArgumentError(f"bit value must be 0 or 1, got {value!r}")
    return value


@dataclass(frozen=True)
class Mask:
    """Partial bit pattern: (relative offset, bit) constraints over a footprint.

    Offsets need not be contiguous; offsets inside the footprint that carry
    no constraint are wildcards. ``width`` is the footprint length and may
    exceed the highest constrained offset + 1, so removing a constraint
    (specialization) never shrinks the block a match occupies.
    """

    entries: tuple[tuple[int, Bit], ...]
    width: int

    def __init__(
        self,
        entries: Mapping[int, int] | Iterable[tuple[int, int]],
        width: int | None = None,
    ):
        items = dict(entries)
        if not items and width is None:
            raise ArgumentError("mask needs at least one entry or an explicit width")
        norm = []
        for offset, value in sorted(items.items()):
            if offset < 0:
                raise ArgumentError(f"mask offset must be >= 0, got {offset}")
            norm.append((offset, _check_bit(value)))
        min_width = norm[-1][0] + 1 if norm else 1
        if width is None:
            width = min_width
        if width < min_width:
            raise ArgumentError(f"width {width} below highest constrained offset")
        object.__setattr__(self, "entries", tuple(norm))
        object.__setattr__(self, "width", width)

    @property
    def span(self) -> int:
        """Width of the block a match occupies."""
        return self.width

    def as_dict(self) -> dict[int, Bit]:
        return dict(self.entries)

    def matches_at(self, bits: Sequence[Bit], offset: int) -> bool:
        """True when every constant of the mask holds at the given offset."""
        if offset < 0 or offset + self.span > len(bits):
            return False
        return all(bits[offset + i] == v for i, v in self.entries)

    def without(self, offset: int) -> "Mask":
        """Copy with the constant at ``offset`` turned into a wildcard."""
        items = self.as_dict()
        if offset not in items:
            raise ArgumentError(f"mask has no constant at offset {offset}")
        del items[offset]
        return Mask(items, self.width)


@dataclass(frozen=True)
class Block:
    """A matched, contiguous layer range bound to the mask that produced it."""

    begin: int
    end: int
    mask_id: str

    def __post_init__(self) -> None:
        if self.begin < 0 or self.end < self.begin:
            raise ArgumentError(f"bad block range ({self.begin}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.begin + 1

    def overlaps(self, other: "Block") -> bool:
        return self.begin <= other.end and other.begin <= self.end

    def overlaps_range(self, begin: int, end: int) -> bool:
        return self.begin <= end and begin <= self.end


@dataclass(frozen=True)
class Layer:
    """Fixed-length bit array plus the excited-region bookkeeping.

    ``excited`` holds (begin, end) ranges written by :func:`excite_mask`;
    detection and covering never report matches overlapping them.
    """

    bits: tuple[Bit, ...]
    excited: tuple[tuple[int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[Bit]:
        return iter(self.bits)

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def clear_excited(self) -> "Layer":
        """Drop the excitation bookkeeping (start of a new tick)."""
        if not self.excited:
            return self
        return Layer(self.bits)

    def is_excited_range(self, begin: int, end: int) -> bool:
        return any(begin <= e and b <= end for b, e in self.excited)


def layer_from_string(text: str) -> Layer:
    """Build a layer from a '0'/'1' string."""
    if not text or any(c not in "01" for c in text):
        raise ArgumentError(f"layer string must be nonempty over '0'/'1', got {text!r}")
    return Layer(tuple(int(c) for c in text))


def make_layer(length: int) -> Layer:
    """All-zero layer of the given positive length."""
    if length < 1:
        raise ArgumentError(f"layer length must be >= 1, got {length}")
    return Layer((0,) * length)


def write_points(layer: Layer, assignments: Mapping[int, int] | Iterable[tuple[int, int]]) -> Layer:
    """Return a copy of the layer with the given (address, bit) points written."""
    items = dict(assignments)
    if not items:
        return layer
    bits = list(layer.bits)
    for address, value in items.items():
        if not 0 <= address < len(bits):
            raise AddressError(f"address {address} outside layer of length {len(bits)}")
        bits[address] = _check_bit(value)
    return Layer(tuple(bits), layer.excited)


def detect_mask(layer: Layer, mask: Mask) -> list[int]:
    """All offsets where the mask matches, ascending.

    Matches whose block range overlaps a forcibly-excited region are
    suppressed: an excited pattern must not be re-detected within the tick.
    """
    found = []
    for offset in range(len(layer) - mask.span + 1):
        if not mask.matches_at(layer.bits, offset):
            continue
        if layer.is_excited_range(offset, offset + mask.span - 1):
            continue
        found.append(offset)
    return found


def cover_layer(layer: Layer, masks: Sequence[tuple[str, Mask]]) -> list[Block]:
    """Greedy left-to-right covering of the layer by the given masks.

    At each position the matching mask with the largest span wins; span ties
    go to the mask listed first. Uncovered points are permitted. Excited
    regions are never covered.
    """
    blocks: list[Block] = []
    pos = 0
    n = len(layer)
    while pos < n:
        best: tuple[str, Mask] | None = None
        for mask_id, mask in masks:
            if not mask.matches_at(layer.bits, pos):
                continue
            if layer.is_excited_range(pos, pos + mask.span - 1):
                continue
            if best is None or mask.span > best[1].span:
                best = (mask_id, mask)
        if best is None:
            pos += 1
            continue
        mask_id, mask = best
        blocks.append(Block(pos, pos + mask.span - 1, mask_id))
        pos += mask.span
    return blocks


def read_block(layer: Layer, block: Block) -> tuple[Bit, ...]:
    """The contiguous bits of the block, begin..end inclusive."""
    if block.end >= len(layer):
        raise AddressError(
            f"block ({block.begin}, {block.end}) outside layer of length {len(layer)}"
        )
    return layer.bits[block.begin : block.end + 1]


def excite_mask(
    layer: Layer,
    mask: Mask,
    offset: int,
    blocks: Sequence[Block] = (),
) -> tuple[Layer, tuple[int, int]]:
    """Forcibly write the mask's constants at ``offset`` and record the region.

    The recorded region is excluded from all later detection on this layer
    (until the per-tick bookkeeping is cleared). ``blocks`` are ranges the
    caller already considers occupied; overlapping any of them, or a prior
    excited region, is an error.
    """
    end = offset + mask.span - 1
    if offset < 0 or end >= len(layer):
        raise AddressError(f"excitation at {offset} (span {mask.span}) outside layer")
    if layer.is_excited_range(offset, end):
        raise OverlapError(f"region ({offset}, {end}) intersects an excited region")
    for block in blocks:
        if block.overlaps_range(offset, end):
            raise OverlapError(f"region ({offset}, {end}) intersects block {block}")
    bits = list(layer.bits)
    for i, value in mask.entries:
        bits[offset + i] = value
    regions = tuple(sorted(layer.excited + ((offset, end),)))
    return Layer(tuple(bits), regions), (offset, end)


def assert_disjoint(blocks: Sequence[Block]) -> None:
    """Raise if any two blocks intersect (engine-wide invariant)."""
    ordered = sorted(blocks, key=lambda b: b.begin)
    for left, right in zip(ordered, ordered[1:]):
        if left.overlaps(right):
            raise OverlapError(f"blocks {left} and {right} intersect")
