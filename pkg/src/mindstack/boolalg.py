"""Canonical XOR-of-AND-monomials form for all predicates, plus bit serialization.

Every adjective and verb is a multilinear polynomial over GF(2): a set of
monomials (subsets of variables) combined by XOR, the empty monomial being
the constant 1. The representation is canonical, so two predicates compute
the same Boolean function exactly when their monomial sets are equal.

Variables are tagged pairs so quality arguments and raw block-bit arguments
can share one universe:

    ("b", offset)   -- a bit read from the owning block at ``offset``
    ("q", quality)  -- a quality produced by some adjective

The serialized forms (see docs/formats.md) use fixed 16-bit integer fields
and a monomial-presence bitmap of 2^k bits for a k-variable predicate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ArgumentError, DecodeError

Var = tuple[str, int]

INT_WIDTH = 16
_MAX_INT = (1 << INT_WIDTH) - 1
MAX_POLY_VARS = 16

__all__ = [
    "AdjectivePredicate",
    "INT_WIDTH",
    "MAX_POLY_VARS",
    "Var",
    "VerbPredicate",
    "ZhegalkinPoly",
    "and_poly",
    "bit_var",
    "close_under",
    "deserialize_predicate",
    "eval_poly",
    "from_truth_table",
    "poly_truth_table",
    "quality_var",
    "serialize_adjective",
    "serialize_verb",
    "xor_poly",
]


def bit_var(offset: int) -> Var:
    return ("b", offset)


def quality_var(quality: int) -> Var:
    return ("q", quality)


@dataclass(frozen=True)
class ZhegalkinPoly:
    """Canonical multilinear polynomial over GF(2).

    ``variables`` is the declared universe (sorted); ``monomials`` are
    frozensets of variables, the empty set standing for the constant 1.
    """

    variables: tuple[Var, ...]
    monomials: frozenset[frozenset[Var]]

    def __init__(
        self,
        variables: Iterable[Var],
        monomials: Iterable[Iterable[Var]],
    ):
        universe = tuple(sorted(set(variables)))
        canon = frozenset(frozenset(m) for m in monomials)
        declared = set(universe)
        for monomial in canon:
            stray = set(monomial) - declared
            if stray:
                raise ArgumentError(f"monomial uses undeclared variables {sorted(stray)}")
        object.__setattr__(self, "variables", universe)
        object.__setattr__(self, "monomials", canon)

    @classmethod
    def constant(cls, value: int, variables: Iterable[Var] = ()) -> "ZhegalkinPoly":
        return cls(variables, [frozenset()] if value else [])

    @classmethod
    def identity(cls, var: Var) -> "ZhegalkinPoly":
        """The polynomial that just reads one variable."""
        return cls([var], [frozenset([var])])

    def is_constant(self) -> bool:
        return all(not m for m in self.monomials)

    def constant_value(self) -> int:
        if not self.is_constant():
            raise ArgumentError("polynomial is not constant")
        return 1 if frozenset() in self.monomials else 0

    def used_variables(self) -> frozenset[Var]:
        """Variables actually appearing in some monomial."""
        out: set[Var] = set()
        for m in self.monomials:
            out |= m
        return frozenset(out)

    def bit_offsets(self) -> tuple[int, ...]:
        return tuple(sorted(i for tag, i in self.used_variables() if tag == "b"))

    def quality_args(self) -> tuple[int, ...]:
        return tuple(sorted(i for tag, i in self.used_variables() if tag == "q"))


def eval_poly(poly: ZhegalkinPoly, assignment: Mapping[Var, int]) -> int:
    """XOR over monomials of the AND of each monomial's variables."""
    missing = set(poly.variables) - set(assignment)
    if missing:
        raise ArgumentError(f"assignment missing variables {sorted(missing)}")
    acc = 0
    for monomial in poly.monomials:
        term = 1
        for var in monomial:
            if not assignment[var]:
                term = 0
                break
        acc ^= term
    return acc


def xor_poly(p: ZhegalkinPoly, q: ZhegalkinPoly) -> ZhegalkinPoly:
    """Pointwise XOR: symmetric difference of the monomial sets."""
    return ZhegalkinPoly(p.variables + q.variables, p.monomials ^ q.monomials)


def and_poly(p: ZhegalkinPoly, q: ZhegalkinPoly) -> ZhegalkinPoly:
    """Pointwise AND: pairwise monomial unions, XOR-reduced."""
    counts: dict[frozenset[Var], int] = {}
    for a in p.monomials:
        for b in q.monomials:
            m = a | b
            counts[m] = counts.get(m, 0) + 1
    kept = [m for m, c in counts.items() if c % 2]
    return ZhegalkinPoly(p.variables + q.variables, kept)


def from_truth_table(
    table: Sequence[int] | str,
    variables: Sequence[Var] | None = None,
) -> ZhegalkinPoly:
    """Unique polynomial matching a truth table of length 2^n.

    Row ``i`` of the table is the function value where variable ``j`` holds
    bit ``j`` of ``i``. Defaults to bit variables 0..n-1.
    """
    bits = [int(c) for c in table]
    n = max(len(bits) - 1, 0).bit_length()
    if len(bits) == 0 or len(bits) != 1 << n:
        raise ArgumentError(f"table length {len(bits)} is not a power of two")
    if any(b not in (0, 1) for b in bits):
        raise ArgumentError("table entries must be 0 or 1")
    if variables is None:
        variables = [bit_var(i) for i in range(n)]
    else:
        variables = list(variables)
        if len(variables) != n:
            raise ArgumentError(f"need {n} variables for a table of length {len(bits)}")
    # In-place Moebius transform: coefficient of S = XOR of values over subsets of S.
    coeff = bits[:]
    for j in range(n):
        step = 1 << j
        for i in range(len(coeff)):
            if i & step:
                coeff[i] ^= coeff[i ^ step]
    monomials = [
        frozenset(variables[j] for j in range(n) if i & (1 << j))
        for i, c in enumerate(coeff)
        if c
    ]
    return ZhegalkinPoly(variables, monomials)


def poly_truth_table(poly: ZhegalkinPoly) -> str:
    """Truth table of the polynomial over its declared variables."""
    n = len(poly.variables)
    out = []
    for i in range(1 << n):
        assignment = {v: (i >> j) & 1 for j, v in enumerate(poly.variables)}
        out.append(str(eval_poly(poly, assignment)))
    return "".join(out)


def close_under(polys: Iterable[ZhegalkinPoly], op: str) -> frozenset[ZhegalkinPoly]:
    """Fixed point of one operation (``"XOR"`` or ``"AND"``) over a predicate set.

    Finite because at most 2^(2^n) functions exist over the combined
    variables; used by the packer's termination argument.
    """
    combine = xor_poly if op == "XOR" else and_poly
    seen = set(polys)
    frontier = list(seen)
    while frontier:
        fresh = []
        for a in list(seen):
            for b in frontier:
                for c in (combine(a, b), combine(b, a)):
                    if c not in seen:
                        seen.add(c)
                        fresh.append(c)
        frontier = fresh
    return frozenset(seen)


@dataclass(frozen=True)
class AdjectivePredicate:
    """Quality producer: a polynomial over block-bit offsets only."""

    poly: ZhegalkinPoly
    output: int

    def __post_init__(self) -> None:
        bad = [v for v in self.poly.variables if v[0] != "b"]
        if bad:
            raise ArgumentError(f"adjective polynomial may only read bits, got {bad}")
        if self.output < 0:
            raise ArgumentError("quality identifier must be >= 0")

    def offsets(self) -> tuple[int, ...]:
        return tuple(i for _, i in self.poly.variables)


@dataclass(frozen=True)
class VerbPredicate:
    """Action producer: a polynomial over qualities and block bits, written at one offset."""

    poly: ZhegalkinPoly
    action_point: int

    def __post_init__(self) -> None:
        if self.action_point < 0:
            raise ArgumentError("action point must be >= 0")

    def quality_args(self) -> tuple[int, ...]:
        return tuple(i for tag, i in self.poly.variables if tag == "q")

    def bit_args(self) -> tuple[int, ...]:
        return tuple(i for tag, i in self.poly.variables if tag == "b")


# --- bit-string serialization ---------------------------------------------


def _encode_int(value: int) -> str:
    if not 0 <= value <= _MAX_INT:
        raise ArgumentError(f"integer field out of range: {value}")
    return format(value, f"0{INT_WIDTH}b")


class _BitReader:
    def __init__(self, bits: str):
        if any(c not in "01" for c in bits):
            raise DecodeError("bit string may contain only '0'/'1'")
        self.bits = bits
        self.pos = 0

    def take(self, n: int) -> str:
        if self.pos + n > len(self.bits):
            raise DecodeError(
                f"truncated record: wanted {n} bits at {self.pos}, have {len(self.bits)}"
            )
        chunk = self.bits[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def take_int(self) -> int:
        return int(self.take(INT_WIDTH), 2)

    def expect_end(self) -> None:
        if self.pos != len(self.bits):
            raise DecodeError(f"{len(self.bits) - self.pos} trailing bits after record")


def _encode_monomials(poly: ZhegalkinPoly, order: Sequence[Var]) -> str:
    if len(order) > MAX_POLY_VARS:
        raise ArgumentError(f"predicate exceeds {MAX_POLY_VARS} variables")
    index = {v: i for i, v in enumerate(order)}
    bitmap = ["0"] * (1 << len(order))
    for monomial in poly.monomials:
        bitmap[sum(1 << index[v] for v in monomial)] = "1"
    return "".join(bitmap)


def _decode_monomials(reader: _BitReader, order: Sequence[Var]) -> ZhegalkinPoly:
    if len(order) > MAX_POLY_VARS:
        raise DecodeError(f"predicate exceeds {MAX_POLY_VARS} variables")
    bitmap = reader.take(1 << len(order))
    monomials = [
        frozenset(order[j] for j in range(len(order)) if i & (1 << j))
        for i, c in enumerate(bitmap)
        if c == "1"
    ]
    return ZhegalkinPoly(order, monomials)


def serialize_adjective(adjective: AdjectivePredicate) -> str:
    """Field order: argument offsets, monomial bitmap, output quality id."""
    offsets = adjective.offsets()
    out = [_encode_int(len(offsets))]
    out += [_encode_int(i) for i in offsets]
    out.append(_encode_monomials(adjective.poly, adjective.poly.variables))
    out.append(_encode_int(adjective.output))
    return "".join(out)


def serialize_verb(verb: VerbPredicate) -> str:
    """Field order: quality arguments, bit arguments, monomial bitmap, action point."""
    qualities = verb.quality_args()
    offsets = verb.bit_args()
    out = [_encode_int(len(qualities))]
    out += [_encode_int(q) for q in qualities]
    out.append(_encode_int(len(offsets)))
    out += [_encode_int(i) for i in offsets]
    order = [quality_var(q) for q in qualities] + [bit_var(i) for i in offsets]
    out.append(_encode_monomials(verb.poly, order))
    out.append(_encode_int(verb.action_point))
    return "".join(out)


def _decode_adjective(reader: _BitReader) -> AdjectivePredicate:
    argc = reader.take_int()
    offsets = [reader.take_int() for _ in range(argc)]
    if sorted(set(offsets)) != offsets:
        raise DecodeError("adjective offsets must be strictly ascending")
    poly = _decode_monomials(reader, [bit_var(i) for i in offsets])
    output = reader.take_int()
    return AdjectivePredicate(poly, output)


def _decode_verb(reader: _BitReader) -> VerbPredicate:
    qargc = reader.take_int()
    qualities = [reader.take_int() for _ in range(qargc)]
    if sorted(set(qualities)) != qualities:
        raise DecodeError("verb quality arguments must be strictly ascending")
    bargc = reader.take_int()
    offsets = [reader.take_int() for _ in range(bargc)]
    if sorted(set(offsets)) != offsets:
        raise DecodeError("verb bit arguments must be strictly ascending")
    order = [quality_var(q) for q in qualities] + [bit_var(i) for i in offsets]
    poly = _decode_monomials(reader, order)
    action_point = reader.take_int()
    return VerbPredicate(poly, action_point)


def deserialize_predicate(bits: str, kind: str) -> AdjectivePredicate | VerbPredicate:
    """Parse a serialized predicate; raises :class:`DecodeError` on bad input."""
    reader = _BitReader(bits)
    if kind == "adjective":
        predicate: AdjectivePredicate | VerbPredicate = _decode_adjective(reader)
    elif kind == "verb":
        predicate = _decode_verb(reader)
    else:
        raise ArgumentError(f"kind must be 'adjective' or 'verb', got {kind!r}")
    reader.expect_end()
    return predicate
