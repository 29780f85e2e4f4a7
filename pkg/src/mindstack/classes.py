"""Nouns, simple classes, the six class operations, and the class<->bits mapping.

A simple class bundles a noun (mask + declared qualities and action points)
with adjective and verb predicates. Classes are persistent values: every
operation returns a new class and appends to its derivation record, which is
what the bit mapping serializes. Replaying a record from the basis rebuilds
the exact class, so encoding is bijective on derivable classes and stable
across runs and seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from .bitspace import Mask
from .boolalg import (
    INT_WIDTH,
    AdjectivePredicate,
    VerbPredicate,
    ZhegalkinPoly,
    and_poly,
    bit_var,
    deserialize_predicate,
    quality_var,
    serialize_adjective,
    serialize_verb,
    xor_poly,
    _BitReader,
    _encode_int,
)
from .errors import AmbiguityError, ArgumentError, DecodeError, EngineError, NotEncodableError

__all__ = [
    "Basis",
    "ClassStore",
    "DerivationOp",
    "DerivationRecord",
    "Noun",
    "SimpleClass",
    "StoreView",
    "apply_derivation_op",
    "apply_predicate_op",
    "compose_verb_at",
    "link_quality_verb",
    "load_basis",
    "noun_argument",
    "noun_specialize",
    "phi_decode",
    "phi_encode",
    "phi_record_length",
    "resolve_action_point",
    "save_basis",
    "structural_key",
]

# Opcode table for derivation records. The first six are the class
# operations proper; the *_at forms pin an explicit action point where the
# automatic resolution is ambiguous (the data side of multivaluency), and
# verb_link records a correlation-derived quality->action verb.
_OPCODES = (
    "adj_xor",
    "adj_and",
    "verb_xor",
    "verb_and",
    "specialize",
    "argument",
    "verb_xor_at",
    "verb_and_at",
    "verb_link",
)
_OPCODE_BITS = 4
_PREDICATE_OPS = frozenset(_OPCODES[:4])
_ARG_COUNT = {
    "adj_xor": 2,
    "adj_and": 2,
    "verb_xor": 2,
    "verb_and": 2,
    "specialize": 1,
    "argument": 1,
    "verb_xor_at": 3,
    "verb_and_at": 3,
    "verb_link": 2,
}


@dataclass(frozen=True)
class DerivationOp:
    """One step of a derivation: opcode plus integer payload.

    ``provenance`` is 0 for memory-driven steps and 1 for steps requested
    over the internal-speech route.
    """

    code: str
    args: tuple[int, ...]
    provenance: int = 0

    def __post_init__(self) -> None:
        if self.code not in _OPCODES:
            raise ArgumentError(f"unknown derivation opcode {self.code!r}")
        want = _ARG_COUNT[self.code]
        if len(self.args) != want:
            raise ArgumentError(f"{self.code} takes {want} arguments, got {self.args}")
        if self.provenance not in (0, 1):
            raise ArgumentError("provenance must be 0 or 1")


@dataclass(frozen=True)
class DerivationRecord:
    basis_index: int
    ops: tuple[DerivationOp, ...] = ()

    def extended(self, op: DerivationOp) -> "DerivationRecord":
        return DerivationRecord(self.basis_index, self.ops + (op,))


@dataclass(frozen=True)
class Noun:
    """Mask footprint plus the declared quality and action-point lists."""

    mask: Mask
    qualities: tuple[int, ...] = ()
    actions: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.qualities)) != len(self.qualities):
            raise ArgumentError("duplicate quality identifiers")
        if len(set(self.actions)) != len(self.actions):
            raise ArgumentError("duplicate action points")
        for offset in self.actions:
            if not 0 <= offset < self.mask.span:
                raise ArgumentError(f"action point {offset} outside mask span {self.mask.span}")


@dataclass(frozen=True)
class SimpleClass:
    """Noun plus predicate lists; ``origin`` is the replayable derivation."""

    noun: Noun
    adjectives: tuple[AdjectivePredicate, ...] = ()
    verbs: tuple[VerbPredicate, ...] = ()
    origin: DerivationRecord | None = None

    def __post_init__(self) -> None:
        span = self.noun.mask.span
        declared_q = set(self.noun.qualities)
        for a in self.adjectives:
            if a.output not in declared_q:
                raise ArgumentError(f"adjective output {a.output} not declared by noun")
            for offset in a.offsets():
                if not 0 <= offset < span:
                    raise ArgumentError(f"adjective reads offset {offset} outside span {span}")
        # Verb quality arguments may reference foreign qualities (resolved
        # against context objects at run time), so only the bit side and the
        # action point are checked here.
        for v in self.verbs:
            if v.action_point not in self.noun.actions:
                raise ArgumentError(f"verb action point {v.action_point} not declared by noun")
            for offset in v.bit_args():
                if not 0 <= offset < span:
                    raise ArgumentError(f"verb reads offset {offset} outside span {span}")

    def fresh_quality(self) -> int:
        return max(self.noun.qualities, default=-1) + 1

    def adjective_by_output(self, quality: int) -> AdjectivePredicate | None:
        for a in self.adjectives:
            if a.output == quality:
                return a
        return None


def structural_key(cls: SimpleClass):
    """Observable structure of a class, independent of how it was derived."""
    return (cls.noun, cls.adjectives, cls.verbs)


def local_id_for(base_id: str, record_bits: str) -> str:
    """Deterministic id for a local class: ancestor id plus a record digest."""
    import hashlib

    digest = hashlib.sha1(record_bits.encode("ascii")).hexdigest()[:8]
    return f"{base_id}~{digest}"


@dataclass(frozen=True)
class Basis:
    """Fixed, run-invariant ordered class list; the anchor of every derivation."""

    classes: tuple[SimpleClass, ...]

    def __init__(self, classes: Iterable[SimpleClass]):
        anchored = tuple(
            replace(c, origin=DerivationRecord(i)) for i, c in enumerate(classes)
        )
        if not anchored:
            raise ArgumentError("basis must hold at least one class")
        object.__setattr__(self, "classes", anchored)

    def __len__(self) -> int:
        return len(self.classes)

    def __getitem__(self, index: int) -> SimpleClass:
        return self.classes[index]


def resolve_action_point(cls: SimpleClass, active_adjectives: Iterable[int]) -> int:
    """Smallest offset read by every active adjective and by no other.

    This is the disambiguation rule for new verb action points: the written
    point must change exactly the active qualities.
    """
    active = sorted(set(active_adjectives))
    if not active:
        raise ArgumentError("need at least one active adjective")
    for i in active:
        if not 0 <= i < len(cls.adjectives):
            raise ArgumentError(f"adjective index {i} out of range")
    active_set = set(active)
    arg_sets = [set(a.offsets()) for a in cls.adjectives]
    for offset in range(cls.noun.mask.span):
        if all(offset in arg_sets[i] for i in active):
            others = (
                offset in arg_sets[i] for i in range(len(cls.adjectives)) if i not in active_set
            )
            if not any(others):
                return offset
    raise AmbiguityError(
        f"no offset is read by exactly the active adjectives {active}"
    )


def _active_for_composition(cls: SimpleClass, left: VerbPredicate, right: VerbPredicate) -> list[int]:
    """Adjectives whose qualities an operand's action point changes."""
    points = {left.action_point, right.action_point}
    return [
        i for i, a in enumerate(cls.adjectives) if points & set(a.offsets())
    ]


def apply_predicate_op(
    cls: SimpleClass,
    target: str,
    op: str,
    l: int,
    m: int,
    provenance: int = 0,
) -> SimpleClass:
    """Append the combination of two predicates (XOR or AND) to the class.

    For verbs the new action point is resolved against the adjectives the
    operand verbs act on; without a unique such point the operation is
    ambiguous and refused.
    """
    if target not in ("verb", "adjective"):
        raise ArgumentError(f"target must be 'verb' or 'adjective', got {target!r}")
    if op not in ("XOR", "AND"):
        raise ArgumentError(f"op must be 'XOR' or 'AND', got {op!r}")
    combine = xor_poly if op == "XOR" else and_poly
    code = f"{'adj' if target == 'adjective' else 'verb'}_{op.lower()}"
    record = None if cls.origin is None else cls.origin.extended(
        DerivationOp(code, (l, m), provenance)
    )
    if target == "adjective":
        pool = cls.adjectives
        if not (0 <= l < len(pool) and 0 <= m < len(pool)):
            raise ArgumentError(f"adjective indices ({l}, {m}) out of range")
        quality = cls.fresh_quality()
        new_adj = AdjectivePredicate(combine(pool[l].poly, pool[m].poly), quality)
        return replace(
            cls,
            noun=replace(cls.noun, qualities=cls.noun.qualities + (quality,)),
            adjectives=cls.adjectives + (new_adj,),
            origin=record,
        )
    pool = cls.verbs
    if not (0 <= l < len(pool) and 0 <= m < len(pool)):
        raise ArgumentError(f"verb indices ({l}, {m}) out of range")
    active = _active_for_composition(cls, pool[l], pool[m])
    if not active:
        raise AmbiguityError("no adjective reads either operand's action point")
    point = resolve_action_point(cls, active)
    new_verb = VerbPredicate(combine(pool[l].poly, pool[m].poly), point)
    actions = cls.noun.actions if point in cls.noun.actions else cls.noun.actions + (point,)
    return replace(
        cls,
        noun=replace(cls.noun, actions=actions),
        verbs=cls.verbs + (new_verb,),
        origin=record,
    )


def compose_verb_at(
    cls: SimpleClass,
    op: str,
    l: int,
    m: int,
    point: int,
    provenance: int = 0,
) -> SimpleClass:
    """Combine two verbs with an explicitly chosen action point.

    Used when the automatic resolution is ambiguous: the caller picks one of
    the feasible points and the choice is recorded, so replay is exact.
    """
    if op not in ("XOR", "AND"):
        raise ArgumentError(f"op must be 'XOR' or 'AND', got {op!r}")
    if not (0 <= l < len(cls.verbs) and 0 <= m < len(cls.verbs)):
        raise ArgumentError(f"verb indices ({l}, {m}) out of range")
    if not 0 <= point < cls.noun.mask.span:
        raise ArgumentError(f"action point {point} outside mask span")
    combine = xor_poly if op == "XOR" else and_poly
    new_verb = VerbPredicate(combine(cls.verbs[l].poly, cls.verbs[m].poly), point)
    record = None if cls.origin is None else cls.origin.extended(
        DerivationOp(f"verb_{op.lower()}_at", (l, m, point), provenance)
    )
    actions = cls.noun.actions if point in cls.noun.actions else cls.noun.actions + (point,)
    return replace(
        cls,
        noun=replace(cls.noun, actions=actions),
        verbs=cls.verbs + (new_verb,),
        origin=record,
    )


def link_quality_verb(
    cls: SimpleClass,
    quality: int,
    point: int,
    provenance: int = 0,
) -> SimpleClass:
    """Add a verb that copies one quality to one block offset.

    The correlation fallback: a quality observed to always agree with a
    block bit becomes the verb connecting them.
    """
    if not 0 <= point < cls.noun.mask.span:
        raise ArgumentError(f"action point {point} outside mask span")
    new_verb = VerbPredicate(ZhegalkinPoly.identity(quality_var(quality)), point)
    record = None if cls.origin is None else cls.origin.extended(
        DerivationOp("verb_link", (quality, point), provenance)
    )
    actions = cls.noun.actions if point in cls.noun.actions else cls.noun.actions + (point,)
    return replace(
        cls,
        noun=replace(cls.noun, actions=actions),
        verbs=cls.verbs + (new_verb,),
        origin=record,
    )


def noun_specialize(cls: SimpleClass, i: int, provenance: int = 0) -> SimpleClass:
    """Turn the mask constant at ``i`` into a wildcard read by a new adjective."""
    mask = cls.noun.mask.without(i)  # raises if i carries no constant
    quality = cls.fresh_quality()
    new_adj = AdjectivePredicate(ZhegalkinPoly.identity(bit_var(i)), quality)
    record = None if cls.origin is None else cls.origin.extended(
        DerivationOp("specialize", (i,), provenance)
    )
    return replace(
        cls,
        noun=replace(cls.noun, mask=mask, qualities=cls.noun.qualities + (quality,)),
        adjectives=cls.adjectives + (new_adj,),
        origin=record,
    )


def noun_argument(cls: SimpleClass, i: int, provenance: int = 0) -> SimpleClass:
    """Turn the mask constant at ``i`` into a verb that writes that constant."""
    previous = cls.noun.mask.as_dict().get(i)
    mask = cls.noun.mask.without(i)
    new_verb = VerbPredicate(ZhegalkinPoly.constant(previous), i)
    actions = cls.noun.actions if i in cls.noun.actions else cls.noun.actions + (i,)
    record = None if cls.origin is None else cls.origin.extended(
        DerivationOp("argument", (i,), provenance)
    )
    return replace(
        cls,
        noun=replace(cls.noun, mask=mask, actions=actions),
        verbs=cls.verbs + (new_verb,),
        origin=record,
    )


def apply_derivation_op(cls: SimpleClass, op: DerivationOp) -> SimpleClass:
    """Replay one recorded step."""
    if op.code == "specialize":
        return noun_specialize(cls, op.args[0], op.provenance)
    if op.code == "argument":
        return noun_argument(cls, op.args[0], op.provenance)
    if op.code == "verb_link":
        return link_quality_verb(cls, op.args[0], op.args[1], op.provenance)
    if op.code.endswith("_at"):
        kind = "XOR" if "xor" in op.code else "AND"
        return compose_verb_at(cls, kind, op.args[0], op.args[1], op.args[2], op.provenance)
    target = "adjective" if op.code.startswith("adj") else "verb"
    kind = "XOR" if op.code.endswith("xor") else "AND"
    return apply_predicate_op(cls, target, kind, op.args[0], op.args[1], op.provenance)


# --- class <-> bit-string mapping ------------------------------------------


def phi_encode(cls: SimpleClass, basis: Basis) -> str:
    """Serialize the class's derivation record: basis index plus ops.

    The encoding is a pure function of the record, so it is identical across
    runs and seeds, and distinct derivations give distinct bit strings.
    """
    if cls.origin is None:
        raise NotEncodableError("class carries no derivation record")
    if not 0 <= cls.origin.basis_index < len(basis):
        raise NotEncodableError(f"basis index {cls.origin.basis_index} outside basis")
    out = [_encode_int(cls.origin.basis_index), _encode_int(len(cls.origin.ops))]
    for op in cls.origin.ops:
        out.append(format(_OPCODES.index(op.code), f"0{_OPCODE_BITS}b"))
        out.append(str(op.provenance))
        out.extend(_encode_int(a) for a in op.args)
    return "".join(out)


def phi_decode(bits: str, basis: Basis) -> SimpleClass:
    """Rebuild a class by replaying its encoded derivation from the basis."""
    reader = _BitReader(bits)
    index = reader.take_int()
    if index >= len(basis):
        raise DecodeError(f"basis index {index} outside basis of size {len(basis)}")
    count = reader.take_int()
    ops = []
    for _ in range(count):
        code_bits = reader.take(_OPCODE_BITS)
        code_index = int(code_bits, 2)
        if code_index >= len(_OPCODES):
            raise DecodeError(f"bad opcode {code_bits}")
        code = _OPCODES[code_index]
        provenance = int(reader.take(1))
        argc = _ARG_COUNT[code]
        ops.append(DerivationOp(code, tuple(reader.take_int() for _ in range(argc)), provenance))
    reader.expect_end()
    cls = basis[index]
    for op in ops:
        try:
            cls = apply_derivation_op(cls, op)
        except EngineError as exc:
            raise DecodeError(f"derivation replay failed: {exc}") from exc
    return cls


def phi_record_length(bits: str) -> int:
    """Length in bits of the record at the head of ``bits`` (for embedded reads)."""
    reader = _BitReader(bits)
    reader.take_int()
    count = reader.take_int()
    for _ in range(count):
        code_index = int(reader.take(_OPCODE_BITS), 2)
        if code_index >= len(_OPCODES):
            raise DecodeError("bad opcode")
        reader.take(1)
        reader.take(INT_WIDTH * _ARG_COUNT[_OPCODES[code_index]])
    return reader.pos


# --- class store ------------------------------------------------------------


class ClassStore:
    """Ordered id -> class mapping; the global, run-invariant class set.

    Construction re-anchors every class as basis element ``i`` in listing
    order, so the store and the bit mapping always agree. Context-local
    classes never enter the store; they live in overlays created by
    :meth:`with_locals`.
    """

    def __init__(
        self,
        classes: Mapping[str, SimpleClass] | Iterable[tuple[str, SimpleClass]],
        sentences: Mapping[str, Sequence[str]] | None = None,
    ):
        ordered = dict(classes)
        self.basis = Basis(ordered.values())
        self._classes: dict[str, SimpleClass] = {
            cid: self.basis[i] for i, cid in enumerate(ordered)
        }
        self.sentences: dict[str, tuple[str, ...]] = {
            k: tuple(v) for k, v in (sentences or {}).items()
        }
        for upper, constituents in self.sentences.items():
            if upper not in self._classes:
                raise ArgumentError(f"sentence for unknown class {upper!r}")
            for cid in constituents:
                if cid not in self._classes:
                    raise ArgumentError(f"sentence constituent {cid!r} unknown")

    @classmethod
    def from_basis(cls, basis: Basis, sentences: Mapping[str, Sequence[str]] | None = None):
        return cls({f"C{i}": c for i, c in enumerate(basis.classes)}, sentences)

    def id_of_basis_index(self, index: int) -> str:
        return list(self._classes)[index]

    def __contains__(self, class_id: str) -> bool:
        return class_id in self._classes

    def __iter__(self) -> Iterator[str]:
        return iter(self._classes)

    def __len__(self) -> int:
        return len(self._classes)

    def get(self, class_id: str) -> SimpleClass:
        try:
            return self._classes[class_id]
        except KeyError:
            raise ArgumentError(f"unknown class id {class_id!r}") from None

    def items(self) -> Iterator[tuple[str, SimpleClass]]:
        return iter(self._classes.items())

    def with_locals(self, locals_: Mapping[str, SimpleClass] | Iterable[tuple[str, SimpleClass]]):
        return StoreView(self, dict(locals_))


@dataclass
class StoreView:
    """A global store seen through context-local classes.

    A local whose mask equals a global's mask shadows that global: detection
    resolves the shared mask to the local id. Locals with novel masks are
    appended after the globals.
    """

    base: ClassStore
    locals_: dict[str, SimpleClass] = field(default_factory=dict)

    def get(self, class_id: str) -> SimpleClass:
        if class_id in self.locals_:
            return self.locals_[class_id]
        return self.base.get(class_id)

    def __contains__(self, class_id: str) -> bool:
        return class_id in self.locals_ or class_id in self.base

    def effective_masks(self) -> list[tuple[str, Mask]]:
        shadow: dict[Mask, str] = {}
        for local_id, local_cls in self.locals_.items():
            shadow.setdefault(local_cls.noun.mask, local_id)
        out: list[tuple[str, Mask]] = []
        used_locals: set[str] = set()
        for global_id, global_cls in self.base.items():
            mask = global_cls.noun.mask
            local_id = shadow.get(mask)
            if local_id is not None:
                out.append((local_id, mask))
                used_locals.add(local_id)
            else:
                out.append((global_id, mask))
        for local_id, local_cls in self.locals_.items():
            if local_id not in used_locals:
                out.append((local_id, local_cls.noun.mask))
        return out

    def sentence_for(self, class_id: str) -> tuple[str, ...] | None:
        return self.base.sentences.get(class_id)


# --- basis definition file ---------------------------------------------------


def save_basis(store: ClassStore, path) -> None:
    """Write the store as a basis definition file (one class per block)."""
    lines = []
    for class_id, cls in store.items():
        lines.append(f"class {class_id}")
        mask_entries = " ".join(f"{i}:{v}" for i, v in cls.noun.mask.entries)
        lines.append(f"mask {mask_entries} width {cls.noun.mask.width}".strip())
        if cls.noun.qualities:
            lines.append("qualities " + " ".join(str(q) for q in cls.noun.qualities))
        if cls.noun.actions:
            lines.append("actions " + " ".join(str(a) for a in cls.noun.actions))
        for adj in cls.adjectives:
            lines.append("adjective " + serialize_adjective(adj))
        for verb in cls.verbs:
            lines.append("verb " + serialize_verb(verb))
        sentence = store.sentences.get(class_id)
        if sentence:
            lines.append("sentence " + " ".join(sentence))
        lines.append("end")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_basis(path) -> ClassStore:
    """Parse a basis definition file into a global class store."""
    blocks: list[tuple[str, SimpleClass]] = []
    sentences: dict[str, tuple[str, ...]] = {}
    current_id: str | None = None
    mask: Mask | None = None
    qualities: tuple[int, ...] = ()
    actions: tuple[int, ...] = ()
    adjectives: list[AdjectivePredicate] = []
    verbs: list[VerbPredicate] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            word, _, rest = line.partition(" ")
            try:
                if word == "class":
                    if current_id is not None:
                        raise ArgumentError("nested class block")
                    current_id = rest.strip()
                    mask, qualities, actions = None, (), ()
                    adjectives, verbs = [], []
                elif current_id is None:
                    raise ArgumentError(f"directive {word!r} outside a class block")
                elif word == "mask":
                    parts = rest.split()
                    width = None
                    if "width" in parts:
                        at = parts.index("width")
                        width = int(parts[at + 1])
                        parts = parts[:at]
                    entries = {}
                    for part in parts:
                        offset, _, value = part.partition(":")
                        entries[int(offset)] = int(value)
                    mask = Mask(entries, width)
                elif word == "qualities":
                    qualities = tuple(int(t) for t in rest.split())
                elif word == "actions":
                    actions = tuple(int(t) for t in rest.split())
                elif word == "adjective":
                    adjectives.append(deserialize_predicate(rest.strip(), "adjective"))
                elif word == "verb":
                    verbs.append(deserialize_predicate(rest.strip(), "verb"))
                elif word == "sentence":
                    sentences[current_id] = tuple(rest.split())
                elif word == "end":
                    if mask is None:
                        raise ArgumentError("class block without a mask")
                    noun = Noun(mask, qualities, actions)
                    blocks.append(
                        (current_id, SimpleClass(noun, tuple(adjectives), tuple(verbs)))
                    )
                    current_id = None
                else:
                    raise ArgumentError(f"unknown directive {word!r}")
            except (ValueError, IndexError) as exc:
                raise ArgumentError(f"{path}:{lineno}: {exc}") from exc
            except EngineError as exc:
                raise ArgumentError(f"{path}:{lineno}: {exc}") from exc
    if current_id is not None:
        raise ArgumentError("unterminated class block")
    return ClassStore(dict(blocks), sentences)
