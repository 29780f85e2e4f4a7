"""Hierarchical context memory and the two packing algorithms.

Packing compresses an object's attached context into candidate rewrites of
the parent class. A candidate is valid when it can regenerate every class of
the context: for each local class the packer searches, over the profile's
three spontaneous operations only, for a derivation from that class's global
ancestor whose result is structurally identical. The search is exhaustive up
to the configured depth, so an external brute-force enumeration finds a
candidate exactly when the packer does.

Abstraction distinguishes the classes' binary representations with new
quality readers (built from single-bit reads composed by the spontaneous
adjective operation) and composes parent verbs whose argument sets do not
intersect. Detalisation first rewrites the context classes with the
spontaneous noun operation to maximize the shared prefix/suffix of their
representations, then treats only the residues.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .bitspace import Block
from .boolalg import ZhegalkinPoly, and_poly, bit_var, eval_poly, xor_poly
from .classes import (
    Basis,
    ClassStore,
    DerivationOp,
    SimpleClass,
    StoreView,
    apply_derivation_op,
    apply_predicate_op,
    compose_verb_at,
    link_quality_verb,
    phi_decode,
    phi_encode,
    structural_key,
)
from .errors import AmbiguityError, ArgumentError, EngineError
from .stack_engine import ObjectInstance

__all__ = [
    "Context",
    "DerivedAdjective",
    "MemoryTree",
    "Observation",
    "OptionProfile",
    "PackBudgets",
    "PackCandidate",
    "PackResult",
    "abstraction_pack",
    "binary_repr",
    "detalisation_pack",
    "fork_context",
    "spontaneous_ops",
    "uses_only_spontaneous",
    "validate_candidate",
]

_CONTEXT_OPTIONS = ("static", "dynamic")
_NOUN_OPTIONS = ("ratio", "irratio")
_VERB_OPTIONS = ("logic", "ethics")
_ADJECTIVE_OPTIONS = ("intuition", "sensorics")
_GENDERS = ("male", "female")


@dataclass(frozen=True)
class OptionProfile:
    """The four fixed behavior dichotomies plus gender; immutable for a run."""

    context_option: str = "static"
    noun_option: str = "ratio"
    verb_option: str = "logic"
    adjective_option: str = "intuition"
    gender: str = "male"

    def __post_init__(self) -> None:
        pairs = (
            ("context_option", self.context_option, _CONTEXT_OPTIONS),
            ("noun_option", self.noun_option, _NOUN_OPTIONS),
            ("verb_option", self.verb_option, _VERB_OPTIONS),
            ("adjective_option", self.adjective_option, _ADJECTIVE_OPTIONS),
            ("gender", self.gender, _GENDERS),
        )
        for name, value, allowed in pairs:
            if value not in allowed:
                raise ArgumentError(f"{name} must be one of {allowed}, got {value!r}")

    def canonical_name(self) -> str:
        return "-".join(
            (
                self.context_option,
                self.noun_option,
                self.verb_option,
                self.adjective_option,
                self.gender,
            )
        )

    @classmethod
    def parse(cls, name: str) -> "OptionProfile":
        parts = name.strip().split("-")
        if len(parts) == 4:
            parts.append("male")
        if len(parts) != 5:
            raise ArgumentError(f"profile name needs 4 or 5 parts, got {name!r}")
        return cls(*parts)

    @classmethod
    def all_option_combinations(cls) -> list["OptionProfile"]:
        """The 16 option variants (gender fixed to its default)."""
        out = []
        for c, n, v, a in itertools.product(
            _CONTEXT_OPTIONS, _NOUN_OPTIONS, _VERB_OPTIONS, _ADJECTIVE_OPTIONS
        ):
            out.append(cls(c, n, v, a))
        return out


def spontaneous_ops(profile: OptionProfile) -> dict[str, str]:
    """The one automatic operation per category, fixed by the profile."""
    return {
        "noun": "specialize" if profile.noun_option == "ratio" else "argument",
        "verb": "XOR" if profile.verb_option == "logic" else "AND",
        "adjective": "XOR" if profile.adjective_option == "intuition" else "AND",
    }


def spontaneous_opcodes(profile: OptionProfile) -> frozenset[str]:
    """Derivation opcodes a spontaneous (memory-driven) step may use."""
    ops = spontaneous_ops(profile)
    verb = ops["verb"].lower()
    return frozenset(
        {
            ops["noun"],
            f"verb_{verb}",
            f"verb_{verb}_at",
            "verb_link",
            f"adj_{'xor' if ops['adjective'] == 'XOR' else 'and'}",
        }
    )


def uses_only_spontaneous(ops: Iterable[DerivationOp], profile: OptionProfile) -> bool:
    """True when every memory-driven step is from the profile's spontaneous set."""
    allowed = spontaneous_opcodes(profile)
    return all(op.provenance == 1 or op.code in allowed for op in ops)


# --- context memory ----------------------------------------------------------


@dataclass(frozen=True)
class Context:
    """Level-N collection: local classes plus the objects they denote."""

    level: int
    classes: tuple[tuple[str, SimpleClass], ...] = ()
    objects: tuple[ObjectInstance, ...] = ()

    def class_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.classes)


@dataclass(frozen=True)
class Attachment:
    """An object together with its attached context."""

    obj: ObjectInstance
    context: Context


@dataclass
class MemoryTree:
    """Global store, local shadow map, and per-class context attachments.

    ``rollback_records`` keeps (patch ids, prior snapshot) pairs from memory
    fixes so a later control event can drop them; it is bookkeeping and not
    part of the state fingerprint.
    """

    store: ClassStore
    locals_: dict[str, SimpleClass] = field(default_factory=dict)
    attachments: dict[str, Attachment] = field(default_factory=dict)
    archive: dict[tuple, Attachment] = field(default_factory=dict)
    rollback_records: list = field(default_factory=list)

    def view(self) -> StoreView:
        return self.store.with_locals(dict(self.locals_))

    def snapshot(self) -> "MemoryTree":
        return MemoryTree(
            self.store,
            dict(self.locals_),
            dict(self.attachments),
            dict(self.archive),
        )

    def restore(self, snap: "MemoryTree") -> None:
        self.locals_ = dict(snap.locals_)
        self.attachments = dict(snap.attachments)
        self.archive = dict(snap.archive)

    def fingerprint(self) -> str:
        """Stable digest of the whole memory state, via the bit mapping."""
        import hashlib

        h = hashlib.sha256()
        for local_id in sorted(self.locals_):
            h.update(local_id.encode())
            h.update(binary_repr(self.locals_[local_id], self.store.basis).encode())
        for key in sorted(self.attachments):
            attachment = self.attachments[key]
            h.update(key.encode())
            for cid, cls in attachment.context.classes:
                h.update(cid.encode())
                h.update(binary_repr(cls, self.store.basis).encode())
            for obj in attachment.context.objects:
                h.update(repr((obj.class_id, obj.block.begin, obj.qualities)).encode())
        for key in sorted(self.archive, key=repr):
            h.update(repr(key).encode())
        return h.hexdigest()

    def packable(self) -> list[tuple[str, Attachment]]:
        return [
            (key, attachment)
            for key, attachment in sorted(self.attachments.items())
            if attachment.context.classes
        ]


def fork_context(
    attachment: Attachment,
    modified: ObjectInstance,
    kind: str,
    profile: OptionProfile,
) -> tuple[str, Attachment, tuple | None]:
    """Apply the context option to an object modification.

    Returns ``(disposition, new_attachment, archive_key)``. A modification of
    the profile's trigger kind ("quality" under static, "action" under
    dynamic) forks: a fresh empty context attaches and the old one is
    archived under the combination that held before the change. Any other
    modification edits in place.
    """
    if kind not in ("quality", "action"):
        raise ArgumentError(f"modification kind must be 'quality' or 'action', got {kind!r}")
    trigger = "quality" if profile.context_option == "static" else "action"
    if kind != trigger:
        return "in_place", Attachment(modified, attachment.context), None
    old = attachment.obj
    combination = old.qualities if kind == "quality" else old.actions
    key = (old.class_id, kind, combination)
    fresh = Context(level=attachment.context.level)
    return "forked", Attachment(modified, fresh), key


def binary_repr(cls: SimpleClass, basis: Basis) -> str:
    """The class as ones and zeros (delegates to the bit mapping)."""
    return phi_encode(cls, basis)


def absorb_tick(memory: MemoryTree, trace, profile: OptionProfile) -> dict:
    """Fold one tick's results into the memory tree.

    Decoded class records become locals (shadowing same-mask globals from
    the next tick on). Promoted upper objects gain attachments whose context
    holds their constituent classes; a re-promotion with changed qualities
    or actions goes through the context option (fork or in-place).
    """
    changes = {"installed": [], "forked": [], "attached": [], "updated": []}
    for local_id, bits in trace.phi_installs:
        if local_id not in memory.locals_:
            memory.locals_[local_id] = phi_decode(bits, memory.store.basis)
            changes["installed"].append(local_id)
    view = memory.view()
    for stage in trace.stages:
        for promo in stage["promotions"]:
            class_id = promo["class"]
            obj = ObjectInstance(
                class_id=class_id,
                block=Block(promo["begin"], promo["end"], class_id),
                layer_index=promo["layer"],
                qualities=tuple(
                    (q, 0) for q in view.get(class_id).noun.qualities
                ),
                actions=tuple(
                    (a, 0) for a in view.get(class_id).noun.actions
                ),
            )
            constituents = []
            seen = set()
            for cid in promo["constituents"]:
                if cid not in seen:
                    seen.add(cid)
                    constituents.append((cid, view.get(cid)))
            existing = memory.attachments.get(class_id)
            if existing is None:
                memory.attachments[class_id] = Attachment(
                    obj, Context(level=0, classes=tuple(constituents))
                )
                changes["attached"].append(class_id)
                continue
            kind = None
            if dict(existing.obj.qualities) != dict(obj.qualities):
                kind = "quality"
            elif dict(existing.obj.actions) != dict(obj.actions):
                kind = "action"
            if kind is None:
                memory.attachments[class_id] = Attachment(obj, existing.context)
                changes["updated"].append(class_id)
                continue
            disposition, new_attachment, key = fork_context(existing, obj, kind, profile)
            if disposition == "forked":
                memory.archive[key] = existing
                memory.attachments[class_id] = Attachment(
                    new_attachment.obj,
                    Context(level=0, classes=tuple(constituents)),
                )
                changes["forked"].append(class_id)
            else:
                memory.attachments[class_id] = new_attachment
                changes["updated"].append(class_id)
    return changes


# --- packing -----------------------------------------------------------------


@dataclass(frozen=True)
class PackBudgets:
    adjective_budget: int = 4
    adjective_depth: int = 2
    adjective_sets: int = 4
    verb_pair_budget: int = 4
    point_budget: int = 4
    gen_depth: int = 3
    max_candidates: int = 64
    correlation_min_obs: int = 2
    noun_rewrite_depth: int = 1


@dataclass(frozen=True)
class DerivedAdjective:
    """A candidate quality reader over binary-representation positions."""

    poly: ZhegalkinPoly
    derivation: tuple
    depth: int

    def positions(self) -> tuple[int, ...]:
        return tuple(sorted(i for _, i in self.poly.used_variables()))


@dataclass(frozen=True)
class Observation:
    """One sighting of the parent object plus its constituents' qualities."""

    parent_bits: str
    constituent_qualities: tuple[tuple[str, int, int], ...]


@dataclass(frozen=True)
class PackCandidate:
    candidate_id: str
    parent_id: str
    rewritten_class: SimpleClass
    new_adjectives: tuple[DerivedAdjective, ...]
    generator: tuple[tuple[str, tuple[DerivationOp, ...]], ...]
    reduced_context: Context
    flags: frozenset[str] = frozenset()
    shared_prefix: str = ""
    shared_suffix: str = ""
    residues: tuple[tuple[str, str], ...] = ()
    noun_rewrites: tuple[tuple[str, tuple[DerivationOp, ...]], ...] = ()

    def generator_map(self) -> dict[str, tuple[DerivationOp, ...]]:
        return dict(self.generator)


@dataclass
class PackResult:
    candidates: list[PackCandidate]
    step2_1_flagged: bool = False
    step3_1_used: bool = False

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self):
        return len(self.candidates)


def _repr_bit(encoding: str, position: int) -> int:
    return int(encoding[position]) if position < len(encoding) else 0


def _diff_positions(encodings: Sequence[str]) -> list[int]:
    if not encodings:
        return []
    longest = max(len(e) for e in encodings)
    out = []
    for p in range(longest):
        values = {_repr_bit(e, p) for e in encodings}
        if len(values) > 1:
            out.append(p)
    return out


def _adjective_pool(
    positions: Sequence[int], op: str, budgets: PackBudgets
) -> list[DerivedAdjective]:
    """Closure of single-bit reads under the spontaneous adjective op, BFS order."""
    combine = xor_poly if op == "XOR" else and_poly
    pool = [
        DerivedAdjective(ZhegalkinPoly.identity(bit_var(p)), ("read", p), 0)
        for p in positions
    ]
    seen = {a.poly.monomials for a in pool}
    depth = 0
    start = 0
    while depth < budgets.adjective_depth:
        end = len(pool)
        for i in range(end):
            for j in range(start, end):
                poly = combine(pool[i].poly, pool[j].poly)
                if poly.monomials in seen:
                    continue
                seen.add(poly.monomials)
                pool.append(
                    DerivedAdjective(
                        poly, (op, pool[i].derivation, pool[j].derivation), depth + 1
                    )
                )
        start = end
        depth += 1
        if len(pool) > 4 * budgets.adjective_budget * max(len(positions), 1):
            break
    return pool


def _distinguishing_sets(
    encodings: Sequence[str],
    pool: Sequence[DerivedAdjective],
    budgets: PackBudgets,
) -> list[tuple[DerivedAdjective, ...]]:
    """Adjective sets giving every distinct representation a distinct label."""
    distinct = sorted(set(encodings))
    if len(distinct) <= 1:
        return [()]
    vectors = []
    for adjective in pool:
        vec = tuple(
            _eval_on_encoding(adjective.poly, encoding) for encoding in distinct
        )
        vectors.append(vec)
    found: list[tuple[DerivedAdjective, ...]] = []
    for size in range(1, budgets.adjective_budget + 1):
        for combo in itertools.combinations(range(len(pool)), size):
            labels = {tuple(vectors[i][k] for i in combo) for k in range(len(distinct))}
            if len(labels) == len(distinct):
                found.append(tuple(pool[i] for i in combo))
                if len(found) >= budgets.adjective_sets:
                    return found
        if found:
            # prefer the smallest sets; stop once a size level succeeded
            return found
    return found


def _eval_on_encoding(poly: ZhegalkinPoly, encoding: str) -> int:
    assignment = {v: _repr_bit(encoding, v[1]) for v in poly.variables}
    return eval_poly(poly, assignment)


def _spontaneous_edges(cls: SimpleClass, profile: OptionProfile):
    """Deterministically ordered one-step successors under spontaneous ops."""
    ops = spontaneous_ops(profile)
    edges = []
    for offset, _ in cls.noun.mask.entries:
        edges.append(DerivationOp(ops["noun"], (offset,)))
    adj_code = f"adj_{'xor' if ops['adjective'] == 'XOR' else 'and'}"
    for l, m in itertools.product(range(len(cls.adjectives)), repeat=2):
        edges.append(DerivationOp(adj_code, (l, m)))
    verb_code = f"verb_{'xor' if ops['verb'] == 'XOR' else 'and'}"
    for l, m in itertools.product(range(len(cls.verbs)), repeat=2):
        edges.append(DerivationOp(verb_code, (l, m)))
    return edges


def _search_program(
    base: SimpleClass,
    target: SimpleClass,
    profile: OptionProfile,
    depth_limit: int,
) -> tuple[DerivationOp, ...] | None:
    """Breadth-first search for a spontaneous-op derivation base -> target."""
    goal = structural_key(target)
    if structural_key(base) == goal:
        return ()
    frontier: list[tuple[SimpleClass, tuple[DerivationOp, ...]]] = [(base, ())]
    visited = {structural_key(base)}
    for _ in range(depth_limit):
        nxt = []
        for cls, program in frontier:
            for op in _spontaneous_edges(cls, profile):
                try:
                    out = apply_derivation_op(cls, op)
                except EngineError:
                    continue
                key = structural_key(out)
                if key in visited:
                    continue
                visited.add(key)
                if key == goal:
                    return program + (op,)
                nxt.append((out, program + (op,)))
        frontier = nxt
        if not frontier:
            break
    return None


def _generator_programs(
    context: Context,
    store: ClassStore,
    profile: OptionProfile,
    budgets: PackBudgets,
) -> dict[str, tuple[DerivationOp, ...]] | None:
    """One spontaneous derivation per context class, or None if any is missing."""
    programs: dict[str, tuple[DerivationOp, ...]] = {}
    for local_id, cls in context.classes:
        if cls.origin is None:
            return None
        base = store.basis[cls.origin.basis_index]
        program = _search_program(base, cls, profile, budgets.gen_depth)
        if program is None:
            return None
        programs[local_id] = program
    return programs


def _disjoint_verb_pairs(cls: SimpleClass, budget: int) -> list[tuple[int, int]]:
    """Composable verb pairs whose argument sets do not intersect."""
    pairs = []
    for l, m in itertools.combinations(range(len(cls.verbs)), 2):
        left = set(cls.verbs[l].poly.used_variables())
        right = set(cls.verbs[m].poly.used_variables())
        if not (left & right):
            pairs.append((l, m))
        if len(pairs) >= budget:
            break
    return pairs


def _feasible_points(cls: SimpleClass, l: int, m: int) -> list[int]:
    """Offsets read by every adjective the operand verbs act on."""
    points = {cls.verbs[l].action_point, cls.verbs[m].action_point}
    active = [i for i, a in enumerate(cls.adjectives) if points & set(a.offsets())]
    if not active:
        return []
    out = []
    for offset in range(cls.noun.mask.span):
        if all(offset in set(cls.adjectives[i].offsets()) for i in active):
            out.append(offset)
    return out


def _verb_variants(
    parent: SimpleClass,
    profile: OptionProfile,
    budgets: PackBudgets,
) -> tuple[list[tuple[SimpleClass, frozenset[str]]], bool]:
    """Parent rewrites with composed verbs; forks on ambiguous action points.

    Returns the variant list plus whether any composition was possible at
    all (drives the correlation fallback).
    """
    vop = spontaneous_ops(profile)["verb"]
    pairs = _disjoint_verb_pairs(parent, budgets.verb_pair_budget)
    variants: list[tuple[SimpleClass, frozenset[str]]] = [(parent, frozenset())]
    composed_any = False
    for l, m in pairs:
        grown: list[tuple[SimpleClass, frozenset[str]]] = []
        for cls, flags in variants:
            try:
                grown.append((apply_predicate_op(cls, "verb", vop, l, m), flags))
                composed_any = True
            except AmbiguityError:
                points = _feasible_points(cls, l, m)[: budgets.point_budget]
                if not points:
                    grown.append((cls, flags))
                    continue
                composed_any = True
                for point in points:
                    grown.append(
                        (
                            compose_verb_at(cls, vop, l, m, point),
                            flags | {"data_multivalued"},
                        )
                    )
        variants = grown[: budgets.max_candidates]
    return variants, composed_any


def _correlated_links(
    parent: SimpleClass,
    observations: Sequence[Observation],
    budgets: PackBudgets,
) -> list[tuple[int, int]]:
    """(quality, offset) pairs that agree on every observation in the window."""
    if len(observations) < budgets.correlation_min_obs:
        return []
    span = parent.noun.mask.span
    seen_qualities = sorted(
        {(cid, qid) for obs in observations for cid, qid, _ in obs.constituent_qualities}
    )
    links = []
    for cid, qid in seen_qualities:
        for offset in range(span):
            ok = True
            for obs in observations:
                values = {
                    value
                    for c, q, value in obs.constituent_qualities
                    if (c, q) == (cid, qid)
                }
                if len(values) != 1 or offset >= len(obs.parent_bits):
                    ok = False
                    break
                if values.pop() != int(obs.parent_bits[offset]):
                    ok = False
                    break
            if ok:
                links.append((qid, offset))
    return links


def abstraction_pack(
    parent_object: ObjectInstance,
    context: Context,
    profile: OptionProfile,
    store: ClassStore,
    budgets: PackBudgets = PackBudgets(),
    observations: Sequence[Observation] = (),
    parent_class: SimpleClass | None = None,
) -> PackResult:
    """Candidate parent rewrites that regenerate the whole context.

    Adjective step: new quality readers over the differing representation
    positions, composed by the spontaneous adjective op, few enough to fit
    the budget yet distinguishing all distinct representations. Verb step:
    spontaneous compositions of argument-disjoint parent verbs; ambiguous
    action points fork the candidate per feasible point. When no composition
    is possible, qualities observed to always agree with a parent block bit
    become linking verbs (the correlation fallback).
    """
    if not context.classes:
        raise ArgumentError("context holds no local classes")
    parent = parent_class
    if parent is None:
        if parent_object.class_id not in store:
            raise ArgumentError(f"unknown parent class {parent_object.class_id!r}")
        parent = store.get(parent_object.class_id)

    result = PackResult(candidates=[])
    encodings = [binary_repr(cls, store.basis) for _, cls in context.classes]

    adjective_op = spontaneous_ops(profile)["adjective"]
    diff = _diff_positions(encodings)
    pool = _adjective_pool(diff, adjective_op, budgets)
    adjective_sets = _distinguishing_sets(encodings, pool, budgets)
    if not adjective_sets:
        result.step2_1_flagged = True
        return result

    programs = _generator_programs(context, store, profile, budgets)
    if programs is None:
        return result

    verb_variants, composed_any = _verb_variants(parent, profile, budgets)
    extra_flags: set[str] = set()
    if not composed_any and observations:
        links = _correlated_links(parent, observations, budgets)
        if links:
            result.step3_1_used = True
            extra_flags.add("step3_1")
            linked = parent
            for quality, offset in links[: budgets.verb_pair_budget]:
                linked = link_quality_verb(linked, quality, offset)
            verb_variants = [(linked, frozenset())]

    reduced = Context(level=context.level, classes=(), objects=context.objects)
    counter = 0
    for adjectives in adjective_sets:
        for rewritten, flags in verb_variants:
            if counter >= budgets.max_candidates:
                break
            result.candidates.append(
                PackCandidate(
                    candidate_id=f"{parent_object.class_id}#{counter}",
                    parent_id=parent_object.class_id,
                    rewritten_class=rewritten,
                    new_adjectives=tuple(adjectives),
                    generator=tuple(sorted(programs.items())),
                    reduced_context=reduced,
                    flags=flags | frozenset(extra_flags),
                )
            )
            counter += 1
    return result


def _common_prefix(strings: Sequence[str]) -> str:
    if not strings:
        return ""
    shortest = min(strings, key=len)
    for i, c in enumerate(shortest):
        if any(s[i] != c for s in strings):
            return shortest[:i]
    return shortest


def _common_suffix(strings: Sequence[str]) -> str:
    reversed_common = _common_prefix([s[::-1] for s in strings])
    return reversed_common[::-1]


def _per_class_noun_rewrites(
    cls: SimpleClass,
    profile: OptionProfile,
    budgets: PackBudgets,
) -> list[tuple[DerivationOp, ...]]:
    """Spontaneous-noun-op sequences (up to the depth budget) for one class."""
    noun_op = spontaneous_ops(profile)["noun"]
    sequences: list[tuple[DerivationOp, ...]] = [()]
    frontier: list[tuple[SimpleClass, tuple[DerivationOp, ...]]] = [(cls, ())]
    for _ in range(budgets.noun_rewrite_depth):
        nxt = []
        for current, ops in frontier:
            for offset, _ in current.noun.mask.entries:
                op = DerivationOp(noun_op, (offset,))
                try:
                    rewritten = apply_derivation_op(current, op)
                except EngineError:
                    continue
                nxt.append((rewritten, ops + (op,)))
        sequences.extend(ops for _, ops in nxt)
        frontier = nxt
    return sequences


def detalisation_pack(
    parent_object: ObjectInstance,
    context: Context,
    profile: OptionProfile,
    store: ClassStore,
    budgets: PackBudgets = PackBudgets(),
    observations: Sequence[Observation] = (),
    parent_class: SimpleClass | None = None,
) -> PackResult:
    """Factor shared representation structure before treating the differences.

    The spontaneous noun operation is applied uniformly across the context's
    classes (so each still describes its objects; loosening a mask never
    stops it matching) to maximize the shared prefix+suffix of the binary
    representations. With nothing shared this degenerates to abstraction on
    the unchanged input.
    """
    if not context.classes:
        raise ArgumentError("context holds no local classes")

    # Choose per-class spontaneous noun rewrites that make the binary
    # representations as similar as possible: minimize the total residue
    # after factoring the common prefix/suffix, break ties toward fewer
    # rewrite steps, then enumeration order.
    per_class = [
        _per_class_noun_rewrites(cls, profile, budgets) for _, cls in context.classes
    ]
    best_rewrite: tuple[tuple[DerivationOp, ...], ...] = tuple(() for _ in context.classes)
    best_classes = list(context.classes)
    best_cost: tuple[int, int] | None = None
    for vector in itertools.islice(itertools.product(*per_class), 512):
        rewritten = []
        try:
            for (local_id, cls), ops in zip(context.classes, vector):
                out = cls
                for op in ops:
                    out = apply_derivation_op(out, op)
                rewritten.append((local_id, out))
        except EngineError:
            continue
        encodings = [binary_repr(cls, store.basis) for _, cls in rewritten]
        if len(set(encodings)) == 1:
            residue_total = 0
        else:
            shared = len(_common_prefix(encodings)) + len(_common_suffix(encodings))
            # prefix and suffix may overlap inside a short string; clamp per string
            residue_total = sum(max(len(e) - shared, 0) for e in encodings)
        cost = (residue_total, sum(len(ops) for ops in vector))
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_rewrite = vector
            best_classes = rewritten

    encodings = [binary_repr(cls, store.basis) for _, cls in best_classes]
    prefix = _common_prefix(encodings)
    suffix = _common_suffix(encodings)
    if len(set(encodings)) == 1:
        prefix, suffix = encodings[0], ""
    if not prefix and not suffix:
        return abstraction_pack(
            parent_object, context, profile, store, budgets, observations, parent_class
        )

    residues = tuple(
        (local_id, encoding[len(prefix) : len(encoding) - len(suffix)])
        for (local_id, _), encoding in zip(best_classes, encodings)
    )
    packed_context = Context(context.level, tuple(best_classes), context.objects)
    result = abstraction_pack(
        parent_object, packed_context, profile, store, budgets, observations, parent_class
    )
    rewrites = tuple(
        (local_id, ops)
        for (local_id, _), ops in zip(context.classes, best_rewrite)
        if ops
    )
    result.candidates = [
        replace(
            candidate,
            shared_prefix=prefix,
            shared_suffix=suffix,
            residues=residues,
            noun_rewrites=rewrites,
        )
        for candidate in result.candidates
    ]
    return result


@dataclass(frozen=True)
class ValidationOutcome:
    accepted: bool
    missing: tuple[str, ...] = ()


def validate_candidate(
    candidate: PackCandidate,
    observed_classes: Mapping[str, SimpleClass],
    store: ClassStore,
) -> ValidationOutcome:
    """Accept only when every observed lower class is regenerated.

    Regeneration is re-executed here: each program replays from its global
    ancestor and must land on a structure identical to the observed class.
    """
    programs = candidate.generator_map()
    missing = []
    for local_id, cls in sorted(observed_classes.items()):
        program = programs.get(local_id)
        if program is None or cls.origin is None:
            missing.append(local_id)
            continue
        out = store.basis[cls.origin.basis_index]
        try:
            for op in program:
                out = apply_derivation_op(out, op)
        except EngineError:
            missing.append(local_id)
            continue
        if structural_key(out) != structural_key(cls):
            missing.append(local_id)
    return ValidationOutcome(accepted=not missing, missing=tuple(missing))
