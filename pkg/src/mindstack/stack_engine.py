"""The layer-propagation machine: detection, projection, sentences, verbs.

One tick pushes a signal frame up a fixed-depth stack of layers. Per stage
``i`` (bridging layer ``i`` to ``i+1``):

* objects are detected on layer ``i`` by mask covering (plus any objects
  promoted onto that layer by sentence recognition below),
* their qualities load, and -- on verb-enabled layers, the lowest
  ``depth - 2`` -- verbs fire in address order with writes immediately
  visible to later verbs,
* the deduplicated noun sequence is slot-encoded onto layer ``i+1`` by
  forcible excitation (only nouns that appear in some defined sentence are
  projected),
* sentence definitions are matched against the slot run of layer ``i+1``;
  each recognized upper noun is excited onto layer ``i+2`` and becomes an
  object there.

Forcibly excited content is never re-detected within the tick; the
bookkeeping clears when the next tick starts. A layer keeps its bits across
ticks until a new projection or promotion claims it, so data placed on the
class-data layer (index 2) stays readable: at the end of each tick that
layer is scanned for an embedded class record, and a successful decode
installs a context-local class that shadows its same-mask global from the
next tick on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .bitspace import (
    Block,
    Layer,
    Mask,
    assert_disjoint,
    cover_layer,
    excite_mask,
    make_layer,
    read_block,
    write_points,
)
from .boolalg import bit_var, eval_poly, quality_var
from .classes import StoreView, phi_decode, phi_record_length
from .errors import ArgumentError, CapacityError, DecodeError

__all__ = [
    "ObjectInstance",
    "SentenceRecord",
    "Stack",
    "TickOptions",
    "TickTrace",
    "apply_verbs",
    "detect_objects",
    "excite_projection",
    "load_qualities",
    "project_dedup",
    "recognize_sentences",
    "slot_width_for",
    "tick",
]


@dataclass(frozen=True)
class Stack:
    """Ordered layers; index 0 is the only externally written one."""

    layers: tuple[Layer, ...]

    @classmethod
    def blank(cls, depth: int, layer_length: int) -> "Stack":
        if depth < 2:
            raise ArgumentError(f"stack needs at least 2 layers, got {depth}")
        return cls(tuple(make_layer(layer_length) for _ in range(depth)))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def signal(self) -> Layer:
        return self.layers[0]


@dataclass(frozen=True)
class ObjectInstance:
    """A class instantiated on a block, with concrete quality/action values."""

    class_id: str
    block: Block
    layer_index: int
    qualities: tuple[tuple[int, int], ...] = ()
    actions: tuple[tuple[int, int], ...] = ()

    def quality(self, quality_id: int) -> int:
        for qid, value in self.qualities:
            if qid == quality_id:
                return value
        raise ArgumentError(f"object of {self.class_id} has no quality {quality_id}")

    def quality_map(self) -> dict[int, int]:
        return dict(self.qualities)


@dataclass(frozen=True)
class SentenceRecord:
    """An upper noun recognized from a constituent run on a projection layer."""

    noun_id: str
    constituents: tuple[str, ...]
    position: int


@dataclass(frozen=True)
class TickOptions:
    slot_width: int
    phi_layer: int = 2

    def __post_init__(self) -> None:
        if self.slot_width < 2:
            raise ArgumentError("slot width needs a guard bit plus at least one index bit")


def slot_width_for(global_count: int, derived_budget: int) -> int:
    """Guard bit plus enough index bits for globals and budgeted locals."""
    need = max(global_count + derived_budget, 2)
    return (need - 1).bit_length() + 1


@dataclass
class TickTrace:
    """Everything a tick did, stage by stage; serializable for the trace stream."""

    stages: list[dict] = field(default_factory=list)
    phi_installs: list[tuple[str, str]] = field(default_factory=list)
    phi_failures: list[str] = field(default_factory=list)
    layers_after: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "phi_installs": [list(pair) for pair in self.phi_installs],
            "phi_failures": self.phi_failures,
            "layers_after": self.layers_after,
        }

    def all_objects(self) -> list[dict]:
        return [o for stage in self.stages for o in stage["objects"]]

    def all_sentences(self) -> list[dict]:
        return [s for stage in self.stages for s in stage["sentences"]]


def _slot_index_map(view: StoreView) -> dict[str, int]:
    indices = {cid: i for i, cid in enumerate(view.base)}
    next_index = len(indices)
    for local_id in view.locals_:
        indices[local_id] = next_index
        next_index += 1
    return indices


def detect_objects(layer: Layer, view: StoreView, layer_index: int = 0) -> list[ObjectInstance]:
    """Cover the layer with every noun's mask and instantiate one object per block.

    Context-local classes shadow globals with the same mask, so the returned
    objects reference the local ids.
    """
    blocks = cover_layer(layer, view.effective_masks())
    assert_disjoint(blocks)
    out = []
    for block in blocks:
        cls = view.get(block.mask_id)
        out.append(
            ObjectInstance(
                class_id=block.mask_id,
                block=block,
                layer_index=layer_index,
                qualities=tuple((q, 0) for q in cls.noun.qualities),
                actions=tuple((a, 0) for a in cls.noun.actions),
            )
        )
    return out


def project_dedup(sequence: Sequence[str]) -> list[str]:
    """Collapse adjacent duplicates, preserving order."""
    out: list[str] = []
    for item in sequence:
        if not out or out[-1] != item:
            out.append(item)
    return out


def _encode_slot(index: int, width: int) -> tuple[dict[int, int], None]:
    if index >= 1 << (width - 1):
        raise CapacityError(f"slot index {index} needs more than {width - 1} bits")
    bits = {0: 1}
    for j in range(width - 1):
        bits[1 + j] = (index >> (width - 2 - j)) & 1
    return bits, None


def excite_projection(
    target: Layer,
    sequence: Sequence[str],
    view: StoreView,
    slot_width: int,
) -> Layer:
    """Slot-encode a noun sequence onto consecutive fixed-width regions.

    Each slot is a guard bit followed by the noun's store index, written by
    forcible excitation so the run is not re-detected as raw content.
    """
    if not sequence:
        return target
    if len(sequence) * slot_width > len(target):
        raise CapacityError(
            f"{len(sequence)} slots of width {slot_width} exceed layer length {len(target)}"
        )
    indices = _slot_index_map(view)
    layer = target
    for pos, class_id in enumerate(sequence):
        if class_id not in indices:
            raise ArgumentError(f"unknown class id {class_id!r} in projection")
        bits, _ = _encode_slot(indices[class_id], slot_width)
        mask = Mask(bits, width=slot_width)
        layer, _ = excite_mask(layer, mask, pos * slot_width)
    return layer


def decode_slots(layer: Layer, view: StoreView, slot_width: int) -> list[str]:
    """Read the slot run from position 0 while guard bits hold."""
    by_index = {v: k for k, v in _slot_index_map(view).items()}
    out = []
    pos = 0
    while pos + slot_width <= len(layer):
        if layer.bits[pos] != 1:
            break
        value = 0
        for j in range(slot_width - 1):
            value = (value << 1) | layer.bits[pos + 1 + j]
        class_id = by_index.get(value)
        if class_id is None:
            break
        out.append(class_id)
        pos += slot_width
    return out


def recognize_sentences(layer: Layer, view: StoreView, slot_width: int) -> list[SentenceRecord]:
    """Match every defined sentence against contiguous runs of the slot row.

    The constituent nouns themselves are never re-reported here: they were
    forcibly excited onto this layer, and excited masks stay undetected.
    """
    run = decode_slots(layer, view, slot_width)
    records = []
    for upper_id in view.base:
        sentence = view.sentence_for(upper_id)
        if not sentence:
            continue
        k = len(sentence)
        for start in range(len(run) - k + 1):
            if tuple(run[start : start + k]) == sentence:
                records.append(SentenceRecord(upper_id, sentence, start))
    records.sort(key=lambda r: (r.position, r.noun_id))
    return records


def load_qualities(
    objects: Iterable[ObjectInstance],
    layer: Layer,
    view: StoreView,
) -> list[ObjectInstance]:
    """Evaluate every adjective of every object on its block bits."""
    out = []
    for obj in objects:
        cls = view.get(obj.class_id)
        bits = read_block(layer, obj.block)
        values = dict(obj.qualities)
        for adjective in cls.adjectives:
            assignment = {v: bits[v[1]] for v in adjective.poly.variables}
            values[adjective.output] = eval_poly(adjective.poly, assignment)
        out.append(replace(obj, qualities=tuple(sorted(values.items()))))
    return out


def apply_verbs(
    objects: Sequence[ObjectInstance],
    layer: Layer,
    view: StoreView,
) -> tuple[Layer, list[dict], list[ObjectInstance]]:
    """Fire verbs in address order; writes land on the layer immediately.

    For each verb of each object ``d``, every object ``b`` whose class
    declares all of the verb's quality arguments triggers one evaluation;
    the result is written at ``d``'s action point, so later verbs see it.
    """
    ordered = sorted(objects, key=lambda o: o.block.begin)
    log: list[dict] = []
    current = layer
    updated = {id(o): o for o in ordered}
    for d in ordered:
        cls = view.get(d.class_id)
        for verb_index, verb in enumerate(cls.verbs):
            needed = verb.quality_args()
            for b in ordered:
                b_cls = view.get(b.class_id)
                if any(q not in b_cls.noun.qualities for q in needed):
                    continue
                b_now = updated[id(b)]
                block_bits = read_block(current, d.block)
                assignment = {}
                for var in verb.poly.variables:
                    if var[0] == "b":
                        assignment[var] = block_bits[var[1]]
                    else:
                        assignment[var] = b_now.quality(var[1])
                value = eval_poly(verb.poly, assignment)
                address = d.block.begin + verb.action_point
                current = write_points(current, {address: value})
                d_now = updated[id(d)]
                actions = dict(d_now.actions)
                actions[verb.action_point] = value
                updated[id(d)] = replace(d_now, actions=tuple(sorted(actions.items())))
                log.append(
                    {
                        "actor": d.class_id,
                        "actor_begin": d.block.begin,
                        "verb": verb_index,
                        "source": b.class_id,
                        "source_begin": b.block.begin,
                        "address": address,
                        "value": value,
                    }
                )
    return current, log, [updated[id(o)] for o in ordered]


def _sentence_constituents(view: StoreView) -> frozenset[str]:
    out: set[str] = set()
    for upper_id in view.base:
        sentence = view.sentence_for(upper_id)
        if sentence:
            out.update(sentence)
    return frozenset(out)


def _object_dict(obj: ObjectInstance) -> dict:
    return {
        "class": obj.class_id,
        "layer": obj.layer_index,
        "begin": obj.block.begin,
        "end": obj.block.end,
        "qualities": [list(p) for p in obj.qualities],
        "actions": [list(p) for p in obj.actions],
    }


def tick(
    stack: Stack,
    signal_frame: str,
    view: StoreView,
    options: TickOptions,
) -> tuple[Stack, TickTrace]:
    """Run one full propagation pass; returns the new stack and its trace."""
    if len(signal_frame) != len(stack.signal):
        raise ArgumentError(
            f"frame length {len(signal_frame)} != signal layer length {len(stack.signal)}"
        )
    if any(c not in "01" for c in signal_frame):
        raise ArgumentError("frame must be a '0'/'1' string")
    depth = stack.depth
    layers = [layer.clear_excited() for layer in stack.layers]
    layers[0] = Layer(tuple(int(c) for c in signal_frame))

    trace = TickTrace()
    constituents = _sentence_constituents(view)
    promoted: dict[int, list[ObjectInstance]] = {}
    promotion_cursor: dict[int, int] = {}

    for i in range(depth - 1):
        objects = detect_objects(layers[i], view, i)
        detected_ids = [o.class_id for o in objects]
        objects = sorted(objects + promoted.get(i, []), key=lambda o: o.block.begin)
        objects = load_qualities(objects, layers[i], view)
        action_log: list[dict] = []
        if i < depth - 2:
            layers[i], action_log, objects = apply_verbs(objects, layers[i], view)
        dedup = project_dedup([o.class_id for o in objects])
        projected = [cid for cid in dedup if cid in constituents]
        if projected:
            layers[i + 1] = make_layer(len(layers[i + 1]))
            layers[i + 1] = excite_projection(layers[i + 1], projected, view, options.slot_width)
        sentences: list[SentenceRecord] = []
        promotions: list[dict] = []
        if i + 2 < depth:
            sentences = recognize_sentences(layers[i + 1], view, options.slot_width)
            for record in sentences:
                upper = view.get(record.noun_id)
                span = upper.noun.mask.span
                if i + 2 not in promotion_cursor:
                    layers[i + 2] = make_layer(len(layers[i + 2]))
                    promotion_cursor[i + 2] = 0
                begin = promotion_cursor[i + 2]
                if begin + span > len(layers[i + 2]):
                    raise CapacityError(
                        f"promotion of {record.noun_id} overflows layer {i + 2}"
                    )
                layers[i + 2], region = excite_mask(
                    layers[i + 2], upper.noun.mask, begin
                )
                promotion_cursor[i + 2] = begin + span
                obj = ObjectInstance(
                    class_id=record.noun_id,
                    block=Block(region[0], region[1], record.noun_id),
                    layer_index=i + 2,
                    qualities=tuple((q, 0) for q in upper.noun.qualities),
                    actions=tuple((a, 0) for a in upper.noun.actions),
                )
                promoted.setdefault(i + 2, []).append(obj)
                promotions.append(
                    {
                        "class": record.noun_id,
                        "constituents": list(record.constituents),
                        "layer": i + 2,
                        "begin": region[0],
                        "end": region[1],
                    }
                )
        trace.stages.append(
            {
                "layer": i,
                "detected": detected_ids,
                "objects": [_object_dict(o) for o in objects],
                "dedup": dedup,
                "projected": projected,
                "actions": action_log,
                "sentences": [
                    {
                        "noun": s.noun_id,
                        "constituents": list(s.constituents),
                        "position": s.position,
                    }
                    for s in sentences
                ],
                "promotions": promotions,
                "excited_regions": list(layers[i + 1].excited),
            }
        )

    if depth > options.phi_layer >= 0 and depth >= 4:
        bits = layers[options.phi_layer].as_string()
        if bits and bits[0] == "1":
            payload = bits[1:]
            try:
                record_len = phi_record_length(payload)
                record_bits = payload[:record_len]
                cls = phi_decode(record_bits, view.base.basis)
                base_id = view.base.id_of_basis_index(cls.origin.basis_index)
                digest = hashlib.sha1(record_bits.encode("ascii")).hexdigest()[:8]
                trace.phi_installs.append((f"{base_id}~{digest}", record_bits))
            except DecodeError as exc:
                trace.phi_failures.append(str(exc))

    trace.layers_after = [layer.as_string() for layer in layers]
    return Stack(tuple(layers)), trace
