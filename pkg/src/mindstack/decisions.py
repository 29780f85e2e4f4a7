"""Patch lifecycle, decision trees over candidate packings, and input resolution.

Packing one memory state yields alternative patches; applying a patch and
packing again yields deeper ones. Patches over distinct targets commute, so
the tree expands only the lexicographically smallest packable target at each
node: leaves are fully packed states, siblings are genuine alternatives, and
no permutation duplicates arise. Every patch creates its own fresh local
class ids, so distinct branches touch disjoint id sets.

Input resolution runs the stack over the incoming frames, packs the touched
memory, and generates one candidate response per leaf by replaying the
frames under that leaf's classes and reading the signal layer's output
segment. A single leaf fixes the memory and emits its response; several
leaves recurse through the Ego zone; without a unique winner everything is
dropped and the memory stays bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .classes import phi_encode
from .errors import ArgumentError, ConflictError
from .memory_packer import (
    Attachment,
    Context,
    MemoryTree,
    Observation,
    OptionProfile,
    PackBudgets,
    PackCandidate,
    abstraction_pack,
    absorb_tick,
)
from .stack_engine import Stack, TickOptions, tick

__all__ = [
    "DecisionNode",
    "DecisionTree",
    "EgoZone",
    "Patch",
    "SigmaResolver",
    "apply_patch",
    "assert_branch_disjointness",
    "fix_memory",
    "generate_patches",
]


@dataclass(frozen=True)
class EgoZone:
    """Reserved signal-layer input region where candidate responses recurse."""

    begin: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.begin < self.end:
            raise ArgumentError(f"bad ego zone ({self.begin}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.begin


@dataclass(frozen=True)
class Patch:
    """One reversible memory modification: a candidate installed for a target."""

    patch_id: str
    target_class: str
    before_bits: str
    after_bits: str
    level: int
    parent_patch: str | None
    candidate: PackCandidate
    base_fingerprint: str

    @property
    def created_local_id(self) -> str:
        return f"{self.target_class}''{self.patch_id}"

    def touched_ids(self) -> frozenset[str]:
        return frozenset({self.created_local_id})


@dataclass
class DecisionNode:
    patch: Patch | None
    memory: MemoryTree
    children: list["DecisionNode"] = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class DecisionTree:
    root: DecisionNode

    def leaves(self) -> list[DecisionNode]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf():
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def leaf_chains(self) -> list[list[Patch]]:
        """Patch chains root -> leaf, skipping the (patchless) root."""
        chains: list[list[Patch]] = []

        def walk(node: DecisionNode, prefix: list[Patch]) -> None:
            path = prefix + ([node.patch] if node.patch else [])
            if node.is_leaf():
                if path:
                    chains.append(path)
                return
            for child in node.children:
                walk(child, path)

        walk(self.root, [])
        return chains

    def size(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count


def apply_patch(memory: MemoryTree, patch: Patch) -> None:
    """Install the patch's candidate: local class plus reduced context."""
    if memory.fingerprint() != patch.base_fingerprint:
        raise ConflictError(
            f"patch {patch.patch_id} was generated against a different memory state"
        )
    attachment = memory.attachments.get(patch.target_class)
    if attachment is None:
        raise ConflictError(f"patch target {patch.target_class!r} has no attachment")
    memory.locals_[patch.created_local_id] = patch.candidate.rewritten_class
    memory.attachments[patch.target_class] = Attachment(
        attachment.obj, patch.candidate.reduced_context
    )


def _pack_target(
    memory: MemoryTree,
    target: str,
    attachment: Attachment,
    profile: OptionProfile,
    budgets: PackBudgets,
    observations: Sequence[Observation],
):
    view = memory.view()
    parent_class = view.get(attachment.obj.class_id) if attachment.obj.class_id in view else None
    return abstraction_pack(
        attachment.obj,
        attachment.context,
        profile,
        memory.store,
        budgets,
        observations,
        parent_class,
    )


def generate_patches(
    memory: MemoryTree,
    profile: OptionProfile,
    budgets: PackBudgets = PackBudgets(),
    observations: Sequence[Observation] = (),
    depth_limit: int = 2,
) -> DecisionTree:
    """Expand the decision tree of candidate packings over the memory state.

    Each node packs its smallest packable target; each candidate becomes a
    child patch applied to a snapshot. Leaves are states with nothing left
    to pack (or the depth cap reached).
    """
    root = DecisionNode(patch=None, memory=memory.snapshot())
    counter = [0]

    def expand(node: DecisionNode, level: int) -> None:
        if level > depth_limit:
            return
        packable = node.memory.packable()
        if not packable:
            return
        target, attachment = packable[0]
        result = _pack_target(
            node.memory, target, attachment, profile, budgets, observations
        )
        base = node.memory.fingerprint()
        before = _attachment_bits(node.memory, attachment)
        for candidate in result.candidates:
            counter[0] += 1
            patch = Patch(
                patch_id=f"p{level}.{counter[0]}",
                target_class=target,
                before_bits=before,
                after_bits=phi_encode(
                    candidate.rewritten_class, node.memory.store.basis
                ),
                level=level,
                parent_patch=node.patch.patch_id if node.patch else None,
                candidate=candidate,
                base_fingerprint=base,
            )
            child_memory = node.memory.snapshot()
            apply_patch(child_memory, patch)
            child = DecisionNode(patch=patch, memory=child_memory)
            node.children.append(child)
            expand(child, level + 1)

    expand(root, 1)
    return DecisionTree(root)


def _attachment_bits(memory: MemoryTree, attachment: Attachment) -> str:
    view = memory.view()
    if attachment.obj.class_id in view:
        cls = view.get(attachment.obj.class_id)
        if cls.origin is not None:
            return phi_encode(cls, memory.store.basis)
    return ""


def assert_branch_disjointness(tree: DecisionTree) -> None:
    """Patches on distinct branches must touch non-intersecting class sets."""

    def walk(node: DecisionNode) -> frozenset[str]:
        own = node.patch.touched_ids() if node.patch else frozenset()
        child_sets = [walk(child) for child in node.children]
        for i in range(len(child_sets)):
            for j in range(i + 1, len(child_sets)):
                overlap = child_sets[i] & child_sets[j]
                if overlap:
                    raise ConflictError(f"branches share touched classes {sorted(overlap)}")
        merged = own
        for s in child_sets:
            merged |= s
        return merged

    walk(tree.root)


def fix_memory(memory: MemoryTree, patch_chain: Sequence[Patch]) -> MemoryTree:
    """Apply a whole chain atomically; the prior snapshot is the rollback.

    The chain must have been generated from this exact memory state: the
    first patch's base fingerprint is checked against the live memory, each
    later one against the intermediate result.
    """
    if not patch_chain:
        return memory
    snapshot = memory.snapshot()
    try:
        for patch in patch_chain:
            apply_patch(memory, patch)
    except ConflictError:
        memory.restore(snapshot)
        raise
    memory.rollback_records.append((tuple(p.patch_id for p in patch_chain), snapshot))
    return memory


@dataclass
class SigmaResolver:
    """Runs input resolution end to end for one engine configuration."""

    memory: MemoryTree
    profile: OptionProfile
    tick_options: TickOptions
    stack_depth: int
    layer_length: int
    output_begin: int
    output_end: int
    ego: EgoZone
    budgets: PackBudgets = PackBudgets()
    ego_depth_limit: int = 2
    patch_depth_limit: int = 2

    def __post_init__(self) -> None:
        if self.ego.end > self.layer_length or self.output_end > self.layer_length:
            raise ArgumentError("ego zone / output segment outside the signal layer")
        if not (self.ego.end <= self.output_begin or self.output_end <= self.ego.begin):
            raise ArgumentError("ego zone intersects the output segment")

    def _run_frames(self, memory: MemoryTree, frames: Sequence[str]) -> str:
        """Tick the frames on a clear stack under the memory's classes.

        Returns the output segment of the signal layer after the last tick.
        """
        stack = Stack.blank(self.stack_depth, self.layer_length)
        final_signal = "0" * self.layer_length
        for frame in frames:
            stack, trace = tick(stack, frame, memory.view(), self.tick_options)
            absorb_tick(memory, trace, self.profile)
            final_signal = trace.layers_after[0]
        return final_signal[self.output_begin : self.output_end]

    def _ego_frames(self, responses: Sequence[str]) -> list[str]:
        frames = []
        for response in responses:
            frame = ["0"] * self.layer_length
            payload = response[: self.ego.length]
            for i, c in enumerate(payload):
                frame[self.ego.begin + i] = c
            frames.append("".join(frame))
        return frames

    def _spawn(self) -> "SigmaResolver":
        return replace(self, memory=self.memory.snapshot())

    def resolve(
        self, frames: Sequence[str], depth: int = 0
    ) -> tuple[str | None, MemoryTree]:
        """Steps 1-5.2: tick, pack, respond, fix or recurse or drop."""
        entry_fingerprint = self.memory.fingerprint()
        working = self.memory.snapshot()
        base_response = self._run_frames(working, frames)

        tree = generate_patches(
            working, self.profile, self.budgets, depth_limit=self.patch_depth_limit
        )
        assert_branch_disjointness(tree)
        leaves = [leaf for leaf in tree.leaves() if leaf.patch is not None]

        if not leaves:
            # nothing packable: respond from the unmodified tree, memory unchanged
            return base_response, self.memory

        responses = []
        for leaf in leaves:
            responses.append(self._run_frames(leaf.memory.snapshot(), frames))

        if len(leaves) == 1:
            self.memory.restore(leaves[0].memory)
            return responses[0], self.memory

        if depth >= self.ego_depth_limit:
            assert self.memory.fingerprint() == entry_fingerprint
            return None, self.memory

        inner = self._spawn()
        recursive_response, inner_memory = inner.resolve(
            self._ego_frames(responses), depth + 1
        )

        if recursive_response is not None:
            matches = [i for i, r in enumerate(responses) if r == recursive_response]
            if len(matches) == 1:
                # post 1: the chosen response fixes its patch chain
                self.memory.restore(leaves[matches[0]].memory)
                return responses[matches[0]], self.memory
            if not matches:
                # post 2: a fresh downstream patch gave the only response;
                # its memory state is adopted wholesale
                self.memory.restore(inner_memory)
                return recursive_response, self.memory

        # post 3: no single response; all data dropped
        assert self.memory.fingerprint() == entry_fingerprint
        return None, self.memory
