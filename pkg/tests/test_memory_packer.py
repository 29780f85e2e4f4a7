"""Packing algorithms: option profiles, forks, abstraction, detalisation."""

import itertools

import pytest

from mindstack.bitspace import Block, Mask
from mindstack.boolalg import AdjectivePredicate, VerbPredicate, ZhegalkinPoly, bit_var
from mindstack.classes import (
    ClassStore,
    Noun,
    SimpleClass,
    apply_derivation_op,
    apply_predicate_op,
    noun_argument,
    noun_specialize,
    structural_key,
)
from mindstack.errors import ArgumentError
from mindstack.memory_packer import (
    Attachment,
    Context,
    MemoryTree,
    Observation,
    OptionProfile,
    PackBudgets,
    abstraction_pack,
    binary_repr,
    detalisation_pack,
    fork_context,
    spontaneous_ops,
    uses_only_spontaneous,
    validate_candidate,
)
from mindstack.stack_engine import ObjectInstance


def profile(**kw):
    return OptionProfile(**kw)


class TestOptionProfile:
    def test_spontaneous_selection(self):
        ops = spontaneous_ops(profile())
        assert ops == {"noun": "specialize", "verb": "XOR", "adjective": "XOR"}

    def test_opposite_selection(self):
        ops = spontaneous_ops(
            profile(noun_option="irratio", verb_option="ethics", adjective_option="sensorics")
        )
        assert ops == {"noun": "argument", "verb": "AND", "adjective": "AND"}

    def test_sixteen_variants(self):
        combos = OptionProfile.all_option_combinations()
        assert len(combos) == 16
        assert len({p.canonical_name() for p in combos}) == 16
        assert len({(p.context_option, p.noun_option, p.verb_option, p.adjective_option) for p in combos}) == 16

    def test_parse_roundtrip(self):
        for p in OptionProfile.all_option_combinations():
            assert OptionProfile.parse(p.canonical_name()) == p

    def test_bad_option_rejected(self):
        with pytest.raises(ArgumentError):
            OptionProfile(context_option="fluid")


def make_object(class_id, span=2, quality_values=(), action_values=()):
    return ObjectInstance(
        class_id=class_id,
        block=Block(0, span - 1, class_id),
        layer_index=2,
        qualities=tuple(quality_values),
        actions=tuple(action_values),
    )


class TestForkContext:
    def base_attachment(self):
        obj = make_object("E", quality_values=((0, 1), (1, 0)), action_values=((0, 0),))
        ctx = Context(level=0, classes=(), objects=())
        return Attachment(obj, ctx)

    def test_static_quality_change_forks(self):
        attachment = self.base_attachment()
        modified = make_object("E", quality_values=((0, 0), (1, 0)), action_values=((0, 0),))
        disposition, new_attachment, key = fork_context(
            attachment, modified, "quality", profile(context_option="static")
        )
        assert disposition == "forked"
        assert new_attachment.context.classes == ()
        # archived under the combination that held before the change
        assert key == ("E", "quality", ((0, 1), (1, 0)))

    def test_static_action_change_in_place(self):
        attachment = self.base_attachment()
        modified = make_object("E", quality_values=((0, 1), (1, 0)), action_values=((0, 1),))
        disposition, new_attachment, key = fork_context(
            attachment, modified, "action", profile(context_option="static")
        )
        assert disposition == "in_place"
        assert new_attachment.context is attachment.context
        assert key is None

    def test_dynamic_action_change_forks(self):
        attachment = self.base_attachment()
        modified = make_object("E", quality_values=((0, 1), (1, 0)), action_values=((0, 1),))
        disposition, _, key = fork_context(
            attachment, modified, "action", profile(context_option="dynamic")
        )
        assert disposition == "forked"
        assert key == ("E", "action", ((0, 0),))


def packing_store():
    """G: two adjectives to combine; P: bare parent noun."""
    g = SimpleClass(
        Noun(Mask({0: 1, 1: 0}), qualities=(0, 1)),
        (
            AdjectivePredicate(ZhegalkinPoly.identity(bit_var(0)), 0),
            AdjectivePredicate(ZhegalkinPoly.identity(bit_var(1)), 1),
        ),
    )
    p = SimpleClass(Noun(Mask({0: 1, 1: 1, 2: 1})))
    return ClassStore({"G": g, "P": p})


def diff_positions(encodings):
    longest = max(len(e) for e in encodings)

    def bit(e, i):
        return e[i] if i < len(e) else "0"

    return [i for i in range(longest) if len({bit(e, i) for e in encodings}) > 1]


class TestAbstractionPack:
    def test_one_bit_difference_candidate_reads_it(self):
        store = packing_store()
        g = store.get("G")
        l1 = apply_predicate_op(g, "adjective", "XOR", 0, 0)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        encodings = [binary_repr(l1, store.basis), binary_repr(l2, store.basis)]
        diff = diff_positions(encodings)
        assert len(diff) == 1  # fixture: encodings differ in exactly one bit

        ctx = Context(level=0, classes=(("G~1", l1), ("G~2", l2)))
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store)
        assert len(result.candidates) >= 1
        best = result.candidates[0]
        assert len(best.new_adjectives) == 1
        assert best.new_adjectives[0].positions() == tuple(diff)

        # oracle: exhaustive single-op candidates are exactly the reads over
        # the diff positions; the winner must be among them
        assert best.new_adjectives[0].derivation == ("read", diff[0])

    def test_single_class_context_no_new_adjectives(self):
        store = packing_store()
        l1 = noun_specialize(store.get("G"), 1)
        ctx = Context(level=0, classes=(("G~s", l1),))
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store)
        assert len(result.candidates) == 1
        assert result.candidates[0].new_adjectives == ()

    def test_over_budget_flags_fallback_and_returns_empty(self):
        store = packing_store()
        g = store.get("G")
        l1 = apply_predicate_op(g, "adjective", "XOR", 0, 0)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        l3 = apply_predicate_op(g, "adjective", "XOR", 1, 0)
        ctx = Context(level=0, classes=(("a", l1), ("b", l2), ("c", l3)))
        budgets = PackBudgets(adjective_budget=1, adjective_depth=2)
        # oracle: single XOR-built adjective over the two differing positions
        # cannot 3-way distinguish (each poly takes two values on two bits)
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store, budgets)
        assert result.candidates == []
        assert result.step2_1_flagged

    def test_empty_context_rejected(self):
        store = packing_store()
        with pytest.raises(ArgumentError):
            abstraction_pack(make_object("P", span=3), Context(0), profile(), store)

    def test_generator_regenerates_all_lower_classes(self):
        store = packing_store()
        g = store.get("G")
        l1 = noun_specialize(g, 1)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        ctx = Context(level=0, classes=(("x", l1), ("y", l2)))
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store)
        assert result.candidates
        for candidate in result.candidates:
            programs = candidate.generator_map()
            for local_id, cls in ctx.classes:
                out = store.basis[cls.origin.basis_index]
                for op in programs[local_id]:
                    out = apply_derivation_op(out, op)
                assert structural_key(out) == structural_key(cls)

    def test_candidates_use_only_spontaneous_operations(self):
        store = packing_store()
        g = store.get("G")
        l1 = noun_specialize(g, 1)
        ctx = Context(level=0, classes=(("x", l1),))
        prof = profile()
        result = abstraction_pack(make_object("P", span=3), ctx, prof, store)
        for candidate in result.candidates:
            for _, program in candidate.generator:
                assert uses_only_spontaneous(program, prof)
            new_ops = candidate.rewritten_class.origin.ops
            assert uses_only_spontaneous(new_ops, prof)

    def test_irregenerable_context_yields_no_candidates(self):
        store = packing_store()
        # derived with AND, but the profile's spontaneous adjective op is XOR
        l1 = apply_predicate_op(store.get("G"), "adjective", "AND", 0, 1)
        ctx = Context(level=0, classes=(("x", l1),))
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store)
        assert result.candidates == []

    def test_correlation_fallback_links_quality_to_bit(self):
        store = packing_store()
        l1 = noun_specialize(store.get("G"), 1)
        ctx = Context(level=0, classes=(("x", l1),))
        observations = (
            Observation("101", (("x", 0, 1),)),
            Observation("111", (("x", 0, 1),)),
        )
        result = abstraction_pack(
            make_object("P", span=3), ctx, profile(), store, observations=observations
        )
        assert result.step3_1_used
        assert result.candidates
        linked = result.candidates[0].rewritten_class
        assert linked.verbs  # quality 0 agreed with parent bits 0 and 2
        assert {v.action_point for v in linked.verbs} == {0, 2}
        assert all("step3_1" in c.flags for c in result.candidates)


class TestValidateCandidate:
    def make_candidate_and_context(self):
        store = packing_store()
        g = store.get("G")
        l1 = noun_specialize(g, 1)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        ctx = Context(level=0, classes=(("x", l1), ("y", l2)))
        result = abstraction_pack(make_object("P", span=3), ctx, profile(), store)
        return store, ctx, result.candidates[0], l1, l2

    def test_accepts_full_regeneration(self):
        store, ctx, candidate, l1, l2 = self.make_candidate_and_context()
        outcome = validate_candidate(candidate, {"x": l1, "y": l2}, store)
        assert outcome.accepted

    def test_rejects_missing_class(self):
        store, ctx, candidate, l1, l2 = self.make_candidate_and_context()
        stranger = apply_predicate_op(store.get("G"), "adjective", "AND", 0, 1)
        outcome = validate_candidate(
            candidate, {"x": l1, "y": l2, "z": stranger}, store
        )
        assert not outcome.accepted
        assert outcome.missing == ("z",)


class TestDetalisationPack:
    def test_identical_classes_zero_residue(self):
        store = packing_store()
        l1 = noun_specialize(store.get("G"), 1)
        ctx = Context(level=0, classes=(("x", l1), ("y", l1)))
        result = detalisation_pack(make_object("P", span=3), ctx, profile(), store)
        assert len(result.candidates) == 1
        candidate = result.candidates[0]
        assert all(residue == "" for _, residue in candidate.residues)
        assert candidate.shared_prefix == binary_repr(l1, store.basis)

    def test_shared_parts_factored(self):
        store = packing_store()
        g = store.get("G")
        l1 = apply_predicate_op(g, "adjective", "XOR", 0, 0)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        l3 = apply_predicate_op(g, "adjective", "XOR", 1, 1)
        ctx = Context(level=0, classes=(("a", l1), ("b", l2), ("c", l3)))
        result = detalisation_pack(make_object("P", span=3), ctx, profile(), store)
        assert result.candidates
        candidate = result.candidates[0]
        encodings = [binary_repr(c, store.basis) for _, c in ctx.classes]

        def common_prefix(ss):
            out = []
            for chars in zip(*ss):
                if len(set(chars)) > 1:
                    break
                out.append(chars[0])
            return "".join(out)

        want_prefix = common_prefix(encodings)
        want_suffix = common_prefix([s[::-1] for s in encodings])[::-1]
        assert candidate.shared_prefix == want_prefix
        assert candidate.shared_suffix == want_suffix
        for (_, residue), encoding in zip(candidate.residues, encodings):
            assert want_prefix + residue + want_suffix == encoding

    def test_no_shared_structure_equals_abstraction(self):
        store = packing_store()
        g = store.get("G")
        l1 = apply_predicate_op(g, "adjective", "XOR", 0, 0)
        l2 = apply_predicate_op(g, "adjective", "XOR", 0, 1)
        ctx = Context(level=0, classes=(("a", l1), ("b", l2)))
        prof = profile()
        plain = abstraction_pack(make_object("P", span=3), ctx, prof, store)
        detail = detalisation_pack(make_object("P", span=3), ctx, prof, store)
        # same substantive candidates; detalisation adds factoring annotations
        assert len(plain.candidates) == len(detail.candidates)
        for a, b in zip(plain.candidates, detail.candidates):
            assert a.rewritten_class == b.rewritten_class
            assert a.new_adjectives == b.new_adjectives
            assert a.generator == b.generator

    def test_noun_rewrite_converges_a_lagging_class(self):
        store = packing_store()
        g = store.get("G")
        # 'b' is one spontaneous specialization behind 'a'; detalisation
        # rewrites it so both representations become identical
        l1 = noun_specialize(g, 1)
        ctx = Context(level=0, classes=(("a", l1), ("b", g)))
        result = detalisation_pack(
            make_object("P", span=3),
            ctx,
            profile(),
            store,
            PackBudgets(noun_rewrite_depth=1),
        )
        assert result.candidates
        candidate = result.candidates[0]
        assert dict(candidate.noun_rewrites)["b"][0].code == "specialize"
        assert all(residue == "" for _, residue in candidate.residues)


class TestProfileSensitivity:
    def test_noun_option_changes_candidates(self):
        store = packing_store()
        l1 = noun_specialize(store.get("G"), 1)
        ctx = Context(level=0, classes=(("x", l1),))
        ratio = abstraction_pack(make_object("P", span=3), ctx, profile(noun_option="ratio"), store)
        irratio = abstraction_pack(
            make_object("P", span=3), ctx, profile(noun_option="irratio"), store
        )
        assert len(ratio.candidates) > 0 and len(irratio.candidates) == 0

    def test_adjective_option_changes_candidates(self):
        store = packing_store()
        l1 = apply_predicate_op(store.get("G"), "adjective", "XOR", 0, 1)
        ctx = Context(level=0, classes=(("x", l1),))
        intuition = abstraction_pack(
            make_object("P", span=3), ctx, profile(adjective_option="intuition"), store
        )
        sensorics = abstraction_pack(
            make_object("P", span=3), ctx, profile(adjective_option="sensorics"), store
        )
        assert len(intuition.candidates) > 0 and len(sensorics.candidates) == 0

    def test_verb_option_changes_candidates(self):
        # x0 XOR x1 is unreachable by any chain of AND compositions
        g = SimpleClass(
            Noun(Mask({0: 1, 1: 0}), qualities=(0,), actions=(0, 1)),
            (AdjectivePredicate(
                ZhegalkinPoly([bit_var(0), bit_var(1)], [{bit_var(0)}, {bit_var(1)}]), 0
            ),),
            (
                VerbPredicate(ZhegalkinPoly.identity(bit_var(0)), 0),
                VerbPredicate(ZhegalkinPoly.identity(bit_var(1)), 1),
            ),
        )
        p = SimpleClass(Noun(Mask({0: 1, 1: 1, 2: 1})))
        store = ClassStore({"G": g, "P": p})
        l1 = apply_predicate_op(store.get("G"), "verb", "XOR", 0, 1)
        ctx = Context(level=0, classes=(("x", l1),))
        logic = abstraction_pack(make_object("P", span=3), ctx, profile(verb_option="logic"), store)
        ethics = abstraction_pack(
            make_object("P", span=3), ctx, profile(verb_option="ethics"), store
        )
        assert len(logic.candidates) > 0 and len(ethics.candidates) == 0

    def test_context_option_changes_context_contents(self):
        attachment = Attachment(
            make_object("E", quality_values=((0, 0),)),
            Context(level=0, classes=(("x", packing_store().get("G")),)),
        )
        modified = make_object("E", quality_values=((0, 1),))
        static_result = fork_context(attachment, modified, "quality", profile(context_option="static"))
        dynamic_result = fork_context(attachment, modified, "quality", profile(context_option="dynamic"))
        assert static_result[0] == "forked" and dynamic_result[0] == "in_place"
        assert static_result[1].context != dynamic_result[1].context


class TestMemoryTree:
    def test_snapshot_restore_roundtrip(self):
        store = packing_store()
        tree = MemoryTree(store)
        l1 = noun_specialize(store.get("G"), 1)
        tree.locals_["G~s"] = l1
        tree.attachments["P"] = Attachment(
            make_object("P", span=3), Context(0, (("G~s", l1),))
        )
        snap = tree.snapshot()
        fingerprint = tree.fingerprint()
        tree.locals_.clear()
        tree.attachments.clear()
        tree.restore(snap)
        assert tree.fingerprint() == fingerprint

    def test_packable_lists_only_contextful(self):
        store = packing_store()
        tree = MemoryTree(store)
        l1 = noun_specialize(store.get("G"), 1)
        tree.attachments["P"] = Attachment(
            make_object("P", span=3), Context(0, (("G~s", l1),))
        )
        tree.attachments["Q"] = Attachment(make_object("P", span=3), Context(0))
        assert [key for key, _ in tree.packable()] == ["P"]
