"""Polynomial algebra against truth-table oracles, plus serialization round trips."""

import random

import pytest

from mindstack.boolalg import (
    AdjectivePredicate,
    VerbPredicate,
    ZhegalkinPoly,
    and_poly,
    bit_var,
    close_under,
    deserialize_predicate,
    eval_poly,
    from_truth_table,
    poly_truth_table,
    quality_var,
    serialize_adjective,
    serialize_verb,
    xor_poly,
)
from mindstack.errors import ArgumentError, DecodeError

X, Y = bit_var(0), bit_var(1)


def table_of(poly, variables):
    """Oracle: evaluate on every assignment directly."""
    n = len(variables)
    return "".join(
        str(eval_poly(poly, {v: (i >> j) & 1 for j, v in enumerate(variables)}))
        for i in range(1 << n)
    )


class TestEvalPoly:
    def test_or_polynomial(self):
        poly = ZhegalkinPoly([X, Y], [{X}, {Y}, {X, Y}])
        # x + y + xy is OR: oracle says OR(1, 0) = 1
        assert eval_poly(poly, {X: 1, Y: 0}) == 1
        assert table_of(poly, [X, Y]) == "0111"

    def test_constant_zero(self):
        poly = ZhegalkinPoly([X], [])
        assert eval_poly(poly, {X: 1}) == 0

    def test_constant_one(self):
        poly = ZhegalkinPoly([], [frozenset()])
        assert eval_poly(poly, {}) == 1

    def test_missing_variable(self):
        poly = ZhegalkinPoly([X, Y], [{X}])
        with pytest.raises(ArgumentError):
            eval_poly(poly, {X: 1})


class TestComposition:
    def test_self_xor_cancels(self):
        poly = ZhegalkinPoly([X, Y], [{X}, {X, Y}])
        assert xor_poly(poly, poly).monomials == frozenset()

    def test_and_with_unit(self):
        poly = ZhegalkinPoly([X, Y], [{X}, {X, Y}])
        assert and_poly(poly, ZhegalkinPoly.constant(1)).monomials == poly.monomials

    def test_and_of_variables(self):
        product = and_poly(ZhegalkinPoly.identity(X), ZhegalkinPoly.identity(Y))
        assert product.monomials == frozenset([frozenset([X, Y])])
        assert table_of(product, [X, Y]) == "0001"

    def test_agree_with_truth_table_oracle_n3(self):
        variables = [bit_var(i) for i in range(3)]
        polys = [
            from_truth_table(format(i, "08b")[::-1], variables) for i in range(256)
        ]
        tables = [table_of(p, variables) for p in polys]
        rng = random.Random(5)
        for _ in range(400):
            i, j = rng.randrange(256), rng.randrange(256)
            x = xor_poly(polys[i], polys[j])
            a = and_poly(polys[i], polys[j])
            want_x = "".join(str(int(u) ^ int(v)) for u, v in zip(tables[i], tables[j]))
            want_a = "".join(str(int(u) & int(v)) for u, v in zip(tables[i], tables[j]))
            assert table_of(x, variables) == want_x
            assert table_of(a, variables) == want_a


class TestFromTruthTable:
    def test_or_table(self):
        poly = from_truth_table("0111", [X, Y])
        assert poly.monomials == frozenset([frozenset([X]), frozenset([Y]), frozenset([X, Y])])

    def test_zero_table(self):
        assert from_truth_table("0000", [X, Y]).monomials == frozenset()

    def test_identity_table(self):
        assert from_truth_table("01", [X]).monomials == frozenset([frozenset([X])])

    def test_bad_length(self):
        with pytest.raises(ArgumentError):
            from_truth_table("011")

    def test_roundtrip_all_n3(self):
        variables = [bit_var(i) for i in range(3)]
        for i in range(256):
            table = format(i, "08b")[::-1]
            assert table_of(from_truth_table(table, variables), variables) == table

    def test_roundtrip_sampled_n4(self):
        variables = [bit_var(i) for i in range(4)]
        rng = random.Random(17)
        for _ in range(500):
            table = "".join(str(rng.randint(0, 1)) for _ in range(16))
            assert table_of(from_truth_table(table, variables), variables) == table

    def test_canonical_form_unique(self):
        # Pointwise-equal polynomials share one monomial set.
        variables = [bit_var(i) for i in range(2)]
        seen = {}
        for i in range(16):
            table = format(i, "04b")[::-1]
            poly = from_truth_table(table, variables)
            assert seen.setdefault(table, poly.monomials) == poly.monomials
            rebuilt = from_truth_table(table_of(poly, variables), variables)
            assert rebuilt.monomials == poly.monomials


class TestClosure:
    @pytest.mark.parametrize("op", ["XOR", "AND"])
    def test_fixed_point_reached(self, op):
        variables = [bit_var(i) for i in range(3)]
        seeds = [
            ZhegalkinPoly.identity(variables[0]),
            ZhegalkinPoly(variables, [{variables[1]}, {variables[0], variables[2]}]),
        ]
        closed = close_under(seeds, op)
        # At most 2^(2^3) distinct functions exist; closure must be a fixed point.
        assert len(closed) <= 256
        combine = xor_poly if op == "XOR" else and_poly
        for a in closed:
            for b in closed:
                assert combine(a, b) in closed


class TestSerialization:
    def adjectives(self):
        rng = random.Random(3)
        out = []
        for _ in range(40):
            n = rng.randint(0, 3)
            offsets = sorted(rng.sample(range(8), n))
            variables = [bit_var(i) for i in offsets]
            monomials = [
                frozenset(v for v in variables if rng.random() < 0.5)
                for _ in range(rng.randint(0, 4))
            ]
            out.append(AdjectivePredicate(ZhegalkinPoly(variables, monomials), rng.randint(0, 9)))
        return out

    def verbs(self):
        rng = random.Random(4)
        out = []
        for _ in range(40):
            qualities = sorted(rng.sample(range(6), rng.randint(0, 2)))
            offsets = sorted(rng.sample(range(8), rng.randint(0, 2)))
            variables = [quality_var(q) for q in qualities] + [bit_var(i) for i in offsets]
            monomials = [
                frozenset(v for v in variables if rng.random() < 0.5)
                for _ in range(rng.randint(0, 4))
            ]
            out.append(VerbPredicate(ZhegalkinPoly(variables, monomials), rng.randint(0, 7)))
        return out

    def test_adjective_roundtrip(self):
        for adj in self.adjectives():
            bits = serialize_adjective(adj)
            assert deserialize_predicate(bits, "adjective") == adj

    def test_verb_roundtrip(self):
        for verb in self.verbs():
            bits = serialize_verb(verb)
            assert deserialize_predicate(bits, "verb") == verb

    def test_equal_predicates_equal_bits(self):
        a = AdjectivePredicate(ZhegalkinPoly([X, Y], [{X}, {Y}]), 2)
        b = AdjectivePredicate(ZhegalkinPoly([Y, X], [{Y}, {X}]), 2)
        assert a == b
        assert serialize_adjective(a) == serialize_adjective(b)

    def test_constant_zero_adjective_field_budget(self):
        # Layout: 16-bit argument count, zero offsets, 2^0 = 1 bitmap bit,
        # 16-bit quality id. Expected length computed from the field widths.
        adj = AdjectivePredicate(ZhegalkinPoly([], []), 0)
        bits = serialize_adjective(adj)
        assert len(bits) == 16 + 0 + 1 + 16

    def test_empty_bit_string(self):
        with pytest.raises(DecodeError):
            deserialize_predicate("", "adjective")

    def test_bad_kind(self):
        with pytest.raises(ArgumentError):
            deserialize_predicate("0" * 33, "noun")

    @pytest.mark.parametrize("kind", ["adjective", "verb"])
    def test_fuzz_never_crashes(self, kind):
        rng = random.Random(99)
        decoded = 0
        for _ in range(10_000):
            bits = "".join(str(rng.randint(0, 1)) for _ in range(64))
            try:
                predicate = deserialize_predicate(bits, kind)
            except DecodeError:
                continue
            decoded += 1
            # Whatever decodes must re-serialize to the same bits.
            encode = serialize_adjective if kind == "adjective" else serialize_verb
            assert encode(predicate) == bits
        assert decoded >= 0  # crash-freedom is the property under test
