"""Shared fixtures: a small class store exercising every engine path."""

import pytest

from mindstack.bitspace import Mask
from mindstack.boolalg import (
    AdjectivePredicate,
    VerbPredicate,
    ZhegalkinPoly,
    bit_var,
)
from mindstack.classes import ClassStore, Noun, SimpleClass
from mindstack.stack_engine import TickOptions, slot_width_for


def identity_adjective(offset, output):
    return AdjectivePredicate(ZhegalkinPoly.identity(bit_var(offset)), output)


def build_store(with_sentences=True):
    """Globals: A='10', B='11', C='01' (width 2), upper noun E over (A, B).

    A carries two bit-reading adjectives so predicate operations have
    material to combine; E declares a quality so promoted objects are
    inspectable.
    """
    a = SimpleClass(
        Noun(Mask({0: 1, 1: 0}), qualities=(0, 1)),
        (identity_adjective(0, 0), identity_adjective(1, 1)),
    )
    b = SimpleClass(Noun(Mask({0: 1, 1: 1})))
    c = SimpleClass(Noun(Mask({0: 0, 1: 1})))
    # E's mask never appears in the small signal fixtures, so it only
    # enters layers via sentence promotion.
    e = SimpleClass(
        Noun(Mask({0: 1, 1: 1, 2: 1, 3: 1, 4: 1}), qualities=(0,)),
        (identity_adjective(1, 0),),
    )
    sentences = {"E": ("A", "B")} if with_sentences else None
    return ClassStore({"A": a, "B": b, "C": c, "E": e}, sentences)


def options_for(store, derived_budget=12):
    return TickOptions(slot_width=slot_width_for(len(store), derived_budget))


@pytest.fixture
def store():
    return build_store()


@pytest.fixture
def view(store):
    return store.with_locals({})


@pytest.fixture
def tick_options(store):
    return options_for(store)
