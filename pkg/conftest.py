import os

import pytest
from hypothesis import assume
from hypothesis import strategies as st

from props import check_consistency
from qsys import Attack, QuorumSystem, new_quorum_system
from scenarios import load_fixture

# Размеры прогонов; CI может уменьшить их через окружение
TEST_SEEDS = int(os.getenv("HQS_TEST_SEEDS", "100"))
TEST_SYSTEMS = int(os.getenv("HQS_TEST_SYSTEMS", "200"))


@pytest.fixture
def silent_member():
    return load_fixture("silent_member")


@pytest.fixture
def tail_sink():
    return load_fixture("tail_sink")


@pytest.fixture
def leave_dilemma():
    return load_fixture("leave_dilemma")


@pytest.fixture
def add_dilemma():
    return load_fixture("add_dilemma")


@st.composite
def sharing_systems(draw, max_n: int = 7):
    """
    Системы с пересечением на 𝓦 и разделением кворумов.
    Кворумы берутся из семейства G множеств размера k = (n + f) // 2 + 1:
    любые два пересекаются не меньше чем по f + 1 процессу.
    """
    n = draw(st.integers(min_value=2, max_value=max_n))
    f = draw(st.integers(min_value=0, max_value=(n - 1) // 3))
    universe = list(range(1, n + 1))
    byzantine = frozenset(draw(st.permutations(universe))[:f])
    k = (n + f) // 2 + 1
    subset = st.lists(st.sampled_from(universe), min_size=k, max_size=k, unique=True).map(frozenset)
    family = draw(st.lists(subset, min_size=1, max_size=4, unique=True))

    decls = {}
    for p in universe:
        own = [g for g in family if p in g]
        decls[p] = own or [family[0] | {p}]
    qs = new_quorum_system(universe, decls, universe=universe, byzantine=byzantine)
    return qs, Attack(byzantine, qs.universe)


@st.composite
def heterogeneous_systems(draw, max_n: int = 7):
    """
    Неоднородные системы с разделением кворумов и пересечением на 𝓦.
    Базовые кворумы разного размера; процесс вне всех базовых кворумов
    объявляет один или два из них, дополненные собой.
    """
    n = draw(st.integers(min_value=2, max_value=max_n))
    f = draw(st.integers(min_value=0, max_value=(n - 1) // 3))
    universe = list(range(1, n + 1))
    byzantine = frozenset(draw(st.permutations(universe))[:f])
    base = st.integers(min_value=n // 2 + 1, max_value=n).flatmap(
        lambda k: st.lists(st.sampled_from(universe), min_size=k, max_size=k, unique=True)
    ).map(frozenset)
    family = draw(st.lists(base, min_size=1, max_size=5, unique=True))

    decls = {}
    for p in universe:
        own = [g for g in family if p in g]
        if not own:
            own = [g | {p} for g in draw(st.lists(st.sampled_from(family), min_size=1, max_size=2))]
        decls[p] = own
    qs = new_quorum_system(universe, decls, universe=universe, byzantine=byzantine)
    attack = Attack(byzantine, qs.universe)
    assume(check_consistency(qs, attack, attack.well_behaved).holds)
    return qs, attack


def quorum_systems():
    """Системы для свойств графа и обнаружения стока: оба генератора"""
    return st.one_of(sharing_systems(), heterogeneous_systems())


@st.composite
def outlived_systems(draw, max_w: int = 5, max_b: int = 2):
    """
    Системы, в которых все корректные процессы образуют переживший
    набор: каждый кворум содержит большинство 𝓦, и у каждого процесса
    есть запасной кворум h0 ∪ {p} внутри 𝓦.
    """
    w = draw(st.integers(min_value=2, max_value=max_w))
    b = draw(st.integers(min_value=0, max_value=max_b))
    W = list(range(1, w + 1))
    B = list(range(w + 1, w + b + 1))
    majority = w // 2 + 1

    honest_part = st.lists(st.sampled_from(W), min_size=majority, max_size=w, unique=True).map(frozenset)
    byz_part = st.lists(st.sampled_from(B), max_size=b, unique=True).map(frozenset) if B else st.just(frozenset())
    h0 = draw(honest_part)
    family = [h0] + draw(st.lists(st.tuples(honest_part, byz_part).map(lambda t: t[0] | t[1]),
                                  max_size=3, unique=True))

    decls = {}
    for p in W:
        decls[p] = [g for g in family if p in g] + [h0 | {p}]
    universe = W + B
    qs = new_quorum_system(universe, decls, universe=universe, byzantine=B)
    return qs, Attack(frozenset(B), qs.universe)


def build_system(decls, byzantine=(), universe=None, active=None) -> QuorumSystem:
    if active is None:
        active = set(decls) | set(byzantine) | set(universe or ())
    return new_quorum_system(active, decls, universe=universe, byzantine=byzantine)
