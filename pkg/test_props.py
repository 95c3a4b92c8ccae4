import itertools

import pytest
from hypothesis import given, settings

from conftest import TEST_SYSTEMS, build_system, outlived_systems, quorum_systems
from errors import BadSubset, PreconditionViolated, TooLarge
from props import (
    blocking_sets,
    check_active_availability,
    check_active_inclusion,
    check_availability,
    check_available_inside,
    check_consistency,
    check_for_attacks,
    check_outlived,
    check_policies,
    check_quorum_inclusion,
    check_quorum_sharing,
    check_tentative_inclusion,
    consistency_unchecked,
    enumeration_report,
    maximal_outlived_sets,
)
from qsys import Attack, ReconfigOp, apply_reconfig, is_blocking, minimal_quorums
from schemas import Property


def fs(*ids):
    return frozenset(ids)


def test_silent_member_consistency(silent_member):
    qs, attack = silent_member
    report = check_consistency(qs, attack, attack.well_behaved)
    assert report.holds
    assert report.property == Property.CONSISTENCY


def test_silent_member_availability(silent_member):
    qs, attack = silent_member
    report = check_availability(qs, [1], attack.well_behaved)
    assert not report.holds
    assert report.witness.member == 1
    assert check_available_inside(qs, {2, 3, 5}).holds


def test_silent_member_inclusion_and_sharing(silent_member):
    qs, attack = silent_member
    assert check_quorum_inclusion(qs, attack, attack.well_behaved).holds
    # 4 молчит: его кворумов нет, поэтому {1,2,4} не разделяется
    assert not check_quorum_sharing(qs).holds


def test_silent_member_outlived(silent_member):
    qs, attack = silent_member
    assert check_outlived(qs, attack, {2, 3, 5}).holds
    report = check_outlived(qs, attack, {1, 2, 3, 5})
    assert not report.holds
    assert report.witness.note == Property.AVAILABLE_INSIDE.value
    assert maximal_outlived_sets(qs, attack) == [fs(2, 3, 5)]


def test_inclusion_broken_by_add(silent_member):
    qs, attack = silent_member
    after = apply_reconfig(qs, ReconfigOp.add(3, [3, 5]))
    report = check_quorum_inclusion(after, attack, attack.well_behaved)
    assert not report.holds
    assert report.witness.processes == [3, 5]
    assert report.witness.quorums == [[3, 5]]
    assert report.witness.member == 5


def test_active_inclusion_skips_left():
    qs = build_system({1: [[1, 2]], 2: [[1, 2, 3]], 3: [[1, 2, 3]]})
    attack = Attack(fs(), qs.universe)
    assert not check_active_inclusion(qs, attack, {1, 2}, left=set()).holds
    assert check_active_inclusion(qs, attack, {1, 2}, left={3}).holds
    assert not check_quorum_inclusion(qs, attack, {1, 2}).holds


def test_active_availability():
    qs = build_system({1: [[1, 3]], 2: [[2, 3]], 3: [[3]]})
    assert not check_available_inside(qs, {1, 2}).holds
    assert check_active_availability(qs, {1, 2}, left={3}).holds


def test_tentative_inclusion_accepts_pending_quorum():
    qs = build_system({1: [[1, 2]], 2: [[2, 3]], 3: [[2, 3]]})
    attack = Attack(fs(), qs.universe)
    assert not check_quorum_inclusion(qs, attack, {1, 2, 3}).holds
    tentative = {2: {(2, fs(1, 2))}}
    assert check_tentative_inclusion(qs, attack, {1, 2, 3}, tentative).holds


def test_attack_reconfiguration_pair():
    qs = build_system({1: [[1, 2, 4]], 2: [[1, 2], [2, 3]], 3: [[2, 3]]}, byzantine=[4], universe=[1, 2, 3, 4])
    attack = Attack(fs(4), qs.universe)
    W = attack.well_behaved

    add_2 = apply_reconfig(qs, ReconfigOp.add(2, [2, 4]))
    add_3 = apply_reconfig(qs, ReconfigOp.add(3, [1, 3]))
    assert check_consistency(add_2, attack, W).holds
    assert check_consistency(add_3, attack, W).holds

    both = apply_reconfig(add_2, ReconfigOp.add(3, [1, 3]))
    report = check_consistency(both, attack, W)
    assert not report.holds
    assert report.witness.processes == [2, 3]
    assert report.witness.quorums == [[2, 4], [1, 3]]


def test_consistency_rejects_byzantine_subset(silent_member):
    qs, attack = silent_member
    with pytest.raises(BadSubset):
        check_consistency(qs, attack, {2, 4})
    with pytest.raises(BadSubset):
        check_outlived(qs, attack, {4})


def test_check_for_attacks(tail_sink):
    qs, attack = tail_sink
    assert check_for_attacks(check_consistency, qs, [attack], attack.well_behaved).holds
    with pytest.raises(PreconditionViolated):
        check_for_attacks(check_consistency, qs, [], attack.well_behaved)


def test_check_for_attacks_stops_at_first_failure():
    qs = build_system({1: [[1, 2]], 2: [[2, 3]], 3: [[2, 3]]})
    first = Attack(fs(), qs.universe)
    second = Attack(fs(2), qs.universe)
    report = check_for_attacks(lambda q, a: check_consistency(q, a, a.well_behaved), qs, [first, second])
    assert not report.holds


def test_blocking_sets(silent_member):
    qs, _ = silent_member
    assert blocking_sets(qs, 2, 1) == [fs(2)]
    assert blocking_sets(qs, 2, 0) == []
    assert fs(1, 3) not in blocking_sets(qs, 2, 2)
    assert blocking_sets(qs, 1, 1) == [fs(1), fs(2), fs(4)]


def test_policies(silent_member):
    qs, _ = silent_member
    declared = dict(qs.quorums)
    assert check_policies(qs, declared).holds
    after = apply_reconfig(qs, ReconfigOp.add(3, [3, 5]))
    report = check_policies(after, declared)
    assert not report.holds
    assert report.witness.member == 3
    assert check_policies(after, declared, processes=[1, 2]).holds


def test_maximal_outlived_bound(silent_member):
    qs, attack = silent_member
    with pytest.raises(TooLarge):
        maximal_outlived_sets(qs, attack, size_bound=2)


def test_enumeration_report(tail_sink):
    qs, attack = tail_sink
    report = enumeration_report(qs, attack, k=1)
    assert report.minimal_quorums == [[1, 2], [1, 3, 5]]
    assert report.blocking_sets["1"] == [[1]]
    assert report.blocking_sets["2"] == [[1], [2]]


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_minimal_quorums_cover_declarations(system):
    qs, attack = system
    mq = minimal_quorums(qs, attack)
    declared = {q for p in attack.well_behaved & qs.declared for q in qs.quorums_of(p)}
    assert mq <= declared
    for q in declared:
        assert any(m <= q for m in mq)


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_consistency_reduces_to_minimal_quorums(system):
    qs, attack = system
    W = attack.well_behaved
    mq = minimal_quorums(qs, attack)
    pairwise = all(q & q2 & W for q, q2 in itertools.product(mq, repeat=2))
    assert check_consistency(qs, attack, W).holds == pairwise


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_generated_systems_share_and_intersect(system):
    qs, attack = system
    assert check_quorum_sharing(qs).holds
    assert check_consistency(qs, attack, attack.well_behaved).holds


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(outlived_systems())
def test_blocking_sets_meet_available_set(system):
    qs, attack = system
    P = attack.well_behaved
    assert check_outlived(qs, attack, P).holds
    universe = sorted(qs.universe)
    for p in sorted(P):
        for size in range(len(universe) + 1):
            for combo in itertools.combinations(universe, size):
                blocking = frozenset(combo)
                if is_blocking(qs, p, blocking):
                    assert blocking & P


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(outlived_systems())
def test_unchecked_consistency_matches_checked(system):
    qs, attack = system
    W = attack.well_behaved
    assert consistency_unchecked(qs, W, W).holds == check_consistency(qs, attack, W).holds
