import logging

import pytest

from conftest import build_system
from errors import EmptyDeclaration, EmptyQuorum, PreconditionViolated, UnknownMember, UnknownProcess
from qsys import (
    ReconfigOp,
    apply_reconfig,
    dumps_system,
    followers,
    is_active_blocking,
    is_blocking,
    is_system_quorum,
    loads_system,
    minimal_quorums,
    normalize,
    sorted_ids,
    to_file_model,
)


def fs(*ids):
    return frozenset(ids)


def test_minimal_quorums_silent_member(silent_member):
    qs, attack = silent_member
    assert minimal_quorums(qs, attack) == {fs(1, 2), fs(2, 3), fs(2, 5)}


def test_minimal_quorums_tail_sink(tail_sink):
    qs, attack = tail_sink
    assert minimal_quorums(qs, attack) == {fs(1, 2), fs(1, 3, 5)}


def test_normalize_drops_supersets():
    assert normalize([[1, 2], [1, 2, 3], [2, 3]]) == {fs(1, 2), fs(2, 3)}


def test_empty_quorum_rejected():
    with pytest.raises(EmptyQuorum):
        build_system({1: [[]]})


def test_member_outside_universe_rejected():
    with pytest.raises(UnknownMember):
        build_system({1: [[1, 9]]}, universe=[1, 2])


def test_well_behaved_active_process_needs_quorums():
    with pytest.raises(EmptyDeclaration):
        build_system({1: [[1, 2]]}, active=[1, 2], universe=[1, 2])


def test_declaration_of_inactive_process_rejected():
    with pytest.raises(UnknownProcess):
        build_system({1: [[1]], 2: [[1, 2]]}, active=[1], universe=[1, 2])


def test_byzantine_process_may_stay_undeclared():
    qs = build_system({1: [[1, 2]]}, byzantine=[2], universe=[1, 2])
    assert qs.declared == {1}


def test_quorum_without_owner_is_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="qsys"):
        build_system({1: [[2]], 2: [[2]]})
    assert any("не входит в свой кворум" in r.getMessage() for r in caplog.records)


def test_blocking(silent_member):
    qs, _ = silent_member
    assert is_blocking(qs, 2, {2})
    assert not is_blocking(qs, 2, {1})
    assert is_blocking(qs, 2, {1, 3, 5})


def test_blocking_unknown_process(silent_member):
    qs, _ = silent_member
    with pytest.raises(UnknownProcess):
        is_blocking(qs, 9, {1})


def test_active_blocking_ignores_left_members(silent_member):
    qs, _ = silent_member
    assert is_blocking(qs, 2, {1, 3, 5})
    assert not is_active_blocking(qs, 2, {3, 5}, left={1})
    assert is_active_blocking(qs, 2, {2}, left={1})


def test_followers(silent_member):
    qs, _ = silent_member
    assert followers(qs, 2) == {1, 2, 3, 5}
    assert followers(qs, 4) == {1}
    assert followers(qs, 3) == {2, 3}


def test_system_quorum(silent_member):
    qs, attack = silent_member
    assert is_system_quorum(qs, attack, {1, 2, 3})
    assert not is_system_quorum(qs, attack, {1, 3, 5})


def test_sorted_ids_mixed():
    assert sorted_ids([3, "b", 1, "a"]) == [1, 3, "a", "b"]


def test_apply_leave(silent_member):
    qs, _ = silent_member
    after = apply_reconfig(qs, ReconfigOp.leave(5))
    assert 5 not in after.active
    assert 5 not in after.declared
    assert 5 in qs.active


def test_apply_add_and_remove(silent_member):
    qs, _ = silent_member
    after = apply_reconfig(qs, ReconfigOp.add(3, [3, 5]))
    assert after.quorums_of(3) == {fs(2, 3), fs(3, 5)}
    back = apply_reconfig(after, ReconfigOp.remove(3, [3, 5]))
    assert back.quorums_of(3) == {fs(2, 3)}


def test_remove_last_quorum_rejected(silent_member):
    qs, _ = silent_member
    with pytest.raises(PreconditionViolated):
        apply_reconfig(qs, ReconfigOp.remove(3, [2, 3]))


def test_remove_foreign_quorum_rejected(silent_member):
    qs, _ = silent_member
    with pytest.raises(PreconditionViolated):
        apply_reconfig(qs, ReconfigOp.remove(2, [3, 5]))


def test_apply_join(silent_member):
    qs, _ = silent_member
    after = apply_reconfig(qs, ReconfigOp.join(6, [[2, 6]]))
    assert 6 in after.active
    assert after.quorums_of(6) == {fs(2, 6)}
    with pytest.raises(PreconditionViolated):
        apply_reconfig(after, ReconfigOp.join(6, [[2, 6]]))


def test_operation_on_inactive_process(silent_member):
    qs, _ = silent_member
    with pytest.raises(PreconditionViolated):
        apply_reconfig(qs, ReconfigOp.leave(7))


def test_system_file_round_trip(tail_sink):
    qs, attack = tail_sink
    text = dumps_system(qs, attack)
    assert loads_system(text) == (qs, attack)
    assert to_file_model(qs, attack).byzantine == [5]


def test_string_process_ids():
    qs, attack = loads_system(
        '{"universe": ["a", "b", "c"], "quorums": {"a": [["a", "b"]], "b": [["a", "b"]], "c": [["b", "c"]]}}'
    )
    assert qs.quorums_of("a") == {fs("a", "b")}
    assert minimal_quorums(qs, attack) == {fs("a", "b"), fs("b", "c")}
