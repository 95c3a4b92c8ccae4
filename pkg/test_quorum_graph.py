import networkx as nx
import pytest
from hypothesis import given, settings

from conftest import TEST_SYSTEMS, build_system, quorum_systems
from errors import PreconditionNotVerified, UnknownProcess
from props import check_consistency
from qsys import Attack, ReconfigOp, apply_reconfig, minimal_quorums
from quorum_graph import (
    build_graph,
    condense,
    graph_summary,
    in_sink,
    is_min_quorum_by_agreement,
    sink_components,
    sink_members,
    to_dot,
    well_behaved_sink,
)


def fs(*ids):
    return frozenset(ids)


def test_tail_sink_edges(tail_sink):
    qs, _ = tail_sink
    edges = set(build_graph(qs).edges)
    assert {(4, 1), (4, 2), (6, 1), (6, 2)} <= edges
    assert {(1, 2), (2, 1), (1, 3), (3, 5), (5, 1)} <= edges
    assert (1, 4) not in edges


def test_tail_sink_condensation(tail_sink):
    qs, _ = tail_sink
    c = condense(build_graph(qs))
    assert set(c.components) == {fs(1, 2, 3, 5), fs(4), fs(6)}
    index = {comp: i for i, comp in enumerate(c.components)}
    assert c.dag_edges == {(index[fs(4)], index[fs(1, 2, 3, 5)]), (index[fs(6)], index[fs(1, 2, 3, 5)])}
    assert sink_components(c) == [fs(1, 2, 3, 5)]


def test_tail_sink_sink(tail_sink):
    qs, attack = tail_sink
    assert in_sink(qs, attack, 3)
    assert not in_sink(qs, attack, 6)
    assert in_sink(qs, attack, 5)
    assert not in_sink(qs, attack, 5, well_behaved_only=True)
    assert well_behaved_sink(qs, attack) == {1, 2, 3}


def test_silent_byzantine_process_is_not_a_sink(silent_member):
    qs, attack = silent_member
    assert sink_members(qs) == {1, 2, 3, 5}
    summary = graph_summary(qs, attack)
    assert summary.unique_sink
    assert 4 in summary.vertices
    assert [1, 4] in summary.edges


def test_in_sink_unknown_process(tail_sink):
    qs, attack = tail_sink
    with pytest.raises(UnknownProcess):
        in_sink(qs, attack, 42)


def test_two_cliques_have_two_sinks():
    qs = build_system({1: [[1, 2]], 2: [[1, 2]], 3: [[3, 4]], 4: [[3, 4]]})
    summary = graph_summary(qs, qs.attack())
    assert summary.sinks == [[1, 2], [3, 4]]
    assert not summary.unique_sink


def test_complete_graph_is_one_component():
    qs = build_system({p: [[1, 2, 3]] for p in (1, 2, 3)})
    c = condense(build_graph(qs))
    assert c.components == (fs(1, 2, 3),)
    assert not c.dag_edges


def test_min_quorum_by_agreement(tail_sink):
    qs, attack = tail_sink
    assert is_min_quorum_by_agreement(qs, attack, fs(1, 2))
    assert is_min_quorum_by_agreement(qs, attack, fs(1, 3, 5))
    assert not is_min_quorum_by_agreement(qs, attack, fs(1, 2, 4))


def test_min_quorum_by_agreement_needs_sharing(silent_member):
    qs, attack = silent_member
    with pytest.raises(PreconditionNotVerified):
        is_min_quorum_by_agreement(qs, attack, fs(1, 2))


def test_dot_export(tail_sink):
    qs, attack = tail_sink
    dot = to_dot(qs, attack)
    assert dot.startswith("digraph quorum_graph {")
    assert '"5" [style="dashed,filled"];' in dot
    assert '"6";' in dot
    assert '"4" -> "1";' in dot
    assert to_dot(qs, attack) == dot


def test_dot_self_loop():
    qs = build_system({1: [[1]]})
    assert '"1" -> "1";' in to_dot(qs, qs.attack())


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_unique_sink(system):
    qs, _ = system
    assert len(sink_components(condense(build_graph(qs)))) == 1


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_minimal_quorums_inside_sink(system):
    qs, attack = system
    sink = well_behaved_sink(qs, attack)
    for q in minimal_quorums(qs, attack):
        assert q & attack.well_behaved <= sink


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_minimal_quorum_is_clique(system):
    qs, attack = system
    edges = set(build_graph(qs).edges)
    for q in minimal_quorums(qs, attack):
        for p in q & attack.well_behaved:
            for p2 in q:
                assert (p, p2) in edges


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_well_behaved_point_into_minimal_quorum(system):
    qs, attack = system
    edges = set(build_graph(qs).edges)
    mq = minimal_quorums(qs, attack)
    for p in attack.well_behaved & qs.declared:
        assert any(all((p, p2) in edges for p2 in q) for q in mq)


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_minimal_quorum_members_strongly_connected(system):
    qs, attack = system
    G = build_graph(qs).to_networkx()
    members = set()
    for q in minimal_quorums(qs, attack):
        members |= q & attack.well_behaved
    for a in members:
        for b in members:
            assert nx.has_path(G, a, b)


@settings(max_examples=TEST_SYSTEMS, deadline=None)
@given(quorum_systems())
def test_leaving_outside_sink_keeps_consistency(system):
    qs, attack = system
    W = attack.well_behaved
    sink = sink_members(qs)
    for p in sorted(qs.active - sink):
        after = apply_reconfig(qs, ReconfigOp.leave(p))
        assert check_consistency(after, attack, W).holds
        for q in sorted(qs.quorums_of(p), key=sorted)[:-1]:
            after = apply_reconfig(qs, ReconfigOp.remove(p, q))
            assert check_consistency(after, attack, W).holds


def test_attack_of_undeclared_universe():
    qs = build_system({1: [[1, 2]], 2: [[1, 2]]}, byzantine=[3], universe=[1, 2, 3])
    attack = Attack(fs(3), qs.universe)
    assert well_behaved_sink(qs, attack) == {1, 2}
