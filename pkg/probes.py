"""
Библиотека именованных проверок инвариантов над работающим миром.
Проверка возвращает None, если свойство выполнено, иначе словарь-свидетель.
"""
from typing import Any, Callable, Dict, FrozenSet, Optional

from broadcast import BrbNode, deliveries
from discovery import SinkDiscovery, proto_sink
from errors import ScenarioError
from props import (
    check_active_availability,
    check_active_inclusion,
    check_availability,
    check_available_inside,
    check_consistency,
    check_policies,
    check_quorum_inclusion,
    check_tentative_inclusion,
)
from qsys import Attack, ProcessId, QuorumSystem, followers, minimal_quorums, quorum_key, sorted_ids, sorted_quorums
from quorum_graph import sink_members
from reconfig import ReconfigNode, ledgers, left_processes, snapshot, tentative_map
from schemas import ProbeSpec, PropertyReport
from sim_kernel import Probe, World

ProbeFn = Callable[[World], Optional[Dict[str, Any]]]


def _witness(report: PropertyReport) -> Optional[Dict[str, Any]]:
    if report.holds:
        return None
    out = {"property": report.property.value}
    if report.witness is not None:
        out.update(report.witness.model_dump(exclude_none=True))
    return out


def _attack(world: World, qs: QuorumSystem) -> Attack:
    return Attack(world.attack.byzantine, qs.universe | world.attack.universe)


def _outlived_left(world: World) -> FrozenSet[ProcessId]:
    return world.outlived - left_processes(world)


# Проверки на каждом шаге
def consistency_outlived_left(world: World, **_):
    qs = snapshot(world)
    return _witness(check_consistency(qs, _attack(world, qs), _outlived_left(world)))


def consistency_outlived(world: World, **_):
    qs = snapshot(world)
    return _witness(check_consistency(qs, _attack(world, qs), world.outlived))


def consistency_well_behaved(world: World, **_):
    qs = snapshot(world)
    attack = _attack(world, qs)
    return _witness(check_consistency(qs, attack, attack.well_behaved))


def active_inclusion(world: World, **_):
    qs = snapshot(world)
    return _witness(check_active_inclusion(qs, _attack(world, qs), world.outlived, left_processes(world)))


def active_availability(world: World, **_):
    return _witness(check_active_availability(snapshot(world), world.outlived, left_processes(world)))


def tentative_inclusion(world: World, **_):
    qs = snapshot(world)
    return _witness(check_tentative_inclusion(qs, _attack(world, qs), world.outlived, tentative_map(world)))


def availability_kept(world: World, **_):
    """Процесс из 𝓞, имевший кворум внутри 𝓞, не теряет его"""
    qs = snapshot(world)
    O = world.outlived
    for p in sorted_ids(O & world.system.declared):
        had = any(q <= O for q in world.system.quorums_of(p))
        if had and p in qs.quorums and not any(q <= O for q in qs.quorums_of(p)):
            return {"property": "AvailabilityKept", "processes": [p], "member": p}
    return None


def policy(world: World, processes=None, **_):
    scope = processes if processes is not None else [n.pid for n in world.well_behaved_nodes]
    return _witness(check_policies(snapshot(world), ledgers(world), scope))


def success_fail_exclusion(world: World, **_):
    nodes = [n for n in world.well_behaved_nodes if isinstance(n, ReconfigNode)]
    succeeded = {k for n in nodes for k, v in n.succeeded.items() if v}
    failed = {k for n in nodes for k in n.fail_done}
    both = succeeded & failed
    if not both:
        return None
    requester, q_c = sorted(both, key=lambda k: (str(k[0]), sorted_ids(k[1])))[0]
    return {"property": "SuccessFailExclusion", "processes": [requester], "quorums": [sorted_ids(q_c)]}


def brb_consistency(world: World, **_):
    values: Dict[ProcessId, Dict[Any, ProcessId]] = {}
    for node in world.well_behaved_nodes:
        if not isinstance(node, BrbNode):
            continue
        for origin, value in node.delivered.items():
            seen = values.setdefault(origin, {})
            seen.setdefault(value, node.pid)
            if len(seen) > 1:
                return {"property": "BrbConsistency", "origin": origin,
                        "processes": sorted_ids(seen.values())}
    return None


def brb_integrity(world: World, **_):
    for node in world.well_behaved_nodes:
        if not isinstance(node, BrbNode):
            continue
        for origin, value in node.delivered.items():
            sender = world.nodes.get(origin)
            if isinstance(sender, BrbNode) and sender.sent_value != value:
                return {"property": "BrbIntegrity", "origin": origin, "processes": [node.pid]}
    return None


def sink_accuracy(world: World, **_):
    stray = proto_sink(world) - sink_members(world.system)
    if stray:
        return {"property": "SinkAccuracy", "processes": sorted_ids(stray)}
    return None


# Проверки в состоянии покоя
def inclusion_final(world: World, **_):
    qs = snapshot(world)
    return _witness(check_quorum_inclusion(qs, _attack(world, qs), _outlived_left(world)))


def inclusion_outlived_final(world: World, **_):
    qs = snapshot(world)
    return _witness(check_quorum_inclusion(qs, _attack(world, qs), world.outlived))


def availability_final(world: World, **_):
    return _witness(check_available_inside(snapshot(world), _outlived_left(world)))


def available_at(world: World, processes=(), **_):
    """Доступность заданных процессов на 𝓦 ∖ 𝓛"""
    qs = snapshot(world)
    at = world.attack.well_behaved - left_processes(world)
    return _witness(check_availability(qs, processes, at))


def brb_validity(world: World, origin=None, **_):
    sender = world.nodes.get(origin)
    if not isinstance(sender, BrbNode) or sender.sent_value is None:
        return None
    got = deliveries(world, origin)
    missing = [p for p in sorted_ids(world.outlived) if got.get(p) != sender.sent_value]
    if missing:
        return {"property": "BrbValidity", "origin": origin, "processes": missing}
    return None


def brb_totality(world: World, origin=None, **_):
    origins = [origin] if origin is not None else sorted_ids(
        {o for n in world.well_behaved_nodes if isinstance(n, BrbNode) for o in n.delivered})
    for o in origins:
        got = deliveries(world, o)
        if not got:
            continue
        missing = [p for p in sorted_ids(world.outlived) if p not in got]
        if missing:
            return {"property": "BrbTotality", "origin": o, "processes": missing}
    return None


def sink_completeness(world: World, **_):
    sink = proto_sink(world)
    W = world.attack.well_behaved
    for q in sorted(minimal_quorums(world.system, world.attack), key=quorum_key):
        missing = (q & W) - sink
        if missing:
            return {"property": "SinkCompleteness", "quorums": [sorted_ids(q)], "processes": sorted_ids(missing)}
    return None


def followers_known(world: World, **_):
    ran = {n.pid for n in world.well_behaved_nodes
           if isinstance(n, SinkDiscovery) and n.discovered}
    W = world.attack.well_behaved
    for node in world.well_behaved_nodes:
        if not isinstance(node, SinkDiscovery):
            continue
        expected = followers(world.system, node.pid) & W & ran
        missing = expected - node.F
        if missing:
            return {"property": "Followers", "member": node.pid, "processes": sorted_ids(missing)}
    return None


def join_preservation(world: World, **_):
    system = world.system
    for node in world.well_behaved_nodes:
        if not isinstance(node, ReconfigNode):
            continue
        if node.pid in system.declared and node.active and node.Q != system.quorums_of(node.pid):
            return {"property": "JoinPreservation", "member": node.pid, "note": "quorums changed"}
        if node.pid in system.active or not node.active:
            continue
        qs = snapshot(world)
        for q in sorted_quorums(node.Q):
            for p in sorted_ids(q & qs.declared):
                if not any(q2 <= q for q2 in qs.quorums_of(p)):
                    return {"property": "JoinPreservation", "member": p, "quorums": [sorted_ids(q)]}
    return None


PROBES: Dict[str, tuple] = {
    "consistency_outlived_left": (consistency_outlived_left, "step"),
    "consistency_outlived": (consistency_outlived, "step"),
    "consistency_well_behaved": (consistency_well_behaved, "step"),
    "active_inclusion": (active_inclusion, "step"),
    "active_availability": (active_availability, "step"),
    "tentative_inclusion": (tentative_inclusion, "step"),
    "availability_kept": (availability_kept, "step"),
    "policy": (policy, "step"),
    "success_fail_exclusion": (success_fail_exclusion, "step"),
    "brb_consistency": (brb_consistency, "step"),
    "brb_integrity": (brb_integrity, "step"),
    "sink_accuracy": (sink_accuracy, "step"),
    "inclusion_final": (inclusion_final, "final"),
    "inclusion_outlived_final": (inclusion_outlived_final, "final"),
    "availability_final": (availability_final, "final"),
    "available_at": (available_at, "final"),
    "brb_validity": (brb_validity, "final"),
    "brb_totality": (brb_totality, "final"),
    "sink_completeness": (sink_completeness, "final"),
    "followers": (followers_known, "final"),
    "join_preservation": (join_preservation, "final"),
}


def make_probe(spec: ProbeSpec) -> Probe:
    entry = PROBES.get(spec.name)
    if entry is None:
        raise ScenarioError(f"Неизвестная проверка: {spec.name}")
    fn, when = entry
    args = dict(spec.args)
    return Probe(name=spec.name, fn=lambda world: fn(world, **args), when=when, expect=spec.expect)
