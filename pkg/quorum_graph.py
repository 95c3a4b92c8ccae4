"""
Граф кворумов: ребро (p, p') есть, если p' входит в индивидуальный
минимальный кворум p. Конденсация по сильно связным компонентам и
поиск стоковых компонент.
"""
from dataclasses import dataclass
from typing import FrozenSet, List, Tuple

import networkx as nx

from errors import PreconditionNotVerified, UnknownProcess
from props import check_quorum_sharing, consistency_unchecked
from qsys import Attack, ProcessId, Quorum, QuorumSystem, pid_key, quorum_key, sorted_ids
from schemas import GraphSummary


@dataclass(frozen=True)
class QuorumGraph:
    vertices: Tuple[ProcessId, ...]
    edges: Tuple[Tuple[ProcessId, ProcessId], ...]

    def to_networkx(self) -> nx.DiGraph:
        G = nx.DiGraph()
        G.add_nodes_from(self.vertices)
        G.add_edges_from(self.edges)
        return G


@dataclass(frozen=True)
class Condensation:
    components: Tuple[FrozenSet[ProcessId], ...]
    dag_edges: FrozenSet[Tuple[int, int]]


def build_graph(qs: QuorumSystem, declared_only: bool = False) -> QuorumGraph:
    """declared_only: только процессы с объявленными кворумами и рёбра между ними"""
    vertices = set(qs.declared) if declared_only else set(qs.universe) | set(qs.declared)
    edges = set()
    for p, quorums in qs.quorums.items():
        for q in quorums:
            for p2 in q:
                if declared_only and p2 not in qs.declared:
                    continue
                edges.add((p, p2))
                vertices.add(p2)
    ordered = sorted(edges, key=lambda e: (pid_key(e[0]), pid_key(e[1])))
    return QuorumGraph(vertices=tuple(sorted_ids(vertices)), edges=tuple(ordered))


def condense(g: QuorumGraph) -> Condensation:
    C = nx.condensation(g.to_networkx())
    raw = {n: frozenset(C.nodes[n]["members"]) for n in C.nodes}
    order = sorted(raw, key=lambda n: quorum_key(raw[n]))
    index = {n: i for i, n in enumerate(order)}
    dag_edges = frozenset((index[a], index[b]) for a, b in C.edges)
    return Condensation(components=tuple(raw[n] for n in order), dag_edges=dag_edges)


def sink_components(c: Condensation) -> List[FrozenSet[ProcessId]]:
    sources = {a for a, _ in c.dag_edges}
    return [comp for i, comp in enumerate(c.components) if i not in sources]


def _sinks(qs: QuorumSystem) -> List[FrozenSet[ProcessId]]:
    # процесс без объявления ничего не говорит о своих кворумах и стоком не считается
    return sink_components(condense(build_graph(qs, declared_only=True)))


def in_sink(qs: QuorumSystem, attack: Attack, p: ProcessId, well_behaved_only: bool = False) -> bool:
    if p not in qs.universe and p not in qs.declared:
        raise UnknownProcess(f"Процесс {p} вне универсума")
    if well_behaved_only and p not in attack.well_behaved:
        return False
    return any(p in s for s in _sinks(qs))


def sink_members(qs: QuorumSystem) -> FrozenSet[ProcessId]:
    out = set()
    for s in _sinks(qs):
        out |= s
    return frozenset(out)


def well_behaved_sink(qs: QuorumSystem, attack: Attack) -> FrozenSet[ProcessId]:
    return sink_members(qs) & attack.well_behaved


def is_min_quorum_by_agreement(qs: QuorumSystem, attack: Attack, q: Quorum) -> bool:
    """q минимален, если его объявил каждый корректный член q"""
    if not consistency_unchecked(qs, attack.well_behaved, attack.well_behaved).holds:
        raise PreconditionNotVerified("Система не согласована на 𝓦")
    if not check_quorum_sharing(qs).holds:
        raise PreconditionNotVerified("Система не обладает разделением кворумов")
    q = frozenset(q)
    return all(q in qs.quorums_of(p) for p in q & attack.well_behaved)


def to_dot(qs: QuorumSystem, attack: Attack) -> str:
    g = build_graph(qs)
    sinks = sink_members(qs)
    lines = ["digraph quorum_graph {"]
    for v in g.vertices:
        styles = []
        if v in attack.byzantine:
            styles.append("dashed")
        if v in sinks:
            styles.append("filled")
        attrs = f' [style="{",".join(styles)}"]' if styles else ""
        lines.append(f'  "{v}"{attrs};')
    for a, b in g.edges:
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_summary(qs: QuorumSystem, attack: Attack) -> GraphSummary:
    g = build_graph(qs)
    c = condense(build_graph(qs, declared_only=True))
    sinks = sink_components(c)
    return GraphSummary(
        vertices=list(g.vertices),
        edges=[list(e) for e in g.edges],
        components=[sorted_ids(comp) for comp in c.components],
        sinks=[sorted_ids(s) for s in sinks],
        well_behaved_sink=sorted_ids(well_behaved_sink(qs, attack)),
        unique_sink=len(sinks) == 1,
    )
