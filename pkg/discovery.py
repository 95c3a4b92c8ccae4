"""
Обнаружение стока графа кворумов.

Фаза 1: процессы обмениваются своими кворумами (Exchange); процесс,
у которого некоторый кворум q объявлен всеми его членами, считает себя
в стоке и рассылает Extend(q). Фаза 2: процесс принимает Extend(q),
если получил его от всех членов q ∩ q′ для некоторого своего кворума q′.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Optional, Set

from qsys import (
    Attack,
    ProcessId,
    Quorum,
    QuorumSystem,
    members,
    minimal_quorums,
    sorted_ids,
    sorted_quorums,
)
from schemas import DiscoveryResults
from signatures import Signature
from sim_kernel import ClientRequest, Context, Node, World

logger = logging.getLogger(__name__)

# (кворум, члены с проверенной подписью Extend) -> допустим ли кворум
ValidQ = Callable[[Quorum, FrozenSet[ProcessId]], bool]


@dataclass(frozen=True)
class Exchange:
    quorums: FrozenSet[Quorum]


@dataclass(frozen=True)
class Extend:
    quorum: Quorum
    sig: Optional[Signature] = None


def extend_payload(q: Quorum):
    return ("extend", frozenset(q))


def oracle_validq(system: QuorumSystem, attack: Attack) -> ValidQ:
    """q допустим, если это минимальный кворум истинной системы"""
    mq = minimal_quorums(system, attack)
    return lambda q, signed: frozenset(q) in mq


def threshold_validq(k: int) -> ValidQ:
    """|q| >= k и хотя бы один член q подписал Extend(q)"""
    return lambda q, signed: len(q) >= max(k, 1) and bool(q & signed)


class SinkDiscovery:
    """Состояние и обработчики обнаружения стока; подмешивается в узлы протоколов"""

    Q: FrozenSet[Quorum]
    pid: ProcessId

    def init_discovery(self, validq: Optional[ValidQ] = None):
        self.qmap: Dict[ProcessId, FrozenSet[Quorum]] = {}
        self.in_sink = False
        self.F: Set[ProcessId] = set()
        self.extend_from: Dict[Quorum, Set[ProcessId]] = defaultdict(set)
        self.extend_signed: Dict[Quorum, Set[ProcessId]] = defaultdict(set)
        self.validq: ValidQ = validq or (lambda q, signed: bool(q))
        self.sent_extend = False
        self.discovered = False

    def on_discover(self, ctx: Context):
        self.discovered = True
        ctx.send_all(members(self.Q), Exchange(frozenset(self.Q)))

    def on_exchange(self, ctx: Context, src: ProcessId, msg: Exchange):
        self.F.add(src)
        self.qmap[src] = frozenset(frozenset(q) for q in msg.quorums)
        self._check_minimal_quorum(ctx)

    def _check_minimal_quorum(self, ctx: Context):
        if self.sent_extend:
            return
        for q in sorted_quorums(self.Q):
            if all(q in self.qmap.get(p, ()) for p in q):
                self.on_mq_found(ctx, q)
                return

    def on_mq_found(self, ctx: Context, q: Quorum):
        self.in_sink = True
        if self.sent_extend:
            return
        self.sent_extend = True
        logger.debug("процесс %s нашёл минимальный кворум %s", self.pid, sorted_ids(q))
        ctx.send_all(members(self.Q), Extend(q, ctx.sign(extend_payload(q))))

    def on_extend(self, ctx: Context, src: ProcessId, msg: Extend):
        q = frozenset(msg.quorum)
        self.extend_from[q].add(src)
        if msg.sig is not None and ctx.verify(msg.sig, src, extend_payload(q)):
            self.extend_signed[q].add(src)
        if self.in_sink:
            return
        if not self.validq(q, frozenset(q & self.extend_signed[q])):
            logger.debug("процесс %s отклонил Extend(%s) от %s: кворум недопустим", self.pid, sorted_ids(q), src)
            return
        senders = self.extend_from[q]
        for q2 in sorted_quorums(self.Q):
            common = q & q2
            if common and common <= senders:
                self.in_sink = True
                return

    def handle_discovery(self, ctx: Context, src: ProcessId, msg) -> bool:
        """True, если сообщение относится к обнаружению стока"""
        if isinstance(msg, Exchange):
            self.on_exchange(ctx, src, msg)
            return True
        if isinstance(msg, Extend):
            self.on_extend(ctx, src, msg)
            return True
        return False


class DiscoveryNode(Node, SinkDiscovery):
    def __init__(self, pid: ProcessId, quorums, validq: Optional[ValidQ] = None):
        super().__init__(pid)
        self.Q = frozenset(frozenset(q) for q in quorums)
        self.init_discovery(validq)

    def on_request(self, ctx: Context, request: ClientRequest):
        if request.op != "discover":
            return super().on_request(ctx, request)
        self.on_discover(ctx)

    def on_message(self, ctx: Context, src: ProcessId, msg):
        if not self.handle_discovery(ctx, src, msg):
            logger.debug("процесс %s проигнорировал %s от %s", self.pid, type(msg).__name__, src)


def proto_sink(world: World) -> FrozenSet[ProcessId]:
    """Корректные процессы с in_sink = true"""
    return frozenset(n.pid for n in world.well_behaved_nodes if getattr(n, "in_sink", False))


def discovery_results(world: World) -> DiscoveryResults:
    in_sink = {}
    followers = {}
    for node in world.well_behaved_nodes:
        if not isinstance(node, SinkDiscovery):
            continue
        in_sink[str(node.pid)] = node.in_sink
        followers[str(node.pid)] = sorted_ids(node.F)
    return DiscoveryResults(in_sink=in_sink, followers=followers)
