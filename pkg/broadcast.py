"""
Надёжная византийская рассылка (Bracha) поверх гетерогенной системы
кворумов: эхо рассылается последователям, Ready по кворуму эхо или по
блокирующему множеству Ready, доставка по кворуму Ready.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Set

from errors import DuplicateInstance
from qsys import ProcessId, Quorum, blocks, normalize, sorted_ids
from sim_kernel import ClientRequest, Context, Node, World

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BrbSend:
    origin: ProcessId
    value: Any


@dataclass(frozen=True)
class BrbEcho:
    origin: ProcessId
    value: Any


@dataclass(frozen=True)
class BrbReady:
    origin: ProcessId
    value: Any


@dataclass
class BrbInstance:
    echoed: Optional[Any] = None
    readied: Optional[Any] = None
    delivered: Optional[Any] = None
    echoes: Dict[Any, Set[ProcessId]] = field(default_factory=lambda: defaultdict(set))
    readies: Dict[Any, Set[ProcessId]] = field(default_factory=lambda: defaultdict(set))

    @property
    def has_echoed(self) -> bool:
        return self.echoed is not None

    @property
    def has_readied(self) -> bool:
        return self.readied is not None

    @property
    def has_delivered(self) -> bool:
        return self.delivered is not None


class BrbNode(Node):
    def __init__(self, pid: ProcessId, quorums: Iterable[Iterable[ProcessId]],
                 followers: Iterable[ProcessId], peers: Iterable[ProcessId]):
        super().__init__(pid)
        self.Q: frozenset = normalize(quorums)
        self.F = frozenset(followers)
        self.peers = frozenset(peers)
        self.instances: Dict[ProcessId, BrbInstance] = defaultdict(BrbInstance)
        self.started: Set[ProcessId] = set()
        self.sent_value: Optional[Any] = None

    @property
    def delivered(self) -> Dict[ProcessId, Any]:
        return {o: inst.delivered for o, inst in self.instances.items() if inst.has_delivered}

    def on_request(self, ctx: Context, request: ClientRequest):
        if request.op != "broadcast":
            return super().on_request(ctx, request)
        self.brb_broadcast(ctx, request.value)

    def brb_broadcast(self, ctx: Context, value: Any):
        if self.pid in self.started:
            raise DuplicateInstance(f"Процесс {self.pid} уже начал рассылку")
        self.started.add(self.pid)
        self.sent_value = value
        ctx.send_all(self.peers, BrbSend(self.pid, value))

    def _quorum_of(self, voters: Set[ProcessId]) -> Optional[Quorum]:
        for q in self.Q:
            if q <= voters:
                return q
        return None

    def on_message(self, ctx: Context, src: ProcessId, msg):
        if isinstance(msg, BrbSend):
            self.on_send(ctx, src, msg)
        elif isinstance(msg, BrbEcho):
            self.on_echo(ctx, src, msg)
        elif isinstance(msg, BrbReady):
            self.on_ready(ctx, src, msg)

    def on_send(self, ctx: Context, src: ProcessId, msg: BrbSend):
        if src != msg.origin:
            logger.debug("процесс %s отклонил Send от %s от имени %s", self.pid, src, msg.origin)
            return
        inst = self.instances[msg.origin]
        if inst.has_echoed:
            return
        inst.echoed = msg.value
        ctx.send_all(self.F, BrbEcho(msg.origin, msg.value))

    def on_echo(self, ctx: Context, src: ProcessId, msg: BrbEcho):
        inst = self.instances[msg.origin]
        inst.echoes[msg.value].add(src)
        if not inst.has_readied and self._quorum_of(inst.echoes[msg.value]) is not None:
            self._ready(ctx, inst, msg.origin, msg.value)

    def on_ready(self, ctx: Context, src: ProcessId, msg: BrbReady):
        inst = self.instances[msg.origin]
        voters = inst.readies[msg.value]
        voters.add(src)
        if not inst.has_readied and self.Q and blocks(self.Q, voters):
            self._ready(ctx, inst, msg.origin, msg.value)
        if not inst.has_delivered and self._quorum_of(voters) is not None:
            inst.delivered = msg.value
            ctx.respond("BrbDeliver", origin=msg.origin, value=msg.value)

    def _ready(self, ctx: Context, inst: BrbInstance, origin: ProcessId, value: Any):
        inst.readied = value
        ctx.send_all(self.F, BrbReady(origin, value))


def deliveries(world: World, origin: ProcessId) -> Dict[ProcessId, Any]:
    out = {}
    for node in world.well_behaved_nodes:
        if isinstance(node, BrbNode) and origin in node.delivered:
            out[node.pid] = node.delivered[origin]
    return {p: out[p] for p in sorted_ids(out)}
