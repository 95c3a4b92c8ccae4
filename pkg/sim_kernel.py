"""
Детерминированный дискретно-событийный мир: аутентифицированные каналы
(APL), оракул тотального порядка (TOB), подписи, византийский противник,
таймеры в шагах, проверки инвариантов и трасса в формате JSON lines.
"""
import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional

from config import FAIRNESS_BOUND, STEP_CAP
from errors import ForgedSender, ForgedSigner, HqsError, ScenarioError, StepCapExceeded
from qsys import Attack, ProcessId, Quorum, QuorumSystem, sorted_ids, to_jsonable
from signatures import Signature, SignatureRegistry

logger = logging.getLogger(__name__)


class ScheduleMode(str, Enum):
    RANDOM_FAIR = "RandomFair"
    ADVERSARIAL_REORDER = "AdversarialReorder"
    SCRIPTED = "ScriptedInterleaving"


class TobLiveness(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class Outcome(str, Enum):
    QUIESCENT = "quiescent"
    STEP_CAP = "step_cap_exceeded"


# Окно, из которого AdversarialReorder выбирает самое свежее событие
REORDER_WINDOW = 3


@dataclass(frozen=True)
class SchedulePolicy:
    seed: int = 0
    mode: ScheduleMode = ScheduleMode.RANDOM_FAIR
    fairness_bound: int = FAIRNESS_BOUND
    script: tuple = ()


@dataclass(frozen=True)
class ClientRequest:
    op: str
    quorum: Optional[Quorum] = None
    ps: Optional[FrozenSet[ProcessId]] = None
    value: Optional[str] = None


@dataclass
class Event:
    eid: int
    kind: str  # deliver | tob | request | timer
    dst: ProcessId
    src: Optional[ProcessId]
    payload: Any
    enqueued: int
    forced: bool
    not_before: int = 0


@dataclass
class Probe:
    """Именованный предикат над миром: fn возвращает None, если свойство выполнено"""
    name: str
    fn: Callable[["World"], Optional[Dict[str, Any]]]
    when: str = "step"  # step | final
    expect: str = "hold"
    violated: bool = False
    count: int = 0
    first_step: Optional[int] = None
    witness: Optional[Dict[str, Any]] = None


@dataclass
class Response:
    step: int
    process: ProcessId
    kind: str
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass
class Trace:
    events: List[Dict[str, Any]]
    outcome: Outcome
    steps: int

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, ensure_ascii=False) + "\n" for e in self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def raise_for_outcome(self):
        if self.outcome == Outcome.STEP_CAP:
            raise StepCapExceeded(f"Достигнут предел шагов ({self.steps})")


class Node:
    """Корректный процесс. Обработчики вызываются ядром по одному"""

    def __init__(self, pid: ProcessId):
        self.pid = pid
        self.frozen = False

    def on_message(self, ctx: "Context", src: ProcessId, msg: Any):
        pass

    def on_tob(self, ctx: "Context", src: ProcessId, msg: Any):
        pass

    def on_request(self, ctx: "Context", request: ClientRequest):
        raise ScenarioError(f"Процесс {self.pid} не поддерживает запрос {request.op}")

    def on_timer(self, ctx: "Context", name: str):
        pass


class Adversary:
    """Сценарий противника: управляет всеми византийскими процессами"""

    def on_start(self, actx: "AdversaryContext"):
        pass

    def on_deliver(self, actx: "AdversaryContext", dst: ProcessId, src: ProcessId, msg: Any):
        pass

    def on_tob(self, actx: "AdversaryContext", src: ProcessId, msg: Any):
        pass


class Context:
    """Возможности узла pid во время обработки одного события"""

    def __init__(self, world: "World", pid: ProcessId):
        self._world = world
        self.pid = pid

    @property
    def step(self) -> int:
        return self._world.now

    def send(self, dst: ProcessId, msg: Any):
        self._world._apl_send(self.pid, dst, msg)

    def send_all(self, dsts: Iterable[ProcessId], msg: Any):
        for dst in sorted_ids(dsts):
            self.send(dst, msg)

    def tob_broadcast(self, msg: Any):
        self._world._tob_broadcast(self.pid, msg)

    def sign(self, payload: Any) -> Signature:
        return self._world._sign(self.pid, payload)

    def verify(self, sig: Any, signer: ProcessId, payload: Any) -> bool:
        return self._world.registry.verify(sig, signer, payload)

    def respond(self, kind: str, **detail):
        self._world._respond(self.pid, kind, detail)

    def set_timer(self, delay: int, name: str):
        self._world._set_timer(self.pid, delay, name)

    def freeze(self):
        self._world._freeze(self.pid)


class AdversaryContext:
    def __init__(self, world: "World"):
        self._world = world

    @property
    def step(self) -> int:
        return self._world.now

    @property
    def byzantine(self) -> FrozenSet[ProcessId]:
        return self._world.attack.byzantine

    @property
    def rng(self) -> random.Random:
        return self._world.rng

    @property
    def world(self) -> "World":
        return self._world

    def send(self, src: ProcessId, dst: ProcessId, msg: Any):
        if src not in self._world.attack.byzantine:
            raise ForgedSender(f"Противник не может отправлять от имени корректного процесса {src}")
        self._world._apl_send(src, dst, msg)

    def tob_broadcast(self, src: ProcessId, msg: Any):
        if src not in self._world.attack.byzantine:
            raise ForgedSender(f"Противник не может рассылать от имени корректного процесса {src}")
        self._world._tob_broadcast(src, msg)

    def sign(self, signer: ProcessId, payload: Any) -> Signature:
        if signer not in self._world.attack.byzantine:
            raise ForgedSigner(f"Противник не может подписать за корректный процесс {signer}")
        return self._world._sign(signer, payload)

    def verify(self, sig: Any, signer: ProcessId, payload: Any) -> bool:
        return self._world.registry.verify(sig, signer, payload)


class World:
    def __init__(
        self,
        system: QuorumSystem,
        attack: Attack,
        policy: SchedulePolicy = SchedulePolicy(),
        adversary: Optional[Adversary] = None,
        step_cap: int = STEP_CAP,
        outlived: Iterable[ProcessId] = (),
        tob_liveness: TobLiveness = TobLiveness.STATIC,
        registry: Optional[SignatureRegistry] = None,
    ):
        if step_cap <= 0:
            raise ScenarioError("step_cap должен быть положительным")
        self.system = system
        self.attack = attack
        self.policy = policy
        self.adversary = adversary or Adversary()
        self.step_cap = step_cap
        self.outlived = frozenset(outlived)
        self.tob_liveness = tob_liveness
        self.registry = registry or SignatureRegistry()
        self.rng = random.Random(policy.seed)

        self.nodes: Dict[ProcessId, Node] = {}
        self.probes: List[Probe] = []
        self.responses: List[Response] = []
        self.trace: List[Dict[str, Any]] = []
        self.tob_log: List[tuple] = []
        self.signed = set()
        self.now = 0
        self.outcome: Optional[Outcome] = None

        self._pending: List[Event] = []
        self._eid = 0
        self._script_pos = 0
        self._tob_cursor: Dict[ProcessId, int] = {}
        self._tob_pending = set()

    # Регистрация
    def add_node(self, node: Node):
        if node.pid in self.attack.byzantine:
            raise ScenarioError(f"Процесс {node.pid} византийский и управляется противником")
        self.nodes[node.pid] = node
        self._tob_cursor[node.pid] = 0

    def add_probe(self, probe: Probe):
        self.probes.append(probe)

    def schedule_request(self, pid: ProcessId, request: ClientRequest, at_step: int = 0):
        if pid not in self.nodes:
            raise ScenarioError(f"Запрос {request.op} для неизвестного корректного процесса {pid}")
        self._enqueue("request", pid, None, request, forced=True, not_before=at_step)

    @property
    def well_behaved_nodes(self) -> List[Node]:
        return [self.nodes[p] for p in sorted_ids(self.nodes)]

    def frozen(self) -> FrozenSet[ProcessId]:
        return frozenset(p for p, n in self.nodes.items() if n.frozen)

    def responses_of(self, kind: str) -> List[Response]:
        return [r for r in self.responses if r.kind == kind]

    # Внутренние операции
    def _enqueue(self, kind, dst, src, payload, forced, not_before=0):
        self._eid += 1
        self._pending.append(Event(self._eid, kind, dst, src, payload, self.now, forced, not_before))

    def _record(self, kind: str, **fields):
        event = {"step": self.now, "kind": kind}
        event.update({k: to_jsonable(v) for k, v in fields.items()})
        self.trace.append(event)

    def _apl_send(self, src, dst, msg):
        if dst not in self.nodes and dst not in self.attack.byzantine:
            logger.debug("сообщение %s -> %s отброшено: адресат неизвестен", src, dst)
            return
        forced = src in self.nodes and dst in self.nodes
        self._enqueue("deliver", dst, src, msg, forced)

    def _tob_broadcast(self, src, msg):
        self.tob_log.append((src, msg))
        self._record("tob_order", src=src, seq=len(self.tob_log) - 1, msg=msg)
        for pid in sorted_ids(self.nodes):
            self._ensure_tob_event(pid)
        self.adversary.on_tob(AdversaryContext(self), src, msg)

    def _tob_forced(self, pid) -> bool:
        return pid in self.outlived

    def _ensure_tob_event(self, pid):
        if pid in self._tob_pending or self._tob_cursor[pid] >= len(self.tob_log):
            return
        if self.tob_liveness == TobLiveness.DYNAMIC and self.nodes[pid].frozen:
            return
        self._tob_pending.add(pid)
        self._enqueue("tob", pid, None, None, self._tob_forced(pid))

    def _sign(self, signer, payload) -> Signature:
        sig = self.registry.sign(signer, payload)
        self.signed.add((signer, sig.digest))
        return sig

    def _respond(self, pid, kind, detail):
        self.responses.append(Response(self.now, pid, kind, dict(detail)))
        self._record("response", process=pid, response=kind, detail=detail)

    def _set_timer(self, pid, delay, name):
        self._enqueue("timer", pid, None, name, forced=True, not_before=self.now + delay)

    def _freeze(self, pid):
        self.nodes[pid].frozen = True
        if self.tob_liveness == TobLiveness.DYNAMIC:
            self._pending = [e for e in self._pending if not (e.kind == "tob" and e.dst == pid)]
            self._tob_pending.discard(pid)

    # Планировщик
    def _choose(self, ready: List[Event]) -> Event:
        bound = self.policy.fairness_bound
        overdue = [e for e in ready if e.forced and self.now - e.enqueued >= bound]
        if overdue:
            return overdue[0]
        mode = self.policy.mode
        if mode == ScheduleMode.ADVERSARIAL_REORDER:
            return self.rng.choice(ready[-REORDER_WINDOW:])
        if mode == ScheduleMode.SCRIPTED:
            script = self.policy.script
            index = script[self._script_pos] if self._script_pos < len(script) else 0
            self._script_pos += 1
            return ready[index % len(ready)]
        return self.rng.choice(ready)

    def _dispatch(self, event: Event):
        node = self.nodes.get(event.dst)
        ctx = Context(self, event.dst)

        if event.kind == "tob":
            self._tob_pending.discard(event.dst)
            seq = self._tob_cursor[event.dst]
            src, msg = self.tob_log[seq]
            self._tob_cursor[event.dst] = seq + 1
            if node.frozen:
                self._record("drop", dst=event.dst, src=src, seq=seq)
            else:
                self._record("tob_deliver", dst=event.dst, src=src, seq=seq, msg=msg)
                node.on_tob(ctx, src, msg)
            self._ensure_tob_event(event.dst)
            return

        if node is None:
            self._record("deliver", src=event.src, dst=event.dst, msg=event.payload)
            self.adversary.on_deliver(AdversaryContext(self), event.dst, event.src, event.payload)
            return

        if node.frozen:
            self._record("drop", dst=event.dst, src=event.src, msg=event.payload)
            return

        if event.kind == "deliver":
            self._record("deliver", src=event.src, dst=event.dst, msg=event.payload)
            node.on_message(ctx, event.src, event.payload)
        elif event.kind == "timer":
            self._record("timer", dst=event.dst, name=event.payload)
            node.on_timer(ctx, event.payload)
        elif event.kind == "request":
            self._record("request", dst=event.dst, request=event.payload)
            try:
                node.on_request(ctx, event.payload)
            except HqsError as exc:
                logger.info("запрос %s процесса %s отклонён: %s", event.payload.op, event.dst, exc.detail)
                self._respond(event.dst, type(exc).__name__, {"detail": exc.detail})

    def _evaluate(self, when: str):
        for probe in self.probes:
            if probe.when != when:
                continue
            witness = probe.fn(self)
            if witness is None:
                continue
            probe.count += 1
            if not probe.violated:
                probe.violated = True
                probe.first_step = self.now
                probe.witness = witness
                logger.info("проверка %s нарушена на шаге %d: %s", probe.name, self.now, witness)
                self._record("violation", probe=probe.name, witness=witness)

    def run(self) -> Trace:
        self.adversary.on_start(AdversaryContext(self))
        while True:
            if not self._pending:
                self.outcome = Outcome.QUIESCENT
                break
            if self.now >= self.step_cap:
                logger.warning("достигнут предел шагов %d", self.step_cap)
                self.outcome = Outcome.STEP_CAP
                break
            ready = [e for e in self._pending if e.not_before <= self.now]
            if not ready:
                # остались только таймеры в будущем
                self.now = min(e.not_before for e in self._pending)
                continue
            event = self._choose(ready)
            self._pending.remove(event)
            self._dispatch(event)
            self.now += 1
            self._evaluate("step")
        if self.outcome == Outcome.QUIESCENT:
            self._evaluate("final")
        return Trace(events=self.trace, outcome=self.outcome, steps=self.now)


def run(system: QuorumSystem, attack: Attack, nodes: Iterable[Node], adversary: Optional[Adversary] = None,
        policy: SchedulePolicy = SchedulePolicy(), step_cap: int = STEP_CAP, **kwargs) -> Trace:
    world = World(system, attack, policy=policy, adversary=adversary, step_cap=step_cap, **kwargs)
    for node in nodes:
        world.add_node(node)
    return world.run()
