"""
Протоколы реконфигурации как обработчики сообщений одного узла:
Join, Leave/Remove с сохранением доступности (AC) или политик (PC),
Add в три фазы (включение, проверка пересечения, обновление).
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Optional, Set, Tuple

from config import JOIN_TIMEOUT
from discovery import SinkDiscovery, ValidQ
from errors import Busy, InvalidSignature, PreconditionViolated
from qsys import (
    ProcessId,
    Quorum,
    QuorumSystem,
    blocks,
    members,
    normalize,
    shrink_by,
    sorted_ids,
    sorted_quorums,
)
from signatures import Signature
from sim_kernel import ClientRequest, Context, Node, World

logger = logging.getLogger(__name__)

JOIN_TIMER = "join"


class LeaveMode(str, Enum):
    AC = "ac"
    PC = "pc"


class SinkMode(str, Enum):
    CONSERVATIVE = "conservative"
    ORACLE = "oracle"
    DISCOVERY = "discovery"


class CheckKind(str, Enum):
    LEAVE = "leave"
    REMOVE = "remove"


# Join
@dataclass(frozen=True)
class Prob:
    pass


@dataclass(frozen=True)
class Quorums:
    quorums: FrozenSet[Quorum]


# Leave / Remove
@dataclass(frozen=True)
class Check:
    requester: ProcessId
    kind: CheckKind
    quorums: FrozenSet[Quorum]
    removed: Optional[Quorum] = None


@dataclass(frozen=True)
class Left:
    pass


# Add, фаза 1
@dataclass(frozen=True)
class Inclusion:
    quorum: Quorum


@dataclass(frozen=True)
class AckInclusion:
    quorum: Quorum


@dataclass(frozen=True)
class NackInclusion:
    quorum: Quorum


# Add, фаза 2
@dataclass(frozen=True)
class CheckAdd:
    quorum: Quorum


@dataclass(frozen=True)
class AddCheck:
    requester: ProcessId
    quorum: Quorum


@dataclass(frozen=True)
class CheckAck:
    requester: ProcessId
    quorum: Quorum


@dataclass(frozen=True)
class CheckNack:
    requester: ProcessId
    quorum: Quorum


# Add, фаза 3
@dataclass(frozen=True)
class Commit:
    requester: ProcessId
    quorum: Quorum
    sig: Signature


@dataclass(frozen=True)
class Abort:
    requester: ProcessId
    quorum: Quorum


@dataclass(frozen=True)
class Success:
    requester: ProcessId
    quorum: Quorum
    sigs: Tuple[Signature, ...]


@dataclass(frozen=True)
class Fail:
    requester: ProcessId
    quorum: Quorum
    sig: Signature


def commit_payload(requester: ProcessId, q_c: Quorum):
    return ("commit", requester, q_c)


def fail_payload(requester: ProcessId, q_c: Quorum):
    return ("fail", requester, q_c)


def intersections_block(quorums: FrozenSet[Quorum], others: Iterable[Quorum],
                        excluded: FrozenSet[ProcessId]) -> bool:
    """∀ q₁ ∈ quorums, q₂ ∈ quorums ∪ others: (q₁ ∩ q₂) ∖ excluded блокирует quorums"""
    pool = set(quorums) | set(others)
    for q1 in sorted_quorums(quorums):
        for q2 in sorted_quorums(pool):
            if not blocks(quorums, (q1 & q2) - excluded):
                return False
    return True


class ReconfigNode(Node, SinkDiscovery):
    def __init__(
        self,
        pid: ProcessId,
        quorums: Iterable[Iterable[ProcessId]] = (),
        active: bool = True,
        followers: Iterable[ProcessId] = (),
        in_sink: bool = True,
        leave_mode: LeaveMode = LeaveMode.AC,
        sink_mode: SinkMode = SinkMode.CONSERVATIVE,
        combined_checks: bool = True,
        validq: Optional[ValidQ] = None,
        join_timeout: int = JOIN_TIMEOUT,
    ):
        super().__init__(pid)
        self.Q: FrozenSet[Quorum] = normalize(quorums)
        self.active = active
        self.leave_mode = LeaveMode(leave_mode)
        self.sink_mode = SinkMode(sink_mode)
        self.combined_checks = combined_checks
        self.join_timeout = join_timeout

        self.init_discovery(validq)
        if self.sink_mode != SinkMode.DISCOVERY:
            self.in_sink = in_sink
            self.F = set(followers)

        # Кворумы, объявленные самим процессом (изначально или через Add/Join)
        self.ledger: Set[Quorum] = set(self.Q)
        self.tomb: Set[ProcessId] = set()
        self.pending: Optional[ClientRequest] = None

        self.join_S: Set[Quorum] = set()
        self.join_qmap: Dict[ProcessId, FrozenSet[Quorum]] = {}
        self.join_probed: Set[ProcessId] = set()

        self.ack: Set[ProcessId] = set()
        self.nack: Set[ProcessId] = set()
        self.add_qn: Optional[Quorum] = None
        self.add_qc: Optional[Quorum] = None
        self.commits: Dict[ProcessId, Signature] = {}

        self.tentative: Set[Tuple[ProcessId, Quorum]] = set()
        self.check_acks: Dict[Tuple, Set[ProcessId]] = defaultdict(set)
        self.check_nacks: Dict[Tuple, Set[ProcessId]] = defaultdict(set)
        self.voted: Set[Tuple] = set()
        self.failed: Dict[Tuple, Set[ProcessId]] = defaultdict(set)
        self.fail_echoed: Set[Tuple] = set()
        self.fail_done: Set[Tuple] = set()
        self.succeeded: Dict[Tuple, bool] = defaultdict(bool)

    @property
    def tentative_quorums(self) -> FrozenSet[Quorum]:
        return frozenset(q for _, q in self.tentative)

    # Клиентские запросы
    def on_request(self, ctx: Context, request: ClientRequest):
        if request.op == "discover":
            self.on_discover(ctx)
            return
        if self.pending is not None:
            raise Busy(f"У процесса {self.pid} уже выполняется запрос {self.pending.op}")
        if request.op == "join":
            self.join_request(ctx, request)
            return
        if not self.active:
            raise PreconditionViolated(f"Процесс {self.pid} не активен")
        if request.op == "leave":
            if self.leave_mode == LeaveMode.PC:
                self.pc_leave_request(ctx)
            else:
                self.ac_leave_request(ctx, request)
        elif request.op == "remove":
            q = frozenset(request.quorum or ())
            if q not in self.Q:
                raise PreconditionViolated(f"Кворум {sorted_ids(q)} не принадлежит процессу {self.pid}")
            if self.leave_mode == LeaveMode.PC:
                self.pc_remove(ctx, q)
            else:
                self.ac_remove_request(ctx, request, q)
        elif request.op == "add":
            self.add_phase1(ctx, request)
        else:
            super().on_request(ctx, request)

    def on_message(self, ctx: Context, src: ProcessId, msg):
        try:
            self._handle(ctx, src, msg)
        except InvalidSignature as exc:
            logger.warning("процесс %s отклонил %s от %s: %s", self.pid, type(msg).__name__, src, exc.detail)

    def _handle(self, ctx: Context, src: ProcessId, msg):
        if self.sink_mode == SinkMode.DISCOVERY and self.handle_discovery(ctx, src, msg):
            return
        handlers = {
            Prob: self.on_prob,
            Quorums: self.on_quorums,
            Left: self.on_left,
            Inclusion: self.on_inclusion,
            AckInclusion: self.on_ack_nack,
            NackInclusion: self.on_ack_nack,
            CheckAdd: self.on_checkadd,
            AddCheck: self.on_add_check,
            CheckAck: self.on_check_reply,
            CheckNack: self.on_check_reply,
            Commit: self.on_commit,
            Abort: self.on_abort,
            Success: self.on_success,
            Fail: self.on_fail,
        }
        handler = handlers.get(type(msg))
        if handler is None:
            logger.debug("процесс %s проигнорировал %s от %s", self.pid, type(msg).__name__, src)
            return
        handler(ctx, src, msg)

    # Join
    def join_request(self, ctx: Context, request: ClientRequest):
        if self.active:
            raise PreconditionViolated(f"Процесс {self.pid} уже активен")
        ps = frozenset(request.ps or ())
        if not ps:
            raise PreconditionViolated("Пустое начальное множество ps")
        self.pending = request
        self.join_S = {ps}
        self.join_qmap = {}
        self.join_probed = set()
        ctx.set_timer(self.join_timeout, JOIN_TIMER)
        self._join_progress(ctx)

    def on_prob(self, ctx: Context, src: ProcessId, msg: Prob):
        self.F.add(src)
        quorums = self.Q if self.active else frozenset({frozenset({self.pid})})
        ctx.send(src, Quorums(quorums))

    def on_quorums(self, ctx: Context, src: ProcessId, msg: Quorums):
        if self.pending is None or self.pending.op != "join":
            return
        reported = frozenset(frozenset(q) for q in msg.quorums)
        self.join_qmap[src] = reported
        S = set(self.join_S)
        for q in sorted_quorums(self.join_S):
            if src in q and reported:
                S.discard(q)
                S |= {q | q2 for q2 in reported}
        self.join_S = S
        self._join_progress(ctx)

    def _join_progress(self, ctx: Context):
        S = set(self.join_S)
        changed = True
        while changed:
            changed = False
            for q in sorted_quorums(S):
                for p in sorted_ids(q):
                    reported = self.join_qmap.get(p)
                    if not reported or any(q2 <= q for q2 in reported):
                        continue
                    S.discard(q)
                    S |= {q | q2 for q2 in reported}
                    changed = True
                    break
                if changed:
                    break
        self.join_S = set(normalize(S))

        for p in sorted_ids(members(self.join_S) - self.join_probed):
            self.join_probed.add(p)
            ctx.send(p, Prob())

        if self.join_S and all(
            any(q2 <= q for q2 in self.join_qmap.get(p, ()))
            for q in self.join_S for p in q
        ):
            self.Q = frozenset(self.join_S)
            self.ledger |= self.Q
            self.active = True
            self.pending = None
            ctx.respond("JoinComplete", quorums=self.Q)

    def on_timer(self, ctx: Context, name: str):
        if name == JOIN_TIMER and self.pending is not None and self.pending.op == "join":
            logger.info("процесс %s не присоединился за %d шагов", self.pid, self.join_timeout)
            self.pending = None
            ctx.respond("JoinTimeout", quorums=self.join_S)

    # Leave / Remove (AC)
    def _locally_safe(self, quorums: FrozenSet[Quorum]) -> bool:
        return bool(quorums) and intersections_block(quorums, (), frozenset({self.pid}))

    def _complete_leave(self, ctx: Context):
        self.pending = None
        ctx.respond("LeaveComplete")
        ctx.send_all(self.F - {self.pid}, Left())
        self.active = False
        ctx.freeze()

    def ac_leave_request(self, ctx: Context, request: ClientRequest):
        if not self.in_sink:
            self._complete_leave(ctx)
            return
        if not self._locally_safe(self.Q):
            ctx.respond("LeaveFail", reason="local")
            return
        self.pending = request
        ctx.tob_broadcast(Check(self.pid, CheckKind.LEAVE, self.Q))

    def ac_remove_request(self, ctx: Context, request: ClientRequest, q: Quorum):
        remaining = self.Q - {q}
        if not self.in_sink:
            self.Q = remaining
            ctx.respond("RemoveComplete", quorum=q)
            return
        if not self._locally_safe(remaining):
            ctx.respond("RemoveFail", reason="local", quorum=q)
            return
        self.pending = request
        ctx.tob_broadcast(Check(self.pid, CheckKind.REMOVE, remaining, q))

    def on_tob(self, ctx: Context, src: ProcessId, msg):
        if isinstance(msg, Check):
            self.on_check(ctx, src, msg)
        else:
            logger.debug("процесс %s проигнорировал tob-сообщение %r от %s", self.pid, msg, src)

    def on_check(self, ctx: Context, src: ProcessId, msg: Check):
        quorums = frozenset(frozenset(q) for q in msg.quorums)
        others = self.tentative_quorums if self.combined_checks else ()
        excluded = frozenset({src}) | self.tomb
        if msg.kind == CheckKind.REMOVE and not quorums:
            passed = False
        else:
            passed = intersections_block(quorums, others, excluded)

        mine = src == self.pid and self.pending is not None and self.pending.op == msg.kind
        if not passed:
            if mine:
                self.pending = None
                if msg.kind == CheckKind.LEAVE:
                    ctx.respond("LeaveFail", reason="check")
                else:
                    ctx.respond("RemoveFail", reason="check", quorum=msg.removed)
            return

        self.tomb.add(src)
        if not mine:
            return
        if msg.kind == CheckKind.LEAVE:
            self._complete_leave(ctx)
        else:
            self.pending = None
            self.Q = self.Q - {msg.removed}
            ctx.respond("RemoveComplete", quorum=msg.removed)

    def on_left(self, ctx: Context, src: ProcessId, msg: Left):
        if self.leave_mode == LeaveMode.PC:
            self.Q = frozenset(q for q in self.Q if src not in q)
        else:
            self.Q = shrink_by(self.Q, src)
        if self.active and not self.Q:
            logger.warning("у процесса %s не осталось кворумов после ухода %s", self.pid, src)

    # Leave / Remove (PC)
    def pc_leave_request(self, ctx: Context):
        ctx.send_all(self.F - {self.pid}, Left())
        ctx.respond("LeaveComplete")
        self.active = False
        ctx.freeze()

    def pc_remove(self, ctx: Context, q: Quorum):
        self.Q = self.Q - {q}
        if not self.Q:
            logger.warning("процесс %s удалил свой последний кворум", self.pid)
        ctx.respond("RemoveComplete", quorum=q)

    # Add, фаза 1
    def add_phase1(self, ctx: Context, request: ClientRequest):
        q_n = frozenset(request.quorum or ())
        if not q_n:
            raise PreconditionViolated("Добавляемый кворум пуст")
        self.pending = request
        self.add_qn = q_n
        self.add_qc = None
        self.ack, self.nack = set(), set()
        self.commits = {}
        ctx.send_all(q_n, Inclusion(q_n))

    def on_inclusion(self, ctx: Context, src: ProcessId, msg: Inclusion):
        q_n = frozenset(msg.quorum)
        if any(q <= q_n for q in self.Q):
            ctx.send(src, AckInclusion(q_n))
        else:
            ctx.send(src, NackInclusion(q_n))

    def on_ack_nack(self, ctx: Context, src: ProcessId, msg):
        q_n = frozenset(msg.quorum)
        if self.add_qn != q_n or self.add_qc is not None or src not in q_n:
            return
        (self.ack if isinstance(msg, AckInclusion) else self.nack).add(src)
        if self.ack | self.nack != q_n:
            return
        if not self.nack:
            self._finish_add(ctx)
            ctx.respond("AddComplete", quorum=q_n)
            return
        self.add_qc = frozenset(self.nack)
        ctx.send_all(self.add_qc, CheckAdd(self.add_qc))

    def _finish_add(self, ctx: Context):
        self.Q = normalize(set(self.Q) | {self.add_qn})
        self.ledger.add(self.add_qn)
        self.pending = None

    # Add, фаза 2
    def on_checkadd(self, ctx: Context, src: ProcessId, msg: CheckAdd):
        q_c = frozenset(msg.quorum)
        if self.pid not in q_c:
            return
        self.tentative.add((src, q_c))
        ctx.send_all(members(self.Q), AddCheck(src, q_c))

    def on_add_check(self, ctx: Context, src: ProcessId, msg: AddCheck):
        q_c = frozenset(msg.quorum)
        excluded = frozenset(self.tomb) if self.combined_checks else frozenset()
        pool = set(self.Q) | set(self.tentative_quorums)
        if all(blocks(self.Q, (q_c & q) - excluded) for q in pool):
            ctx.send(src, CheckAck(msg.requester, q_c))
        else:
            ctx.send(src, CheckNack(msg.requester, q_c))

    # Add, фаза 3
    def on_check_reply(self, ctx: Context, src: ProcessId, msg):
        q_c = frozenset(msg.quorum)
        key = (msg.requester, q_c)
        if key in self.voted or (msg.requester, q_c) not in self.tentative:
            return
        if isinstance(msg, CheckAck):
            self.check_acks[key].add(src)
            if any(q <= self.check_acks[key] for q in self.Q):
                self.voted.add(key)
                sig = ctx.sign(commit_payload(msg.requester, q_c))
                ctx.send(msg.requester, Commit(msg.requester, q_c, sig))
        else:
            self.check_nacks[key].add(src)
            if blocks(self.Q, self.check_nacks[key]):
                self.voted.add(key)
                ctx.send(msg.requester, Abort(msg.requester, q_c))

    def _my_add(self, requester: ProcessId, q_c: Quorum) -> bool:
        return (requester == self.pid and self.pending is not None
                and self.pending.op == "add" and self.add_qc == q_c)

    def on_commit(self, ctx: Context, src: ProcessId, msg: Commit):
        q_c = frozenset(msg.quorum)
        if not self._my_add(msg.requester, q_c) or src not in q_c:
            return
        if not ctx.verify(msg.sig, src, commit_payload(self.pid, q_c)):
            raise InvalidSignature(f"Неверная подпись Commit от {src}")
        self.commits[src] = msg.sig
        if not q_c <= set(self.commits):
            return
        q_n = self.add_qn
        sigs = tuple(self.commits[m] for m in sorted_ids(q_c))
        self._finish_add(ctx)
        ctx.send_all(q_c, Success(self.pid, q_c, sigs))
        ctx.respond("AddComplete", quorum=q_n, q_c=q_c)

    def on_abort(self, ctx: Context, src: ProcessId, msg: Abort):
        q_c = frozenset(msg.quorum)
        if not self._my_add(msg.requester, q_c) or src not in q_c:
            return
        q_n = self.add_qn
        self.pending = None
        sig = ctx.sign(fail_payload(self.pid, q_c))
        ctx.send_all(q_c, Fail(self.pid, q_c, sig))
        ctx.respond("AddFail", quorum=q_n, q_c=q_c)

    def _valid_success(self, ctx: Context, msg: Success, q_c: Quorum) -> bool:
        payload = commit_payload(msg.requester, q_c)
        by_signer = {s.signer: s for s in msg.sigs if isinstance(s, Signature)}
        return all(m in by_signer and ctx.verify(by_signer[m], m, payload) for m in q_c)

    def on_success(self, ctx: Context, src: ProcessId, msg: Success):
        q_c = frozenset(msg.quorum)
        key = (msg.requester, q_c)
        if self.pid not in q_c or self.succeeded[key]:
            return
        if not self._valid_success(ctx, msg, q_c):
            raise InvalidSignature(f"Success для {sorted_ids(q_c)} без подписей всех членов")
        self.succeeded[key] = True
        ctx.send_all(q_c - {self.pid}, msg)
        self.Q = normalize(set(self.Q) | {q_c})
        self.ledger.add(q_c)
        self.tentative.discard(key)

    def on_fail(self, ctx: Context, src: ProcessId, msg: Fail):
        q_c = frozenset(msg.quorum)
        key = (msg.requester, q_c)
        if self.pid not in q_c or self.succeeded[key] or key in self.fail_done:
            return
        if not ctx.verify(msg.sig, msg.requester, fail_payload(msg.requester, q_c)):
            raise InvalidSignature(f"Fail без подписи запросившего {msg.requester}")
        # пересылает только Fail, полученный от самого запросившего
        if src == msg.requester and key not in self.fail_echoed:
            self.fail_echoed.add(key)
            self.failed[key].add(self.pid)
            ctx.send_all(q_c - {self.pid}, msg)
        self.failed[key].add(src)
        if q_c <= self.failed[key]:
            self.fail_done.add(key)
            self.tentative.discard(key)


def left_processes(world: World) -> FrozenSet[ProcessId]:
    """𝓛: процессы, получившие LeaveComplete"""
    return frozenset(r.process for r in world.responses_of("LeaveComplete"))


def snapshot(world: World) -> QuorumSystem:
    """Текущая система кворумов: корректные узлы по их состоянию, византийские по объявлению"""
    system = world.system
    left = left_processes(world)
    quorums = {}
    active = set()
    for p in sorted_ids(system.declared & world.attack.byzantine):
        quorums[p] = system.quorums_of(p)
    active |= system.active & world.attack.byzantine
    for node in world.well_behaved_nodes:
        if not isinstance(node, ReconfigNode) or not node.active or node.pid in left:
            continue
        active.add(node.pid)
        quorums[node.pid] = node.Q
    universe = system.universe | frozenset(world.nodes)
    return QuorumSystem(universe=universe, active=frozenset(active), quorums=quorums)


def ledgers(world: World) -> Dict[ProcessId, FrozenSet[Quorum]]:
    return {n.pid: frozenset(n.ledger) for n in world.well_behaved_nodes if isinstance(n, ReconfigNode)}


def tentative_map(world: World) -> Dict[ProcessId, FrozenSet[Tuple[ProcessId, Quorum]]]:
    return {n.pid: frozenset(n.tentative) for n in world.well_behaved_nodes if isinstance(n, ReconfigNode)}
