"""
Сценарии противника. Византийские процессы не исполняют код протоколов:
их поведение целиком задаёт один из сценариев ниже.
"""
import logging
from typing import Any, Dict, List, Optional

from broadcast import BrbEcho, BrbReady, BrbSend
from discovery import Exchange, Extend, extend_payload
from errors import ScenarioError
from qsys import Attack, ProcessId, QuorumSystem, make_quorum, sorted_ids, sorted_quorums
from reconfig import (
    AckInclusion,
    AddCheck,
    Check,
    CheckAck,
    CheckAdd,
    CheckKind,
    Commit,
    Fail,
    Inclusion,
    NackInclusion,
    Prob,
    Quorums,
    Success,
    commit_payload,
    fail_payload,
)
from sim_kernel import Adversary, AdversaryContext

logger = logging.getLogger(__name__)


class SilentAdversary(Adversary):
    """Византийские процессы молчат"""


class FloodAdversary(Adversary):
    """Бесконечный поток сообщений самому себе: прогон не достигает покоя"""

    def on_start(self, actx: AdversaryContext):
        for b in sorted_ids(actx.byzantine):
            actx.send(b, b, "flood")

    def on_deliver(self, actx: AdversaryContext, dst, src, msg):
        if msg == "flood":
            actx.send(dst, dst, "flood")
            actx.send(dst, dst, "flood")


class _ScriptedAdversary(Adversary):
    def __init__(self, system: QuorumSystem, attack: Attack, **args):
        self.system = system
        self.attack = attack
        self.args = args

    def declared(self, b: ProcessId):
        return self.system.quorums_of(b) or frozenset({frozenset({b})})

    @property
    def honest(self) -> List[ProcessId]:
        return sorted_ids(self.attack.well_behaved)


class CooperativeAdversary(_ScriptedAdversary):
    """Отвечает на запросы протоколов так, как ответил бы корректный процесс со своим объявлением"""

    def on_deliver(self, actx: AdversaryContext, dst, src, msg):
        quorums = self.declared(dst)
        if isinstance(msg, Prob):
            actx.send(dst, src, Quorums(quorums))
        elif isinstance(msg, Inclusion):
            q_n = frozenset(msg.quorum)
            reply = AckInclusion(q_n) if any(q <= q_n for q in quorums) else NackInclusion(q_n)
            actx.send(dst, src, reply)
        elif isinstance(msg, AddCheck):
            actx.send(dst, src, CheckAck(msg.requester, frozenset(msg.quorum)))
        elif isinstance(msg, CheckAdd):
            q_c = frozenset(msg.quorum)
            sig = actx.sign(dst, commit_payload(src, q_c))
            actx.send(dst, src, Commit(src, q_c, sig))
        elif isinstance(msg, BrbSend) and src == msg.origin:
            for p in self.honest:
                actx.send(dst, p, BrbEcho(msg.origin, msg.value))
                actx.send(dst, p, BrbReady(msg.origin, msg.value))


class SinkDeceiver(_ScriptedAdversary):
    """Пытается убедить процессы вне стока, что они в стоке"""

    def on_start(self, actx: AdversaryContext):
        for b in sorted_ids(actx.byzantine):
            for p in self.honest:
                actx.send(b, p, Exchange(frozenset({frozenset({b})})))
            for q in sorted_quorums(self.system.quorums_of(b)):
                for p in self.honest:
                    actx.send(b, p, Extend(q, actx.sign(b, extend_payload(q))))
            for p in self.honest:
                actx.send(b, p, Extend(frozenset()))


class FakeCheckAdversary(_ScriptedAdversary):
    """Рассылает через tob проверки Leave/Remove с произвольными кворумами"""

    def on_start(self, actx: AdversaryContext):
        universe = sorted_ids(self.system.universe)
        for b in sorted_ids(actx.byzantine):
            actx.tob_broadcast(b, Check(b, CheckKind.LEAVE, frozenset(self.declared(b))))
            fake = frozenset(actx.rng.sample(universe, k=max(1, len(universe) // 2)))
            actx.tob_broadcast(b, Check(b, CheckKind.REMOVE, frozenset({fake}), fake))
            actx.tob_broadcast(b, "junk")


class EquivocatingRequester(_ScriptedAdversary):
    """Византийский инициатор Add: собирает Commit, затем рассылает Success одной части q_c и Fail другой"""

    def __init__(self, system: QuorumSystem, attack: Attack, requester=None, quorum=None, **args):
        super().__init__(system, attack, **args)
        if requester is None or not quorum:
            raise ScenarioError("equivocating_requester требует requester и quorum")
        if requester not in attack.byzantine:
            raise ScenarioError(f"Инициатор {requester} должен быть византийским")
        self.requester = requester
        self.q_c = make_quorum(quorum)
        self.commits: Dict[ProcessId, Any] = {}
        self.done = False

    def on_start(self, actx: AdversaryContext):
        for p in sorted_ids(self.q_c - actx.byzantine):
            actx.send(self.requester, p, CheckAdd(self.q_c))

    def on_deliver(self, actx: AdversaryContext, dst, src, msg):
        if isinstance(msg, AddCheck):
            actx.send(dst, src, CheckAck(msg.requester, frozenset(msg.quorum)))
            return
        if dst != self.requester or self.done or not isinstance(msg, Commit):
            return
        if frozenset(msg.quorum) != self.q_c:
            return
        self.commits[src] = msg.sig
        honest = self.q_c - actx.byzantine
        if not honest <= set(self.commits):
            return
        self.done = True
        sigs = dict(self.commits)
        for b in sorted_ids(self.q_c & actx.byzantine):
            sigs[b] = actx.sign(b, commit_payload(self.requester, self.q_c))
        success = Success(self.requester, self.q_c, tuple(sigs[m] for m in sorted_ids(self.q_c)))
        fail = Fail(self.requester, self.q_c, actx.sign(self.requester, fail_payload(self.requester, self.q_c)))

        targets = sorted_ids(honest)
        actx.rng.shuffle(targets)
        cut = max(1, len(targets) // 2)
        for p in targets[:cut]:
            actx.send(self.requester, p, success)
        for p in targets[cut:]:
            actx.send(self.requester, p, fail)
        logger.debug("противник разослал Success %s и Fail %s", targets[:cut], targets[cut:])


class BrbEquivocator(_ScriptedAdversary):
    """Рассылает разные значения разным процессам и голосует за случайные значения"""

    VALUES = ("x", "y")

    def __init__(self, system: QuorumSystem, attack: Attack, **args):
        super().__init__(system, attack, **args)
        self.voted = set()

    def on_start(self, actx: AdversaryContext):
        for b in sorted_ids(actx.byzantine):
            for p in self.honest:
                actx.send(b, p, BrbSend(b, actx.rng.choice(self.VALUES)))

    def on_deliver(self, actx: AdversaryContext, dst, src, msg):
        if not isinstance(msg, (BrbSend, BrbEcho, BrbReady)):
            return
        key = (dst, msg.origin)
        if key in self.voted:
            return
        self.voted.add(key)
        for p in self.honest:
            actx.send(dst, p, BrbEcho(msg.origin, actx.rng.choice(self.VALUES)))
            actx.send(dst, p, BrbReady(msg.origin, actx.rng.choice(self.VALUES)))


ADVERSARIES = {
    "silent": lambda system, attack, **args: SilentAdversary(),
    "flood": lambda system, attack, **args: FloodAdversary(),
    "cooperative": CooperativeAdversary,
    "sink_deceiver": SinkDeceiver,
    "fake_check": FakeCheckAdversary,
    "equivocating_requester": EquivocatingRequester,
    "brb_equivocator": BrbEquivocator,
}


def make_adversary(name: str, system: QuorumSystem, attack: Attack, args: Optional[Dict[str, Any]] = None) -> Adversary:
    factory = ADVERSARIES.get(name)
    if factory is None:
        raise ScenarioError(f"Неизвестный сценарий противника: {name}")
    return factory(system, attack, **(args or {}))
