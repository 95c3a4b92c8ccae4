"""
Проверки свойств системы кворумов: согласованность (пересечение),
доступность, включение и разделение кворумов, «пережившие» множества
и ослабленные варианты для протоколов реконфигурации.

Все проверки перебирают объявленные кворумы напрямую; для систем
настольного размера этого достаточно.
"""
import itertools
import logging
from typing import Callable, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from config import OUTLIVED_BOUND
from errors import BadSubset, PreconditionViolated, TooLarge, UnknownProcess
from qsys import (
    Attack,
    ProcessId,
    Quorum,
    QuorumSystem,
    is_blocking,
    minimal_quorums,
    members,
    quorum_key,
    sorted_ids,
    sorted_quorums,
)
from schemas import EnumerationReport, Property, PropertyReport, Witness

logger = logging.getLogger(__name__)

TentativeMap = Mapping[ProcessId, Iterable[Tuple[ProcessId, Quorum]]]


def _holds(prop: Property) -> PropertyReport:
    return PropertyReport(property=prop, holds=True)


def _fails(prop: Property, processes=None, quorums=None, member=None, note=None) -> PropertyReport:
    witness = Witness(
        processes=list(processes) if processes is not None else None,
        quorums=[sorted_ids(q) for q in quorums] if quorums is not None else None,
        member=member,
        note=note,
    )
    return PropertyReport(property=prop, holds=False, witness=witness)


def _require_well_behaved(attack: Attack, s: FrozenSet[ProcessId], what: str):
    stray = s - attack.well_behaved
    if stray:
        raise BadSubset(f"{what} содержит некорректные процессы: {sorted_ids(stray)}")


def consistency_unchecked(qs: QuorumSystem, procs: Iterable[ProcessId], at_P: Iterable[ProcessId],
                          prop: Property = Property.CONSISTENCY) -> PropertyReport:
    """Пересечение кворумов процессов procs внутри at_P без проверки at_P ⊆ 𝓦"""
    at = frozenset(at_P)
    ordered = [p for p in sorted_ids(procs) if p in qs.quorums]
    for i, p in enumerate(ordered):
        for p2 in ordered[i:]:
            for q in sorted_quorums(qs.quorums_of(p)):
                for q2 in sorted_quorums(qs.quorums_of(p2)):
                    if not (q & q2 & at):
                        return _fails(prop, processes=[p, p2], quorums=[q, q2])
    return _holds(prop)


def check_consistency(qs: QuorumSystem, attack: Attack, at_P: Iterable[ProcessId]) -> PropertyReport:
    at = frozenset(at_P)
    _require_well_behaved(attack, at, "at_P")
    return consistency_unchecked(qs, attack.well_behaved, at)


def check_availability(qs: QuorumSystem, for_P: Iterable[ProcessId], at_P: Iterable[ProcessId]) -> PropertyReport:
    at = frozenset(at_P)
    for p in sorted_ids(for_P):
        if p not in qs.active:
            raise UnknownProcess(f"Процесс {p} не активен")
        if not any(q <= at for q in qs.quorums_of(p)):
            return _fails(Property.AVAILABILITY, processes=[p], member=p)
    return _holds(Property.AVAILABILITY)


def check_available_inside(qs: QuorumSystem, P: Iterable[ProcessId]) -> PropertyReport:
    P = frozenset(P)
    report = check_availability(qs, P, P)
    return report.model_copy(update={"property": Property.AVAILABLE_INSIDE})


def check_active_availability(qs: QuorumSystem, P: Iterable[ProcessId], left: Iterable[ProcessId]) -> PropertyReport:
    P, left = frozenset(P), frozenset(left)
    for p in sorted_ids(P - left):
        if not any(q - left <= P for q in qs.quorums_of(p)):
            return _fails(Property.ACTIVE_AVAILABILITY, processes=[p], member=p)
    return _holds(Property.ACTIVE_AVAILABILITY)


def _inclusion(qs: QuorumSystem, attack: Attack, P: FrozenSet[ProcessId], prop: Property,
               candidates: Callable[[ProcessId], Iterable[Quorum]],
               left: FrozenSet[ProcessId] = frozenset()) -> PropertyReport:
    W = attack.well_behaved
    for p in sorted_ids(W & qs.declared):
        for q in sorted_quorums(qs.quorums_of(p)):
            for p2 in sorted_ids((q & P) - left):
                if not any((q2 & W) - left <= q for q2 in candidates(p2)):
                    return _fails(prop, processes=[p, p2], quorums=[q], member=p2)
    return _holds(prop)


def check_quorum_inclusion(qs: QuorumSystem, attack: Attack, P: Iterable[ProcessId]) -> PropertyReport:
    P = frozenset(P)
    _require_well_behaved(attack, P, "P")
    return _inclusion(qs, attack, P, Property.INCLUSION, qs.quorums_of)


def check_tentative_inclusion(qs: QuorumSystem, attack: Attack, P: Iterable[ProcessId],
                              tentative: TentativeMap) -> PropertyReport:
    P = frozenset(P)
    _require_well_behaved(attack, P, "P")

    def candidates(p2):
        return set(qs.quorums_of(p2)) | {q for _, q in tentative.get(p2, ())}

    return _inclusion(qs, attack, P, Property.TENTATIVE_INCLUSION, candidates)


def check_active_inclusion(qs: QuorumSystem, attack: Attack, P: Iterable[ProcessId],
                           left: Iterable[ProcessId]) -> PropertyReport:
    # ушедшие члены кворума не обязаны иметь вложенный кворум
    P, left = frozenset(P), frozenset(left)
    _require_well_behaved(attack, P, "P")
    return _inclusion(qs, attack, P, Property.ACTIVE_INCLUSION, qs.quorums_of, left)


def check_quorum_sharing(qs: QuorumSystem) -> PropertyReport:
    for p in sorted_ids(qs.declared):
        for q in sorted_quorums(qs.quorums_of(p)):
            for p2 in sorted_ids(q):
                if not any(q2 <= q for q2 in qs.quorums_of(p2)):
                    return _fails(Property.SHARING, processes=[p, p2], quorums=[q], member=p2)
    return _holds(Property.SHARING)


def check_outlived(qs: QuorumSystem, attack: Attack, O: Iterable[ProcessId]) -> PropertyReport:
    O = frozenset(O)
    _require_well_behaved(attack, O, "O")
    conjuncts = (
        lambda: check_consistency(qs, attack, O),
        lambda: check_available_inside(qs, O),
        lambda: check_quorum_inclusion(qs, attack, O),
    )
    for conjunct in conjuncts:
        report = conjunct()
        if not report.holds:
            witness = report.witness.model_copy(update={"note": report.property.value})
            return PropertyReport(property=Property.OUTLIVED, holds=False, witness=witness)
    return _holds(Property.OUTLIVED)


def maximal_outlived_sets(qs: QuorumSystem, attack: Attack,
                          size_bound: int = OUTLIVED_BOUND) -> List[FrozenSet[ProcessId]]:
    """Все максимальные по включению непустые O ⊆ 𝓦, для которых выполнено outlived"""
    W = attack.well_behaved
    if len(W) > size_bound:
        raise TooLarge(f"|𝓦| = {len(W)} превышает предел перебора {size_bound}")
    candidates = sorted_ids(W & qs.declared)
    found: List[FrozenSet[ProcessId]] = []
    for size in range(len(candidates), 0, -1):
        for combo in itertools.combinations(candidates, size):
            O = frozenset(combo)
            if any(O <= f for f in found):
                continue
            if not check_available_inside(qs, O).holds:
                continue
            if check_outlived(qs, attack, O).holds:
                found.append(O)
    logger.debug("найдено %d максимальных outlived-множеств", len(found))
    return sorted(found, key=lambda s: (-len(s), quorum_key(s)))


def check_for_attacks(checker: Callable[..., PropertyReport], qs: QuorumSystem,
                      attacks: Sequence[Attack], *args, **kwargs) -> PropertyReport:
    """Свойство для множества атак: конъюнкция отчётов"""
    if not attacks:
        raise PreconditionViolated("Пустой список атак")
    report = None
    for attack in attacks:
        report = checker(qs, attack, *args, **kwargs)
        if not report.holds:
            return report
    return report


def blocking_sets(qs: QuorumSystem, p: ProcessId, k: int) -> List[FrozenSet[ProcessId]]:
    """Минимальные блокирующие множества процесса p размером не больше k"""
    pool = sorted_ids(members(qs.quorums_of(p)))
    found: List[FrozenSet[ProcessId]] = []
    for size in range(1, min(k, len(pool)) + 1):
        for combo in itertools.combinations(pool, size):
            s = frozenset(combo)
            if any(f <= s for f in found):
                continue
            if is_blocking(qs, p, s):
                found.append(s)
    return found


def check_policies(current: QuorumSystem, declared: Mapping[ProcessId, Iterable[Quorum]],
                   processes: Optional[Iterable[ProcessId]] = None) -> PropertyReport:
    """Каждый текущий кворум был объявлен процессом (изначально или через Add/Join)"""
    scope = current.declared if processes is None else frozenset(processes) & current.declared
    for p in sorted_ids(scope):
        allowed = set(declared.get(p, ()))
        for q in sorted_quorums(current.quorums_of(p)):
            if q not in allowed:
                return _fails(Property.POLICY, processes=[p], quorums=[q], member=p)
    return _holds(Property.POLICY)


def enumeration_report(qs: QuorumSystem, attack: Attack, k: int = 2,
                       size_bound: int = OUTLIVED_BOUND) -> EnumerationReport:
    mq = sorted(minimal_quorums(qs, attack), key=quorum_key)
    return EnumerationReport(
        minimal_quorums=[sorted_ids(q) for q in mq],
        blocking_sets={
            str(p): [sorted_ids(s) for s in blocking_sets(qs, p, k)]
            for p in sorted_ids(qs.declared & attack.well_behaved)
        },
        maximal_outlived=[sorted_ids(o) for o in maximal_outlived_sets(qs, attack, size_bound)],
    )
