"""
Модель гетерогенной системы кворумов: процессы, кворумы, минимальность,
блокирующие множества, последователи и чистые переходы реконфигурации.
"""
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from errors import EmptyDeclaration, EmptyQuorum, PreconditionViolated, UnknownMember, UnknownProcess
from schemas import QuorumSystemFile

logger = logging.getLogger(__name__)

ProcessId = Union[int, str]
Quorum = FrozenSet[ProcessId]


def pid_key(p: ProcessId) -> Tuple:
    """Ключ сортировки: сначала целые, затем строки"""
    if isinstance(p, int):
        return (0, p, "")
    return (1, 0, str(p))


def sorted_ids(ps: Iterable[ProcessId]) -> List[ProcessId]:
    return sorted(ps, key=pid_key)


def quorum_key(q: Iterable[ProcessId]) -> Tuple:
    return tuple(pid_key(p) for p in sorted_ids(q))


def sorted_quorums(qs: Iterable[Quorum]) -> List[Quorum]:
    return sorted(qs, key=quorum_key)


def make_quorum(members: Iterable[ProcessId]) -> Quorum:
    q = frozenset(members)
    if not q:
        raise EmptyQuorum("Кворум не может быть пустым")
    return q


def normalize(quorums: Iterable[Iterable[ProcessId]]) -> FrozenSet[Quorum]:
    """Антицепь: удаляются строгие надмножества других кворумов"""
    qs = {frozenset(q) for q in quorums}
    return frozenset(q for q in qs if not any(o < q for o in qs))


def shrink_by(quorums: Iterable[Quorum], p: ProcessId) -> FrozenSet[Quorum]:
    """Удаление p из каждого кворума (пустые кворумы отбрасываются)"""
    return normalize(q - {p} for q in quorums if q - {p})


def members(quorums: Iterable[Quorum]) -> FrozenSet[ProcessId]:
    out = set()
    for q in quorums:
        out |= q
    return frozenset(out)


def blocks(quorums: Iterable[Quorum], s: Iterable[ProcessId]) -> bool:
    s = frozenset(s)
    return all(q & s for q in quorums)


@dataclass(frozen=True)
class Attack:
    byzantine: FrozenSet[ProcessId]
    universe: FrozenSet[ProcessId]

    def __post_init__(self):
        stray = self.byzantine - self.universe
        if stray:
            raise UnknownMember(f"Византийские процессы вне универсума: {sorted_ids(stray)}")

    @property
    def well_behaved(self) -> FrozenSet[ProcessId]:
        return self.universe - self.byzantine


@dataclass(frozen=True)
class QuorumSystem:
    universe: FrozenSet[ProcessId]
    active: FrozenSet[ProcessId]
    quorums: Mapping[ProcessId, FrozenSet[Quorum]] = field(default_factory=dict)

    def quorums_of(self, p: ProcessId) -> FrozenSet[Quorum]:
        return self.quorums.get(p, frozenset())

    @property
    def declared(self) -> FrozenSet[ProcessId]:
        return frozenset(self.quorums)

    def attack(self, byzantine: Iterable[ProcessId] = ()) -> Attack:
        return Attack(frozenset(byzantine), self.universe)


def new_quorum_system(
    active: Iterable[ProcessId],
    decls: Mapping[ProcessId, Iterable[Iterable[ProcessId]]],
    universe: Optional[Iterable[ProcessId]] = None,
    byzantine: Iterable[ProcessId] = (),
    allow_empty: bool = False,
) -> QuorumSystem:
    """Построение системы кворумов с нормализацией до антицепей"""
    active = frozenset(active)
    byzantine = frozenset(byzantine)
    raw: Dict[ProcessId, List[FrozenSet]] = {p: [frozenset(q) for q in qs] for p, qs in decls.items()}

    if universe is None:
        universe = set(active) | set(raw) | set(byzantine)
        for qs in raw.values():
            universe |= members(qs)
    universe = frozenset(universe)

    stray = (active | byzantine) - universe
    if stray:
        raise UnknownMember(f"Процессы вне универсума: {sorted_ids(stray)}")

    quorums: Dict[ProcessId, FrozenSet[Quorum]] = {}
    for p in sorted_ids(raw):
        if p not in active:
            raise UnknownProcess(f"Объявление для неактивного процесса {p}")
        for q in raw[p]:
            if not q:
                raise EmptyQuorum(f"Пустой кворум у процесса {p}")
            outside = q - universe
            if outside:
                raise UnknownMember(f"Кворум процесса {p} содержит процессы вне универсума: {sorted_ids(outside)}")
        qs = normalize(raw[p])
        if p not in byzantine:
            for q in sorted_quorums(qs):
                if p not in q:
                    logger.warning("процесс %s не входит в свой кворум %s", p, sorted_ids(q))
        quorums[p] = qs

    if not allow_empty:
        for p in sorted_ids(active - byzantine):
            if not quorums.get(p):
                raise EmptyDeclaration(f"У корректного активного процесса {p} нет кворумов")

    return QuorumSystem(universe=universe, active=active, quorums=quorums)


def minimal_quorums(qs: QuorumSystem, attack: Attack) -> FrozenSet[Quorum]:
    """MQ: индивидуальные минимальные кворумы корректных процессов без строгих подмножеств среди них"""
    candidates = set()
    for p in attack.well_behaved & qs.declared:
        candidates |= qs.quorums_of(p)
    return frozenset(q for q in candidates if not any(o < q for o in candidates))


def is_system_quorum(qs: QuorumSystem, attack: Attack, s: Iterable[ProcessId]) -> bool:
    s = frozenset(s)
    return any(m <= s for m in minimal_quorums(qs, attack))


def _require_active(qs: QuorumSystem, p: ProcessId):
    if p not in qs.active:
        raise UnknownProcess(f"Процесс {p} не активен")


def is_blocking(qs: QuorumSystem, p: ProcessId, set_P: Iterable[ProcessId]) -> bool:
    _require_active(qs, p)
    return blocks(qs.quorums_of(p), set_P)


def is_active_blocking(qs: QuorumSystem, p: ProcessId, set_P: Iterable[ProcessId],
                       left: Iterable[ProcessId]) -> bool:
    _require_active(qs, p)
    set_P, left = frozenset(set_P), frozenset(left)
    return all((q - left) & set_P for q in qs.quorums_of(p))


def followers(qs: QuorumSystem, p: ProcessId) -> FrozenSet[ProcessId]:
    return frozenset(o for o in qs.active if any(p in q for q in qs.quorums_of(o)))


# Операции реконфигурации (чистый оракул)
class ReconfigKind(str, Enum):
    JOIN = "join"
    LEAVE = "leave"
    ADD = "add"
    REMOVE = "remove"


@dataclass(frozen=True)
class ReconfigOp:
    kind: ReconfigKind
    process: ProcessId
    quorum: Optional[Quorum] = None
    quorums: Optional[FrozenSet[Quorum]] = None

    @classmethod
    def join(cls, p: ProcessId, quorums: Iterable[Iterable[ProcessId]]) -> "ReconfigOp":
        return cls(ReconfigKind.JOIN, p, quorums=frozenset(make_quorum(q) for q in quorums))

    @classmethod
    def leave(cls, p: ProcessId) -> "ReconfigOp":
        return cls(ReconfigKind.LEAVE, p)

    @classmethod
    def add(cls, p: ProcessId, q: Iterable[ProcessId]) -> "ReconfigOp":
        return cls(ReconfigKind.ADD, p, quorum=make_quorum(q))

    @classmethod
    def remove(cls, p: ProcessId, q: Iterable[ProcessId]) -> "ReconfigOp":
        return cls(ReconfigKind.REMOVE, p, quorum=make_quorum(q))


def apply_reconfig(qs: QuorumSystem, op: ReconfigOp) -> QuorumSystem:
    """Состояние системы после операции; входное значение не меняется"""
    p = op.process
    quorums = dict(qs.quorums)

    if op.kind == ReconfigKind.JOIN:
        if p in qs.active:
            raise PreconditionViolated(f"Процесс {p} уже активен")
        if not op.quorums:
            raise EmptyDeclaration(f"Процесс {p} присоединяется без кворумов")
        quorums[p] = normalize(op.quorums)
        universe = qs.universe | {p} | members(op.quorums)
        return dataclasses.replace(qs, universe=universe, active=qs.active | {p}, quorums=quorums)

    if p not in qs.active:
        raise PreconditionViolated(f"Процесс {p} не активен")

    if op.kind == ReconfigKind.LEAVE:
        quorums.pop(p, None)
        return dataclasses.replace(qs, active=qs.active - {p}, quorums=quorums)

    if op.kind == ReconfigKind.ADD:
        outside = op.quorum - qs.universe
        if outside:
            raise UnknownMember(f"Кворум содержит процессы вне универсума: {sorted_ids(outside)}")
        quorums[p] = normalize(set(qs.quorums_of(p)) | {op.quorum})
        return dataclasses.replace(qs, quorums=quorums)

    # REMOVE
    current = qs.quorums_of(p)
    if op.quorum not in current:
        raise PreconditionViolated(f"Кворум {sorted_ids(op.quorum)} не принадлежит процессу {p}")
    if len(current) == 1:
        raise PreconditionViolated(f"Нельзя удалить последний кворум процесса {p}")
    quorums[p] = current - {op.quorum}
    return dataclasses.replace(qs, quorums=quorums)


# Сериализация
def to_jsonable(value: Any) -> Any:
    """Каноническое JSON-представление (множества сортируются)"""
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        out = {"type": type(value).__name__}
        for f in dataclasses.fields(value):
            out[f.name] = to_jsonable(getattr(value, f.name))
        return out
    if isinstance(value, (set, frozenset)):
        items = [to_jsonable(v) for v in value]
        if all(isinstance(v, (int, str)) and not isinstance(v, bool) for v in items):
            return sorted_ids(items)
        return sorted(items, key=lambda v: json.dumps(v, sort_keys=True))
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in sorted(value.items(), key=lambda kv: pid_key(kv[0]))}
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _decode_key(key: str, known: Iterable[ProcessId]) -> ProcessId:
    for p in known:
        if str(p) == key:
            return p
    if key.lstrip("-").isdigit():
        return int(key)
    return key


def from_file_model(model: QuorumSystemFile, allow_empty: bool = False) -> Tuple[QuorumSystem, Attack]:
    known = list(model.universe) + list(model.active or []) + list(model.byzantine)
    decls = {_decode_key(k, known): v for k, v in model.quorums.items()}
    universe = model.universe or None
    active = model.active if model.active is not None else (model.universe or list(decls))
    qs = new_quorum_system(active, decls, universe=universe, byzantine=model.byzantine,
                           allow_empty=allow_empty)
    return qs, Attack(frozenset(model.byzantine), qs.universe)


def to_file_model(qs: QuorumSystem, attack: Optional[Attack] = None) -> QuorumSystemFile:
    byzantine = attack.byzantine if attack else frozenset()
    return QuorumSystemFile(
        universe=sorted_ids(qs.universe),
        byzantine=sorted_ids(byzantine),
        active=sorted_ids(qs.active),
        quorums={
            str(p): [sorted_ids(q) for q in sorted_quorums(qs.quorums[p])]
            for p in sorted_ids(qs.quorums)
        },
    )


def loads_system(text: str) -> Tuple[QuorumSystem, Attack]:
    return from_file_model(QuorumSystemFile.model_validate_json(text))


def load_system(path: str) -> Tuple[QuorumSystem, Attack]:
    with open(path, encoding="utf-8") as fh:
        return loads_system(fh.read())


def dumps_system(qs: QuorumSystem, attack: Optional[Attack] = None) -> str:
    return json.dumps(to_file_model(qs, attack).model_dump(), indent=2, ensure_ascii=False) + "\n"


def save_system(qs: QuorumSystem, attack: Optional[Attack], path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_system(qs, attack))
