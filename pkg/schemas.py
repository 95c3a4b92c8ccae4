from enum import Enum
from pydantic import BaseModel, ConfigDict
from typing import Optional, List, Any, Dict, Union, Literal
from datetime import datetime

ProcessIdValue = Union[int, str]


# Схемы для файла системы кворумов
class QuorumSystemFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    universe: List[ProcessIdValue] = []
    byzantine: List[ProcessIdValue] = []
    active: Optional[List[ProcessIdValue]] = None
    quorums: Dict[str, List[List[ProcessIdValue]]] = {}


# Схемы для отчётов о свойствах
class Property(str, Enum):
    CONSISTENCY = "Consistency"
    AVAILABILITY = "Availability"
    AVAILABLE_INSIDE = "AvailableInside"
    INCLUSION = "Inclusion"
    SHARING = "Sharing"
    OUTLIVED = "Outlived"
    ACTIVE_INCLUSION = "ActiveInclusion"
    ACTIVE_AVAILABILITY = "ActiveAvailability"
    TENTATIVE_INCLUSION = "TentativeInclusion"
    POLICY = "Policy"


class Witness(BaseModel):
    processes: Optional[List[ProcessIdValue]] = None
    quorums: Optional[List[List[ProcessIdValue]]] = None
    member: Optional[ProcessIdValue] = None
    note: Optional[str] = None


class PropertyReport(BaseModel):
    property: Property
    holds: bool
    witness: Optional[Witness] = None


# Схемы для графа кворумов и перечисления
class GraphSummary(BaseModel):
    vertices: List[ProcessIdValue]
    edges: List[List[ProcessIdValue]]
    components: List[List[ProcessIdValue]]
    sinks: List[List[ProcessIdValue]]
    well_behaved_sink: List[ProcessIdValue]
    unique_sink: bool


class EnumerationReport(BaseModel):
    minimal_quorums: List[List[ProcessIdValue]]
    blocking_sets: Dict[str, List[List[ProcessIdValue]]]
    maximal_outlived: List[List[ProcessIdValue]]


class DiscoveryResults(BaseModel):
    in_sink: Dict[str, bool]
    followers: Dict[str, List[ProcessIdValue]]


# Схемы для сценариев
class ScheduleSpec(BaseModel):
    mode: Literal["RandomFair", "AdversarialReorder", "ScriptedInterleaving"] = "RandomFair"
    fairness_bound: Optional[int] = None
    script: List[int] = []


class RequestSpec(BaseModel):
    process: ProcessIdValue
    op: Literal["leave", "remove", "add", "join", "discover", "broadcast"]
    quorum: Optional[List[ProcessIdValue]] = None
    ps: Optional[List[ProcessIdValue]] = None
    value: Optional[str] = None
    at_step: int = 0


class ProbeSpec(BaseModel):
    name: str
    args: Dict[str, Any] = {}
    expect: Literal["hold", "violate"] = "hold"


class ExpectedResponse(BaseModel):
    process: ProcessIdValue
    kinds: List[str]


class ScenarioFile(BaseModel):
    name: str
    system: str
    protocol: Literal["reconfig", "discovery", "broadcast"] = "reconfig"
    attack: Optional[List[ProcessIdValue]] = None
    outlived: List[ProcessIdValue] = []
    joiners: List[ProcessIdValue] = []
    requests: List[RequestSpec] = []
    adversary: str = "silent"
    adversary_args: Dict[str, Any] = {}
    policy: ScheduleSpec = ScheduleSpec()
    seed: int
    step_cap: Optional[int] = None
    leave_mode: Literal["ac", "pc"] = "ac"
    sink_mode: Literal["conservative", "oracle", "discovery"] = "conservative"
    combined_checks: bool = True
    tob_liveness: Literal["static", "dynamic"] = "static"
    validq: Literal["oracle", "threshold"] = "oracle"
    validq_k: int = 1
    probes: List[ProbeSpec] = []
    expect_responses: List[ExpectedResponse] = []


# Схемы для результатов прогона
class ResponseRecord(BaseModel):
    step: int
    process: ProcessIdValue
    kind: str
    detail: Dict[str, Any] = {}


class ProbeOutcome(BaseModel):
    name: str
    expect: str
    violated: bool
    count: int = 0
    first_step: Optional[int] = None
    witness: Optional[Dict[str, Any]] = None
    ok: bool


class RunVerdict(BaseModel):
    scenario: str
    seed: int
    outcome: str
    steps: int
    verdict: Literal["PASS", "FAIL"]
    probes: List[ProbeOutcome] = []
    responses: List[ResponseRecord] = []
    mismatches: List[str] = []
    trace_digest: str
    final_system: Optional[QuorumSystemFile] = None
    discovery: Optional[DiscoveryResults] = None


class RunRecord(BaseModel):
    id: int
    scenario: str
    seed: int
    outcome: str
    verdict: str
    violations: int
    trace_digest: str
    created_at: datetime

    class Config:
        from_attributes = True


class FixtureReport(BaseModel):
    name: str
    consistency: PropertyReport
    sharing: PropertyReport
    graph: GraphSummary
    enumeration: EnumerationReport
