"""
Сценарии: загрузка JSON-файла сценария, сборка мира, прогон и вердикт.
Здесь же доступ к библиотеке систем из fixtures/ и пересчёт результатов.
"""
import glob
import logging
import os
from typing import List, Optional, Tuple

from adversary import make_adversary
from broadcast import BrbNode
from config import FAIRNESS_BOUND, FIXTURES_DIR, RESULTS_DIR, SCENARIOS_DIR, STEP_CAP
from discovery import DiscoveryNode, discovery_results, oracle_validq, threshold_validq
from errors import ScenarioError
from probes import make_probe
from props import check_consistency, check_quorum_sharing, enumeration_report
from qsys import Attack, QuorumSystem, followers, load_system, make_quorum, sorted_ids, to_file_model, to_jsonable
from quorum_graph import graph_summary, in_sink
from reconfig import LeaveMode, ReconfigNode, SinkMode, snapshot
from schemas import (
    FixtureReport,
    ProbeOutcome,
    RequestSpec,
    ResponseRecord,
    RunVerdict,
    ScenarioFile,
)
from sim_kernel import ClientRequest, SchedulePolicy, ScheduleMode, TobLiveness, Trace, World

logger = logging.getLogger(__name__)


# Библиотека систем
def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES_DIR, f"{name}.json")


def fixture_names() -> List[str]:
    return sorted(os.path.splitext(os.path.basename(p))[0]
                  for p in glob.glob(os.path.join(FIXTURES_DIR, "*.json")))


def load_fixture(name: str) -> Tuple[QuorumSystem, Attack]:
    path = fixture_path(name)
    if not os.path.exists(path):
        raise ScenarioError(f"Система {name} не найдена в {FIXTURES_DIR}")
    return load_system(path)


def scenario_paths() -> List[str]:
    return sorted(glob.glob(os.path.join(SCENARIOS_DIR, "*.json")))


def resolve_system_path(system: str, base_dir: Optional[str] = None, scenario_path: Optional[str] = None) -> str:
    """Путь к системе: как есть, из fixtures/, затем относительно сценария.
    Сам файл сценария системой не считается."""
    candidates = [system, os.path.join(FIXTURES_DIR, system), fixture_path(system)]
    if base_dir:
        candidates.append(os.path.join(base_dir, system))
    own = os.path.abspath(scenario_path) if scenario_path else None
    for path in candidates:
        if os.path.isfile(path) and os.path.abspath(path) != own:
            return os.path.abspath(path)
    raise ScenarioError(f"Файл системы не найден: {system}; имена в fixtures/: {', '.join(fixture_names())}")


def load_scenario(path: str) -> ScenarioFile:
    if not os.path.isfile(path):
        raise ScenarioError(f"Файл сценария не найден: {path}")
    with open(path, encoding="utf-8") as fh:
        scenario = ScenarioFile.model_validate_json(fh.read())
    system = resolve_system_path(scenario.system, os.path.dirname(os.path.abspath(path)), path)
    return scenario.model_copy(update={"system": system})


# Сборка мира
def _client_request(spec: RequestSpec) -> ClientRequest:
    value = spec.value
    if spec.op == "broadcast" and value is None:
        value = "m"
    return ClientRequest(
        op=spec.op,
        quorum=make_quorum(spec.quorum) if spec.quorum else None,
        ps=frozenset(spec.ps) if spec.ps is not None else None,
        value=value,
    )


def _nodes(scenario: ScenarioFile, system: QuorumSystem, attack: Attack):
    if scenario.validq == "threshold":
        validq = threshold_validq(scenario.validq_k)
    else:
        validq = oracle_validq(system, attack)
    honest = sorted_ids(system.active & attack.well_behaved)

    if scenario.protocol == "discovery":
        return [DiscoveryNode(p, system.quorums_of(p), validq) for p in honest]

    if scenario.protocol == "broadcast":
        return [BrbNode(p, system.quorums_of(p), followers(system, p), system.active) for p in honest]

    sink_mode = SinkMode(scenario.sink_mode)
    nodes = []
    for p in honest:
        if sink_mode == SinkMode.ORACLE:
            flag = in_sink(system, attack, p)
        else:
            flag = True
        nodes.append(ReconfigNode(
            p,
            system.quorums_of(p),
            active=True,
            followers=followers(system, p),
            in_sink=flag,
            leave_mode=LeaveMode(scenario.leave_mode),
            sink_mode=sink_mode,
            combined_checks=scenario.combined_checks,
            validq=validq,
        ))
    for p in sorted_ids(scenario.joiners):
        nodes.append(ReconfigNode(
            p,
            active=False,
            in_sink=False,
            leave_mode=LeaveMode(scenario.leave_mode),
            sink_mode=sink_mode,
            combined_checks=scenario.combined_checks,
            validq=validq,
        ))
    return nodes


def build_world(scenario: ScenarioFile, seed: Optional[int] = None) -> World:
    system, attack = load_system(scenario.system)
    byzantine = attack.byzantine if scenario.attack is None else frozenset(scenario.attack)

    joiners = frozenset(scenario.joiners)
    if joiners & system.active:
        raise ScenarioError(f"Присоединяющиеся процессы уже активны: {sorted_ids(joiners & system.active)}")
    if joiners and scenario.protocol != "reconfig":
        raise ScenarioError("Присоединение поддерживается только протоколом reconfig")
    attack = Attack(byzantine, system.universe | joiners)

    outlived = frozenset(scenario.outlived)
    if not outlived <= attack.well_behaved:
        raise ScenarioError(f"𝓞 содержит некорректные процессы: {sorted_ids(outlived - attack.well_behaved)}")

    policy = SchedulePolicy(
        seed=scenario.seed if seed is None else seed,
        mode=ScheduleMode(scenario.policy.mode),
        fairness_bound=scenario.policy.fairness_bound or FAIRNESS_BOUND,
        script=tuple(scenario.policy.script),
    )
    world = World(
        system,
        attack,
        policy=policy,
        adversary=make_adversary(scenario.adversary, system, attack, scenario.adversary_args),
        step_cap=scenario.step_cap or STEP_CAP,
        outlived=outlived,
        tob_liveness=TobLiveness(scenario.tob_liveness),
    )
    for node in _nodes(scenario, system, attack):
        world.add_node(node)

    if scenario.protocol == "discovery" or scenario.sink_mode == SinkMode.DISCOVERY.value:
        for p in sorted_ids(system.active & attack.well_behaved):
            world.schedule_request(p, ClientRequest(op="discover"))
    for spec in scenario.requests:
        world.schedule_request(spec.process, _client_request(spec), spec.at_step)
    for probe in scenario.probes:
        world.add_probe(make_probe(probe))
    return world


# Прогон и вердикт
def verdict_of(scenario: ScenarioFile, world: World, trace: Trace) -> RunVerdict:
    probes = []
    for probe in world.probes:
        expect_violation = probe.expect == "violate"
        probes.append(ProbeOutcome(
            name=probe.name,
            expect=probe.expect,
            violated=probe.violated,
            count=probe.count,
            first_step=probe.first_step,
            witness=probe.witness,
            ok=probe.violated == expect_violation,
        ))

    responses = [ResponseRecord(step=r.step, process=r.process, kind=r.kind, detail=to_jsonable(r.detail))
                 for r in world.responses]

    mismatches = []
    if trace.outcome.value != "quiescent":
        mismatches.append(f"прогон не достиг покоя за {trace.steps} шагов")
    for probe in probes:
        if not probe.ok:
            mismatches.append(f"проверка {probe.name}: ожидалось {probe.expect}, нарушена={probe.violated}")
    for expected in scenario.expect_responses:
        got = [r.kind for r in world.responses if r.process == expected.process]
        if got != expected.kinds:
            mismatches.append(f"процесс {expected.process}: ожидались ответы {expected.kinds}, получены {got}")

    final_system = None
    discovery = None
    if scenario.protocol == "reconfig":
        final_system = to_file_model(snapshot(world), world.attack)
    elif scenario.protocol == "discovery":
        discovery = discovery_results(world)

    return RunVerdict(
        scenario=scenario.name,
        seed=world.policy.seed,
        outcome=trace.outcome.value,
        steps=trace.steps,
        verdict="PASS" if not mismatches else "FAIL",
        probes=probes,
        responses=responses,
        mismatches=mismatches,
        trace_digest=trace.digest(),
        final_system=final_system,
        discovery=discovery,
    )


def run_scenario(scenario: ScenarioFile, seed: Optional[int] = None) -> Tuple[RunVerdict, Trace]:
    world = build_world(scenario, seed)
    trace = world.run()
    verdict = verdict_of(scenario, world, trace)
    logger.info("сценарий %s, seed %s: %s", scenario.name, verdict.seed, verdict.verdict)
    return verdict, trace


def run_scenario_file(path: str, seed: Optional[int] = None) -> Tuple[RunVerdict, Trace]:
    return run_scenario(load_scenario(path), seed)


# Пересчёт результатов
def fixture_report(name: str) -> FixtureReport:
    qs, attack = load_fixture(name)
    return FixtureReport(
        name=name,
        consistency=check_consistency(qs, attack, attack.well_behaved),
        sharing=check_quorum_sharing(qs),
        graph=graph_summary(qs, attack),
        enumeration=enumeration_report(qs, attack),
    )


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def regenerate(results_dir: str = RESULTS_DIR) -> List[RunVerdict]:
    """Пересчитывает отчёты по всем системам и прогоняет все сценарии"""
    for name in fixture_names():
        report = fixture_report(name)
        _write(os.path.join(results_dir, "fixtures", f"{name}.json"), report.model_dump_json(indent=2) + "\n")

    verdicts = []
    for path in scenario_paths():
        verdict, _ = run_scenario_file(path)
        name = os.path.splitext(os.path.basename(path))[0]
        _write(os.path.join(results_dir, "scenarios", f"{name}.json"), verdict.model_dump_json(indent=2) + "\n")
        verdicts.append(verdict)
    return verdicts
