"""
Командная строка hqs: проверки свойств, граф кворумов, перечисления,
прогон сценариев и пересчёт результатов. Результаты пишутся в stdout,
диагностика в stderr.
"""
import functools
import json
import sys
from typing import List, Optional

import click
from pydantic import ValidationError

from config import OUTLIVED_BOUND, RESULTS_DIR, setup_logging
from database import SessionLocal, init_db, record_run
from errors import HqsError
from props import (
    check_available_inside,
    check_availability,
    check_consistency,
    check_outlived,
    check_quorum_inclusion,
    check_quorum_sharing,
    enumeration_report,
)
from qsys import Attack, ProcessId, load_system, sorted_ids
from quorum_graph import graph_summary, to_dot
from scenarios import fixture_names, load_scenario, regenerate, resolve_system_path, run_scenario

PROPERTIES = ["consistency", "availability", "available_inside", "inclusion", "sharing", "outlived"]


def parse_ids(text: Optional[str]) -> Optional[List[ProcessId]]:
    """'1,2,x' -> [1, 2, 'x']"""
    if text is None:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        out.append(int(part) if part.lstrip("-").isdigit() else part)
    return out


def handle_errors(fn):
    """HqsError и ошибки валидации входных файлов превращаются в код выхода"""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HqsError as e:
            click.echo(f"Ошибка: {e.detail}", err=True)
            sys.exit(e.exit_code)
        except ValidationError as e:
            click.echo(f"Некорректный входной файл:\n{e}", err=True)
            sys.exit(2)
    return wrapper


def _load(system: str, attack: Optional[str]):
    qs, parsed = load_system(resolve_system_path(system))
    byzantine = parse_ids(attack)
    if byzantine is not None:
        parsed = Attack(frozenset(byzantine), qs.universe)
    return qs, parsed


def _echo_json(data):
    click.echo(json.dumps(data, indent=2, ensure_ascii=False))


system_option = click.option(
    "--system", "-s", required=True,
    help=f"Файл системы или имя из fixtures/ ({', '.join(fixture_names())})",
)
attack_option = click.option("--attack", "-a", default=None, help="Византийские процессы через запятую")
format_option = click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")


@click.group()
@click.option("--log-level", default=None, help="Уровень логирования (по умолчанию HQS_LOG_LEVEL)")
def cli(log_level):
    """Инструменты для гетерогенных систем кворумов"""
    setup_logging(log_level)


@cli.command()
@system_option
@attack_option
@click.option("--property", "-p", "properties", multiple=True, type=click.Choice(PROPERTIES),
              help="Проверяемые свойства (можно несколько)")
@click.option("--set", "set_P", default=None, help="Множество P (по умолчанию 𝓦)")
@click.option("--at", "at_P", default=None, help="Где ищется кворум для availability (по умолчанию P)")
@click.option("--outlived", "-o", default=None, help="Проверить, что O переживший")
@format_option
@handle_errors
def check(system, attack, properties, set_P, at_P, outlived, fmt):
    """Проверка свойств системы кворумов"""
    qs, att = _load(system, attack)
    P = parse_ids(set_P)
    O = parse_ids(outlived)
    if P is None:
        P = O if O is not None else sorted_ids(att.well_behaved)
    at = parse_ids(at_P) or P
    if not properties:
        properties = ("outlived",) if O is not None else ("consistency", "sharing")

    reports = []
    for prop in properties:
        if prop == "consistency":
            reports.append(check_consistency(qs, att, P))
        elif prop == "availability":
            reports.append(check_availability(qs, P, at))
        elif prop == "available_inside":
            reports.append(check_available_inside(qs, P))
        elif prop == "inclusion":
            reports.append(check_quorum_inclusion(qs, att, P))
        elif prop == "sharing":
            reports.append(check_quorum_sharing(qs))
        elif prop == "outlived":
            reports.append(check_outlived(qs, att, O if O is not None else P))

    if fmt == "json":
        _echo_json([r.model_dump(mode="json", exclude_none=True) for r in reports])
    else:
        for r in reports:
            line = f"{r.property.value}: {'holds' if r.holds else 'fails'}"
            if r.witness is not None:
                line += f" {r.witness.model_dump(exclude_none=True)}"
            click.echo(line)
    sys.exit(0 if all(r.holds for r in reports) else 1)


@cli.command()
@system_option
@attack_option
@click.option("--format", "fmt", type=click.Choice(["json", "dot", "text"]), default="json")
@handle_errors
def graph(system, attack, fmt):
    """Граф кворумов, компоненты сильной связности и сток"""
    qs, att = _load(system, attack)
    summary = graph_summary(qs, att)
    if fmt == "dot":
        click.echo(to_dot(qs, att), nl=False)
    elif fmt == "json":
        _echo_json(summary.model_dump(mode="json"))
    else:
        click.echo(f"компоненты: {summary.components}")
        click.echo(f"стоки: {summary.sinks}")
        click.echo(f"корректная часть стока: {summary.well_behaved_sink}")
    if not summary.unique_sink:
        click.echo(f"Стоковых компонент: {len(summary.sinks)}", err=True)
        sys.exit(1)


@cli.command("enumerate")
@system_option
@attack_option
@click.option("-k", "k", type=int, default=2, help="Наибольший размер блокирующего множества")
@click.option("--bound", type=int, default=OUTLIVED_BOUND, help="Предел |𝓦| для перебора outlived")
@format_option
@handle_errors
def enumerate_cmd(system, attack, k, bound, fmt):
    """Минимальные кворумы, блокирующие множества и максимальные пережившие множества"""
    qs, att = _load(system, attack)
    report = enumeration_report(qs, att, k=k, size_bound=bound)
    if fmt == "json":
        _echo_json(report.model_dump(mode="json"))
    else:
        click.echo(f"MQ: {report.minimal_quorums}")
        for p, sets in report.blocking_sets.items():
            click.echo(f"блокирующие для {p}: {sets}")
        click.echo(f"outlived: {report.maximal_outlived}")


@cli.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Переопределить seed сценария")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Записать трассу (JSON lines)")
@click.option("--store", is_flag=True, help="Сохранить вердикт в базу результатов")
@handle_errors
def simulate(scenario, seed, trace_path, store):
    """Прогон сценария: вердикт в stdout, код 0 при PASS"""
    verdict, trace = run_scenario(load_scenario(scenario), seed)
    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write(trace.to_jsonl())
    if store:
        _store([verdict])
    click.echo(verdict.model_dump_json(indent=2))
    sys.exit(0 if verdict.verdict == "PASS" else 1)


@cli.command("regenerate")
@click.option("--results-dir", type=click.Path(file_okay=False), default=RESULTS_DIR)
@click.option("--store", is_flag=True, help="Сохранить вердикты в базу результатов")
@handle_errors
def regenerate_cmd(results_dir, store):
    """Пересчёт отчётов по всем системам и прогон всех сценариев"""
    verdicts = regenerate(results_dir)
    if store:
        _store(verdicts)
    failed = [v.scenario for v in verdicts if v.verdict != "PASS"]
    click.echo(f"сценариев: {len(verdicts)}, с ошибками: {len(failed)}")
    for name in failed:
        click.echo(f"  FAIL {name}", err=True)
    sys.exit(1 if failed else 0)


def _store(verdicts):
    init_db()
    db = SessionLocal()
    try:
        for verdict in verdicts:
            record_run(db, verdict)
    finally:
        db.close()


if __name__ == "__main__":
    cli()
