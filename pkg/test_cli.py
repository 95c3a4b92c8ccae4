import json
import os

from click.testing import CliRunner

from config import SCENARIOS_DIR
from main import cli, parse_ids


def invoke(*args):
    return CliRunner().invoke(cli, list(args))


def test_parse_ids():
    assert parse_ids("1, 2,x,") == [1, 2, "x"]
    assert parse_ids(None) is None


def test_check_outlived():
    result = invoke("check", "-s", "silent_member", "-o", "2,3,5")
    assert result.exit_code == 0
    reports = json.loads(result.stdout)
    assert reports == [{"property": "Outlived", "holds": True}]


def test_check_consistency_fails_after_race():
    result = invoke("check", "-s", "add_race_after", "-p", "consistency")
    assert result.exit_code == 1
    report = json.loads(result.stdout)[0]
    assert report["property"] == "Consistency"
    assert not report["holds"]
    assert len(report["witness"]["quorums"]) == 2


def test_check_with_attack_override():
    # без византийских процессов {1, 2, 4} и {2, 3} пересекаются по 2
    result = invoke("check", "-s", "silent_member", "-a", "", "-p", "consistency", "--format", "text")
    assert result.exit_code == 0
    assert result.stdout.strip() == "Consistency: holds"


def test_check_input_errors(tmp_path):
    assert invoke("check", "-s", "no_such_system").exit_code == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"universe": [1], "quorums": {"1": [[]]}}), encoding="utf-8")
    assert invoke("check", "-s", str(bad)).exit_code == 2
    malformed = tmp_path / "malformed.json"
    malformed.write_text(json.dumps({"quorums": 5}), encoding="utf-8")
    assert invoke("check", "-s", str(malformed)).exit_code == 2


def test_fixture_names_listed():
    result = invoke("check", "--help")
    assert result.exit_code == 0
    for name in ("silent_member", "tail_sink", "add_race"):
        assert name in result.output
    missing = invoke("check", "-s", "no_such_system")
    assert missing.exit_code == 2
    assert "silent_member" in missing.stderr


def test_fixture_by_file_name():
    result = invoke("check", "-s", "silent_member.json", "-o", "2,3,5")
    assert result.exit_code == 0


def test_graph_json():
    result = invoke("graph", "-s", "tail_sink")
    assert result.exit_code == 0
    summary = json.loads(result.stdout)
    assert summary["sinks"] == [[1, 2, 3, 5]]
    assert summary["well_behaved_sink"] == [1, 2, 3]
    assert summary["unique_sink"]


def test_graph_dot():
    result = invoke("graph", "-s", "tail_sink", "--format", "dot")
    assert result.exit_code == 0
    assert result.stdout.startswith("digraph quorum_graph {")
    assert '"5" [style="dashed,filled"];' in result.stdout


def test_enumerate():
    result = invoke("enumerate", "-s", "tail_sink", "-k", "1")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["minimal_quorums"] == [[1, 2], [1, 3, 5]]
    assert set(report["blocking_sets"]) == {"1", "2", "3", "4", "6"}


def test_simulate_writes_trace(tmp_path):
    trace = tmp_path / "trace.jsonl"
    path = os.path.join(SCENARIOS_DIR, "ac_leave_dilemma.json")
    result = invoke("simulate", path, "--trace", str(trace))
    assert result.exit_code == 0
    verdict = json.loads(result.stdout)
    assert verdict["verdict"] == "PASS"
    lines = trace.read_text(encoding="utf-8").splitlines()
    assert lines
    assert all(json.loads(line)["kind"] for line in lines)


def test_simulate_missing_file():
    assert invoke("simulate", "no_such_scenario.json").exit_code == 2
