"""Scenario schema, runner wiring, artifact output, and the CLI."""

import json
import os

import pytest

from cecsim import cli
from cecsim import scenarios as scen
from cecsim.scenarios import (
    ScenarioError,
    builtin_scenario,
    builtin_scenario_names,
    evaluate_checks,
    load_scenario,
    run_scenario,
    write_artifacts,
)


def doc(**overrides):
    base = {
        "name": "probe",
        "topology": "testbed",
        "duration": 30,
        "actions": [],
    }
    base.update(overrides)
    return base


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class TestValidation:
    def test_minimal_document_loads(self):
        scenario = load_scenario(doc())
        assert scenario.name == "probe"
        assert scenario.duration == 30

    @pytest.mark.parametrize(
        "patch, fragment",
        [
            ({"name": ""}, "name"),
            ({"duration": 0}, "duration"),
            ({"duration": "long"}, "duration"),
            ({"topology": "made-up-place"}, "made-up-place"),
            ({"actions": [{"tick": 1, "actor": "ghost", "action": "power_on"}]}, "ghost"),
            ({"actions": [{"tick": 1, "actor": "tv", "action": "levitate"}]}, "levitate"),
            ({"actions": [{"tick": -2, "actor": "tv", "action": "power_on"}]}, "tick"),
            (
                {"actions": [{"tick": 1, "actor": "tv", "action": "send_frame",
                              "args": {"frame": "zz"}}]},
                "send_frame",
            ),
            (
                {"actions": [{"tick": 1, "actor": "tv", "action": "select_input",
                              "args": {"port": "left"}}]},
                "select_input",
            ),
            (
                {"actions": [{"tick": 1, "actor": "tv", "action": "start_broadcast_dos"}]},
                "listener",
            ),
            ({"overrides": {"ghost": {"osd_name": "X"}}}, "ghost"),
            ({"mitigations": [{"type": "strip_edge", "parent": "tv", "child": "hub"}]},
             "mitigation"),
            ({"relay": {"enabled": True, "commands": [{"command": "DOS1"}]}}, "tick"),
            ({"ids": {"config": {"nonsense": 1}}}, "detector config"),
        ],
    )
    def test_rejections_name_the_problem(self, patch, fragment):
        with pytest.raises(ScenarioError) as err:
            load_scenario(doc(**patch))
        assert fragment in str(err.value)

    def test_actions_sorted_by_tick(self):
        scenario = load_scenario(
            doc(
                actions=[
                    {"tick": 9, "actor": "tv", "action": "power_on"},
                    {"tick": 3, "actor": "tv", "action": "power_off"},
                ]
            )
        )
        assert [a.tick for a in scenario.actions] == [3, 9]

    def test_override_reaches_topology(self):
        scenario = load_scenario(doc(overrides={"tv": {"osd_name": "Lounge"}}))
        result = run_scenario(scenario)
        assert result.sim.topology.nodes["tv"].osd_name == "Lounge"

    def test_inline_topology(self):
        scenario = load_scenario(
            doc(
                topology={
                    "nodes": [
                        {"id": "tv", "kind": "display", "device_type": "television",
                         "osd_name": "TV"},
                    ],
                    "edges": [],
                }
            )
        )
        result = run_scenario(scenario)
        assert list(result.sim.topology.nodes) == ["tv"]

    def test_topology_file(self, tmp_path):
        from cecsim.testbed import TESTBED_TOPOLOGY

        path = tmp_path / "topo.json"
        path.write_text(json.dumps(TESTBED_TOPOLOGY))
        scenario = load_scenario(doc(topology=str(path)))
        assert len(run_scenario(scenario).sim.topology.nodes) == 7


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------

class TestBuiltins:
    def test_names_sorted_and_stable(self):
        names = builtin_scenario_names()
        assert names == sorted(names)
        assert "attack1-device-walk" in names
        assert len(names) == 12

    @pytest.mark.parametrize("name", scen.builtin_scenario_names())
    def test_every_builtin_passes_its_checks(self, name):
        result = run_scenario(builtin_scenario(name))
        outcomes = evaluate_checks(result)
        failed = [o for o in outcomes if not o.ok]
        assert not failed, "; ".join("%s: %s" % (o.label, o.detail) for o in failed)

    def test_unknown_builtin(self):
        with pytest.raises(ScenarioError):
            builtin_scenario("attack9-sharks")

    def test_builtin_isolation(self):
        # loading twice must hand out independent documents
        first = builtin_scenario("benign-power-cycle")
        first.duration = 1
        second = builtin_scenario("benign-power-cycle")
        assert second.duration == 100


# ---------------------------------------------------------------------------
# Runner artifacts
# ---------------------------------------------------------------------------

class TestArtifacts:
    def test_artifact_files(self, tmp_path):
        result = run_scenario(builtin_scenario("attack1-device-walk"))
        evaluate_checks(result)
        out = tmp_path / "run"
        written = write_artifacts(result, str(out))
        for name in ("trace.log", "state.log", "alerts.jsonl", "scanreport.json",
                     "scanreport.txt", "summary.json", "transfers.manifest"):
            assert name in written
            assert (out / name).exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["scenario"] == "attack1-device-walk"
        assert summary["alerts"] == 4
        assert all(c["ok"] for c in summary["checks"])

    def test_trace_round_trips_through_detector(self, tmp_path):
        from cecsim.bus import parse_trace_line
        from cecsim.ids import detect

        result = run_scenario(builtin_scenario("attack4-targeted-standby"))
        out = tmp_path / "run"
        write_artifacts(result, str(out))
        events = [
            parse_trace_line(line)
            for line in (out / "trace.log").read_text().splitlines()
            if line
        ]
        assert [a.rule for a in detect(events, tap="tv")] == [
            a.rule for a in result.alerts
        ]

    def test_transfer_bin_written(self, tmp_path):
        result = run_scenario(builtin_scenario("attack3-file-theft"))
        out = tmp_path / "run"
        written = write_artifacts(result, str(out))
        bins = [n for n in written if n.endswith(".bin")]
        assert len(bins) == 1
        payload = (out / bins[0]).read_bytes()
        assert payload == result.transfers[-1].payload

    def test_unknown_check_type_fails_gracefully(self):
        scenario = builtin_scenario("benign-status-query")
        scenario.checks = [{"type": "does_not_exist"}]
        result = run_scenario(scenario)
        outcomes = evaluate_checks(result)
        assert not outcomes[0].ok
        assert "unknown check" in outcomes[0].detail

    def test_deterministic_trace(self):
        first = run_scenario(builtin_scenario("attack2-mic-exfil")).trace.render_log()
        second = run_scenario(builtin_scenario("attack2-mic-exfil")).trace.render_log()
        assert first == second


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

class TestCli:
    def test_list_scenarios(self, capsys):
        assert cli.main(["list-scenarios"]) == 0
        out = capsys.readouterr().out
        assert "attack1-device-walk" in out
        assert "podium-strip-scan" in out

    def test_run_ok(self, capsys):
        code = cli.main(["run", "--scenario", "benign-status-query", "--check"])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS] zero_alerts" in out

    def test_run_check_failure_exits_three(self, tmp_path, capsys):
        document = {
            "name": "expected-to-fail",
            "topology": "testbed",
            "duration": 30,
            "actions": [
                {"tick": 2, "actor": "client", "action": "send_frame",
                 "args": {"frame": "aa:aa:aa:aa"}},
            ],
            "checks": [{"type": "zero_alerts"}],
        }
        path = tmp_path / "fail.json"
        path.write_text(json.dumps(document))
        assert cli.main(["run", "--scenario", str(path), "--check"]) == 3
        assert "[FAIL] zero_alerts" in capsys.readouterr().out

    def test_run_without_check_flag_exits_zero(self, tmp_path, capsys):
        document = {
            "name": "soft-fail",
            "topology": "testbed",
            "duration": 20,
            "actions": [
                {"tick": 2, "actor": "client", "action": "send_frame",
                 "args": {"frame": "aa:aa:aa:aa"}},
            ],
            "checks": [{"type": "zero_alerts"}],
        }
        path = tmp_path / "soft.json"
        path.write_text(json.dumps(document))
        assert cli.main(["run", "--scenario", str(path)]) == 0
        capsys.readouterr()

    def test_run_unknown_scenario_exits_two(self, capsys):
        assert cli.main(["run", "--scenario", "no-such"]) == 2
        assert "no-such" in capsys.readouterr().err

    def test_run_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "artifacts"
        code = cli.main(
            ["run", "--scenario", "benign-power-cycle", "--out", str(out), "--check"]
        )
        assert code == 0
        assert (out / "trace.log").exists()
        capsys.readouterr()

    def test_run_seed_override_changes_nothing_observable(self, capsys):
        # the seed steers payload generation only; benign runs stay green
        assert cli.main(["run", "--scenario", "benign-input-select", "--seed", "77",
                         "--check"]) == 0
        capsys.readouterr()

    def test_scan_table(self, capsys):
        assert cli.main(["scan", "--topology", "testbed"]) == 0
        out = capsys.readouterr().out
        assert "Addr 00" in out
        assert "STR-ZA2100" in out

    def test_scan_json(self, capsys):
        assert cli.main(["scan", "--topology", "testbed", "--json"]) == 0
        from cecsim.testbed import EXPECTED_TESTBED_SCAN

        assert json.loads(capsys.readouterr().out) == EXPECTED_TESTBED_SCAN

    def test_scan_actor_override(self, capsys):
        assert cli.main(["scan", "--topology", "testbed", "--actor", "client"]) == 0
        capsys.readouterr()

    def test_scan_unknown_actor_exits_two(self, capsys):
        assert cli.main(["scan", "--topology", "testbed", "--actor", "ghost"]) == 2
        capsys.readouterr()

    def test_ids_analyze(self, tmp_path, capsys):
        run_out = tmp_path / "run"
        assert cli.main(
            ["run", "--scenario", "attack1-device-walk", "--out", str(run_out)]
        ) == 0
        capsys.readouterr()
        assert cli.main(["ids", "analyze", str(run_out / "trace.log")]) == 0
        out = capsys.readouterr().out
        assert "ScanBurst" in out

    def test_ids_analyze_missing_file_exits_two(self, capsys):
        assert cli.main(["ids", "analyze", "/nonexistent/trace.log"]) == 2
        capsys.readouterr()

    def test_ids_analyze_garbage_exits_two(self, tmp_path, capsys):
        path = tmp_path / "garbage.log"
        path.write_text("this is not a trace\n")
        assert cli.main(["ids", "analyze", str(path)]) == 2
        capsys.readouterr()

    def test_ids_config_file(self, tmp_path, capsys):
        config_path = tmp_path / "ids.json"
        config_path.write_text(json.dumps({"scan_distinct_addresses": 99}))
        code = cli.main(
            ["run", "--scenario", "attack1-device-walk", "--ids-config", str(config_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        # the raised threshold silences the scan-burst rule
        assert "[FAIL] alert_exactly" in out
