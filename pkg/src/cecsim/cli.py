"""Command line front end for the consumer-bus lab.

Subcommands: run a scenario, take a one-off device census, serve the web
relay, replay a trace file through the detector, and list the canned
scenarios.  Exit codes: 0 success, 2 bad input, 3 a requested check failed.
"""

import argparse
import json
import logging
import sys

from cecsim import ids as ids_mod
from cecsim import relay as relay_mod
from cecsim import scenarios as scen
from cecsim.attacks import ScanWalk
from cecsim.bus import Simulator, parse_trace_line
from cecsim.frames import FrameError
from cecsim.testbed import TESTBED_NAME, build_testbed
from cecsim.topology import TopologyError, load_topology

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_CHECK_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cecsim",
        description="Simulated HDMI control-bus testbed: attacks, defenses, scenarios.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and report its checks")
    run.add_argument("--scenario", required=True, help="builtin name or path to a scenario file")
    run.add_argument("--out", help="directory for trace/report/transfer artifacts")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--ticks-per-second", type=int, help="override the clock rate")
    run.add_argument("--relay-url", help="use a live relay at this base URL")
    run.add_argument("--ids-config", help="JSON file with detector thresholds")
    run.add_argument("--ids-tap", help="device whose vantage point the detector taps")
    run.add_argument(
        "--check", action="store_true", help="exit nonzero when any scenario check fails"
    )

    scan = sub.add_parser("scan", help="walk a topology and print the device census")
    scan.add_argument("--topology", default=TESTBED_NAME, help="builtin name or topology file")
    scan.add_argument("--actor", help="device that performs the walk (default: first listener)")
    scan.add_argument("--json", action="store_true", help="print the census as JSON")

    relay = sub.add_parser("relay", help="relay utilities")
    relay_sub = relay.add_subparsers(dest="relay_command", required=True)
    serve = relay_sub.add_parser("serve", help="serve the two-mailbox command relay over HTTP")
    serve.add_argument("--bind", default="127.0.0.1:8750", help="host:port to listen on")

    ids = sub.add_parser("ids", help="detector utilities")
    ids_sub = ids.add_subparsers(dest="ids_command", required=True)
    analyze = ids_sub.add_parser("analyze", help="replay a trace log through the detector")
    analyze.add_argument("trace", help="path to a trace.log file")
    analyze.add_argument("--ids-config", help="JSON file with detector thresholds")
    analyze.add_argument("--ids-tap", help="only analyze frames this device observed")

    sub.add_parser("list-scenarios", help="list the builtin scenarios")
    return parser


def _load_ids_config(path: str | None) -> ids_mod.RuleConfig | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return ids_mod.RuleConfig.from_dict(raw)


def _cmd_run(args) -> int:
    scenario = scen.resolve_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    ids_config = _load_ids_config(args.ids_config)
    relay_client = None
    if args.relay_url:
        relay_client = relay_mod.HttpRelayClient(args.relay_url)
    result = scen.run_scenario(
        scenario,
        relay_client=relay_client,
        ids_config=ids_config,
        ids_tap=args.ids_tap,
        ticks_per_second=args.ticks_per_second,
    )
    outcomes = scen.evaluate_checks(result)
    if args.out:
        written = scen.write_artifacts(result, args.out)
        log.info("wrote %d artifacts to %s", len(written), args.out)
    print(
        "scenario %s: %d ticks, %d frames, %d alerts, %d transfers"
        % (
            scenario.name,
            scenario.duration,
            len(result.trace.events),
            len(result.alerts),
            len(result.transfers),
        )
    )
    for outcome in outcomes:
        print("[%s] %s: %s" % ("PASS" if outcome.ok else "FAIL", outcome.label, outcome.detail))
    if args.check and any(not o.ok for o in outcomes):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_scan(args) -> int:
    if args.topology == TESTBED_NAME:
        topology = build_testbed()
    else:
        topology = load_topology(args.topology)
    actor = args.actor
    if actor is None:
        listeners = topology.listeners()
        actor = listeners[0] if listeners else topology.root
    if actor not in topology.nodes:
        raise TopologyError("scan actor %r is not in the topology" % actor)
    sim = Simulator(topology)
    sim.start()
    walk = ScanWalk(actor)
    sim.add_actor(walk)
    walk.start(sim)
    sim.run(until=140)
    if not sim.artifacts.scan_reports:
        print("walk from %s produced no census" % actor, file=sys.stderr)
        return EXIT_BAD_INPUT
    report = sim.artifacts.scan_reports[-1]
    print(report.to_json() if args.json else report.render_table(), end="")
    if not args.json:
        print()
    return EXIT_OK


def _cmd_relay_serve(args) -> int:
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        print("--bind expects host:port, got %r" % args.bind, file=sys.stderr)
        return EXIT_BAD_INPUT
    server = relay_mod.RelayServer((host, int(port_text)))
    print("relay listening on %s (paths %s and %s)"
          % (server.url, relay_mod.LISTENER_PATH, relay_mod.WEBCLIENT_PATH))
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _cmd_ids_analyze(args) -> int:
    events = []
    with open(args.trace, "r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(parse_trace_line(line))
            except (ValueError, FrameError) as exc:
                print("%s:%d: %s" % (args.trace, number, exc), file=sys.stderr)
                return EXIT_BAD_INPUT
    config = _load_ids_config(args.ids_config)
    alerts = ids_mod.detect(events, config, args.ids_tap)
    for alert in alerts:
        print(alert.to_json())
    print("%d alerts from %d frames" % (len(alerts), len(events)), file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "scan":
            return _cmd_scan(args)
        if args.command == "relay":
            return _cmd_relay_serve(args)
        if args.command == "ids":
            return _cmd_ids_analyze(args)
        if args.command == "list-scenarios":
            for name in scen.builtin_scenario_names():
                print(name)
            return EXIT_OK
    except (scen.ScenarioError, TopologyError, FrameError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT
    return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
