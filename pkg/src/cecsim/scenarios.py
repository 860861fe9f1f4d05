"""Scenario loading, the canned scenario catalogue, and the runner.

A scenario is a JSON document: a topology (inline, by file, or the built
in lab tree), optional per-node overrides and mitigations, a timed action
list, optional relay plumbing, and a list of post-run checks.  The runner
wires up the attack services, replays the actions, runs the detector over
the finished trace, and can persist every artifact of the run.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from functools import partial
from random import Random

from cecsim import ids as ids_mod
from cecsim import relay as relay_mod
from cecsim.attacks import AttackController, ScanWalk
from cecsim.bus import Call, Simulator, Trace, Transmit, User
from cecsim.devices import UserAction
from cecsim.frames import FrameError, parse_frame
from cecsim.testbed import EXPECTED_TESTBED_SCAN, TESTBED_NAME, TESTBED_TOPOLOGY
from cecsim.topology import DeviceKind, Topology, TopologyError, build_topology
from cecsim.transfer import FileReceiver, FileSender, PayloadStore, write_transfer_artifacts

log = logging.getLogger(__name__)

_USER_ACTIONS = {
    "power_on": UserAction.POWER_ON,
    "power_off": UserAction.POWER_OFF,
    "select_input": UserAction.SELECT_INPUT,
    "open_settings": UserAction.OPEN_SETTINGS,
    "disable_cec": UserAction.DISABLE_CEC,
}

_SERVICE_ACTIONS = (
    "send_frame",
    "scan",
    "request_file",
    "arm_targeted_dos",
    "start_broadcast_dos",
    "cancel_attacks",
)


class ScenarioError(ValueError):
    """Raised when a scenario document fails validation."""


@dataclass
class ScenarioAction:
    tick: int
    actor: str
    action: str
    args: dict = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    topology_config: dict
    duration: int
    seed: int = 0
    ticks_per_second: int = 10
    actions: list[ScenarioAction] = field(default_factory=list)
    mitigations: list = field(default_factory=list)
    relay: dict | None = None
    listener_options: dict = field(default_factory=dict)
    ids_options: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)


def _resolve_topology(raw, base_dir: str | None) -> dict:
    if isinstance(raw, dict):
        return copy.deepcopy(raw)
    if raw == TESTBED_NAME:
        return copy.deepcopy(TESTBED_TOPOLOGY)
    if isinstance(raw, str):
        path = raw if os.path.isabs(raw) or base_dir is None else os.path.join(base_dir, raw)
        if not os.path.exists(path):
            raise ScenarioError("topology %r is neither builtin nor a file" % raw)
        with open(path, "r", encoding="utf-8") as fh:
            try:
                return json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError("topology file %s is not JSON: %s" % (path, exc)) from None
    raise ScenarioError("scenario topology must be a name, path, or object")


def load_scenario(document: dict, base_dir: str | None = None) -> Scenario:
    """Validate a scenario document; every complaint names the field."""
    if not isinstance(document, dict):
        raise ScenarioError("scenario must be a JSON object")
    name = document.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("scenario needs a non-empty name")
    if "topology" not in document:
        raise ScenarioError("scenario %r is missing its topology" % name)
    duration = document.get("duration")
    if not isinstance(duration, int) or duration < 1:
        raise ScenarioError("scenario %r duration must be a positive tick count" % name)

    config = _resolve_topology(document["topology"], base_dir)
    overrides = document.get("overrides") or {}
    if overrides:
        by_id = {n.get("id"): n for n in config.get("nodes", [])}
        for node_id, patch in overrides.items():
            if node_id not in by_id:
                raise ScenarioError("override targets unknown node %r" % node_id)
            by_id[node_id].update(patch)

    try:
        topology = build_topology(config)
    except TopologyError as exc:
        raise ScenarioError("scenario %r topology invalid: %s" % (name, exc)) from None

    mitigations = []
    for raw in document.get("mitigations", []):
        try:
            mitigation = ids_mod.parse_mitigation(raw)
            ids_mod.apply_mitigation(topology, mitigation)
        except (TopologyError, KeyError) as exc:
            raise ScenarioError("scenario %r mitigation invalid: %s" % (name, exc)) from None
        mitigations.append(mitigation)

    listeners = topology.listeners()
    actions = []
    for raw in document.get("actions", []):
        tick, actor, action = raw.get("tick"), raw.get("actor"), raw.get("action")
        if not isinstance(tick, int) or tick < 0:
            raise ScenarioError("action %r needs a tick >= 0" % raw)
        if actor not in topology.nodes:
            raise ScenarioError("action at tick %d names unknown actor %r" % (tick, actor))
        if action not in _USER_ACTIONS and action not in _SERVICE_ACTIONS:
            raise ScenarioError("unknown action %r at tick %d" % (action, tick))
        args = raw.get("args") or {}
        if action == "send_frame":
            try:
                parse_frame(args.get("frame", ""))
            except FrameError as exc:
                raise ScenarioError("send_frame at tick %d: %s" % (tick, exc)) from None
        if action == "select_input" and not isinstance(args.get("port"), int):
            raise ScenarioError("select_input at tick %d needs an integer port" % tick)
        if action == "request_file":
            peer = args.get("peer")
            if isinstance(peer, str) and peer not in topology.nodes:
                raise ScenarioError("request_file at tick %d names unknown peer %r" % (tick, peer))
        if action in ("arm_targeted_dos", "start_broadcast_dos", "cancel_attacks"):
            if actor not in listeners:
                raise ScenarioError(
                    "%s at tick %d must run on a listener device, not %r" % (action, tick, actor)
                )
        actions.append(ScenarioAction(tick, actor, action, args))
    actions.sort(key=lambda a: a.tick)

    relay_cfg = document.get("relay")
    if relay_cfg is not None:
        if not isinstance(relay_cfg, dict):
            raise ScenarioError("relay section must be an object")
        if relay_cfg.get("enabled") and not listeners:
            raise ScenarioError("relay needs an attacker listener in the topology")
        for cmd in relay_cfg.get("commands", []):
            if not isinstance(cmd.get("tick"), int) or not isinstance(cmd.get("command"), str):
                raise ScenarioError("relay commands need a tick and a command string")

    ids_options = document.get("ids") or {}
    if ids_options.get("config"):
        try:
            ids_mod.RuleConfig.from_dict(ids_options["config"])
        except (ValueError, TypeError) as exc:
            raise ScenarioError("detector config invalid: %s" % exc) from None

    return Scenario(
        name=name,
        topology_config=config,
        duration=duration,
        seed=int(document.get("seed", 0)),
        ticks_per_second=int(document.get("ticks_per_second", 10)),
        actions=actions,
        mitigations=mitigations,
        relay=relay_cfg,
        listener_options=document.get("listener_options") or {},
        ids_options=ids_options,
        checks=list(document.get("checks", [])),
    )


def load_scenario_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("scenario file %s is not JSON: %s" % (path, exc)) from None
    return load_scenario(document, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    label: str
    ok: bool
    detail: str


@dataclass
class RunResult:
    scenario: Scenario
    sim: Simulator
    trace: Trace
    alerts: list
    controllers: dict[str, AttackController]
    receivers: dict[str, FileReceiver]
    poller: relay_mod.RelayPoller | None = None
    relay_client: object | None = None
    relay_posts: list = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def reports(self):
        return self.sim.artifacts.scan_reports

    @property
    def transfers(self):
        return self.sim.artifacts.transfers


def run_scenario(
    scenario: Scenario,
    *,
    relay_client=None,
    ids_config: ids_mod.RuleConfig | None = None,
    ids_tap: str | None = None,
    ticks_per_second: int | None = None,
) -> RunResult:
    """Build the simulator, wire services, replay actions, detect."""
    topology = build_topology(scenario.topology_config)
    for mitigation in scenario.mitigations:
        topology = ids_mod.apply_mitigation(topology, mitigation)

    tps = ticks_per_second or scenario.ticks_per_second
    sim = Simulator(topology, seed=scenario.seed, ticks_per_second=tps)

    options = scenario.listener_options
    controllers: dict[str, AttackController] = {}
    for listener_id in topology.listeners():
        capture = None
        if options.get("capture_bytes"):
            capture = Random(scenario.seed ^ 0x636170).randbytes(int(options["capture_bytes"]))
        store = PayloadStore(
            seed=scenario.seed, mic_bytes=int(options.get("mic_bytes", 1024)), capture=capture
        )
        controller = AttackController(
            listener_id,
            store,
            targeted_target=int(options.get("targeted_target", 0)),
            display_address=int(options.get("display_address", 0)),
        )
        controller.register(sim)
        sim.add_actor(FileSender(listener_id, store))
        controllers[listener_id] = controller

    receivers: dict[str, FileReceiver] = {}
    for node_id, node in topology.nodes.items():
        if node.cec_addressed and node.kind is not DeviceKind.ATTACKER_LISTENER:
            receiver = FileReceiver(node_id)
            sim.add_actor(receiver)
            receivers[node_id] = receiver

    result = RunResult(
        scenario=scenario,
        sim=sim,
        trace=sim.trace,
        alerts=[],
        controllers=controllers,
        receivers=receivers,
    )

    relay_cfg = scenario.relay or {}
    if relay_cfg.get("enabled") or relay_client is not None:
        if not controllers:
            raise ScenarioError("relay needs an attacker listener in the topology")
        client = relay_client if relay_client is not None else relay_mod.LoopbackRelayClient()
        interval = int(relay_cfg.get("interval_ticks", 2 * tps))
        poller = relay_mod.RelayPoller(client, next(iter(controllers.values())), interval)
        sim.add_actor(poller)
        result.poller = poller
        result.relay_client = client
        for cmd in relay_cfg.get("commands", []):
            envelope = {k: v for k, v in cmd.items() if k != "tick"}
            envelope.setdefault("issued_at", cmd["tick"])

            def post(inner_sim, tick, env=envelope):
                text = json.dumps(env)
                try:
                    client.post(relay_mod.LISTENER_PATH, text)
                    result.relay_posts.append((tick, env.get("command")))
                except relay_mod.RelayUnreachable as exc:
                    log.warning("scenario post failed: %s", exc)

            sim.schedule(cmd["tick"], Call(post))

    sim.start()
    for action in scenario.actions:
        _schedule_action(sim, action, controllers, receivers)
    sim.run(scenario.duration)

    tap = ids_tap or scenario.ids_options.get("tap") or topology.root
    config = ids_config
    if config is None and scenario.ids_options.get("config"):
        config = ids_mod.RuleConfig.from_dict(scenario.ids_options["config"])
    result.alerts = ids_mod.detect(sim.trace.events, config, tap)
    return result


def _schedule_action(sim, action: ScenarioAction, controllers, receivers):
    if action.action in _USER_ACTIONS:
        sim.schedule(
            action.tick,
            User(action.actor, _USER_ACTIONS[action.action], action.args.get("port")),
        )
        return
    if action.action == "send_frame":
        sim.schedule(action.tick, Transmit(action.actor, parse_frame(action.args["frame"])))
        return
    if action.action == "scan":
        def start_scan(inner_sim, tick, actor=action.actor):
            controller = controllers.get(actor)
            if controller is not None:
                controller.start_scan(inner_sim)
            else:
                walk = ScanWalk(actor)
                inner_sim.add_actor(walk)
                walk.start(inner_sim)

        sim.schedule(action.tick, Call(start_scan))
        return
    if action.action == "request_file":
        def request(inner_sim, tick, actor=action.actor, peer=action.args.get("peer")):
            address = peer
            if isinstance(peer, str):
                address = inner_sim.logical.get(peer)
            receivers[actor].request_file(inner_sim, address)

        sim.schedule(action.tick, Call(request))
        return
    if action.action == "arm_targeted_dos":
        def arm(inner_sim, tick, actor=action.actor, args=action.args):
            controller = controllers[actor]
            if "target" in args:
                controller.targeted.target_address = int(args["target"])
            controller.targeted.arm()

        sim.schedule(action.tick, Call(arm))
        return
    if action.action == "start_broadcast_dos":
        sim.schedule(
            action.tick,
            Call(lambda inner_sim, tick, actor=action.actor: controllers[actor].broadcast.activate(inner_sim)),
        )
        return
    if action.action == "cancel_attacks":
        sim.schedule(
            action.tick,
            Call(lambda inner_sim, tick, actor=action.actor: controllers[actor].cancel_all()),
        )
        return
    raise ScenarioError("unhandled action %r" % action.action)


def write_artifacts(result: RunResult, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def save(name: str, text: str):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(name)

    save("trace.log", result.trace.render_log())
    save("state.log", result.trace.render_state_log())
    save("alerts.jsonl", "".join(alert.to_json() + "\n" for alert in result.alerts))
    if result.reports:
        report = result.reports[-1]
        save("scanreport.json", report.to_json() + "\n")
        save("scanreport.txt", report.render_table())
    written.extend(write_transfer_artifacts(result.transfers, out_dir))
    summary = {
        "scenario": result.scenario.name,
        "seed": result.scenario.seed,
        "duration": result.scenario.duration,
        "events": len(result.trace.events),
        "alerts": len(result.alerts),
        "scan_reports": len(result.reports),
        "transfers": [
            {"session": t.session_id, "status": t.status, "bytes": len(t.payload)}
            for t in result.transfers
        ],
        "checks": [
            {"label": c.label, "ok": c.ok, "detail": c.detail} for c in result.checks
        ],
    }
    save("summary.json", json.dumps(summary, indent=2) + "\n")
    return written


# ---------------------------------------------------------------------------
# Post-run checks
# ---------------------------------------------------------------------------

_CHURN_SET = frozenset((0x04, 0x82))
_CONTROL_SET = frozenset((0x04, 0x36, 0x80, 0x82))
_ANNOUNCE_SET = frozenset((0x84, 0x87, 0x80))


def _power_timeline(result: RunResult, device: str) -> list[str]:
    """Per-tick power value for a device across the whole run."""
    node = result.sim.topology.nodes[device]
    timeline = []
    value = node.initial_power.value
    changes = [
        (c.tick, c.value) for c in result.trace.changes
        if c.device == device and c.field == "power"
    ]
    idx = 0
    for tick in range(result.scenario.duration):
        while idx < len(changes) and changes[idx][0] <= tick:
            value = changes[idx][1]
            idx += 1
        timeline.append(value)
    return timeline


def _input_sequence(result: RunResult, device: str) -> list[int]:
    return [
        int(c.value) for c in result.trace.changes
        if c.device == device and c.field == "active_input_port" and c.value != "None"
    ]


def _check_scan_report_equals(result: RunResult, args: dict) -> CheckResult:
    expected = args.get("expected")
    if expected == TESTBED_NAME:
        expected = EXPECTED_TESTBED_SCAN
    if not result.reports:
        return CheckResult("scan_report_equals", False, "no scan report was produced")
    got = result.reports[-1].to_dict()
    if got == expected:
        return CheckResult("scan_report_equals", True, "%d rows match" % len(got))
    missing = {k: v for k, v in expected.items() if got.get(k) != v}
    extra = sorted(set(got) - set(expected))
    return CheckResult(
        "scan_report_equals", False,
        "mismatched rows %s, unexpected rows %s" % (sorted(missing), extra),
    )


def _check_scan_only_actor(result: RunResult, args: dict) -> CheckResult:
    actor = args["actor"]
    if not result.reports:
        return CheckResult("scan_only_actor", False, "no scan report was produced")
    report = result.reports[-1]
    own = result.sim.logical.get(actor)
    addrs = sorted(report.entries)
    if report.actor == actor and addrs == [own]:
        return CheckResult("scan_only_actor", True, "only address %d visible" % own)
    return CheckResult(
        "scan_only_actor", False,
        "report by %s lists addresses %s, expected just %s" % (report.actor, addrs, own),
    )


def _check_zero_alerts(result: RunResult, args: dict) -> CheckResult:
    if not result.alerts:
        return CheckResult("zero_alerts", True, "no alerts raised")
    rules = sorted({a.rule for a in result.alerts})
    return CheckResult("zero_alerts", False, "%d alerts raised: %s" % (len(result.alerts), rules))


def _check_alerts_include(result: RunResult, args: dict) -> CheckResult:
    rule = args["rule"]
    hits = [a for a in result.alerts if a.rule == rule]
    if hits:
        return CheckResult("alerts_include", True, "%d %s alert(s)" % (len(hits), rule))
    return CheckResult("alerts_include", False, "no %s alert raised" % rule)


def _check_alert_exactly(result: RunResult, args: dict) -> CheckResult:
    rule = args["rule"]
    hits = [a for a in result.alerts if a.rule == rule]
    count = int(args.get("count", 1))
    subject = args.get("subject")
    ok = len(hits) == count and (subject is None or all(a.subject == subject for a in hits))
    detail = "%d %s alert(s), subjects %s" % (len(hits), rule, sorted({a.subject for a in hits}))
    return CheckResult("alert_exactly", ok, detail)


def _check_transfer_complete(result: RunResult, args: dict) -> CheckResult:
    if not result.transfers:
        return CheckResult("transfer_complete", False, "no transfer attempted")
    record = result.transfers[-1]
    if record.status != "complete":
        return CheckResult("transfer_complete", False, "transfer status %s" % record.status)
    source = args.get("source")
    if source:
        store = next(iter(result.controllers.values())).store
        expected = {
            "mic": store.mic_blob,
            "capture": store.capture,
            "scan_report": store.scan_report,
        }.get(source)
        if expected is None:
            return CheckResult("transfer_complete", False, "store has no %s payload" % source)
        if record.payload != expected:
            return CheckResult(
                "transfer_complete", False,
                "payload differs from %s source (%d vs %d bytes)"
                % (source, len(record.payload), len(expected)),
            )
    return CheckResult("transfer_complete", True, "%d bytes delivered intact" % len(record.payload))


def _check_min_input_cycles(result: RunResult, args: dict) -> CheckResult:
    sequence = _input_sequence(result, args["device"])
    want = int(args["count"])
    cycles = 0
    i = 0
    while i + 4 <= len(sequence):
        if sequence[i:i + 4] == [1, 2, 3, 4]:
            cycles += 1
            i += 4
        else:
            i += 1
    ok = cycles >= want
    return CheckResult("min_input_cycles", ok, "%d full input cycles (need %d)" % (cycles, want))


def _check_powered_on_by(result: RunResult, args: dict) -> CheckResult:
    device, bound = args["device"], int(args["tick"])
    timeline = _power_timeline(result, device)
    for tick, value in enumerate(timeline[: bound + 1]):
        if value == "on":
            return CheckResult("powered_on_by", True, "%s on at tick %d" % (device, tick))
    return CheckResult("powered_on_by", False, "%s not on by tick %d" % (device, bound))


def _check_max_on_streak(result: RunResult, args: dict) -> CheckResult:
    device, limit = args["device"], int(args["ticks"])
    start = int(args.get("from_tick", 0))
    timeline = _power_timeline(result, device)[start:]
    worst = streak = 0
    for value in timeline:
        streak = streak + 1 if value == "on" else 0
        worst = max(worst, streak)
    ok = worst <= limit
    return CheckResult(
        "max_on_streak", ok,
        "%s longest on-streak %d ticks from tick %d (limit %d)" % (device, worst, start, limit),
    )


def _check_standby_follows_announcement(result: RunResult, args: dict) -> CheckResult:
    device, within = args["device"], int(args.get("within", 1))
    start = int(args.get("from_tick", 0))
    address = result.sim.logical.get(device)
    announced = [
        e.tick for e in result.trace.events
        if e.origin == device and e.frame.opcode in _ANNOUNCE_SET and e.tick >= start
    ]
    if not announced:
        return CheckResult("standby_follows_announcement", False, "%s never announced" % device)
    standbys = [
        e.tick for e in result.trace.events
        if e.frame.opcode == 0x36 and e.frame.destination == address and e.origin != device
    ]
    misses = [t for t in announced if not any(t < s <= t + within for s in standbys)]
    ok = not misses
    detail = "%d announcements, all answered within %d tick(s)" % (len(announced), within)
    if misses:
        detail = "announcements at ticks %s drew no standby" % misses[:5]
    return CheckResult("standby_follows_announcement", ok, detail)


def _check_disable_cec_attempts_rejected(result: RunResult, args: dict) -> CheckResult:
    device = args["device"]
    least = int(args.get("min_attempts", 1))
    attempts = [
        r for r in result.sim.artifacts.user_actions
        if r.device == device and r.action == "disable_cec"
    ]
    rejected = [r for r in attempts if not r.ok]
    ok = len(attempts) >= least and len(rejected) == len(attempts)
    return CheckResult(
        "disable_cec_attempts_rejected", ok,
        "%d of %d attempts rejected (need at least %d attempts)"
        % (len(rejected), len(attempts), least),
    )


def _check_device_power_at_end(result: RunResult, args: dict) -> CheckResult:
    device, want = args["device"], args["power"]
    got = result.sim.device_states[device].power.value
    return CheckResult(
        "device_power_at_end", got == want, "%s finished %s (expected %s)" % (device, got, want)
    )


def _check_device_remains_on(result: RunResult, args: dict) -> CheckResult:
    device = args["device"]
    start = int(args.get("from_tick", 0))
    timeline = _power_timeline(result, device)[start:]
    off_at = next((start + i for i, v in enumerate(timeline) if v != "on"), None)
    if off_at is None:
        return CheckResult("device_remains_on", True, "%s on from tick %d onward" % (device, start))
    return CheckResult("device_remains_on", False, "%s left on-state at tick %d" % (device, off_at))


def _check_no_control_frames_reach(result: RunResult, args: dict) -> CheckResult:
    device, origin = args["device"], args["from_origin"]
    hits = [
        e.tick for e in result.trace.events
        if e.origin == origin and e.frame.opcode in _CONTROL_SET and device in e.observers
    ]
    if not hits:
        return CheckResult(
            "no_control_frames_reach", True, "no control frame from %s reached %s" % (origin, device)
        )
    return CheckResult(
        "no_control_frames_reach", False,
        "%d control frames from %s reached %s (first at tick %d)"
        % (len(hits), origin, device, hits[0]),
    )


def _check_relay_latency(result: RunResult, args: dict) -> CheckResult:
    if result.poller is None:
        return CheckResult("relay_latency", False, "scenario ran without a relay")
    budget = int(args.get("within", result.poller.interval_ticks + 2))
    post = next((t for t, cmd in result.relay_posts if cmd == "DOS1"), None)
    if post is None:
        return CheckResult("relay_latency", False, "no DOS1 command was posted")
    listeners = set(result.controllers)
    first = next(
        (
            e.tick for e in result.trace.events
            if e.tick > post and e.origin in listeners and e.frame.opcode in _CHURN_SET
        ),
        None,
    )
    if first is None:
        return CheckResult("relay_latency", False, "relay command never produced bus traffic")
    ok = first - post <= budget
    return CheckResult(
        "relay_latency", ok,
        "first attack frame %d ticks after the post (budget %d)" % (first - post, budget),
    )


_CHECKS = {
    "scan_report_equals": _check_scan_report_equals,
    "scan_only_actor": _check_scan_only_actor,
    "zero_alerts": _check_zero_alerts,
    "alerts_include": _check_alerts_include,
    "alert_exactly": _check_alert_exactly,
    "transfer_complete": _check_transfer_complete,
    "min_input_cycles": _check_min_input_cycles,
    "powered_on_by": _check_powered_on_by,
    "max_on_streak": _check_max_on_streak,
    "standby_follows_announcement": _check_standby_follows_announcement,
    "disable_cec_attempts_rejected": _check_disable_cec_attempts_rejected,
    "device_power_at_end": _check_device_power_at_end,
    "device_remains_on": _check_device_remains_on,
    "no_control_frames_reach": _check_no_control_frames_reach,
    "relay_latency": _check_relay_latency,
}


def evaluate_checks(result: RunResult, extra: list[dict] | None = None) -> list[CheckResult]:
    """Run the scenario's declared checks plus any ad hoc ones."""
    outcomes = []
    for entry in list(result.scenario.checks) + list(extra or []):
        kind = entry.get("type")
        fn = _CHECKS.get(kind)
        if fn is None:
            outcomes.append(CheckResult(str(kind), False, "unknown check type"))
            continue
        try:
            outcomes.append(fn(result, entry))
        except KeyError as exc:
            outcomes.append(CheckResult(str(kind), False, "check is missing field %s" % exc))
    result.checks = outcomes
    return outcomes


# ---------------------------------------------------------------------------
# Builtin catalogue
# ---------------------------------------------------------------------------

_BUILTIN_SCENARIOS: dict[str, dict] = {
    "attack1-device-walk": {
        "name": "attack1-device-walk",
        "topology": "testbed",
        "duration": 170,
        "seed": 11,
        "actions": [
            {"tick": 2, "actor": "listener", "action": "scan"},
            {"tick": 60, "actor": "client", "action": "request_file", "args": {"peer": "listener"}},
        ],
        "checks": [
            {"type": "scan_report_equals", "expected": "testbed"},
            {"type": "alert_exactly", "rule": "ScanBurst", "count": 1, "subject": "listener"},
            {"type": "transfer_complete", "source": "scan_report"},
        ],
    },
    "attack2-mic-exfil": {
        "name": "attack2-mic-exfil",
        "topology": "testbed",
        "duration": 140,
        "seed": 2,
        "listener_options": {"mic_bytes": 1024},
        "actions": [
            {"tick": 2, "actor": "client", "action": "send_frame", "args": {"frame": "bb:bb:bb:bb"}},
            {"tick": 6, "actor": "client", "action": "request_file", "args": {"peer": "listener"}},
        ],
        "checks": [
            {"type": "transfer_complete", "source": "mic"},
            {"type": "alerts_include", "rule": "CovertMarker"},
            {"type": "alerts_include", "rule": "CovertStream"},
        ],
    },
    "attack3-file-theft": {
        "name": "attack3-file-theft",
        "topology": "testbed",
        "duration": 200,
        "seed": 3,
        "listener_options": {"capture_bytes": 2048},
        "actions": [
            {"tick": 2, "actor": "client", "action": "request_file", "args": {"peer": "listener"}},
        ],
        "checks": [
            {"type": "transfer_complete", "source": "capture"},
            {"type": "alerts_include", "rule": "CovertMarker"},
            {"type": "alerts_include", "rule": "CovertStream"},
        ],
    },
    "attack4-targeted-standby": {
        "name": "attack4-targeted-standby",
        "topology": "testbed",
        "duration": 70,
        "seed": 4,
        "actions": [
            {"tick": 2, "actor": "client", "action": "send_frame", "args": {"frame": "cc:cc:cc:cc"}},
            {"tick": 5, "actor": "tv", "action": "power_off"},
            {"tick": 10, "actor": "tv", "action": "power_on"},
            {"tick": 25, "actor": "tv", "action": "power_on"},
            {"tick": 40, "actor": "tv", "action": "power_on"},
        ],
        "checks": [
            {"type": "standby_follows_announcement", "device": "tv", "within": 1, "from_tick": 6},
            {"type": "max_on_streak", "device": "tv", "ticks": 3, "from_tick": 6},
            {"type": "alerts_include", "rule": "TargetedStandby"},
        ],
    },
    "attack5-input-churn": {
        "name": "attack5-input-churn",
        "topology": "testbed",
        "duration": 1000,
        "seed": 5,
        "overrides": {"tv": {"initial_power": "standby"}},
        "actions": [
            {"tick": 2, "actor": "client", "action": "send_frame", "args": {"frame": "dd:dd:dd:dd"}},
        ]
        + [
            {"tick": 30 + 50 * k, "actor": "tv", "action": "disable_cec"} for k in range(19)
        ],
        "checks": [
            {"type": "powered_on_by", "device": "tv", "tick": 10},
            {"type": "min_input_cycles", "device": "tv", "count": 190},
            {"type": "disable_cec_attempts_rejected", "device": "tv", "min_attempts": 15},
            {"type": "alerts_include", "rule": "InputChurnDoS"},
        ],
    },
    "attack5-remote-churn": {
        "name": "attack5-remote-churn",
        "topology": "testbed",
        "duration": 200,
        "seed": 6,
        "overrides": {"tv": {"initial_power": "standby"}},
        "relay": {"enabled": True, "commands": [{"tick": 5, "command": "DOS1"}]},
        "checks": [
            {"type": "relay_latency"},
            {"type": "min_input_cycles", "device": "tv", "count": 25},
            {"type": "alerts_include", "rule": "InputChurnDoS"},
        ],
    },
    "benign-power-cycle": {
        "name": "benign-power-cycle",
        "topology": "testbed",
        "duration": 100,
        "seed": 21,
        "actions": [
            {"tick": 10, "actor": "tv", "action": "power_off"},
            {"tick": 30, "actor": "tv", "action": "power_on"},
            {"tick": 50, "actor": "amp", "action": "power_on"},
        ],
        "checks": [
            {"type": "zero_alerts"},
            {"type": "device_power_at_end", "device": "tv", "power": "on"},
            {"type": "device_power_at_end", "device": "amp", "power": "on"},
        ],
    },
    "benign-input-select": {
        "name": "benign-input-select",
        "topology": "testbed",
        "duration": 80,
        "seed": 22,
        "actions": [
            {"tick": 10, "actor": "tv", "action": "select_input", "args": {"port": 1}},
            {"tick": 40, "actor": "tv", "action": "select_input", "args": {"port": 3}},
        ],
        "checks": [{"type": "zero_alerts"}],
    },
    "benign-status-query": {
        "name": "benign-status-query",
        "topology": "testbed",
        "duration": 40,
        "seed": 23,
        "actions": [
            {"tick": 10, "actor": "tv", "action": "send_frame", "args": {"frame": "05:8f"}},
        ],
        "checks": [{"type": "zero_alerts"}],
    },
    "attack4-disable-control-mitigated": {
        "name": "attack4-disable-control-mitigated",
        "topology": "testbed",
        "duration": 140,
        "seed": 34,
        "mitigations": [{"type": "disable_control", "device": "tv"}],
        "actions": [
            {"tick": 2, "actor": "client", "action": "send_frame", "args": {"frame": "cc:cc:cc:cc"}},
            {"tick": 5, "actor": "tv", "action": "power_off"},
            {"tick": 10, "actor": "tv", "action": "power_on"},
            {"tick": 30, "actor": "listener", "action": "scan"},
        ],
        "checks": [
            {"type": "device_remains_on", "device": "tv", "from_tick": 11},
            {"type": "scan_report_equals", "expected": "testbed"},
        ],
    },
    "attack5-strip-mitigated": {
        "name": "attack5-strip-mitigated",
        "topology": "testbed",
        "duration": 120,
        "seed": 35,
        "overrides": {"tv": {"initial_power": "standby"}},
        "mitigations": [{"type": "strip_edge", "parent": "tv", "child": "switch"}],
        "actions": [
            {"tick": 2, "actor": "client", "action": "send_frame", "args": {"frame": "dd:dd:dd:dd"}},
        ],
        "checks": [
            {"type": "no_control_frames_reach", "device": "tv", "from_origin": "listener"},
            {"type": "device_power_at_end", "device": "tv", "power": "standby"},
        ],
    },
    "podium-strip-scan": {
        "name": "podium-strip-scan",
        "topology": "testbed",
        "duration": 60,
        "seed": 36,
        "mitigations": [{"type": "strip_edge", "parent": "switch", "child": "client"}],
        "actions": [
            {"tick": 2, "actor": "client", "action": "scan"},
        ],
        "checks": [{"type": "scan_only_actor", "actor": "client"}],
    },
}


def builtin_scenario_names() -> list[str]:
    return sorted(_BUILTIN_SCENARIOS)


def builtin_scenario(name: str) -> Scenario:
    if name not in _BUILTIN_SCENARIOS:
        raise ScenarioError(
            "unknown scenario %r; builtin names: %s" % (name, ", ".join(builtin_scenario_names()))
        )
    return load_scenario(copy.deepcopy(_BUILTIN_SCENARIOS[name]))


def resolve_scenario(ref: str) -> Scenario:
    """Accept either a builtin name or a path to a scenario file."""
    if ref in _BUILTIN_SCENARIOS:
        return builtin_scenario(ref)
    if os.path.exists(ref):
        return load_scenario_file(ref)
    raise ScenarioError(
        "%r is neither a builtin scenario nor a file; builtin names: %s"
        % (ref, ", ".join(builtin_scenario_names()))
    )
