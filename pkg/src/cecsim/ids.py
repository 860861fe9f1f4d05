"""Rule-based detection over bus traces, plus the defensive knobs.

Detection is a pure function of the event sequence: the streaming Detector
fed events one at a time emits exactly the alerts an offline pass over the
same prefix would.  Alerts serialise as JSON lines citing the frames that
tripped each rule.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, fields

from cecsim import frames as fr
from cecsim.bus import BusEvent
from cecsim.topology import Edge, Topology, TopologyError

log = logging.getLogger(__name__)

RULE_SCAN_BURST = "ScanBurst"
RULE_INPUT_CHURN = "InputChurnDoS"
RULE_TARGETED_STANDBY = "TargetedStandby"
RULE_COVERT_MARKER = "CovertMarker"
RULE_COVERT_STREAM = "CovertStream"

MARKER_TEXTS = frozenset({"aa:aa:aa:aa", "bb:bb:bb:bb", "ee:ee:ee:ee"})

_ANNOUNCE_OPCODES = frozenset(
    {fr.OP_REPORT_PHYSICAL_ADDRESS, fr.OP_DEVICE_VENDOR_ID, fr.OP_ROUTING_CHANGE}
)
_CHURN_OPCODES = frozenset({fr.OP_ACTIVE_SOURCE, fr.OP_IMAGE_VIEW_ON})
_SCAN_QUERY_OPCODES = frozenset(fr.QUERY_OPCODES)


@dataclass(frozen=True)
class RuleConfig:
    # Distinct destinations one initiator may poll or query per window.
    scan_distinct_addresses: int = 8
    scan_window: int = 50
    # Active Source / Image View On frames one initiator may send per window.
    churn_count: int = 5
    churn_window: int = 30
    # Third-party Standby this close behind a power-on announcement, this
    # many times, reads as a kill switch.
    standby_gap: int = 2
    standby_repeat: int = 2

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if not isinstance(value, int) or value < 1:
                raise ValueError("%s must be a positive integer, got %r" % (item.name, value))

    @classmethod
    def from_dict(cls, raw: dict) -> "RuleConfig":
        known = {item.name for item in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError("unknown detector settings: %s" % ", ".join(sorted(unknown)))
        return cls(**raw)


@dataclass(frozen=True)
class Alert:
    rule: str
    window: tuple[int, int]
    subject: str
    evidence: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "rule": self.rule,
                "window": list(self.window),
                "subject": self.subject,
                "evidence": list(self.evidence),
            }
        )


class Detector:
    """Feed events in trace order; each call returns newly raised alerts.

    Rules that describe sustained behaviour (scanning, churn, repeated
    standby, streaming) fire once per offending initiator; the marker rule
    fires on every marker frame it sees.
    """

    def __init__(self, config: RuleConfig | None = None, tap: str | None = None):
        self.config = config or RuleConfig()
        self.tap = tap
        self.alerts: list[Alert] = []
        self._scan: dict[str, deque] = {}
        self._churn: dict[str, deque] = {}
        self._announcements: deque = deque()
        self._standby_pairs: dict[str, list] = {}
        self._streams: dict[str, list] = {}
        self._fired: set[tuple[str, str]] = set()

    def feed(self, event: BusEvent) -> list[Alert]:
        if self.tap is not None and self.tap not in event.observers:
            return []
        new: list[Alert] = []
        self._check_markers(event, new)
        self._check_stream(event, new)
        self._check_scan(event, new)
        self._check_churn(event, new)
        self._check_standby(event, new)
        self.alerts.extend(new)
        return new

    def feed_many(self, events) -> list[Alert]:
        for event in events:
            self.feed(event)
        return self.alerts

    # ------------------------------------------------------------------

    def _once(self, rule: str, subject: str) -> bool:
        key = (rule, subject)
        if key in self._fired:
            return False
        self._fired.add(key)
        return True

    def _check_markers(self, event: BusEvent, new: list[Alert]):
        frame = event.frame
        if not frame.is_polling and frame.text in MARKER_TEXTS:
            new.append(
                Alert(RULE_COVERT_MARKER, (event.tick, event.tick), event.origin, (frame.text,))
            )

    def _check_stream(self, event: BusEvent, new: list[Alert]):
        frame = event.frame
        if frame.is_polling or frame.opcode != 0x00 or len(frame.operands) <= 1:
            return
        bucket = self._streams.setdefault(event.origin, [])
        bucket.append((event.tick, frame.text))
        if len(bucket) >= 3 and self._once(RULE_COVERT_STREAM, event.origin):
            evidence = bucket[:3]
            new.append(
                Alert(
                    RULE_COVERT_STREAM,
                    (evidence[0][0], evidence[-1][0]),
                    event.origin,
                    tuple(text for _, text in evidence),
                )
            )

    def _check_scan(self, event: BusEvent, new: list[Alert]):
        frame = event.frame
        probing = frame.is_polling or frame.opcode in _SCAN_QUERY_OPCODES
        if not probing:
            return
        window = self._scan.setdefault(event.origin, deque())
        window.append((event.tick, frame.destination, frame.text))
        while window and window[0][0] <= event.tick - self.config.scan_window:
            window.popleft()
        distinct = {dest for _, dest, _ in window}
        if len(distinct) >= self.config.scan_distinct_addresses and self._once(
            RULE_SCAN_BURST, event.origin
        ):
            new.append(
                Alert(
                    RULE_SCAN_BURST,
                    (window[0][0], window[-1][0]),
                    event.origin,
                    tuple(text for _, _, text in window),
                )
            )

    def _check_churn(self, event: BusEvent, new: list[Alert]):
        frame = event.frame
        if frame.is_polling or frame.opcode not in _CHURN_OPCODES:
            return
        window = self._churn.setdefault(event.origin, deque())
        window.append((event.tick, frame.text))
        while window and window[0][0] <= event.tick - self.config.churn_window:
            window.popleft()
        if len(window) >= self.config.churn_count and self._once(RULE_INPUT_CHURN, event.origin):
            new.append(
                Alert(
                    RULE_INPUT_CHURN,
                    (window[0][0], window[-1][0]),
                    event.origin,
                    tuple(text for _, text in window),
                )
            )

    def _check_standby(self, event: BusEvent, new: list[Alert]):
        frame = event.frame
        if frame.is_polling:
            return
        tick = event.tick
        if frame.opcode in _ANNOUNCE_OPCODES and frame.is_broadcast:
            self._announcements.append((tick, event.origin, frame.initiator, frame.text))
        while self._announcements and self._announcements[0][0] < tick - self.config.standby_gap:
            self._announcements.popleft()
        if frame.opcode != fr.OP_STANDBY:
            return
        for ann_tick, ann_origin, ann_initiator, ann_text in self._announcements:
            if ann_origin == event.origin:
                continue
            if not frame.is_broadcast and frame.destination != ann_initiator:
                continue
            pairs = self._standby_pairs.setdefault(event.origin, [])
            pairs.append((ann_tick, tick, ann_text, frame.text))
            if len(pairs) >= self.config.standby_repeat and self._once(
                RULE_TARGETED_STANDBY, event.origin
            ):
                evidence = []
                for pair in pairs:
                    evidence.extend([pair[2], pair[3]])
                new.append(
                    Alert(
                        RULE_TARGETED_STANDBY,
                        (pairs[0][0], pairs[-1][1]),
                        event.origin,
                        tuple(evidence),
                    )
                )
            break


def detect(events, config: RuleConfig | None = None, tap: str | None = None) -> list[Alert]:
    """Offline pass: identical to streaming the same events in order."""
    detector = Detector(config, tap)
    detector.feed_many(events)
    return detector.alerts


# ---------------------------------------------------------------------------
# Mitigations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripEdge:
    """Sever the control wire on one cable; video keeps flowing."""

    parent: str
    child: str


@dataclass(frozen=True)
class DisableControl:
    """Device stops obeying control frames but still answers queries."""

    device: str


@dataclass(frozen=True)
class DisableCecEndToEnd:
    """Device drops off CEC entirely: no control, no reporting, no acks."""

    device: str


Mitigation = StripEdge | DisableControl | DisableCecEndToEnd


def apply_mitigation(topology: Topology, mitigation: Mitigation) -> Topology:
    """Return a copy of the topology with the mitigation applied."""
    topo = topology.clone()
    if isinstance(mitigation, StripEdge):
        for i, edge in enumerate(topo.edges):
            if edge.parent == mitigation.parent and edge.child == mitigation.child:
                topo.edges[i] = Edge(edge.parent, edge.child, edge.port, cec_propagates=False)
                return topo
        raise TopologyError(
            "no edge %r -> %r to strip" % (mitigation.parent, mitigation.child)
        )
    if isinstance(mitigation, (DisableControl, DisableCecEndToEnd)):
        node = topo.nodes.get(mitigation.device)
        if node is None:
            raise TopologyError("unknown device %r in mitigation" % mitigation.device)
        node.cec_control_enabled = False
        if isinstance(mitigation, DisableCecEndToEnd):
            node.cec_info_reporting_enabled = False
        return topo
    raise TypeError("unknown mitigation %r" % (mitigation,))


def parse_mitigation(raw: dict) -> Mitigation:
    kind = raw.get("type")
    if kind == "strip_edge":
        return StripEdge(raw["parent"], raw["child"])
    if kind == "disable_control":
        return DisableControl(raw["device"])
    if kind == "disable_cec":
        return DisableCecEndToEnd(raw["device"])
    raise TopologyError("unknown mitigation type %r" % kind)
