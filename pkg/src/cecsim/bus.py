"""Discrete-tick simulation of the shared CEC wire.

One frame transmission occupies one tick and a device answers on the tick
after it heard the request.  Actions queue as (tick, insertion-order)
pairs, so identical inputs always replay to byte-identical traces.  The
control wire is shared: every device reachable from the transmitter over
propagating cables observes every frame, whoever it is addressed to.
"""

import bisect
import heapq
import logging
import re
from dataclasses import dataclass, field

from cecsim import devices as dv
from cecsim import frames as fr
from cecsim.frames import CecFrame, PhysicalAddress, PowerState, logical_candidates
from cecsim.topology import Topology, TopologyError, assign_physical_addresses, propagation_domains

log = logging.getLogger(__name__)

UNREGISTERED = 15


@dataclass(frozen=True)
class BusEvent:
    """One frame as it appeared on the wire."""

    tick: int
    origin: str
    frame: CecFrame
    observers: tuple[str, ...]
    acknowledged: bool

    def render(self) -> str:
        return "t=%d | %s | %s | ack=%d | obs=%s" % (
            self.tick,
            self.origin,
            self.frame.text,
            1 if self.acknowledged else 0,
            ",".join(self.observers),
        )


@dataclass(frozen=True)
class StateChange:
    tick: int
    device: str
    field: str
    value: str

    def render(self) -> str:
        return "t=%d | %s | %s=%s" % (self.tick, self.device, self.field, self.value)


_TRACE_LINE = re.compile(
    r"^t=(?P<tick>\d+) \| (?P<origin>\S+) \| (?P<frame>[0-9a-f:]+) \| "
    r"ack=(?P<ack>[01]) \| obs=(?P<obs>\S*)$"
)


def parse_trace_line(line: str) -> BusEvent:
    match = _TRACE_LINE.match(line.strip())
    if match is None:
        raise ValueError("unrecognised trace line: %r" % line)
    return BusEvent(
        tick=int(match.group("tick")),
        origin=match.group("origin"),
        frame=fr.parse_frame(match.group("frame")),
        observers=tuple(x for x in match.group("obs").split(",") if x),
        acknowledged=match.group("ack") == "1",
    )


@dataclass
class Trace:
    events: list[BusEvent] = field(default_factory=list)
    changes: list[StateChange] = field(default_factory=list)

    def render_log(self) -> str:
        return "".join(e.render() + "\n" for e in self.events)

    def render_state_log(self) -> str:
        return "".join(c.render() + "\n" for c in self.changes)


@dataclass
class TransferRecord:
    session_id: str
    receiver: str
    peer: str
    status: str
    payload: bytes
    segments: int


@dataclass
class UserActionRecord:
    tick: int
    device: str
    action: str
    ok: bool
    reason: str


@dataclass
class Artifacts:
    """Everything a run produces besides the raw trace."""

    transfers: list[TransferRecord] = field(default_factory=list)
    scan_reports: list = field(default_factory=list)
    user_actions: list[UserActionRecord] = field(default_factory=list)


class Actor:
    """Anything that watches the wire or acts on a schedule: attack
    sessions, covert file endpoints, relay pollers, streaming detectors."""

    def on_tick(self, sim: "Simulator", tick: int):
        pass

    def on_event(self, sim: "Simulator", event: BusEvent):
        pass


@dataclass(frozen=True)
class Transmit:
    origin: str
    frame: CecFrame


@dataclass(frozen=True)
class User:
    device: str
    action: dv.UserAction
    argument: int | None = None


@dataclass(frozen=True)
class Call:
    fn: object


class Simulator:
    def __init__(self, topology: Topology, *, seed: int = 0, ticks_per_second: int = 10):
        self.topology = topology
        self.seed = seed
        self.ticks_per_second = ticks_per_second
        self.clock = 0
        self.trace = Trace()
        self.artifacts = Artifacts()
        self.physical: dict[str, PhysicalAddress] = {}
        self.logical: dict[str, int | None] = {}
        self.device_states: dict[str, dv.DeviceState] = {}
        self.actors: list[Actor] = []
        self._domains: dict[str, tuple[str, ...]] = {}
        self._pressure: dict[str, list[int]] = {}
        self._queue: list = []
        self._seq = 0
        self._session_counter = 0
        self._started = False

    # ------------------------------------------------------------------
    # Setup
    # ------------------------------------------------------------------

    def start(self):
        """Assign physical addresses, then let devices claim logical ones
        by polling, in declaration order.  Safe to call once; run() calls
        it implicitly."""
        if self._started:
            return
        self._started = True
        self.physical = assign_physical_addresses(self.topology)
        self._domains = propagation_domains(self.topology)
        for node_id, node in self.topology.nodes.items():
            self.device_states[node_id] = dv.DeviceState.initial(node)
            self._pressure[node_id] = []
            self.logical[node_id] = None
        for node_id in self.topology.nodes:
            if self.topology.nodes[node_id].cec_addressed:
                self.allocate_logical_address(node_id)

    def allocate_logical_address(self, device_id: str) -> int:
        """Poll candidate addresses and claim the first free one.

        A configured fixed address is tried before the type's usual claim
        order.  Returns 15 (stays unregistered) when everything is taken.
        """
        node = self.topology.nodes[device_id]
        candidates = []
        if node.logical_address is not None:
            candidates.append(node.logical_address)
        for c in logical_candidates(node.device_type):
            if c not in candidates:
                candidates.append(c)
        for candidate in candidates:
            event = self.deliver(device_id, CecFrame(candidate, candidate))
            if not event.acknowledged:
                self.logical[device_id] = candidate
                return candidate
        log.warning("%s found no free logical address", device_id)
        self.logical[device_id] = UNREGISTERED
        return UNREGISTERED

    # ------------------------------------------------------------------
    # Scheduling
    # ------------------------------------------------------------------

    def schedule(self, tick: int, action):
        if tick < self.clock:
            raise ValueError(
                "cannot schedule at tick %d, clock is already at %d" % (tick, self.clock)
            )
        heapq.heappush(self._queue, (tick, self._seq, action))
        self._seq += 1

    def transmit_at(self, tick: int, origin: str, frame: CecFrame):
        self.schedule(tick, Transmit(origin, frame))

    def add_actor(self, actor: Actor):
        self.actors.append(actor)

    def next_session_id(self) -> str:
        self._session_counter += 1
        return "transfer-%03d" % self._session_counter

    # ------------------------------------------------------------------
    # Lookups
    # ------------------------------------------------------------------

    def domain_of(self, device_id: str) -> tuple[str, ...]:
        if not self._started:
            self.start()
        return self._domains[device_id]

    def holder_of(self, address: int, domain: tuple[str, ...]) -> str | None:
        for node_id in domain:
            if self.logical.get(node_id) == address:
                return node_id
        return None

    def device_ctx(self, device_id: str) -> dv.DeviceCtx:
        return dv.DeviceCtx(
            node=self.topology.nodes[device_id],
            logical=self.logical.get(device_id),
            physical=self.physical[device_id],
            tick=self.clock,
        )

    def settings_menu_accessible(self, device_id: str, tick: int | None = None) -> bool:
        """False while the device is too busy acting on other people's
        control frames to serve its own menu."""
        t = self.clock if tick is None else tick
        ticks = self._pressure[device_id]
        lo = bisect.bisect_right(ticks, t - dv.MENU_PRESSURE_WINDOW)
        hi = bisect.bisect_right(ticks, t)
        return (hi - lo) < dv.MENU_PRESSURE_LIMIT

    # ------------------------------------------------------------------
    # Delivery
    # ------------------------------------------------------------------

    def deliver(self, origin: str, frame: CecFrame) -> BusEvent:
        """Put a frame on the wire right now and let the bus settle.

        Observers are everyone in the origin's propagation domain.  A
        directed frame is acknowledged when some other device holds the
        destination address and still talks CEC; a broadcast when anyone
        else on the segment does.
        """
        if origin not in self.topology.nodes:
            raise TopologyError("unknown transmitter %r" % origin)
        observers = self._domains[origin]
        acknowledged = False
        if frame.destination == fr.BROADCAST:
            acknowledged = any(
                n != origin and self.topology.nodes[n].cec_addressed for n in observers
            )
        else:
            holder = self.holder_of(frame.destination, observers)
            if holder is not None and holder != origin:
                acknowledged = self.device_states[holder].cec_info_reporting_enabled
        event = BusEvent(
            tick=self.clock,
            origin=origin,
            frame=frame,
            observers=observers,
            acknowledged=acknowledged,
        )
        self.trace.events.append(event)

        for node_id in observers:
            if node_id == origin or not self.topology.nodes[node_id].cec_addressed:
                continue
            state = self.device_states[node_id]
            reaction = dv.react(self.device_ctx(node_id), state, frame)
            if reaction.control_pressure:
                self._pressure[node_id].append(self.clock)
            if reaction.state is not state:
                self._apply_state(node_id, state, reaction.state)
            for i, response in enumerate(reaction.responses):
                self.transmit_at(self.clock + 1 + i, node_id, response)

        for actor in list(self.actors):
            actor.on_event(self, event)
        return event

    def _apply_state(self, node_id: str, old: dv.DeviceState, new: dv.DeviceState):
        self.device_states[node_id] = new
        for name in ("power", "active_source", "active_input_port", "cec_control_enabled"):
            before, after = getattr(old, name), getattr(new, name)
            if before != after:
                value = after.value if isinstance(after, PowerState) else str(after)
                self.trace.changes.append(StateChange(self.clock, node_id, name, value))

    def _apply_user_action(self, record: User):
        device_id = record.device
        state = self.device_states[device_id]
        accessible = self.settings_menu_accessible(device_id)
        result = dv.apply_user_action(
            self.device_ctx(device_id), state, record.action, record.argument, accessible
        )
        self.artifacts.user_actions.append(
            UserActionRecord(self.clock, device_id, record.action.value, result.ok, result.reason)
        )
        if not result.ok:
            log.info("t=%d %s %s rejected: %s", self.clock, device_id, record.action.value, result.reason)
        if result.state is not state:
            self._apply_state(device_id, state, result.state)
        for i, emission in enumerate(result.emissions):
            self.transmit_at(self.clock + i, device_id, emission)

    # ------------------------------------------------------------------
    # Main loop
    # ------------------------------------------------------------------

    def run(self, until: int) -> Trace:
        """Process every tick up to (not including) `until`."""
        self.start()
        while self.clock < until:
            tick = self.clock
            for actor in list(self.actors):
                actor.on_tick(self, tick)
            while self._queue and self._queue[0][0] == tick:
                _, _, action = heapq.heappop(self._queue)
                if isinstance(action, Transmit):
                    self.deliver(action.origin, action.frame)
                elif isinstance(action, User):
                    self._apply_user_action(action)
                elif isinstance(action, Call):
                    action.fn(self, tick)
                else:
                    raise TypeError("unknown action %r" % (action,))
            self.clock = tick + 1
        return self.trace
