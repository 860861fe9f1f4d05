"""Attack orchestration on top of the bus: device census, sniff-and-kill
standby, input-churn flooding, and the marker frames that arm them.

Everything here runs from the hidden in-line device.  A census walk polls
all fifteen logical addresses, interrogates whoever answered, and folds
the answers into a report suitable for leaking later.  The two denial
attacks are armed either by marker frames from an accomplice on the bus or
through the command relay.
"""

import json
import logging
from dataclasses import dataclass, field

from cecsim import frames as fr
from cecsim.bus import Actor, BusEvent, Simulator
from cecsim.frames import CecFrame, PhysicalAddress, PowerState, parse_frame, vendor_name
from cecsim.transfer import PayloadStore

log = logging.getLogger(__name__)

ARM_TARGETED_MARKER = parse_frame("cc:cc:cc:cc")
ARM_BROADCAST_MARKER = parse_frame("dd:dd:dd:dd")

# Columns of the census report, in render order.
REPORT_FIELDS = ("P. Addr", "Active", "Vendor", "OSD Str", "CEC Ver", "Pow Status", "Language")

_POWER_RENDER = {0x00: "ON", 0x01: "Standby", 0x02: "To-On", 0x03: "To-Standby"}


@dataclass
class ScanEntry:
    address: int
    physical: str = "Unk"
    active: bool = False
    vendor: str = "Unk"
    osd: str = "Unk"
    cec_version: str = "Unk"
    power: str = "Unk"
    language: str = "Unk"

    def row(self) -> dict[str, str]:
        return {
            "P. Addr": self.physical,
            "Active": "Yes" if self.active else "No",
            "Vendor": self.vendor,
            "OSD Str": self.osd,
            "CEC Ver": self.cec_version,
            "Pow Status": self.power,
            "Language": self.language,
        }


@dataclass
class ScanReport:
    actor: str
    entries: dict[int, ScanEntry] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "Addr %02X" % addr: self.entries[addr].row() for addr in sorted(self.entries)
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render_table(self) -> str:
        addrs = sorted(self.entries)
        headers = ["Info"] + ["Addr %02X" % a for a in addrs]
        rows = [
            [name] + [self.entries[a].row()[name] for a in addrs] for name in REPORT_FIELDS
        ]
        widths = [
            max(len(str(line[i])) for line in [headers] + rows) for i in range(len(headers))
        ]
        render = lambda line: " | ".join(str(v).ljust(w) for v, w in zip(line, widths))
        divider = "-+-".join("-" * w for w in widths)
        return "\n".join([render(headers), divider] + [render(r) for r in rows]) + "\n"


class ScanWalk(Actor):
    """Census of the bus: poll 0..14, then question every responder.

    Runs one frame per tick.  The walker itself is part of the report; its
    own row comes from local state since nobody answers a self-poll.
    """

    QUERIES = fr.QUERY_OPCODES

    def __init__(self, actor_id: str, on_complete=None):
        self.actor_id = actor_id
        self.on_complete = on_complete
        self.phase = "idle"
        self.report: ScanReport | None = None
        self._own: int | None = None
        self._poll_next = 0
        self._acked: list[int] = []
        self._plan: list[CecFrame] = []
        self._collected: dict[int, dict] = {}
        self._active_claimant: int | None = None
        self._settle_until = 0

    def start(self, sim: Simulator):
        sim.start()
        self._own = sim.logical.get(self.actor_id)
        self.phase = "poll"
        self._poll_next = 0

    def done(self) -> bool:
        return self.phase == "done"

    def on_tick(self, sim: Simulator, tick: int):
        if self.phase == "poll":
            if self._poll_next <= 14:
                target = self._poll_next
                self._poll_next += 1
                initiator = self._own if self._own is not None else target
                sim.transmit_at(tick, self.actor_id, CecFrame(initiator, target))
            else:
                self._plan = [
                    CecFrame(self._own, addr, opcode)
                    for addr in self._acked
                    for opcode in self.QUERIES
                    if self._own is not None and addr != self._own
                ]
                self.phase = "query"
        elif self.phase == "query":
            if self._plan:
                sim.transmit_at(tick, self.actor_id, self._plan.pop(0))
            elif self._own is not None:
                sim.transmit_at(
                    tick,
                    self.actor_id,
                    CecFrame(self._own, fr.BROADCAST, fr.OP_REQUEST_ACTIVE_SOURCE),
                )
                self._settle_until = tick + 3
                self.phase = "settle"
            else:
                self._settle_until = tick + 1
                self.phase = "settle"
        elif self.phase == "settle" and tick >= self._settle_until:
            self._finalize(sim)

    def on_event(self, sim: Simulator, event: BusEvent):
        if self.phase == "idle" or self.actor_id not in event.observers:
            return
        frame = event.frame
        if event.origin == self.actor_id:
            if frame.is_polling and self.phase == "poll":
                if event.acknowledged and frame.destination not in self._acked:
                    self._acked.append(frame.destination)
            return
        if frame.is_polling:
            return
        source = frame.initiator
        bucket = self._collected.setdefault(source, {})
        op, operands = frame.opcode, frame.operands
        if op == fr.OP_REPORT_PHYSICAL_ADDRESS and len(operands) == 3:
            bucket["physical"] = PhysicalAddress.from_bytes(operands[0], operands[1]).text
        elif op == fr.OP_SET_OSD_NAME and operands:
            bucket["osd"] = bytes(operands).decode("ascii", errors="replace")
        elif op == fr.OP_DEVICE_VENDOR_ID and len(operands) == 3:
            vid = operands[0] << 16 | operands[1] << 8 | operands[2]
            bucket["vendor"] = vendor_name(vid, sim.topology.vendor_names)
        elif op == fr.OP_REPORT_POWER_STATUS and len(operands) == 1:
            bucket["power"] = _POWER_RENDER.get(operands[0], "Unk")
        elif op == fr.OP_CEC_VERSION and len(operands) == 1:
            bucket["cec_version"] = fr.cec_version_name(operands[0])
        elif op == fr.OP_SET_MENU_LANGUAGE and len(operands) == 3:
            bucket["language"] = bytes(operands).decode("ascii", errors="replace")
        elif op == fr.OP_ACTIVE_SOURCE:
            self._active_claimant = source
        elif op == fr.OP_FEATURE_ABORT and len(operands) == 2:
            # The peer refused one of our questions; the field stays Unk.
            pass

    def _finalize(self, sim: Simulator):
        report = ScanReport(actor=self.actor_id)
        addresses = list(self._acked)
        if self._own is not None and self._own not in addresses:
            addresses.append(self._own)
        state = sim.device_states[self.actor_id]
        if self._active_claimant is None and state.active_source and self._own is not None:
            self._active_claimant = self._own
        for addr in sorted(addresses):
            entry = ScanEntry(address=addr)
            if addr == self._own:
                node = sim.topology.nodes[self.actor_id]
                entry.physical = sim.physical[self.actor_id].text
                entry.osd = node.osd_name
                entry.vendor = vendor_name(node.vendor_id, sim.topology.vendor_names)
                entry.cec_version = node.cec_version
                entry.power = "ON" if state.power is PowerState.ON else "Standby"
                entry.language = node.menu_language if node.menu_language else "Unk"
            else:
                data = self._collected.get(addr, {})
                entry.physical = data.get("physical", "Unk")
                entry.osd = data.get("osd", "Unk")
                entry.vendor = data.get("vendor", "Unk")
                entry.cec_version = data.get("cec_version", "Unk")
                entry.power = data.get("power", "Unk")
                entry.language = data.get("language", "Unk")
            entry.active = addr == self._active_claimant
            report.entries[addr] = entry
        self.report = report
        self.phase = "done"
        sim.artifacts.scan_reports.append(report)
        log.info("%s census finished with %d entries", self.actor_id, len(report.entries))
        if self.on_complete is not None:
            self.on_complete(sim, report)


class TargetedDos(Actor):
    """Sniff for wake-up chatter and put the target straight back into
    standby.  Stays armed and re-fires every time."""

    def __init__(
        self,
        listener_id: str,
        target_address: int = 0,
        trigger_opcodes=(
            fr.OP_REPORT_PHYSICAL_ADDRESS,
            fr.OP_DEVICE_VENDOR_ID,
            fr.OP_ROUTING_CHANGE,
        ),
        trigger_suffixes: tuple[str, ...] = (),
    ):
        self.listener_id = listener_id
        self.target_address = target_address
        self.trigger_opcodes = tuple(trigger_opcodes)
        self.trigger_suffixes = tuple(trigger_suffixes)
        self.status = "idle"
        self.fired = 0
        self.evidence: list[BusEvent] = []

    def arm(self):
        if self.status == "idle":
            self.status = "armed"

    def disarm(self):
        self.status = "idle"

    def _matches(self, frame: CecFrame) -> bool:
        if frame.is_polling:
            return False
        if self.trigger_suffixes:
            return any(fr.matches_suffix(frame, s) for s in self.trigger_suffixes)
        return frame.opcode in self.trigger_opcodes

    def on_event(self, sim: Simulator, event: BusEvent):
        if self.status == "idle" or self.listener_id not in event.observers:
            return
        if event.origin == self.listener_id:
            return
        if not self._matches(event.frame):
            return
        own = sim.logical.get(self.listener_id)
        if own is None:
            return
        self.status = "active"
        self.fired += 1
        self.evidence.append(event)
        sim.transmit_at(
            sim.clock + 1,
            self.listener_id,
            CecFrame(own, self.target_address, fr.OP_STANDBY),
        )


class BroadcastDos(Actor):
    """Five-frame input-churn loop: wake the display, then walk its inputs
    with forged active-source claims, one frame per tick, forever."""

    CLAIMED_PORTS = (1, 2, 3, 4)

    def __init__(self, listener_id: str, display_address: int = 0):
        self.listener_id = listener_id
        self.display_address = display_address
        self.active = False
        self.started_tick: int | None = None
        self._index = 0

    def activate(self, sim: Simulator | None = None):
        if not self.active:
            self.active = True
            log.info("%s input-churn loop armed", self.listener_id)

    def deactivate(self):
        self.active = False

    def _cycle(self, own: int) -> list[CecFrame]:
        frames = [CecFrame(own, self.display_address, fr.OP_IMAGE_VIEW_ON)]
        for port in self.CLAIMED_PORTS:
            claim = PhysicalAddress((port, 0, 0, 0))
            frames.append(
                CecFrame(own, fr.BROADCAST, fr.OP_ACTIVE_SOURCE, claim.to_bytes())
            )
        return frames

    def on_tick(self, sim: Simulator, tick: int):
        if not self.active:
            return
        own = sim.logical.get(self.listener_id)
        if own is None:
            return
        if self.started_tick is None:
            self.started_tick = tick
        cycle = self._cycle(own)
        sim.transmit_at(tick, self.listener_id, cycle[self._index])
        self._index = (self._index + 1) % len(cycle)


class AttackController(Actor):
    """Glue on the hidden listener: watches for arming markers, launches
    census walks, and hands the relay something to drive."""

    def __init__(
        self,
        listener_id: str,
        store: PayloadStore,
        targeted_target: int = 0,
        display_address: int = 0,
    ):
        self.listener_id = listener_id
        self.store = store
        self.targeted = TargetedDos(listener_id, target_address=targeted_target)
        self.broadcast = BroadcastDos(listener_id, display_address=display_address)
        self.scans: list[ScanWalk] = []

    def register(self, sim: Simulator):
        sim.add_actor(self.targeted)
        sim.add_actor(self.broadcast)
        sim.add_actor(self)

    def on_event(self, sim: Simulator, event: BusEvent):
        if self.listener_id not in event.observers or event.origin == self.listener_id:
            return
        if event.frame == ARM_TARGETED_MARKER:
            self.targeted.arm()
        elif event.frame == ARM_BROADCAST_MARKER:
            self.broadcast.activate(sim)

    def start_scan(self, sim: Simulator, on_complete=None) -> ScanWalk:
        def finish(inner_sim, report):
            self.store.scan_report = report.to_json().encode("ascii")
            if on_complete is not None:
                on_complete(inner_sim, report)

        walk = ScanWalk(self.listener_id, on_complete=finish)
        self.scans.append(walk)
        sim.add_actor(walk)
        walk.start(sim)
        return walk

    def cancel_all(self):
        self.targeted.disarm()
        self.broadcast.deactivate()
