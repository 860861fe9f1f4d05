"""Covert file transfer over spare CEC opcodes.

A receiver asks for the current payload with a fixed request marker frame;
the holder answers with a stream of opcode-0x00 data frames carrying up to
14 payload bytes each, one frame per tick, then a fixed end marker.  The
markers are whole-frame byte patterns, so they work without knowing who is
listening, and anything that does not look like a marker or a data frame
for the open session is dismissed.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from random import Random

from cecsim import frames as fr
from cecsim.bus import Actor, BusEvent, Simulator, TransferRecord
from cecsim.frames import CecFrame, parse_frame

log = logging.getLogger(__name__)

DATA_OPCODE = 0x00
SEGMENT_BYTES = 14
MAX_PAYLOAD = 2**24

REQUEST_MARKER = parse_frame("aa:aa:aa:aa")
MIC_MARKER = parse_frame("bb:bb:bb:bb")
END_MARKER = parse_frame("ee:ee:ee:ee")

# Receiver gives up after this much silence.
INACTIVITY_TIMEOUT = 20
# Sender gives up once this many of its data frames go unacknowledged.
MAX_UNACKED = 3


def serialize_payload(data: bytes) -> list[tuple[int, ...]]:
    """Split a payload into data-frame operand tuples of up to 14 bytes."""
    if len(data) > MAX_PAYLOAD:
        raise ValueError("payload too large: %d bytes" % len(data))
    return [
        tuple(data[i : i + SEGMENT_BYTES]) for i in range(0, len(data), SEGMENT_BYTES)
    ]


def segment_count(size: int) -> int:
    return math.ceil(size / SEGMENT_BYTES)


def payload_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class PayloadStore:
    """What the listener can leak, in priority order: a live microphone
    grab once armed, then any preloaded capture, then the last scan
    report."""

    def __init__(self, seed: int = 0, mic_bytes: int = 1024, capture: bytes | None = None):
        self.mic_armed = False
        self._mic_blob = Random(seed ^ 0x6D6963).randbytes(mic_bytes)
        self.capture = capture
        self.scan_report: bytes | None = None

    def arm_mic(self) -> bool:
        """Returns True when this call armed it; repeated triggers no-op."""
        if self.mic_armed:
            return False
        self.mic_armed = True
        return True

    @property
    def mic_blob(self) -> bytes:
        return self._mic_blob

    def current(self) -> bytes:
        if self.mic_armed:
            return self._mic_blob
        if self.capture is not None:
            return self.capture
        if self.scan_report is not None:
            return self.scan_report
        return b""


@dataclass
class SendSession:
    session_id: str
    peer_address: int
    pending: list[CecFrame]
    status: str = "streaming"
    sent_data: int = 0
    unacked: int = 0


class FileSender(Actor):
    """Listener-side endpoint: watches for markers, streams on request."""

    def __init__(self, device_id: str, store: PayloadStore):
        self.device_id = device_id
        self.store = store
        self.session: SendSession | None = None
        self.finished: list[SendSession] = []

    def on_event(self, sim: Simulator, event: BusEvent):
        if self.device_id not in event.observers:
            return
        frame = event.frame
        if event.origin == self.device_id:
            if (
                self.session is not None
                and self.session.status == "streaming"
                and not frame.is_polling
                and frame.opcode == DATA_OPCODE
                and not event.acknowledged
            ):
                self.session.unacked += 1
                if self.session.unacked >= MAX_UNACKED:
                    log.info(
                        "%s aborting %s after %d unacknowledged frames",
                        self.device_id, self.session.session_id, self.session.unacked,
                    )
                    self.session.status = "aborted"
                    self.session.pending.clear()
                    self.finished.append(self.session)
                    self.session = None
            return

        if frame == MIC_MARKER:
            if self.store.arm_mic():
                log.info("%s mic payload armed", self.device_id)
            return
        if frame == REQUEST_MARKER:
            self._start_session(sim, event)

    def _start_session(self, sim: Simulator, event: BusEvent):
        if self.session is not None:
            log.info("%s busy, ignoring transfer request from %s", self.device_id, event.origin)
            return
        own = sim.logical.get(self.device_id)
        peer = sim.logical.get(event.origin)
        if own is None or peer is None:
            log.warning("%s cannot stream without logical addresses", self.device_id)
            return
        payload = self.store.current()
        pending = [
            CecFrame(own, peer, DATA_OPCODE, chunk) for chunk in serialize_payload(payload)
        ]
        pending.append(END_MARKER)
        self.session = SendSession(
            session_id=sim.next_session_id(), peer_address=peer, pending=pending
        )
        log.info(
            "%s streaming %d bytes to address %d as %s",
            self.device_id, len(payload), peer, self.session.session_id,
        )

    def on_tick(self, sim: Simulator, tick: int):
        if self.session is None or self.session.status != "streaming":
            return
        frame = self.session.pending.pop(0)
        sim.transmit_at(tick, self.device_id, frame)
        if frame.opcode == DATA_OPCODE and not frame.is_polling and frame != END_MARKER:
            self.session.sent_data += 1
        if not self.session.pending:
            self.session.status = "complete"
            self.finished.append(self.session)
            self.session = None


@dataclass
class ReceiveSession:
    session_id: str
    peer_address: int
    status: str = "requested"
    chunks: list[bytes] = field(default_factory=list)
    last_activity: int = 0


class FileReceiver(Actor):
    """Client-side endpoint: sends the request marker, reassembles data
    frames, and closes on the end marker or after a quiet timeout."""

    def __init__(self, device_id: str):
        self.device_id = device_id
        self.session: ReceiveSession | None = None
        self.rejected_requests = 0

    def request_file(self, sim: Simulator, peer_address: int | None = None) -> bool:
        """Ask whoever is listening for its payload.  One session at a
        time; a second request is rejected until the first closes."""
        if self.session is not None:
            self.rejected_requests += 1
            log.info("%s already has an open transfer, request rejected", self.device_id)
            return False
        if peer_address is None:
            peer_address = -1  # accept the first responder
        self.session = ReceiveSession(
            session_id=sim.next_session_id(),
            peer_address=peer_address,
            last_activity=sim.clock,
        )
        sim.transmit_at(sim.clock, self.device_id, REQUEST_MARKER)
        return True

    def _peer_matches(self, sim: Simulator, origin: str) -> bool:
        origin_addr = sim.logical.get(origin)
        if origin_addr is None:
            return False
        if self.session.peer_address == -1:
            self.session.peer_address = origin_addr
        return origin_addr == self.session.peer_address

    def on_event(self, sim: Simulator, event: BusEvent):
        if self.session is None or self.device_id not in event.observers:
            return
        if event.origin == self.device_id:
            return
        frame = event.frame
        if frame == END_MARKER:
            if self._peer_matches(sim, event.origin):
                self._close(sim, "complete")
            return
        if frame.is_polling or frame.opcode != DATA_OPCODE or not frame.operands:
            return
        own = sim.logical.get(self.device_id)
        if own is None or frame.destination != own:
            return
        if not self._peer_matches(sim, event.origin):
            return
        self.session.chunks.append(bytes(frame.operands))
        self.session.status = "streaming"
        self.session.last_activity = event.tick

    def on_tick(self, sim: Simulator, tick: int):
        if self.session is None:
            return
        if tick - self.session.last_activity > INACTIVITY_TIMEOUT:
            log.info("%s transfer %s timed out", self.device_id, self.session.session_id)
            self._close(sim, "aborted")

    def _close(self, sim: Simulator, status: str):
        session = self.session
        payload = b"".join(session.chunks)
        sim.artifacts.transfers.append(
            TransferRecord(
                session_id=session.session_id,
                receiver=self.device_id,
                peer="address-%d" % session.peer_address,
                status=status,
                payload=payload,
                segments=len(session.chunks),
            )
        )
        self.session = None


def write_transfer_artifacts(records, out_dir) -> list[str]:
    """Persist recovered payloads as <session-id>.bin plus a manifest of
    sizes and digests.  Returns the file names written."""
    import os

    written = []
    manifest_lines = []
    for record in records:
        manifest_lines.append(
            "%s status=%s receiver=%s peer=%s bytes=%d sha256=%s"
            % (
                record.session_id,
                record.status,
                record.receiver,
                record.peer,
                len(record.payload),
                payload_digest(record.payload),
            )
        )
        if record.status == "complete":
            name = "%s.bin" % record.session_id
            with open(os.path.join(out_dir, name), "wb") as fh:
                fh.write(record.payload)
            written.append(name)
    if records:
        with open(os.path.join(out_dir, "transfers.manifest"), "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in manifest_lines))
        written.append("transfers.manifest")
    return written
