"""CEC frame model, the colon-hex text codec, and the opcode registry.

A frame is a header byte (initiator nibble, destination nibble) followed by
an optional opcode byte and up to 14 operand bytes.  The text form is the
usual lowercase colon-separated hex, e.g. "20:36" or "1f:82:30:00".  A frame
with no opcode is a polling message.
"""

import enum
from dataclasses import dataclass

BROADCAST = 15
FREE_USE = 14
MAX_OPERANDS = 14


class FrameError(ValueError):
    """Raised for structurally invalid frames or unparseable frame text."""


class DeviceType(enum.Enum):
    TELEVISION = "television"
    RECORDING = "recording"
    TUNER = "tuner"
    PLAYBACK = "playback"
    RESERVED = "reserved"
    FREE_USE = "free_use"


# Fixed claim order for logical addresses, by device type.  Reserved types
# never claim an address; everything else falls back to the shared free-use
# address once its own candidates are exhausted.
_TYPE_CANDIDATES = {
    DeviceType.TELEVISION: (0,),
    DeviceType.RECORDING: (1, 2),
    DeviceType.TUNER: (3, 6, 7, 10),
    DeviceType.PLAYBACK: (4, 8, 9, 11),
    DeviceType.RESERVED: (),
    DeviceType.FREE_USE: (),
}

# Operand value of Report Physical Address identifying the reporter's type.
DEVICE_TYPE_OPERAND = {
    DeviceType.TELEVISION: 0x00,
    DeviceType.RECORDING: 0x01,
    DeviceType.RESERVED: 0x02,
    DeviceType.TUNER: 0x03,
    DeviceType.PLAYBACK: 0x04,
    DeviceType.FREE_USE: 0x04,
}


def logical_candidates(device_type: DeviceType) -> tuple[int, ...]:
    """Claim order of logical addresses for a device type."""
    base = _TYPE_CANDIDATES[device_type]
    if device_type is DeviceType.RESERVED:
        return base
    return base + (FREE_USE,)


@dataclass(frozen=True)
class PhysicalAddress:
    """Four-nibble HDMI physical address such as 4.0.0.0 or f.f.f.f."""

    nibbles: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.nibbles) != 4 or not all(0 <= n <= 15 for n in self.nibbles):
            raise FrameError("physical address needs four nibbles in 0..15")

    @classmethod
    def root(cls) -> "PhysicalAddress":
        return cls((0, 0, 0, 0))

    @classmethod
    def unregistered(cls) -> "PhysicalAddress":
        return cls((15, 15, 15, 15))

    @classmethod
    def parse(cls, text: str) -> "PhysicalAddress":
        parts = text.strip().split(".")
        if len(parts) != 4:
            raise FrameError("physical address text must be a.b.c.d: %r" % text)
        try:
            return cls(tuple(int(p, 16) for p in parts))
        except ValueError:
            raise FrameError("bad physical address nibble in %r" % text) from None

    @classmethod
    def from_bytes(cls, high: int, low: int) -> "PhysicalAddress":
        return cls((high >> 4, high & 0xF, low >> 4, low & 0xF))

    @property
    def text(self) -> str:
        return ".".join("%x" % n for n in self.nibbles)

    def to_bytes(self) -> tuple[int, int]:
        a, b, c, d = self.nibbles
        return (a << 4 | b, c << 4 | d)

    @property
    def is_unregistered(self) -> bool:
        return self.nibbles == (15, 15, 15, 15)

    def depth(self) -> int:
        """Count of leading non-zero nibbles (tree depth below the root)."""
        d = 0
        for n in self.nibbles:
            if n == 0:
                break
            d += 1
        return d

    def child(self, port: int) -> "PhysicalAddress":
        """Address of the device on the given port: the first zero nibble
        becomes the port number."""
        if not 1 <= port <= 15:
            raise FrameError("port must be 1..15, got %r" % port)
        d = self.depth()
        if d >= 4:
            raise FrameError("no address space left below %s" % self.text)
        nibbles = list(self.nibbles)
        nibbles[d] = port
        return PhysicalAddress(tuple(nibbles))

    def port_towards(self, claimed: "PhysicalAddress") -> int | None:
        """Input port a claimed address maps to, seen from this node.

        The claim must extend this node's non-zero prefix; returns None when
        it does not (the claim is not beneath this node).
        """
        d = self.depth()
        if d >= 4 or self.is_unregistered or claimed.is_unregistered:
            return None
        if claimed.nibbles[:d] != self.nibbles[:d]:
            return None
        port = claimed.nibbles[d]
        return port if port != 0 else None

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class CecFrame:
    """One CEC frame: header nibbles plus optional opcode and operands."""

    initiator: int
    destination: int
    opcode: int | None = None
    operands: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.initiator <= 15:
            raise FrameError("initiator out of range: %r" % (self.initiator,))
        if not 0 <= self.destination <= 15:
            raise FrameError("destination out of range: %r" % (self.destination,))
        if self.opcode is None:
            if self.operands:
                raise FrameError("polling message cannot carry operands")
        else:
            if not 0 <= self.opcode <= 255:
                raise FrameError("opcode out of range: %r" % (self.opcode,))
        if len(self.operands) > MAX_OPERANDS:
            raise FrameError("too many operands: %d" % len(self.operands))
        if not all(isinstance(b, int) and 0 <= b <= 255 for b in self.operands):
            raise FrameError("operands must be bytes")

    @property
    def header(self) -> int:
        return (self.initiator << 4) | self.destination

    @property
    def is_polling(self) -> bool:
        return self.opcode is None

    @property
    def is_broadcast(self) -> bool:
        return self.destination == BROADCAST

    @property
    def text(self) -> str:
        return encode_frame(self)

    def __str__(self) -> str:
        return self.text


def parse_frame(text: str) -> CecFrame:
    """Parse colon-separated hex text into a CecFrame.

    Raises FrameError naming the offending octet index on bad input.
    """
    if not isinstance(text, str) or not text.strip():
        raise FrameError("empty frame text")
    octets = []
    for i, part in enumerate(text.strip().split(":")):
        if len(part) != 2:
            raise FrameError("octet %d is not two hex digits: %r" % (i, part))
        try:
            octets.append(int(part, 16))
        except ValueError:
            raise FrameError("octet %d is not hex: %r" % (i, part)) from None
    if len(octets) > 2 + MAX_OPERANDS:
        raise FrameError("frame longer than %d octets" % (2 + MAX_OPERANDS))
    header = octets[0]
    frame = CecFrame(
        initiator=header >> 4,
        destination=header & 0xF,
        opcode=octets[1] if len(octets) > 1 else None,
        operands=tuple(octets[2:]),
    )
    return frame


def encode_frame(frame: CecFrame) -> str:
    """Canonical lowercase colon-hex text for a frame."""
    octets = [frame.header]
    if frame.opcode is not None:
        octets.append(frame.opcode)
        octets.extend(frame.operands)
    return ":".join("%02x" % b for b in octets)


def parse_suffix(text: str) -> tuple[int, tuple[int, ...]]:
    """Parse a headerless opcode:operand text like "84:00:00:00"."""
    octets = []
    for i, part in enumerate(text.strip().split(":")):
        try:
            octets.append(int(part, 16))
        except ValueError:
            raise FrameError("octet %d is not hex: %r" % (i, part)) from None
    if not octets:
        raise FrameError("empty suffix text")
    return octets[0], tuple(octets[1:])


def matches_suffix(frame: CecFrame, suffix: str) -> bool:
    """True when the frame's opcode and operands equal the headerless text."""
    if frame.is_polling:
        return False
    opcode, operands = parse_suffix(suffix)
    return frame.opcode == opcode and frame.operands == operands


# ---------------------------------------------------------------------------
# Opcode registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpcodeInfo:
    code: int
    name: str
    min_operands: int
    max_operands: int
    broadcast_ok: bool
    directed_ok: bool


OP_FEATURE_ABORT = 0x00
OP_IMAGE_VIEW_ON = 0x04
OP_SET_MENU_LANGUAGE = 0x32
OP_STANDBY = 0x36
OP_GIVE_OSD_NAME = 0x46
OP_SET_OSD_NAME = 0x47
OP_ROUTING_CHANGE = 0x80
OP_ACTIVE_SOURCE = 0x82
OP_GIVE_PHYSICAL_ADDRESS = 0x83
OP_REPORT_PHYSICAL_ADDRESS = 0x84
OP_REQUEST_ACTIVE_SOURCE = 0x85
OP_DEVICE_VENDOR_ID = 0x87
OP_GIVE_VENDOR_ID = 0x8C
OP_GIVE_POWER_STATUS = 0x8F
OP_REPORT_POWER_STATUS = 0x90
OP_GET_MENU_LANGUAGE = 0x91
OP_CEC_VERSION = 0x9E
OP_GET_CEC_VERSION = 0x9F

_REGISTRY = {
    info.code: info
    for info in (
        OpcodeInfo(OP_FEATURE_ABORT, "Feature Abort", 2, 2, False, True),
        OpcodeInfo(OP_IMAGE_VIEW_ON, "Image View On", 0, 0, False, True),
        OpcodeInfo(OP_SET_MENU_LANGUAGE, "Set Menu Language", 3, 3, True, False),
        OpcodeInfo(OP_STANDBY, "Standby", 0, 0, True, True),
        OpcodeInfo(OP_GIVE_OSD_NAME, "Give OSD Name", 0, 0, False, True),
        OpcodeInfo(OP_SET_OSD_NAME, "Set OSD Name", 1, 14, False, True),
        OpcodeInfo(OP_ROUTING_CHANGE, "Routing Change", 4, 4, True, False),
        OpcodeInfo(OP_ACTIVE_SOURCE, "Active Source", 2, 2, True, False),
        OpcodeInfo(OP_GIVE_PHYSICAL_ADDRESS, "Give Physical Address", 0, 0, False, True),
        OpcodeInfo(OP_REPORT_PHYSICAL_ADDRESS, "Report Physical Address", 3, 3, True, False),
        OpcodeInfo(OP_REQUEST_ACTIVE_SOURCE, "Request Active Source", 0, 0, True, False),
        OpcodeInfo(OP_DEVICE_VENDOR_ID, "Device Vendor ID", 3, 3, True, False),
        OpcodeInfo(OP_GIVE_VENDOR_ID, "Give Device Vendor ID", 0, 0, False, True),
        OpcodeInfo(OP_GIVE_POWER_STATUS, "Give Device Power Status", 0, 0, False, True),
        OpcodeInfo(OP_REPORT_POWER_STATUS, "Report Power Status", 1, 1, False, True),
        OpcodeInfo(OP_GET_MENU_LANGUAGE, "Get Menu Language", 0, 0, False, True),
        OpcodeInfo(OP_CEC_VERSION, "CEC Version", 1, 1, False, True),
        OpcodeInfo(OP_GET_CEC_VERSION, "Get CEC Version", 0, 0, False, True),
    )
}


def opcode_lookup(code: int) -> OpcodeInfo:
    """Registry entry for an opcode.  Total: unknown opcodes come back as a
    permissive "Unknown" entry rather than an error."""
    info = _REGISTRY.get(code)
    if info is None:
        return OpcodeInfo(code, "Unknown", 0, MAX_OPERANDS, True, True)
    return info


# Queries a scan sends to each discovered address, and the responses they
# should produce.
QUERY_OPCODES = (
    OP_GIVE_PHYSICAL_ADDRESS,
    OP_GIVE_OSD_NAME,
    OP_GIVE_VENDOR_ID,
    OP_GIVE_POWER_STATUS,
    OP_GET_CEC_VERSION,
    OP_GET_MENU_LANGUAGE,
)

# Opcodes that change what a device shows or whether it is awake.
CONTROL_OPCODES = (
    OP_IMAGE_VIEW_ON,
    OP_STANDBY,
    OP_ROUTING_CHANGE,
    OP_ACTIVE_SOURCE,
)


class PowerState(enum.Enum):
    ON = "on"
    STANDBY = "standby"
    TO_ON = "to_on"
    TO_STANDBY = "to_standby"


POWER_STATUS_OPERAND = {
    PowerState.ON: 0x00,
    PowerState.STANDBY: 0x01,
    PowerState.TO_ON: 0x02,
    PowerState.TO_STANDBY: 0x03,
}

CEC_VERSION_OPERAND = {"1.3a": 0x04, "1.4": 0x05}

_VERSION_BY_OPERAND = {v: k for k, v in CEC_VERSION_OPERAND.items()}


def cec_version_name(operand: int) -> str:
    return _VERSION_BY_OPERAND.get(operand, "0x%02x" % operand)


# Known CEC vendor identifiers.  Anything absent renders as "Unk", matching
# what libCEC-style scan output shows for unrecognised vendors.
VENDOR_NAMES = {
    0x001582: "Pulse-Eight",
    0x001A11: "Google",
    0x080046: "Sony",
}


def vendor_name(vendor_id: int, extra: dict[int, str] | None = None) -> str:
    if extra and vendor_id in extra:
        return extra[vendor_id]
    return VENDOR_NAMES.get(vendor_id, "Unk")


def parse_vendor_id(value) -> int:
    """Vendor id from an int, "aabbcc" hex text, or "aa:bb:cc" text."""
    if isinstance(value, int):
        vid = value
    else:
        text = str(value).strip().replace(":", "")
        try:
            vid = int(text, 16)
        except ValueError:
            raise FrameError("bad vendor id %r" % value) from None
    if not 0 <= vid <= 0xFFFFFF:
        raise FrameError("vendor id out of range: %r" % value)
    return vid


def vendor_id_bytes(vendor_id: int) -> tuple[int, int, int]:
    return ((vendor_id >> 16) & 0xFF, (vendor_id >> 8) & 0xFF, vendor_id & 0xFF)
