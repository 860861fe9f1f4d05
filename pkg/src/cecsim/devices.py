"""Per-device CEC behaviour: queries, control, announcements, user actions.

Reactions are written as pure transitions: `react` takes the current
DeviceState plus an observed frame and returns the next state and any
response frames.  The caller (the simulator) owns scheduling, so responses
land on the bus one tick after the frame that caused them.
"""

import enum
from dataclasses import dataclass, field, replace

from cecsim import frames as fr
from cecsim.frames import CecFrame, PhysicalAddress, PowerState
from cecsim.topology import DeviceKind, DeviceNode

# Feature Abort reason operands.
ABORT_UNRECOGNIZED = 0x00
ABORT_REFUSED = 0x04

# How the settings menu starves: this many externally sourced control frames
# inside the window lock the user out for the rest of the window.
MENU_PRESSURE_WINDOW = 10
MENU_PRESSURE_LIMIT = 3


@dataclass(frozen=True)
class DeviceState:
    power: PowerState
    active_source: bool = False
    active_input_port: int | None = None
    cec_control_enabled: bool = True
    cec_info_reporting_enabled: bool = True

    @classmethod
    def initial(cls, node: DeviceNode) -> "DeviceState":
        return cls(
            power=node.initial_power,
            active_source=node.active_source,
            active_input_port=node.active_input_port,
            cec_control_enabled=node.cec_control_enabled,
            cec_info_reporting_enabled=node.cec_info_reporting_enabled,
        )


@dataclass
class DeviceCtx:
    """Addressing context the simulator hands to a reacting device."""

    node: DeviceNode
    logical: int | None
    physical: PhysicalAddress
    tick: int


@dataclass
class Reaction:
    state: DeviceState
    responses: list[CecFrame] = field(default_factory=list)
    # True when the frame counted as external control pressure on the device.
    control_pressure: bool = False


class UserAction(enum.Enum):
    POWER_ON = "power_on"
    POWER_OFF = "power_off"
    SELECT_INPUT = "select_input"
    OPEN_SETTINGS = "open_settings"
    DISABLE_CEC = "disable_cec"


def announcement_frames(ctx: DeviceCtx, state: DeviceState) -> list[CecFrame]:
    """Broadcasts a device makes as it wakes up.

    Every device reports its physical address and vendor id.  A display
    with a selected input also re-announces the route; a source that holds
    the active-source claim re-claims it.
    """
    if ctx.logical is None:
        return []
    out = []
    hi, lo = ctx.physical.to_bytes()
    out.append(
        CecFrame(
            ctx.logical,
            fr.BROADCAST,
            fr.OP_REPORT_PHYSICAL_ADDRESS,
            (hi, lo, fr.DEVICE_TYPE_OPERAND[ctx.node.device_type]),
        )
    )
    out.append(
        CecFrame(
            ctx.logical,
            fr.BROADCAST,
            fr.OP_DEVICE_VENDOR_ID,
            fr.vendor_id_bytes(ctx.node.vendor_id),
        )
    )
    if ctx.node.kind is DeviceKind.DISPLAY and state.active_input_port is not None:
        new = ctx.physical.child(state.active_input_port)
        out.append(
            CecFrame(
                ctx.logical,
                fr.BROADCAST,
                fr.OP_ROUTING_CHANGE,
                ctx.physical.to_bytes() + new.to_bytes(),
            )
        )
    elif state.active_source and not ctx.physical.is_unregistered:
        out.append(
            CecFrame(ctx.logical, fr.BROADCAST, fr.OP_ACTIVE_SOURCE, ctx.physical.to_bytes())
        )
    return out


def _query_response(ctx: DeviceCtx, state: DeviceState, frame: CecFrame) -> CecFrame | None:
    node, me, them = ctx.node, ctx.logical, frame.initiator
    op = frame.opcode
    if op == fr.OP_GIVE_PHYSICAL_ADDRESS:
        hi, lo = ctx.physical.to_bytes()
        return CecFrame(
            me, fr.BROADCAST, fr.OP_REPORT_PHYSICAL_ADDRESS,
            (hi, lo, fr.DEVICE_TYPE_OPERAND[node.device_type]),
        )
    if op == fr.OP_GIVE_OSD_NAME:
        name = node.osd_name.encode("ascii", errors="replace")[:14]
        if not name:
            return CecFrame(me, them, fr.OP_FEATURE_ABORT, (op, ABORT_REFUSED))
        return CecFrame(me, them, fr.OP_SET_OSD_NAME, tuple(name))
    if op == fr.OP_GIVE_VENDOR_ID:
        return CecFrame(
            me, fr.BROADCAST, fr.OP_DEVICE_VENDOR_ID, fr.vendor_id_bytes(node.vendor_id)
        )
    if op == fr.OP_GIVE_POWER_STATUS:
        return CecFrame(
            me, them, fr.OP_REPORT_POWER_STATUS, (fr.POWER_STATUS_OPERAND[state.power],)
        )
    if op == fr.OP_GET_CEC_VERSION:
        operand = fr.CEC_VERSION_OPERAND.get(node.cec_version)
        if operand is None:
            return CecFrame(me, them, fr.OP_FEATURE_ABORT, (op, ABORT_REFUSED))
        return CecFrame(me, them, fr.OP_CEC_VERSION, (operand,))
    if op == fr.OP_GET_MENU_LANGUAGE:
        if node.menu_language is None:
            return CecFrame(me, them, fr.OP_FEATURE_ABORT, (op, ABORT_REFUSED))
        lang = node.menu_language.encode("ascii")[:3]
        return CecFrame(me, fr.BROADCAST, fr.OP_SET_MENU_LANGUAGE, tuple(lang))
    return None


def _derived_input_port(ctx: DeviceCtx, state: DeviceState, claimed: PhysicalAddress) -> int | None:
    if ctx.node.kind not in (DeviceKind.DISPLAY, DeviceKind.SWITCH):
        return None
    port = ctx.physical.port_towards(claimed)
    if port is None or port > ctx.node.input_count:
        return None
    return port


# Frames that only ever answer an earlier request or announce state.  No
# device reacts to these; the interested party (a scan, a covert session)
# picks them off the shared wire.  Opcode 0x00 stays here on purpose: it is
# both Feature Abort and the covert data opcode, and aborting it back would
# loop or corrupt a transfer.
RESPONSE_OPCODES = frozenset(
    {
        fr.OP_FEATURE_ABORT,
        fr.OP_SET_MENU_LANGUAGE,
        fr.OP_SET_OSD_NAME,
        fr.OP_REPORT_PHYSICAL_ADDRESS,
        fr.OP_DEVICE_VENDOR_ID,
        fr.OP_REPORT_POWER_STATUS,
        fr.OP_CEC_VERSION,
    }
)


def react(ctx: DeviceCtx, state: DeviceState, frame: CecFrame) -> Reaction:
    """Device reaction to a frame it observed on its bus segment.

    The caller filters out the device's own transmissions; everything here
    is traffic from someone else.  Polling messages are acknowledged at the
    bus layer and ignored here.
    """
    if frame.is_polling:
        return Reaction(state)
    addressed = ctx.logical is not None and frame.destination == ctx.logical
    broadcast = frame.is_broadcast
    if not addressed and not broadcast:
        return Reaction(state)

    op = frame.opcode
    control = op in fr.CONTROL_OPCODES and state.cec_control_enabled
    pressure = control

    # Queries only answer when the device still reports information.
    if addressed and op in fr.QUERY_OPCODES:
        if not state.cec_info_reporting_enabled:
            return Reaction(state)
        response = _query_response(ctx, state, frame)
        return Reaction(state, [response] if response else [])

    if op == fr.OP_STANDBY:
        if control and state.power is not PowerState.STANDBY:
            return Reaction(replace(state, power=PowerState.STANDBY), control_pressure=pressure)
        return Reaction(state, control_pressure=pressure)

    if op == fr.OP_IMAGE_VIEW_ON and addressed:
        if control and ctx.node.kind is DeviceKind.DISPLAY and state.power is PowerState.STANDBY:
            new_state = replace(state, power=PowerState.ON)
            return Reaction(
                new_state, announcement_frames(ctx, new_state), control_pressure=pressure
            )
        return Reaction(state, control_pressure=pressure)

    if op == fr.OP_ACTIVE_SOURCE and broadcast and len(frame.operands) == 2:
        claimed = PhysicalAddress.from_bytes(*frame.operands)
        new_state = state
        claims = not ctx.physical.is_unregistered and claimed == ctx.physical
        if new_state.active_source != claims:
            new_state = replace(new_state, active_source=claims)
        if control:
            port = _derived_input_port(ctx, new_state, claimed)
            if port is not None and port != new_state.active_input_port:
                new_state = replace(new_state, active_input_port=port)
        return Reaction(new_state, control_pressure=pressure)

    if op == fr.OP_ROUTING_CHANGE and broadcast and len(frame.operands) == 4:
        if control:
            new = PhysicalAddress.from_bytes(frame.operands[2], frame.operands[3])
            port = _derived_input_port(ctx, state, new)
            if port is not None and port != state.active_input_port:
                return Reaction(
                    replace(state, active_input_port=port), control_pressure=pressure
                )
        return Reaction(state, control_pressure=pressure)

    if op == fr.OP_REQUEST_ACTIVE_SOURCE and broadcast:
        if state.active_source and state.cec_info_reporting_enabled and ctx.logical is not None:
            return Reaction(
                state,
                [
                    CecFrame(
                        ctx.logical, fr.BROADCAST, fr.OP_ACTIVE_SOURCE, ctx.physical.to_bytes()
                    )
                ],
            )
        return Reaction(state)

    if op in RESPONSE_OPCODES:
        return Reaction(state)

    if addressed and state.cec_info_reporting_enabled and ctx.logical is not None:
        return Reaction(
            state,
            [CecFrame(ctx.logical, frame.initiator, fr.OP_FEATURE_ABORT, (op, ABORT_UNRECOGNIZED))],
        )
    return Reaction(state)


@dataclass
class UserActionResult:
    ok: bool
    reason: str
    state: DeviceState
    emissions: list[CecFrame] = field(default_factory=list)


def apply_user_action(
    ctx: DeviceCtx,
    state: DeviceState,
    action: UserAction,
    argument: int | None = None,
    menu_accessible: bool = True,
) -> UserActionResult:
    """Front-panel and remote-control actions.

    These are physical interactions, so CEC control gating does not apply;
    only the settings menu can be starved out by control-frame pressure.
    """
    node = ctx.node
    if action is UserAction.POWER_ON:
        if state.power is not PowerState.STANDBY:
            return UserActionResult(False, "already on", state)
        new_state = replace(state, power=PowerState.ON)
        return UserActionResult(True, "", new_state, announcement_frames(ctx, new_state))

    if action is UserAction.POWER_OFF:
        if state.power is PowerState.STANDBY:
            return UserActionResult(False, "already in standby", state)
        return UserActionResult(True, "", replace(state, power=PowerState.STANDBY))

    if action is UserAction.SELECT_INPUT:
        if node.kind not in (DeviceKind.DISPLAY, DeviceKind.SWITCH):
            return UserActionResult(False, "device has no selectable inputs", state)
        if not isinstance(argument, int) or not 1 <= argument <= node.input_count:
            return UserActionResult(False, "unknown input port %r" % (argument,), state)
        new_state = replace(state, active_input_port=argument)
        emissions = []
        if ctx.logical is not None and not ctx.physical.is_unregistered:
            selected = ctx.physical.child(argument)
            emissions.append(
                CecFrame(ctx.logical, fr.BROADCAST, fr.OP_ACTIVE_SOURCE, selected.to_bytes())
            )
        return UserActionResult(True, "", new_state, emissions)

    if action is UserAction.OPEN_SETTINGS:
        if not menu_accessible:
            return UserActionResult(False, "settings menu unresponsive", state)
        return UserActionResult(True, "", state)

    if action is UserAction.DISABLE_CEC:
        if not menu_accessible:
            return UserActionResult(False, "settings menu unresponsive", state)
        disabled = replace(state, cec_control_enabled=False, cec_info_reporting_enabled=False)
        return UserActionResult(True, "", disabled)

    return UserActionResult(False, "unsupported action", state)
