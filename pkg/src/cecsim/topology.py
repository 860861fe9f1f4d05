"""HDMI tree model: device nodes, cable edges, and physical addressing.

Topologies load from a plain JSON document of nodes and edges.  Validation
is strict and every error names the node or edge at fault.  Physical
addresses follow EDID: the root is 0.0.0.0 and a child on port p replaces
its parent's first zero nibble with p.  A device that never reads EDID
stays unregistered at f.f.f.f; an intermediate without its own EDID hop
(a dumb switch or splitter) passes its upstream address through unchanged,
so everything behind it sees the same port address.
"""

import copy
import enum
import json
from dataclasses import dataclass, field

from cecsim.frames import DeviceType, FrameError, PhysicalAddress, PowerState, parse_vendor_id


class TopologyError(ValueError):
    """Raised when a topology document is structurally invalid."""


class DeviceKind(enum.Enum):
    DISPLAY = "display"
    SWITCH = "switch"
    HUB_SPLITTER = "hub_splitter"
    SOURCE = "source"
    ATTACKER_LISTENER = "attacker_listener"


_KIND_ALIASES = {
    "display": DeviceKind.DISPLAY,
    "tv": DeviceKind.DISPLAY,
    "switch": DeviceKind.SWITCH,
    "hub": DeviceKind.HUB_SPLITTER,
    "hub_splitter": DeviceKind.HUB_SPLITTER,
    "splitter": DeviceKind.HUB_SPLITTER,
    "source": DeviceKind.SOURCE,
    "listener": DeviceKind.ATTACKER_LISTENER,
    "attacker_listener": DeviceKind.ATTACKER_LISTENER,
}

_TYPE_ALIASES = {
    "television": DeviceType.TELEVISION,
    "tv": DeviceType.TELEVISION,
    "recording": DeviceType.RECORDING,
    "tuner": DeviceType.TUNER,
    "playback": DeviceType.PLAYBACK,
    "reserved": DeviceType.RESERVED,
    "free_use": DeviceType.FREE_USE,
}

MAX_PORTS = 15
MAX_DEPTH = 4
MAX_OSD_LEN = 14


@dataclass
class DeviceNode:
    """Static configuration of one device in the tree."""

    id: str
    kind: DeviceKind
    device_type: DeviceType
    osd_name: str
    vendor_id: int = 0
    cec_version: str = "1.4"
    menu_language: str | None = "eng"
    cec_control_enabled: bool = True
    cec_info_reporting_enabled: bool = True
    edid_address_available: bool = True
    # Whether the device takes part in CEC at all.  Dumb switches and
    # splitters propagate frames but never hold a logical address.
    cec_addressed: bool = True
    logical_address: int | None = None
    initial_power: PowerState = PowerState.ON
    active_source: bool = False
    active_input_port: int | None = None
    input_count: int = 4


@dataclass(frozen=True)
class Edge:
    parent: str
    child: str
    port: int
    cec_propagates: bool = True


@dataclass
class Topology:
    nodes: dict[str, DeviceNode]
    edges: list[Edge]
    vendor_names: dict[int, str] = field(default_factory=dict)

    @property
    def root(self) -> str:
        children = {e.child for e in self.edges}
        for node_id in self.nodes:
            if node_id not in children:
                return node_id
        raise TopologyError("topology has no root")

    def children_of(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.parent == node_id]

    def parent_edge(self, node_id: str) -> Edge | None:
        for e in self.edges:
            if e.child == node_id:
                return e
        return None

    def node_order(self) -> list[str]:
        return list(self.nodes)

    def listeners(self) -> list[str]:
        return [n.id for n in self.nodes.values() if n.kind is DeviceKind.ATTACKER_LISTENER]

    def clone(self) -> "Topology":
        return copy.deepcopy(self)


def _require(condition: bool, message: str):
    if not condition:
        raise TopologyError(message)


def _parse_node(raw: dict) -> DeviceNode:
    _require(isinstance(raw, dict), "node entries must be objects")
    node_id = raw.get("id")
    _require(isinstance(node_id, str) and node_id != "", "node missing id: %r" % raw)
    kind_text = str(raw.get("kind", "")).lower()
    _require(kind_text in _KIND_ALIASES, "node %r has unknown kind %r" % (node_id, raw.get("kind")))
    kind = _KIND_ALIASES[kind_text]
    type_text = str(raw.get("device_type", "")).lower()
    _require(
        type_text in _TYPE_ALIASES,
        "node %r has unknown device_type %r" % (node_id, raw.get("device_type")),
    )
    device_type = _TYPE_ALIASES[type_text]

    osd = raw.get("osd_name", node_id)[:MAX_OSD_LEN]
    try:
        vendor = parse_vendor_id(raw.get("vendor_id", 0))
    except FrameError as exc:
        raise TopologyError("node %r: %s" % (node_id, exc)) from None

    language = raw.get("menu_language", "eng")
    if language in (None, "", "unknown"):
        language = None
    else:
        language = str(language).lower()
        _require(len(language) == 3, "node %r menu_language must be 3 chars" % node_id)

    logical = raw.get("logical_address")
    if logical is not None:
        _require(
            isinstance(logical, int) and 0 <= logical <= 14,
            "node %r logical_address must be 0..14" % node_id,
        )

    power_text = str(raw.get("initial_power", "on")).lower()
    _require(power_text in ("on", "standby"), "node %r initial_power must be on|standby" % node_id)

    input_count = raw.get("input_count", 4)
    _require(
        isinstance(input_count, int) and 1 <= input_count <= MAX_PORTS,
        "node %r input_count must be 1..%d" % (node_id, MAX_PORTS),
    )

    active_port = raw.get("active_input_port")
    if active_port is not None:
        _require(
            isinstance(active_port, int) and 1 <= active_port <= input_count,
            "node %r active_input_port must be 1..%d" % (node_id, input_count),
        )

    addressed_default = kind not in (DeviceKind.SWITCH, DeviceKind.HUB_SPLITTER)
    return DeviceNode(
        id=node_id,
        kind=kind,
        device_type=device_type,
        osd_name=osd,
        vendor_id=vendor,
        cec_version=str(raw.get("cec_version", "1.4")),
        menu_language=language,
        cec_control_enabled=bool(raw.get("cec_control_enabled", True)),
        cec_info_reporting_enabled=bool(raw.get("cec_info_reporting_enabled", True)),
        edid_address_available=bool(raw.get("edid_address_available", True)),
        cec_addressed=bool(raw.get("cec_addressed", addressed_default)),
        logical_address=logical,
        initial_power=PowerState.ON if power_text == "on" else PowerState.STANDBY,
        active_source=bool(raw.get("active_source", False)),
        active_input_port=active_port,
        input_count=input_count,
    )


def build_topology(config: dict) -> Topology:
    """Validate a topology document and return the tree.

    Checks: unique ids, known kinds/types, a single root, no cycles or
    shared children, ports within range and unique per parent, and that the
    tree still fits the four-nibble address space.
    """
    _require(isinstance(config, dict), "topology config must be an object")
    raw_nodes = config.get("nodes")
    _require(isinstance(raw_nodes, list) and raw_nodes, "topology needs a non-empty nodes list")

    nodes: dict[str, DeviceNode] = {}
    for raw in raw_nodes:
        node = _parse_node(raw)
        _require(node.id not in nodes, "duplicate node id %r" % node.id)
        nodes[node.id] = node

    edges: list[Edge] = []
    seen_child: set[str] = set()
    ports_used: dict[str, set[int]] = {}
    for raw in config.get("edges", []):
        _require(isinstance(raw, dict), "edge entries must be objects")
        parent, child = raw.get("parent"), raw.get("child")
        _require(parent in nodes, "edge references unknown parent %r" % parent)
        _require(child in nodes, "edge references unknown child %r" % child)
        _require(parent != child, "node %r cannot be its own parent" % parent)
        port = raw.get("port")
        _require(
            isinstance(port, int) and 1 <= port <= MAX_PORTS,
            "edge %r->%r port must be 1..%d" % (parent, child, MAX_PORTS),
        )
        _require(
            port not in ports_used.setdefault(parent, set()),
            "node %r uses port %d twice" % (parent, port),
        )
        ports_used[parent].add(port)
        _require(child not in seen_child, "node %r has more than one parent" % child)
        seen_child.add(child)
        edges.append(Edge(parent, child, port, bool(raw.get("cec_propagates", True))))

    roots = [n for n in nodes if n not in seen_child]
    _require(len(roots) == 1, "topology must have exactly one root, found %r" % roots)
    root = roots[0]

    # Walk down from the root; anything unreached is an orphan or part of a
    # cycle among non-root nodes.
    reached = {root}
    frontier = [root]
    while frontier:
        current = frontier.pop()
        for edge in edges:
            if edge.parent == current and edge.child not in reached:
                reached.add(edge.child)
                frontier.append(edge.child)
    unreached = [n for n in nodes if n not in reached]
    _require(not unreached, "nodes unreachable from root %r: %r" % (root, unreached))

    vendor_names = {}
    for key, name in (config.get("vendor_names") or {}).items():
        vendor_names[parse_vendor_id(key)] = str(name)

    topo = Topology(nodes=nodes, edges=edges, vendor_names=vendor_names)
    # Re-uses the assignment walk purely for depth validation.
    assign_physical_addresses(topo)
    return topo


def load_topology(path: str) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TopologyError("topology file %s is not valid JSON: %s" % (path, exc)) from None
    return build_topology(config)


def assign_physical_addresses(topology: Topology) -> dict[str, PhysicalAddress]:
    """EDID walk over the tree, returning each node's physical address.

    A node with edid_address_available=False reports f.f.f.f but still has
    an address slot; when such a node is a switch or splitter its children
    inherit the slot unchanged instead of consuming another nibble.
    """
    root = topology.root
    slots = {root: PhysicalAddress.root()}
    result: dict[str, PhysicalAddress] = {}
    order = [root]
    while order:
        node_id = order.pop(0)
        node = topology.nodes[node_id]
        slot = slots[node_id]
        result[node_id] = slot if node.edid_address_available else PhysicalAddress.unregistered()
        passthrough = not node.edid_address_available and node.kind in (
            DeviceKind.SWITCH,
            DeviceKind.HUB_SPLITTER,
        )
        for edge in topology.children_of(node_id):
            if passthrough:
                slots[edge.child] = slot
            else:
                try:
                    slots[edge.child] = slot.child(edge.port)
                except FrameError:
                    raise TopologyError(
                        "node %r exceeds the %d-level address depth" % (edge.child, MAX_DEPTH)
                    ) from None
            order.append(edge.child)
    return result


def propagation_domains(topology: Topology) -> dict[str, tuple[str, ...]]:
    """Map each node to its CEC propagation domain.

    Domains are the connected components over edges with cec_propagates
    True; the control wire is shared, so every member of a component
    observes every frame any member puts on it.  Order within a domain is
    node declaration order, which keeps traces stable.
    """
    neighbours: dict[str, set[str]] = {n: set() for n in topology.nodes}
    for edge in topology.edges:
        if edge.cec_propagates:
            neighbours[edge.parent].add(edge.child)
            neighbours[edge.child].add(edge.parent)

    domains: dict[str, tuple[str, ...]] = {}
    seen: set[str] = set()
    order = topology.node_order()
    for node_id in order:
        if node_id in seen:
            continue
        component = {node_id}
        frontier = [node_id]
        while frontier:
            for other in neighbours[frontier.pop()]:
                if other not in component:
                    component.add(other)
                    frontier.append(other)
        ordered = tuple(n for n in order if n in component)
        for member in component:
            domains[member] = ordered
        seen |= component
    return domains
