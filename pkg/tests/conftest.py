"""Shared fixtures: the lab tree, small topologies, and random builders."""

import pytest

from cecsim.bus import Simulator
from cecsim.testbed import build_testbed
from cecsim.topology import build_topology


@pytest.fixture
def testbed_topology():
    return build_testbed()


@pytest.fixture
def testbed_sim(testbed_topology):
    sim = Simulator(testbed_topology)
    sim.start()
    return sim


@pytest.fixture
def pair_topology():
    """A display plus one source, the smallest interesting bus."""
    return build_topology(
        {
            "nodes": [
                {"id": "tv", "kind": "display", "device_type": "television", "osd_name": "TV"},
                {"id": "box", "kind": "source", "device_type": "playback", "osd_name": "Box"},
            ],
            "edges": [{"parent": "tv", "child": "box", "port": 1}],
        }
    )


def make_chain(length: int, propagates=True):
    """display <- switch <- ... <- source, every hop on port 1."""
    nodes = [{"id": "d0", "kind": "display", "device_type": "television", "osd_name": "D0"}]
    edges = []
    for i in range(1, length):
        kind = "source" if i == length - 1 else "switch"
        dtype = "playback"
        nodes.append({"id": "d%d" % i, "kind": kind, "device_type": dtype, "osd_name": "D%d" % i})
        edges.append(
            {"parent": "d%d" % (i - 1), "child": "d%d" % i, "port": 1, "cec_propagates": propagates}
        )
    return build_topology({"nodes": nodes, "edges": edges})
