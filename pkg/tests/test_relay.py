"""Command relay: mailbox protocol, HTTP server, polling loop."""

import json

import pytest

from cecsim.attacks import AttackController
from cecsim.bus import Simulator
from cecsim.relay import (
    HttpRelayClient,
    KNOWN_COMMANDS,
    LISTENER_PATH,
    LoopbackRelayClient,
    RelayPoller,
    RelayServer,
    RelayState,
    RelayUnreachable,
    WEBCLIENT_PATH,
)
from cecsim.testbed import EXPECTED_TESTBED_SCAN, build_testbed
from cecsim.transfer import PayloadStore, payload_digest


@pytest.fixture(params=["loopback", "http"])
def client(request):
    if request.param == "loopback":
        yield LoopbackRelayClient()
        return
    server = RelayServer(("127.0.0.1", 0))
    server.start_background()
    try:
        yield HttpRelayClient(server.url)
    finally:
        server.shutdown()
        server.server_close()


def wired_sim():
    sim = Simulator(build_testbed())
    store = PayloadStore(seed=0, capture=b"seized-bytes")
    controller = AttackController("listener", store)
    controller.register(sim)
    return sim, controller, store


# ---------------------------------------------------------------------------
# Mailbox protocol (exercised over both transports)
# ---------------------------------------------------------------------------

class TestMailboxes:
    def test_slots_start_empty(self, client):
        assert client.get(LISTENER_PATH) is None
        assert client.get(WEBCLIENT_PATH) is None

    def test_post_then_get(self, client):
        client.post(LISTENER_PATH, "hello")
        assert client.get(LISTENER_PATH) == "hello"

    def test_get_does_not_consume(self, client):
        client.post(LISTENER_PATH, "sticky")
        assert client.get(LISTENER_PATH) == "sticky"
        assert client.get(LISTENER_PATH) == "sticky"

    def test_last_write_wins(self, client):
        client.post(WEBCLIENT_PATH, "one")
        client.post(WEBCLIENT_PATH, "two")
        assert client.get(WEBCLIENT_PATH) == "two"

    def test_slots_independent(self, client):
        client.post(LISTENER_PATH, "inbound")
        client.post(WEBCLIENT_PATH, "outbound")
        assert client.get(LISTENER_PATH) == "inbound"
        assert client.get(WEBCLIENT_PATH) == "outbound"

    def test_unknown_path_fails(self, client):
        with pytest.raises(RelayUnreachable):
            client.get("/cec/other")


class TestProtocolEdges:
    def test_unknown_path_404(self):
        state = RelayState()
        status, _ = state.handle("GET", "/nope", b"")
        assert status == 404

    def test_post_requires_json_value(self):
        state = RelayState()
        assert state.handle("POST", LISTENER_PATH, b"not-json")[0] == 400
        assert state.handle("POST", LISTENER_PATH, b'{"other": 1}')[0] == 400
        assert state.handle("POST", LISTENER_PATH, b'{"value": 3}')[0] == 400
        assert state.handle("POST", LISTENER_PATH, b'{"value": "ok"}')[0] == 200

    def test_other_methods_405(self):
        state = RelayState()
        assert state.handle("PUT", LISTENER_PATH, b"")[0] == 405
        assert state.handle("DELETE", WEBCLIENT_PATH, b"")[0] == 405

    def test_get_returns_null_value(self):
        state = RelayState()
        status, payload = state.handle("GET", LISTENER_PATH, b"")
        assert status == 200
        assert payload == {"value": None}


# ---------------------------------------------------------------------------
# Polling loop
# ---------------------------------------------------------------------------

class TestPoller:
    def test_polls_only_on_interval(self):
        sim, controller, _ = wired_sim()

        class CountingClient(LoopbackRelayClient):
            gets = 0

            def get(self, path):
                CountingClient.gets += 1
                return super().get(path)

        poller = RelayPoller(CountingClient(), controller, interval_ticks=5)
        sim.add_actor(poller)
        sim.start()
        sim.run(until=21)
        assert CountingClient.gets == 4  # ticks 5, 10, 15, 20

    def test_command_dispatched_once(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, json.dumps({"command": "TDOS", "issued_at": 0}))
        sim.start()
        sim.run(until=12)
        assert poller.executed == ["TDOS"]
        assert controller.targeted.status == "armed"

    def test_fresh_envelope_reexecutes(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, json.dumps({"command": "CANCEL", "issued_at": 0}))
        sim.start()
        sim.run(until=5)
        client.post(LISTENER_PATH, json.dumps({"command": "CANCEL", "issued_at": 5}))
        sim.run(until=10)
        assert poller.executed == ["CANCEL", "CANCEL"]

    def test_unknown_command_logged_not_executed(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, json.dumps({"command": "FORMAT_DISK"}))
        sim.start()
        sim.run(until=6)
        assert poller.executed == []
        assert poller.unknown == ["FORMAT_DISK"]
        assert "FORMAT_DISK" not in KNOWN_COMMANDS

    def test_malformed_envelope_ignored(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, "not json at all")
        sim.start()
        sim.run(until=6)
        assert poller.executed == []

    def test_outage_queues_results_until_recovery(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.down = True
        poller.publish("result-1")
        assert poller._outbox == ["result-1"]
        client.down = False
        poller.publish("result-2")
        assert client.get(WEBCLIENT_PATH) == "result-2"
        assert poller._outbox == []

    def test_poll_survives_outage(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        client.down = True
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        sim.start()
        sim.run(until=8)  # polls fail quietly
        client.down = False
        client.post(LISTENER_PATH, json.dumps({"command": "TDOS"}))
        sim.run(until=12)
        assert poller.executed == ["TDOS"]

    def test_getfile_publishes_digest(self):
        sim, controller, store = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, json.dumps({"command": "GETFILE"}))
        sim.start()
        sim.run(until=6)
        published = json.loads(client.get(WEBCLIENT_PATH))
        assert published["bytes"] == len(b"seized-bytes")
        assert published["sha256"] == payload_digest(b"seized-bytes")
        assert bytes.fromhex(published["data_hex"]) == b"seized-bytes"

    def test_scan_command_publishes_census(self):
        sim, controller, _ = wired_sim()
        client = LoopbackRelayClient()
        poller = RelayPoller(client, controller, interval_ticks=2)
        sim.add_actor(poller)
        client.post(LISTENER_PATH, json.dumps({"command": "SCAN"}))
        sim.start()
        sim.run(until=140)
        assert json.loads(client.get(WEBCLIENT_PATH)) == EXPECTED_TESTBED_SCAN

    def test_interval_must_be_positive(self):
        _, controller, _ = wired_sim()
        with pytest.raises(ValueError):
            RelayPoller(LoopbackRelayClient(), controller, interval_ticks=0)


# ---------------------------------------------------------------------------
# HTTP transport specifics
# ---------------------------------------------------------------------------

class TestHttpTransport:
    def test_unreachable_server(self):
        client = HttpRelayClient("http://127.0.0.1:1", timeout=0.2)
        with pytest.raises(RelayUnreachable):
            client.get(LISTENER_PATH)

    def test_http_error_statuses(self):
        server = RelayServer(("127.0.0.1", 0))
        server.start_background()
        try:
            client = HttpRelayClient(server.url)
            with pytest.raises(RelayUnreachable):
                client.get("/cec/bogus")
        finally:
            server.shutdown()
            server.server_close()
