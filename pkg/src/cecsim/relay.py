"""Two-slot HTTP dead-drop linking an outside operator to the listener.

The relay holds exactly two single-value string caches: one the operator
writes commands into, one the listener publishes results to.  GET returns
{"value": ...} (null when empty), POST {"value": ...} overwrites; last
write wins and reads never consume.  The same handler backs an in-process
loopback transport and a real socket server, so tests exercise identical
logic either way.
"""

import json
import logging
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cecsim.bus import Actor, Simulator
from cecsim.transfer import payload_digest

log = logging.getLogger(__name__)

LISTENER_PATH = "/cec/listener"
WEBCLIENT_PATH = "/cec/webclient"

KNOWN_COMMANDS = ("DOS1", "SCAN", "TDOS", "CANCEL", "GETFILE")


class RelayUnreachable(Exception):
    """The relay endpoint could not be reached; the caller should retry."""


class RelayState:
    """The two named slots plus the shared request handler."""

    def __init__(self):
        self._slots: dict[str, str | None] = {LISTENER_PATH: None, WEBCLIENT_PATH: None}
        self._lock = threading.Lock()

    def handle(self, method: str, path: str, body: bytes) -> tuple[int, dict]:
        if path not in self._slots:
            return 404, {"error": "unknown path %s" % path}
        if method == "GET":
            with self._lock:
                return 200, {"value": self._slots[path]}
        if method == "POST":
            try:
                document = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                return 400, {"error": "body must be JSON"}
            if not isinstance(document, dict) or not isinstance(document.get("value"), str):
                return 400, {"error": 'body must be {"value": "<string>"}'}
            with self._lock:
                self._slots[path] = document["value"]
            return 200, {"value": document["value"]}
        return 405, {"error": "method %s not allowed" % method}


class _RelayRequestHandler(BaseHTTPRequestHandler):
    server_version = "cecsim-relay/1.0"

    def _respond(self, method: str):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload = self.server.state.handle(method, self.path, body)
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._respond("GET")

    def do_POST(self):
        self._respond("POST")

    def log_message(self, fmt, *args):
        log.debug("relay http: " + fmt, *args)


class RelayServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], state: RelayState | None = None):
        self.state = state or RelayState()
        super().__init__(address, _RelayRequestHandler)

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return "http://%s:%d" % (host, port)


class LoopbackRelayClient:
    """Talks to a RelayState directly; `down` simulates an outage."""

    def __init__(self, state: RelayState | None = None):
        self.state = state or RelayState()
        self.down = False

    def _call(self, method: str, path: str, body: bytes) -> dict:
        if self.down:
            raise RelayUnreachable("loopback relay marked down")
        status, payload = self.state.handle(method, path, body)
        if status != 200:
            raise RelayUnreachable("relay answered %d: %r" % (status, payload))
        return payload

    def get(self, path: str) -> str | None:
        return self._call("GET", path, b"")["value"]

    def post(self, path: str, value: str):
        self._call("POST", path, json.dumps({"value": value}).encode("utf-8"))


class HttpRelayClient:
    """Same interface over a real socket."""

    def __init__(self, base_url: str, timeout: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _call(self, method: str, path: str, body: bytes | None) -> dict:
        request = urllib.request.Request(
            self.base_url + path,
            data=body,
            method=method,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise RelayUnreachable(str(exc)) from None

    def get(self, path: str) -> str | None:
        return self._call("GET", path, None)["value"]

    def post(self, path: str, value: str):
        self._call("POST", path, json.dumps({"value": value}).encode("utf-8"))


class RelayPoller(Actor):
    """Listener-side loop: read the command slot every poll interval,
    run anything new, push pending results back out.

    Commands are deduplicated by the exact stored string, so re-reading
    the same envelope never re-executes it; operators re-issue with a
    fresh issued_at to run a command again.
    """

    def __init__(self, client, controller, interval_ticks: int):
        if interval_ticks < 1:
            raise ValueError("poll interval must be at least one tick")
        self.client = client
        self.controller = controller
        self.interval_ticks = interval_ticks
        self.executed: list[str] = []
        self.unknown: list[str] = []
        self._seen: set[str] = set()
        self._outbox: list[str] = []

    def on_tick(self, sim: Simulator, tick: int):
        if tick == 0 or tick % self.interval_ticks != 0:
            return
        try:
            value = self.client.get(LISTENER_PATH)
        except RelayUnreachable as exc:
            log.warning("relay poll failed: %s", exc)
            return
        if value is not None and value not in self._seen:
            self._seen.add(value)
            self._dispatch(sim, value)
        self._flush()

    def publish(self, text: str):
        self._outbox.append(text)
        self._flush()

    def _flush(self):
        while self._outbox:
            try:
                self.client.post(WEBCLIENT_PATH, self._outbox[0])
            except RelayUnreachable as exc:
                log.warning("relay publish failed, will retry: %s", exc)
                return
            self._outbox.pop(0)

    def _dispatch(self, sim: Simulator, value: str):
        try:
            envelope = json.loads(value)
            command = envelope["command"]
        except (json.JSONDecodeError, TypeError, KeyError):
            log.warning("ignoring malformed relay envelope %r", value)
            return
        if command == "DOS1":
            self.controller.broadcast.activate(sim)
        elif command == "TDOS":
            target = envelope.get("target", self.controller.targeted.target_address)
            self.controller.targeted.target_address = int(target)
            self.controller.targeted.arm()
        elif command == "SCAN":
            self.controller.start_scan(
                sim, on_complete=lambda _sim, report: self.publish(report.to_json())
            )
        elif command == "CANCEL":
            self.controller.cancel_all()
        elif command == "GETFILE":
            payload = self.controller.store.current()
            self.publish(
                json.dumps(
                    {
                        "bytes": len(payload),
                        "sha256": payload_digest(payload),
                        "data_hex": payload.hex(),
                    }
                )
            )
        else:
            log.warning("unknown relay command %r acknowledged, not executed", command)
            self.unknown.append(str(command))
            return
        self.executed.append(str(command))
        log.info("relay command %s executed", command)
