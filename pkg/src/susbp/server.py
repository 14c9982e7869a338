"""HTTP surface for a live monitor session.

Endpoints:
  GET /state   -> current snapshot JSON
  GET /events  -> server-sent events; one "snapshot" event per state change,
                  throttled to at most 10/s, id = sequence number; the first
                  event on connect is the current full snapshot
  GET /healthz -> feed/error counters
  GET /        -> dashboard assets from the configured static directory

The feed (file replay, stdin tail, or TCP line listener) runs on a
background thread; malformed lines are counted and the stream continues.
"""

from __future__ import annotations

import json
import queue
import socketserver
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import DomainError
from .monitor import LiveMonitor, SessionConfig

PUBLISH_INTERVAL_S = 0.1  # snapshot push throttle (<= 10/s)
KEEPALIVE_S = 15.0

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}

_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>susbp monitor</title></head>
<body><h1>susbp monitor</h1>
<p>No dashboard assets configured. The JSON endpoints are live:</p>
<ul><li><a href="/state">/state</a></li><li><a href="/healthz">/healthz</a></li>
<li><code>/events</code> (server-sent events)</li></ul></body></html>
"""


class BindError(DomainError):
    pass


class MonitorService:
    """Owns the engine, the feed thread, the publisher, and the HTTP server."""

    def __init__(
        self,
        config: SessionConfig,
        feed: Iterable[str],
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: Optional[Path] = None,
        out_dir: Optional[Path] = None,
        speed: Optional[float] = None,
    ):
        self.engine = LiveMonitor(config)
        self.static_dir = Path(static_dir) if static_dir else None
        self.out_dir = Path(out_dir) if out_dir else None
        self._feed = feed
        self._speed = speed
        self.feed_lines = 0
        self.feed_errors = 0
        self.feed_done = False
        self._clients: list[queue.Queue] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()

        service = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):  # quiet by default
                pass

            def do_GET(self):
                service._route(self)

        try:
            self.httpd = ThreadingHTTPServer((host, port), Handler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self.httpd.daemon_threads = True
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        for target, name in (
            (self.httpd.serve_forever, "http"),
            (self._run_feed, "feed"),
            (self._run_publisher, "publisher"),
        ):
            thread = threading.Thread(target=target, name=f"susbp-{name}", daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()

    def wait_feed(self, timeout: Optional[float] = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        while not self.feed_done:
            if deadline is not None and time.monotonic() > deadline:
                return False
            time.sleep(0.01)
        return True

    # -- feed ---------------------------------------------------------------

    def _run_feed(self) -> None:
        def count_line():
            self.feed_lines += 1

        def on_error(_line, _exc):
            self.feed_errors += 1

        lines = _counted(self._feed, count_line)
        try:
            self.engine.replay(lines, speed=self._speed, on_error=on_error)
        finally:
            if self.out_dir:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                (self.out_dir / "episodes.xes").write_text(self.engine.episodes_xes())
                (self.out_dir / "episodes.csv").write_text(self.engine.episodes_csv())
            self.feed_done = True

    # -- publishing -----------------------------------------------------------

    def _run_publisher(self) -> None:
        last_seq = -1
        while not self._stop.is_set():
            seq = self.engine.seq
            if seq != last_seq:
                last_seq = seq
                snapshot = self.engine.snapshot()
                with self._clients_lock:
                    clients = list(self._clients)
                for q in clients:
                    _offer(q, snapshot)
            time.sleep(PUBLISH_INTERVAL_S)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=8)
        _offer(q, self.engine.snapshot())  # join semantics: full state first
        with self._clients_lock:
            self._clients.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._clients_lock:
            if q in self._clients:
                self._clients.remove(q)

    # -- routing -----------------------------------------------------------

    def _route(self, handler: BaseHTTPRequestHandler) -> None:
        path = handler.path.split("?", 1)[0]
        if path == "/state":
            _send_json(handler, self.engine.snapshot())
        elif path == "/healthz":
            _send_json(
                handler,
                {
                    "feed_lines": self.feed_lines,
                    "feed_errors": self.feed_errors,
                    "feed_done": self.feed_done,
                    "seq": self.engine.seq,
                    "clients": len(self._clients),
                },
            )
        elif path == "/events":
            self._serve_events(handler)
        else:
            self._serve_static(handler, path)

    def _serve_events(self, handler: BaseHTTPRequestHandler) -> None:
        handler.send_response(200)
        handler.send_header("Content-Type", "text/event-stream")
        handler.send_header("Cache-Control", "no-cache")
        handler.send_header("Connection", "close")
        handler.end_headers()
        q = self.subscribe()
        try:
            while not self._stop.is_set():
                try:
                    snapshot = q.get(timeout=KEEPALIVE_S)
                except queue.Empty:
                    handler.wfile.write(b": keepalive\n\n")
                    handler.wfile.flush()
                    continue
                payload = json.dumps(snapshot)
                frame = f"event: snapshot\nid: {snapshot['seq']}\ndata: {payload}\n\n"
                handler.wfile.write(frame.encode())
                handler.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.unsubscribe(q)

    def _serve_static(self, handler: BaseHTTPRequestHandler, path: str) -> None:
        if path == "/":
            path = "/index.html"
        if self.static_dir is not None:
            target = (self.static_dir / path.lstrip("/")).resolve()
            root = self.static_dir.resolve()
            if root in target.parents or target == root:
                if target.is_file():
                    body = target.read_bytes()
                    handler.send_response(200)
                    handler.send_header(
                        "Content-Type",
                        _CONTENT_TYPES.get(target.suffix, "application/octet-stream"),
                    )
                    handler.send_header("Content-Length", str(len(body)))
                    handler.end_headers()
                    handler.wfile.write(body)
                    return
        if path == "/index.html":
            body = _FALLBACK_PAGE.encode()
            handler.send_response(200)
            handler.send_header("Content-Type", "text/html; charset=utf-8")
            handler.send_header("Content-Length", str(len(body)))
            handler.end_headers()
            handler.wfile.write(body)
            return
        handler.send_error(404)


def _offer(q: queue.Queue, item: dict) -> None:
    """Non-blocking put; a slow client loses the oldest snapshot (it can
    detect the gap from the sequence numbers)."""
    while True:
        try:
            q.put_nowait(item)
            return
        except queue.Full:
            try:
                q.get_nowait()
            except queue.Empty:
                pass


def _counted(lines: Iterable[str], count) -> Iterator[str]:
    for line in lines:
        if line.strip():
            count()
        yield line


def _send_json(handler: BaseHTTPRequestHandler, obj: dict) -> None:
    body = json.dumps(obj).encode()
    handler.send_response(200)
    handler.send_header("Content-Type", "application/json")
    handler.send_header("Content-Length", str(len(body)))
    handler.end_headers()
    handler.wfile.write(body)


# -- feed sources -----------------------------------------------------------


def file_feed(path) -> Iterator[str]:
    with open(path, encoding="utf-8") as handle:
        yield from handle


def stdin_feed() -> Iterator[str]:
    yield from sys.stdin


def tcp_feed(port: int, host: str = "127.0.0.1", ready: Optional[threading.Event] = None) -> Iterator[str]:
    """Bind a line-protocol listener immediately and return an iterator over
    the lines of all accepted connections."""
    feed_queue: queue.Queue = queue.Queue()

    class LineHandler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                feed_queue.put(raw.decode("utf-8", errors="replace"))

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True

    try:
        server = Server((host, port), LineHandler)
    except OSError as exc:
        raise BindError(f"cannot bind tcp feed {host}:{port}: {exc}") from exc
    threading.Thread(target=server.serve_forever, daemon=True).start()
    if ready is not None:
        ready.set()

    def lines() -> Iterator[str]:
        while True:
            yield feed_queue.get()

    return lines()


def serve(
    config: SessionConfig,
    feed: Iterable[str],
    host: str = "127.0.0.1",
    port: int = 8787,
    static_dir: Optional[Path] = None,
    out_dir: Optional[Path] = None,
    speed: Optional[float] = None,
) -> MonitorService:
    """Build and start a monitor service; returns the running service."""
    service = MonitorService(
        config,
        feed,
        host=host,
        port=port,
        static_dir=static_dir,
        out_dir=out_dir,
        speed=speed,
    )
    service.start()
    return service
