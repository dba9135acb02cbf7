"""Local HTTP control plane.

Loopback-bound JSON API the operator UI (and scripts) program against:

    GET  /state                 engine status snapshot
    GET  /config                active/staged configuration + rule document
    PUT  /config                stage a config patch (applies at next rotation)
    PUT  /gain/{rule_id}        body {"gain": 0.3}
    POST /mute/{rule_id}        convenience for {"mutes": [rule_id]}
    POST /unmute/{rule_id}
    PUT  /sound/{rule_id}       body {"sound": "thunder"}
    PUT  /window_period         body {"window_period_s": 2.0}
    GET  /events                one JSON object per line, one per window

Static UI assets are served from / when a build directory is configured.
Control handlers never touch the data path directly; mutations go through
the engine's staging slot.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .engine import ConfigError, LiveEngine

log = logging.getLogger(__name__)

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    server_version = "flowscape"

    @property
    def engine(self) -> LiveEngine:
        return self.server.engine  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    # -- helpers

    def _json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> Optional[dict]:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError:
            return None
        return payload if isinstance(payload, dict) else None

    def _stage(self, patch: dict) -> None:
        try:
            self._json(200, self.engine.stage_config(patch))
        except (ConfigError, ValueError) as exc:
            errors = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
            self._json(422, {"errors": errors})

    # -- routes

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/state":
            self._json(200, self.engine.get_state())
        elif path == "/config":
            self._json(200, self.engine.get_config())
        elif path == "/events":
            self._stream_events()
        else:
            self._static(path)

    def do_PUT(self):
        path = self.path.rstrip("/")
        payload = self._read_body()
        if payload is None:
            self._json(400, {"errors": ["body must be a JSON object"]})
            return
        if path == "/config":
            self._stage(payload)
        elif path == "/window_period":
            if "window_period_s" not in payload:
                self._json(422, {"errors": ["missing window_period_s"]})
                return
            self._stage({"window_period_s": payload["window_period_s"]})
        elif path.startswith("/gain/"):
            rule_id = path[len("/gain/"):]
            if "gain" not in payload:
                self._json(422, {"errors": ["missing gain"]})
                return
            self._stage({"gains": {rule_id: payload["gain"]}})
        elif path.startswith("/sound/"):
            rule_id = path[len("/sound/"):]
            if "sound" not in payload:
                self._json(422, {"errors": ["missing sound"]})
                return
            self._stage({"assignments": {rule_id: payload["sound"]}})
        else:
            self._json(404, {"errors": ["no such endpoint"]})

    def do_POST(self):
        path = self.path.rstrip("/")
        if path.startswith("/mute/"):
            self._stage({"mutes": [path[len("/mute/"):]]})
        elif path.startswith("/unmute/"):
            self._stage({"unmutes": [path[len("/unmute/"):]]})
        else:
            self._json(404, {"errors": ["no such endpoint"]})

    # -- event stream

    def _stream_events(self):
        sub = self.engine.subscribe()
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        try:
            while True:
                if sub.overflowed:
                    # subscriber fell behind the engine; cut the feed
                    self.wfile.write(b'{"close_reason":"slow_subscriber"}\n')
                    self.wfile.flush()
                    return
                try:
                    frame = sub.q.get(timeout=1.0)
                except queue.Empty:
                    self.wfile.write(b"\n")  # keepalive; also detects dead peers
                    self.wfile.flush()
                    continue
                self.wfile.write(json.dumps(frame, sort_keys=True).encode("utf-8") + b"\n")
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.engine.unsubscribe(sub)

    # -- static UI

    def _static(self, path: str):
        ui_dir = getattr(self.server, "ui_dir", None)
        if ui_dir is None:
            self._json(404, {"errors": ["no such endpoint (UI assets not installed)"]})
            return
        rel = "index.html" if path in ("", "/") else path.lstrip("/")
        target = (Path(ui_dir) / rel).resolve()
        if not str(target).startswith(str(Path(ui_dir).resolve())) or not target.is_file():
            self._json(404, {"errors": ["not found"]})
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class ControlServer:
    def __init__(self, engine: LiveEngine, listen: str = "127.0.0.1:8710",
                 ui_dir: Optional[str] = None):
        host, _, port = listen.partition(":")
        self._server = ThreadingHTTPServer((host or "127.0.0.1", int(port or 8710)), _Handler)
        self._server.engine = engine  # type: ignore[attr-defined]
        self._server.ui_dir = ui_dir  # type: ignore[attr-defined]
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple:
        return self._server.server_address

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="control", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
