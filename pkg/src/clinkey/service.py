"""Local HTTP+JSON prediction service for interactive clients.

Endpoints:
    POST /api/predict  {model?, context: [words], k, frequent_limit?}
    POST /api/accept   {session?, word, saved_chars}
    GET  /api/info
    GET  /healthz

Models are immutable after startup; per-session acceptance counters
are the only mutable state and are updated under a lock.  Reserved
tokens are never returned as candidates.  Responses carry no
timestamps, so identical requests yield byte-identical bodies.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import __version__
from .corpus import BOS_TOKEN, DEID_TOKEN, OOV_TOKEN, Vocabulary, normalize_text
from .errors import ConfigurationError
from .ngram import NgramModel
from .neural import NeuralModel

MAX_K = 50


@dataclass
class SessionCounters:
    accepts: int = 0
    keys_saved: int = 0
    keys_typed: int = 0


@dataclass
class ServiceState:
    """Loaded models plus in-memory session counters."""

    models: dict[str, tuple[object, Vocabulary]] = field(default_factory=dict)
    default_model: str | None = None
    sessions: dict[str, SessionCounters] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _frequent_cache: dict = field(default_factory=dict)

    def add_model(self, name: str, predictor, vocab: Vocabulary) -> None:
        if name in self.models:
            raise ConfigurationError(f"duplicate model name {name!r}")
        self.models[name] = (predictor, vocab)
        if self.default_model is None:
            self.default_model = name

    def frequent_set(self, name: str, limit: int) -> set[str]:
        key = (name, limit)
        cached = self._frequent_cache.get(key)
        if cached is None:
            _, vocab = self.models[name]
            cached = set(vocab.frequency_order()[:limit])
            self._frequent_cache[key] = cached
        return cached

    def accept(self, session_id: str | None, word: str,
               saved_chars: int) -> tuple[str, bool, bool, SessionCounters]:
        """Record an accepted word; returns (session, created, corrected, totals)."""
        expected = max(len(word) - 1, 0)
        corrected = saved_chars != expected
        with self._lock:
            created = False
            if not session_id:
                session_id = uuid.uuid4().hex
            if session_id not in self.sessions:
                self.sessions[session_id] = SessionCounters()
                created = True
            totals = self.sessions[session_id]
            totals.accepts += 1
            totals.keys_typed += 1
            totals.keys_saved += expected
            snapshot = SessionCounters(totals.accepts, totals.keys_saved,
                                       totals.keys_typed)
        return session_id, created, corrected, snapshot


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _model_summary(name: str, predictor, vocab: Vocabulary) -> dict:
    if isinstance(predictor, NgramModel):
        return {"name": name, "type": "ngram", "n": predictor.n,
                "vocab_size": len(vocab)}
    if isinstance(predictor, NeuralModel):
        cfg = predictor.config
        return {
            "name": name,
            "type": "neural",
            "cell": cfg.cell,
            "window": cfg.window,
            "hidden_dim": cfg.hidden_dim,
            "vocab_size": len(vocab),
        }
    return {"name": name, "type": type(predictor).__name__.lower(),
            "vocab_size": len(vocab)}


def handle_info(state: ServiceState) -> dict:
    rows = [
        _model_summary(name, predictor, vocab)
        for name, (predictor, vocab) in sorted(state.models.items())
    ]
    return {"models": rows, "version": __version__}


def handle_predict(state: ServiceState, payload: dict) -> dict:
    name = payload.get("model") or state.default_model
    if name is None or name not in state.models:
        raise _ApiError(404, "unknown_model", f"no model named {name!r} is loaded")
    context = payload.get("context", [])
    if not isinstance(context, list) or not all(isinstance(w, str) for w in context):
        raise _ApiError(400, "invalid_context", "context must be a list of words")
    k = payload.get("k", 5)
    if not isinstance(k, int) or not 1 <= k <= MAX_K:
        raise _ApiError(400, "invalid_k", f"k must be an integer in [1, {MAX_K}]")
    frequent_limit = payload.get("frequent_limit")
    if frequent_limit is not None and (not isinstance(frequent_limit, int)
                                       or frequent_limit < 1):
        raise _ApiError(400, "invalid_frequent_limit",
                        "frequent_limit must be a positive integer")

    predictor, vocab = state.models[name]
    words = [w for chunk in context for w in normalize_text(chunk)]
    ids = vocab.encode(words)

    hidden = {OOV_TOKEN, BOS_TOKEN, DEID_TOKEN}
    allowed = None
    if frequent_limit is not None:
        allowed = state.frequent_set(name, frequent_limit)
    # rank the full vocabulary so filtering can never run out of candidates
    ranked = predictor.predict_next(ids, k=len(vocab))
    candidates = []
    excluded_oov = False
    for pred in ranked:
        word = vocab.id_to_token[pred.token_id]
        if word in hidden:
            if word == OOV_TOKEN and len(candidates) < k:
                excluded_oov = True
            continue
        if allowed is not None and word not in allowed:
            continue
        candidates.append({"word": word, "probability": pred.probability})
        if len(candidates) == k:
            break
    return {"candidates": candidates, "model": name, "excluded_oov": excluded_oov}


def handle_accept(state: ServiceState, payload: dict) -> dict:
    word = payload.get("word")
    if not isinstance(word, str) or not word:
        raise _ApiError(400, "invalid_word", "word must be a non-empty string")
    saved = payload.get("saved_chars", len(word) - 1)
    if not isinstance(saved, int):
        raise _ApiError(400, "invalid_saved_chars", "saved_chars must be an integer")
    session = payload.get("session")
    if session is not None and not isinstance(session, str):
        raise _ApiError(400, "invalid_session", "session must be a string")
    session_id, created, corrected, totals = state.accept(session, word, saved)
    return {
        "session": session_id,
        "created": created,
        "corrected": corrected,
        "saved_chars": max(len(word) - 1, 0),
        "totals": {
            "accepts": totals.accepts,
            "keys_saved": totals.keys_saved,
            "keys_typed": totals.keys_typed,
        },
    }


class ClinkeyRequestHandler(BaseHTTPRequestHandler):
    state: ServiceState = None  # set by build_server
    ui_dir: str | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict) -> None:
        self._send(status, json.dumps(payload).encode("utf-8") + b"\n",
                   "application/json")

    def _send_error(self, err: _ApiError) -> None:
        self._send_json(err.status,
                        {"error": {"code": err.code, "message": err.message}})

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, b"ok", "text/plain")
        elif self.path == "/api/info":
            self._send_json(200, handle_info(self.state))
        elif self.ui_dir is not None:
            self._serve_ui()
        else:
            self._send_error(_ApiError(404, "not_found", f"no route {self.path}"))

    def _serve_ui(self):
        rel = self.path.lstrip("/") or "index.html"
        rel = os.path.normpath(rel)
        if rel.startswith(".."):
            self._send_error(_ApiError(404, "not_found", "bad path"))
            return
        full = os.path.join(self.ui_dir, rel)
        if not os.path.isfile(full):
            self._send_error(_ApiError(404, "not_found", f"no route {self.path}"))
            return
        types = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".map": "application/json"}
        ext = os.path.splitext(full)[1]
        with open(full, "rb") as fh:
            self._send(200, fh.read(), types.get(ext, "application/octet-stream"))

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length", "0"))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                raise _ApiError(400, "invalid_json", "request body is not valid JSON")
            if self.path == "/api/predict":
                self._send_json(200, handle_predict(self.state, payload))
            elif self.path == "/api/accept":
                self._send_json(200, handle_accept(self.state, payload))
            else:
                raise _ApiError(404, "not_found", f"no route {self.path}")
        except _ApiError as err:
            self._send_error(err)


def build_server(state: ServiceState, host: str = "127.0.0.1", port: int = 0,
                 ui_dir: str | None = None) -> ThreadingHTTPServer:
    """Create (but do not start) the threaded HTTP server."""
    handler = type("BoundHandler", (ClinkeyRequestHandler,),
                   {"state": state, "ui_dir": ui_dir})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(state: ServiceState, host: str, port: int,
                  ui_dir: str | None = None) -> None:
    server = build_server(state, host, port, ui_dir)
    addr = server.server_address
    print(f"clinkey service listening on http://{addr[0]}:{addr[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
