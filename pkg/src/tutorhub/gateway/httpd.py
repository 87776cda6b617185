"""REST + streaming edge on the standard-library HTTP server.

Route map (bearer token in the Authorization header; the live channels
accept ``?token=`` because browsers cannot set headers on WebSocket):

    POST /api/users/register        account creation (admin role needs admin)
    POST /api/users/login           -> {token}
    GET  /api/users/me              token introspection
    GET  /api/teachers/agents       own agents (administrators: all)
    POST /api/teachers/agents       create agent
    GET  /api/teachers/curriculum   ?query=&subject=&grade=  search
    GET  /api/teachers/curriculum/tree   browser drill-down
    GET  /api/teachers/analytics    ?start=&end=   snapshot
    POST /api/admin/curriculum      ingest interchange document
    GET  /api/admin/users           user list
    GET  /api/admin/logs            ?conversation_id=  transcript export
    POST /api/groups                create group (returns passkey)
    POST /api/groups/join           {passkey}
    GET  /api/groups/<id>/oversight transcripts + participation
    POST /api/gpt/sessions          open dialogue session
    GET  /api/gpt/sessions/<id>     session state
    POST /api/gpt/probe             one-shot inference
    POST /api/gpt/feedback          {conversation_id, rating}
    POST /api/files/curriculum      raw interchange upload (10 MB cap)
    POST /api/files/audio           raw audio upload (30 MB cap)
    GET  /api/files/curriculum      ?ids=a,b  export document
    POST /api/voice/profiles        consent-gated voice profile
    POST /api/voice/input           REST voice turn (audio in, frames out)
    GET  /api/live                  WebSocket upgrade: chat frames
    GET  /api/voice/input           WebSocket upgrade: voice frames
    ANY  /api/images/...            501 NOT_IMPLEMENTED (planned feature)

Outbound stream frames pass through a per-session queue bounded at
OUTBOUND_QUEUE_LIMIT; overflow sends a final Error frame and closes.
"""

from __future__ import annotations

import json
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .config import GatewayConfig, build_gateway
from .errors import ApiError, bad_request, map_exception, not_found, not_implemented
from .frames import FrameDecoder, FrameError, StreamFrame, encode_frame
from .service import ChatGateway
from .ws import OP_BINARY, OP_CLOSE, OP_TEXT, accept_key, encode_ws_frame, read_ws_message

MAX_JSON_BODY = 1 << 20
MAX_DOC_BODY = 10 << 20
MAX_AUDIO_BODY = 30 << 20
OUTBOUND_QUEUE_LIMIT = 64


class OutboundQueue:
    """Bounded per-connection frame queue; overflow poisons the stream."""

    _CLOSE = object()

    def __init__(self, limit: int = OUTBOUND_QUEUE_LIMIT):
        self._queue: queue.Queue = queue.Queue(maxsize=limit)
        self.overflowed = False

    def push(self, frame: StreamFrame) -> bool:
        if self.overflowed:
            return False
        try:
            self._queue.put_nowait(frame)
            return True
        except queue.Full:
            self.overflowed = True
            return False

    def close(self) -> None:
        try:
            self._queue.put_nowait(self._CLOSE)
        except queue.Full:
            self.overflowed = True

    def drain(self):
        """Yield frames until closed; returns on the close sentinel."""
        while True:
            item = self._queue.get()
            if item is self._CLOSE:
                return
            yield item


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, gateway: ChatGateway):
        super().__init__(address, RequestHandler)
        self.gateway = gateway


class RequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "tutorhub/0.1"

    # quiet the default stderr access log
    def log_message(self, format, *args):
        pass

    @property
    def gateway(self) -> ChatGateway:
        return self.server.gateway

    # -- plumbing ----------------------------------------------------------

    def _token(self) -> Optional[str]:
        header = self.headers.get("Authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def _require_token(self) -> str:
        token = self._token()
        if not token:
            raise ApiError("INVALID_TOKEN", 401, "missing bearer token")
        return token

    def _read_body(self, cap: int = MAX_JSON_BODY) -> bytes:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length > cap:
            raise ApiError(
                "PAYLOAD_TOO_LARGE", 413, f"body of {length} bytes exceeds {cap}"
            )
        return self.rfile.read(length) if length else b""

    def _json_body(self, cap: int = MAX_JSON_BODY) -> dict:
        raw = self._read_body(cap)
        if not raw:
            return {}
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise bad_request(f"body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise bad_request("body must be a JSON object")
        return body

    def _send_json(self, status: int, payload) -> None:
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _send_error(self, error: ApiError) -> None:
        self._send_json(error.http_status, error.to_payload())

    # -- dispatch ------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        path = url.path.rstrip("/") or "/"
        params = {k: v[0] for k, v in parse_qs(url.query).items()}
        try:
            if path.startswith("/api/images"):
                raise not_implemented("image generation")
            handler = self._route(method, path)
            if handler is None:
                raise not_found(path)
            handler(path, params)
        except ApiError as error:
            self._send_error(error)
        except Exception as exc:  # module errors map to coded responses
            self._send_error(map_exception(exc))

    def _route(self, method: str, path: str):
        gw = self.gateway
        if method == "POST":
            table = {
                "/api/users/register": lambda p, q: self._send_json(
                    201, gw.register_user(self._json_body(), self._token())
                ),
                "/api/users/login": lambda p, q: self._send_json(
                    200, gw.login(self._json_body())
                ),
                "/api/teachers/agents": lambda p, q: self._send_json(
                    201, gw.create_agent(self._require_token(), self._json_body())
                ),
                "/api/admin/curriculum": lambda p, q: self._send_json(
                    200,
                    gw.ingest_curriculum(
                        self._require_token(),
                        self._json_body(MAX_DOC_BODY).get("document", "[]"),
                    ),
                ),
                "/api/groups": lambda p, q: self._send_json(
                    201, gw.create_group(self._require_token(), self._json_body())
                ),
                "/api/groups/join": lambda p, q: self._send_json(
                    200, gw.join_group(self._require_token(), self._json_body())
                ),
                "/api/gpt/sessions": lambda p, q: self._send_json(
                    201, gw.open_session(self._require_token(), self._json_body())
                ),
                "/api/gpt/probe": lambda p, q: self._send_json(
                    200, gw.probe_agent(self._require_token(), self._json_body())
                ),
                "/api/gpt/feedback": lambda p, q: self._send_json(
                    200, gw.submit_feedback(self._require_token(), self._json_body())
                ),
                "/api/files/curriculum": lambda p, q: self._send_json(
                    200,
                    gw.ingest_curriculum(
                        self._require_token(),
                        self._read_body(MAX_DOC_BODY).decode("utf-8"),
                    ),
                ),
                "/api/files/audio": lambda p, q: self._send_json(
                    201,
                    gw.upload_audio(
                        self._require_token(), self._read_body(MAX_AUDIO_BODY)
                    ),
                ),
                "/api/voice/profiles": lambda p, q: self._send_json(
                    201, gw.create_voice_profile(self._require_token(), self._json_body())
                ),
                "/api/voice/input": lambda p, q: self._send_json(
                    200, gw.voice_input(self._require_token(), self._json_body(MAX_AUDIO_BODY))
                ),
            }
            return table.get(path)

        # GET
        if path == "/api/live" or path == "/api/voice/input":
            return self._upgrade_websocket
        if path == "/api/users/me":
            return lambda p, q: self._send_json(200, gw.whoami(self._require_token()))
        if path == "/api/teachers/agents":
            return lambda p, q: self._send_json(200, gw.list_agents(self._require_token()))
        if path == "/api/teachers/curriculum/tree":
            return lambda p, q: self._send_json(
                200, gw.curriculum_tree(self._require_token())
            )
        if path == "/api/teachers/curriculum":
            return lambda p, q: self._send_json(
                200,
                gw.curriculum_search(
                    self._require_token(),
                    q.get("query", ""),
                    subject=q.get("subject"),
                    grade=q.get("grade"),
                ),
            )
        if path == "/api/teachers/analytics":
            return lambda p, q: self._send_json(
                200,
                gw.analytics(
                    self._require_token(),
                    float(q.get("start", 0)),
                    float(q.get("end", 2**31)),
                ),
            )
        if path == "/api/admin/users":
            return lambda p, q: self._send_json(200, gw.admin_users(self._require_token()))
        if path == "/api/admin/logs":
            return lambda p, q: self._send_json(
                200,
                gw.admin_log(self._require_token(), q.get("conversation_id", "")),
            )
        if path == "/api/files/curriculum":
            return lambda p, q: self._send_json(
                200,
                {
                    "document": gw.export_curriculum(
                        self._require_token(),
                        [i for i in q.get("ids", "").split(",") if i],
                    )
                },
            )
        if path.startswith("/api/groups/") and path.endswith("/oversight"):
            group_id = path.removeprefix("/api/groups/").removesuffix("/oversight")
            return lambda p, q: self._send_json(
                200, gw.group_oversight(self._require_token(), group_id)
            )
        if path.startswith("/api/gpt/sessions/"):
            session_id = path.removeprefix("/api/gpt/sessions/")
            return lambda p, q: self._send_json(
                200, gw.session_state(self._require_token(), session_id)
            )
        return None

    # -- websocket -------------------------------------------------------------

    def _upgrade_websocket(self, path: str, params: dict) -> None:
        token = params.get("token") or self._token()
        if not token:
            raise ApiError("INVALID_TOKEN", 401, "missing token for live channel")
        self.gateway.s.identity.verify(token)  # fail before upgrading
        if self.headers.get("Upgrade", "").lower() != "websocket":
            raise bad_request("this route requires a WebSocket upgrade")
        client_key = self.headers.get("Sec-WebSocket-Key", "")
        if not client_key:
            raise bad_request("missing Sec-WebSocket-Key")
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", accept_key(client_key))
        self.end_headers()
        self.close_connection = True
        self._ws_loop(token)

    def _ws_loop(self, token: str) -> None:
        outbound = OutboundQueue()
        writer = threading.Thread(
            target=self._ws_writer, args=(outbound,), daemon=True
        )
        writer.start()
        decoder = FrameDecoder()
        try:
            while True:
                message = read_ws_message(self.rfile)
                if message is None:
                    break
                opcode, payload = message
                if opcode == OP_CLOSE:
                    break
                if opcode not in (OP_TEXT, OP_BINARY):
                    continue
                try:
                    frames = decoder.feed(payload)
                except FrameError as exc:
                    self._push_or_close(outbound, self._error_frame("?", exc))
                    break
                for frame in frames:
                    try:
                        replies = self.gateway.handle_client_frame(token, frame)
                    except Exception as exc:
                        replies = [self._error_frame(frame.session_id, exc)]
                    ok = True
                    for reply in replies:
                        ok = self._push_or_close(outbound, reply)
                        if not ok:
                            break
                    if not ok:
                        return
        except (ConnectionError, OSError):
            pass
        finally:
            outbound.close()

    def _error_frame(self, session_id: str, exc: Exception) -> StreamFrame:
        from .frames import FrameKind

        error = map_exception(exc)
        return StreamFrame(
            kind=FrameKind.ERROR,
            session_id=session_id,
            seq=0,
            payload={"code": error.code, "message": error.message},
        )

    def _push_or_close(self, outbound: OutboundQueue, frame: StreamFrame) -> bool:
        if outbound.push(frame):
            return True
        # overflow: try to squeeze a final error out, then close
        try:
            self.wfile.write(
                encode_ws_frame(
                    OP_BINARY,
                    encode_frame(self._error_frame(frame.session_id, ApiError(
                        "BACKPRESSURE_OVERFLOW",
                        503,
                        f"outbound queue exceeded {OUTBOUND_QUEUE_LIMIT} frames",
                    ))),
                )
            )
        except OSError:
            pass
        outbound.close()
        return False

    def _ws_writer(self, outbound: OutboundQueue) -> None:
        try:
            for frame in outbound.drain():
                self.wfile.write(encode_ws_frame(OP_BINARY, encode_frame(frame)))
                self.wfile.flush()
        except (ConnectionError, OSError, ValueError):
            pass  # peer closed; ValueError covers writes on the closed wfile


def serve(config: GatewayConfig) -> GatewayServer:
    """Build the gateway and return a ready (not yet running) server."""
    gateway = build_gateway(config)
    return GatewayServer((config.host, config.port), gateway)
