"""Mock retrieval APIs served from an instance's fixtures.

``GET /<db_id>/<table>?col=value&...`` returns the fixture rows whose columns
equal every given value (AND). ``/<table>`` also works when the table name is
unique across the instance. Unknown parameters give 400, unknown paths 404.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qsl, unquote, urlsplit

from fedsql.bench.mutate import BenchmarkInstance
from fedsql.errors import BenchmarkError
from fedsql.federation.http import coerce_value
from fedsql.schema.model import ApiMapping

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Endpoint:
    mapping: ApiMapping
    rows: tuple[dict, ...]


def _param_value(raw: Any, value_type: str) -> Any:
    if value_type == "boolean" and isinstance(raw, str) and raw.lower() in ("true", "false"):
        return 1 if raw.lower() == "true" else 0
    return coerce_value(raw, value_type)


def sql_equal(a: Any, b: Any) -> bool:
    """Equality as the engine applies it after affinity: NULL matches nothing, 5 equals 5.0."""
    if a is None or b is None:
        return False
    num = (int, float)
    if isinstance(a, num) and isinstance(b, num):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def filter_rows(endpoint: _Endpoint, params: list[tuple[str, Any]]) -> list[dict]:
    fields = {f.name: f for f in endpoint.mapping.output_fields}
    wanted = []
    for name, raw in params:
        f = fields[name]
        wanted.append((name, _param_value(raw, f.value_type)))
    return [r for r in endpoint.rows if all(sql_equal(r.get(n), v) for n, v in wanted)]


class _Handler(BaseHTTPRequestHandler):
    server: _Server

    def log_message(self, format: str, *args: Any) -> None:  # noqa: A002
        log.debug("%s " + format, self.address_string(), *args)

    def _send(self, status: int, payload: Any) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _answer(self, path: str, params: list[tuple[str, Any]]) -> None:
        endpoint = self.server.route(path)
        if endpoint is None:
            self._send(404, {"error": "unknown path"})
            return
        accepted = {p.name for p in endpoint.mapping.input_params}
        unknown = sorted({n for n, _ in params if n not in accepted})
        if unknown:
            self._send(400, {"error": f"unknown parameter(s): {', '.join(unknown)}"})
            return
        order = [f.name for f in endpoint.mapping.output_fields]
        rows = filter_rows(endpoint, params)
        self._send(200, [{k: r.get(k) for k in order} for r in rows])

    def do_GET(self) -> None:  # noqa: N802
        parts = urlsplit(self.path)
        self._answer(unquote(parts.path), parse_qsl(parts.query, keep_blank_values=True))

    def do_POST(self) -> None:  # noqa: N802
        parts = urlsplit(self.path)
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send(400, {"error": "body is not JSON"})
            return
        if not isinstance(body, dict):
            self._send(400, {"error": "body must be a JSON object"})
            return
        self._answer(unquote(parts.path), list(body.items()))


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], endpoints: dict[str, _Endpoint], aliases: dict[str, str]):
        super().__init__(address, _Handler)
        self.endpoints = endpoints
        self.aliases = aliases

    def route(self, path: str) -> _Endpoint | None:
        key = path.strip("/")
        key = self.aliases.get(key, key)
        return self.endpoints.get(key)


@dataclass
class ServerHandle:
    host: str
    port: int
    _server: _Server
    _thread: threading.Thread

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def base_url(self, db_id: str) -> str:
        return f"{self.url}/{db_id}"

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def wait(self) -> None:
        self._thread.join()

    def __enter__(self) -> ServerHandle:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.stop()


def endpoints_for(instance: BenchmarkInstance) -> tuple[dict[str, _Endpoint], dict[str, str]]:
    endpoints: dict[str, _Endpoint] = {}
    owners: dict[str, list[str]] = {}
    for db_id, db in instance.databases.items():
        for table, mapping in db.mappings.items():
            rows = tuple(instance.fixture_rows(db_id, table))
            endpoints[f"{db_id}/{table}"] = _Endpoint(mapping, rows)
            owners.setdefault(table, []).append(f"{db_id}/{table}")
    aliases = {t: keys[0] for t, keys in owners.items() if len(keys) == 1}
    return endpoints, aliases


def serve(instance: BenchmarkInstance, host: str = "127.0.0.1", port: int = 0) -> ServerHandle:
    """Start serving in a background thread; ``port=0`` picks a free port."""
    endpoints, aliases = endpoints_for(instance)
    try:
        server = _Server((host, port), endpoints, aliases)
    except OSError as exc:
        raise BenchmarkError(f"cannot bind {host}:{port}: {exc}") from None
    thread = threading.Thread(target=server.serve_forever, name="fedsql-mock-api", daemon=True)
    thread.start()
    return ServerHandle(host, server.server_address[1], server, thread)
