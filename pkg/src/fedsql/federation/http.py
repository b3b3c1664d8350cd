"""HTTP client for tabular retrieval APIs and JSON-to-column coercion."""

from __future__ import annotations

import json
import math
import re
import socket
import urllib.error
import urllib.request
from typing import Any, Iterable, Mapping
from urllib.parse import quote, urlencode, urlparse

import apsw

from fedsql.errors import CoercionError, ExecutionError
from fedsql.schema.model import ApiMapping

_INT_TEXT = re.compile(r"^[+-]?\d+$")
_REAL_TEXT = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def format_param(value: Any) -> str:
    """Query-string form of a scalar argument."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FORMATTER: apsw.Connection | None = None


def _sqlite_real_text(value: float) -> str:
    # the engine's own REAL -> TEXT conversion; its digit count varies across library versions
    global _FORMATTER
    if _FORMATTER is None:
        _FORMATTER = apsw.Connection(":memory:")
    return _FORMATTER.execute("SELECT CAST(? AS TEXT)", (value,)).fetchall()[0][0]


def _numeric_from_text(text: str) -> int | float | None:
    s = text.strip()
    if _INT_TEXT.match(s):
        return int(s)
    if _REAL_TEXT.match(s):
        return float(s)
    return None


def coerce_value(value: Any, value_type: str) -> Any:
    """Apply the storage-affinity rule of a column of ``value_type`` to one JSON scalar.

    Raises :class:`TypeError` for non-scalar values.
    """
    if value is None:
        return None
    if isinstance(value, (list, dict)):
        raise TypeError(f"non-scalar value of type {type(value).__name__}")
    if isinstance(value, bool):
        value = int(value)
    if value_type == "text":
        if isinstance(value, float):
            return _sqlite_real_text(value)
        return str(value)
    if value_type == "real":
        if isinstance(value, (int, float)):
            return float(value)
        num = _numeric_from_text(value)
        return float(num) if num is not None else value
    # integer and boolean columns: integral values are stored as integers
    if isinstance(value, str):
        num = _numeric_from_text(value)
        if num is None:
            return value
        value = num
    if isinstance(value, float) and value.is_integer() and math.isfinite(value) and abs(value) < 2**63:
        return int(value)
    return value


def coerce_rows(mapping: ApiMapping, records: Iterable[Any]) -> list[tuple]:
    """Order and coerce JSON objects into tuples following ``mapping.output_fields``.

    Missing fields become NULL and unknown fields are ignored.
    """
    out = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise CoercionError(f"row {i} from {mapping.entity_name} is not a JSON object",
                                entity=mapping.entity_name, row_index=i)
        row = []
        for f in mapping.output_fields:
            try:
                row.append(coerce_value(rec.get(f.name), f.value_type))
            except TypeError as exc:
                raise CoercionError(f"row {i} of {mapping.entity_name}, field {f.name!r}: {exc}",
                                    entity=mapping.entity_name, row_index=i) from None
        out.append(tuple(row))
    return out


def resolve_url(mapping: ApiMapping, base_url: str | None = None) -> str:
    """Mapping URL, optionally re-rooted under ``base_url`` (last path segment kept)."""
    if not base_url:
        return mapping.url
    segment = urlparse(mapping.url).path.rstrip("/").rsplit("/", 1)[-1]
    return base_url.rstrip("/") + "/" + segment


def _args_dict(args: Any) -> dict[str, Any]:
    if args is None:
        return {}
    if isinstance(args, Mapping):
        return dict(args)
    return {b.param: b.value for b in args}


def build_request(mapping: ApiMapping, args: Any = None, base_url: str | None = None) -> urllib.request.Request:
    params = _args_dict(args)
    url = resolve_url(mapping, base_url)
    headers = {"Accept": "application/json"}
    if mapping.method == "GET":
        if params:
            query = urlencode([(k, format_param(v)) for k, v in params.items()], quote_via=quote)
            url = f"{url}?{query}"
        return urllib.request.Request(url, headers=headers, method="GET")
    headers["Content-Type"] = "application/json"
    body = json.dumps(params, ensure_ascii=False).encode("utf-8")
    return urllib.request.Request(url, data=body, headers=headers, method="POST")


def fetch_json(mapping: ApiMapping, args: Any = None, timeout: float = 10.0, base_url: str | None = None) -> list:
    """One HTTP request; returns the decoded JSON array."""
    entity = mapping.entity_name
    req = build_request(mapping, args, base_url)
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise ExecutionError(f"API {entity} answered HTTP {exc.code}", entity=entity, status=exc.code) from None
    except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError) as exc:
        reason = getattr(exc, "reason", exc)
        raise ExecutionError(f"API {entity} is unreachable ({reason})", entity=entity) from None
    try:
        data = json.loads(payload)
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ExecutionError(f"API {entity} returned a body that is not JSON", entity=entity) from None
    if not isinstance(data, list):
        raise ExecutionError(f"API {entity} returned JSON that is not an array", entity=entity)
    return data
