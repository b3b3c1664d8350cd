"""Translate between OpenAPI 3.0 documents and :class:`ApiMapping` records.

Only the tabular subset is understood: GET operations with query parameters
(or POST with a flat JSON body) whose 200 response is an array of flat
objects. Column order is carried in the ``x-column-order`` extension because
canonical serialization sorts object keys.
"""

from __future__ import annotations

import json
from typing import Any
from urllib.parse import urlparse

from fedsql.errors import MappingError, SchemaError
from fedsql.schema.model import ApiField, ApiMapping, ApiParam

OPENAPI_TO_VALUE = {"integer": "integer", "number": "real", "string": "text", "boolean": "boolean"}
VALUE_TO_OPENAPI = {v: k for k, v in OPENAPI_TO_VALUE.items()}


def load_document(spec: str | dict) -> dict:
    if isinstance(spec, dict):
        return spec
    try:
        return json.loads(spec)
    except json.JSONDecodeError:
        import yaml

        doc = yaml.safe_load(spec)
        if not isinstance(doc, dict):
            raise MappingError("document is neither a JSON nor a YAML object")
        return doc


def _resolve(doc: dict, node: Any, path: str) -> Any:
    seen = 0
    while isinstance(node, dict) and "$ref" in node:
        ref = node["$ref"]
        if not ref.startswith("#/"):
            raise MappingError(f"external reference {ref!r} not supported", path)
        target: Any = doc
        for part in ref[2:].split("/"):
            if not isinstance(target, dict) or part not in target:
                raise MappingError(f"dangling reference {ref!r}", path)
            target = target[part]
        node = target
        seen += 1
        if seen > 32:
            raise MappingError("reference cycle", path)
    return node


def _value_type(doc: dict, schema: Any, path: str, what: str) -> str:
    schema = _resolve(doc, schema or {}, path)
    kind = schema.get("type") if isinstance(schema, dict) else None
    if kind not in OPENAPI_TO_VALUE:
        raise MappingError(f"{what} has unsupported type {kind!r}", path)
    return OPENAPI_TO_VALUE[kind]


def _response_fields(doc: dict, op: dict, path: str) -> tuple[ApiField, ...]:
    responses = op.get("responses") or {}
    resp = responses.get("200", responses.get(200))
    if resp is None:
        raise MappingError("no 200 response", path)
    resp = _resolve(doc, resp, path)
    content = (resp.get("content") or {}).get("application/json")
    if not content or "schema" not in content:
        raise MappingError("200 response has no application/json schema", path)
    schema = _resolve(doc, content["schema"], path)
    if schema.get("type") != "array":
        raise MappingError("response is not tabular (expected an array of objects)", path)
    items = _resolve(doc, schema.get("items") or {}, path)
    props = items.get("properties") if items.get("type", "object") == "object" else None
    if not props:
        raise MappingError("response items are not flat objects", path)
    order = items.get("x-column-order") or list(props)
    if sorted(order) != sorted(props):
        raise MappingError("x-column-order does not match the item properties", path)
    return tuple(ApiField(name, _value_type(doc, props[name], path, f"field {name!r}")) for name in order)


def _query_params(doc: dict, params: list, path: str) -> tuple[ApiParam, ...]:
    out = []
    for raw in params:
        p = _resolve(doc, raw, path)
        where = p.get("in")
        if where != "query":
            raise MappingError(f"parameter {p.get('name')!r} in {where!r} is not supported (query only)", path)
        out.append(ApiParam(p["name"], _value_type(doc, p.get("schema"), path, f"parameter {p['name']!r}"),
                            bool(p.get("required", False))))
    return tuple(out)


def _body_params(doc: dict, op: dict, path: str) -> tuple[ApiParam, ...]:
    body = op.get("requestBody")
    if not body:
        return ()
    body = _resolve(doc, body, path)
    content = (body.get("content") or {}).get("application/json")
    if not content:
        raise MappingError("POST body must be application/json", path)
    schema = _resolve(doc, content.get("schema") or {}, path)
    props = schema.get("properties") or {}
    required = set(schema.get("required") or [])
    order = schema.get("x-param-order") or list(props)
    return tuple(
        ApiParam(name, _value_type(doc, props[name], path, f"parameter {name!r}"), name in required)
        for name in order
    )


def derive_api_mapping_from_openapi(spec: str | dict, base_url: str | None = None) -> list[ApiMapping]:
    """One :class:`ApiMapping` per path of an OpenAPI document.

    ``base_url`` is used when the document declares no ``servers`` entry.
    """
    doc = load_document(spec)
    servers = doc.get("servers") or []
    server = servers[0]["url"] if servers else base_url
    if not server or not urlparse(server).scheme:
        raise MappingError("document declares no absolute server url and no base_url was given")

    mappings: list[ApiMapping] = []
    for path, item in (doc.get("paths") or {}).items():
        item = _resolve(doc, item, path)
        if "{" in path:
            raise MappingError("templated path segments are not supported", path)
        methods = [m for m in item if m.lower() in ("get", "post", "put", "patch", "delete", "head", "options")]
        if "get" in item:
            method, op = "GET", item["get"]
            params = _query_params(doc, list(item.get("parameters") or []) + list(op.get("parameters") or []), path)
        elif "post" in item:
            method, op = "POST", item["post"]
            params = _body_params(doc, op, path)
        else:
            raise MappingError(f"unsupported method(s) {methods}", path)
        entity = op.get("x-entity") or item.get("x-entity") or path.rstrip("/").rsplit("/", 1)[-1]
        fields = _response_fields(doc, op, path)
        try:
            mappings.append(ApiMapping(entity, server.rstrip("/") + path, method, params, fields))
        except SchemaError as exc:
            raise MappingError(str(exc), path) from exc
    return mappings


def emit_openapi(mapping: ApiMapping, title: str | None = None) -> dict:
    """OpenAPI 3.0 document describing one tabular retrieval API."""
    parsed = urlparse(mapping.url)
    server = f"{parsed.scheme}://{parsed.netloc}{parsed.path.rsplit('/', 1)[0]}"
    path = "/" + parsed.path.rsplit("/", 1)[1]
    item_schema = {
        "type": "object",
        "properties": {f.name: {"type": VALUE_TO_OPENAPI[f.value_type], "nullable": True} for f in mapping.output_fields},
        "x-column-order": [f.name for f in mapping.output_fields],
    }
    op: dict[str, Any] = {
        "operationId": f"get_{mapping.entity_name}",
        "summary": f"Retrieve {mapping.entity_name} rows; every parameter is an optional exact-match filter.",
        "x-entity": mapping.entity_name,
        "responses": {
            "200": {
                "description": f"Matching {mapping.entity_name} rows",
                "content": {"application/json": {"schema": {"type": "array", "items": item_schema}}},
            },
            "400": {"description": "Unknown query parameter"},
        },
    }
    if mapping.method == "GET":
        op["parameters"] = [
            {"name": p.name, "in": "query", "required": p.required, "schema": {"type": VALUE_TO_OPENAPI[p.value_type]}}
            for p in mapping.input_params
        ]
    else:
        op["requestBody"] = {
            "content": {
                "application/json": {
                    "schema": {
                        "type": "object",
                        "properties": {p.name: {"type": VALUE_TO_OPENAPI[p.value_type]} for p in mapping.input_params},
                        "required": [p.name for p in mapping.input_params if p.required],
                        "x-param-order": [p.name for p in mapping.input_params],
                    }
                }
            }
        }
    return {
        "openapi": "3.0.3",
        "info": {"title": title or f"{mapping.entity_name} API", "version": "1.0.0"},
        "servers": [{"url": server}],
        "paths": {path: {mapping.method.lower(): op}},
    }
