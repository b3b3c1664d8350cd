"""Schema value objects: abstract schema, API mappings and the unified table view.

All objects are frozen dataclasses. ``to_dict``/``from_dict`` give the JSON
document form; :func:`dumps` is the canonical (sorted-key) serialization used
for textual equality checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable
from urllib.parse import urlparse

from fedsql.errors import SchemaError

VALUE_TYPES = ("integer", "real", "text", "boolean")
SOURCE_KINDS = ("db_table", "api")
METHODS = ("GET", "POST")


def _check_identifier(name: str, what: str) -> None:
    if not isinstance(name, str) or not name.strip():
        raise SchemaError(f"{what} name must be a non-empty string, got {name!r}")


def _check_value_type(value_type: str, where: str) -> None:
    if value_type not in VALUE_TYPES:
        raise SchemaError(f"{where}: value type {value_type!r} not in {VALUE_TYPES}")


def _unique(names: Iterable[str], what: str) -> None:
    seen: set[str] = set()
    for name in names:
        key = name.lower()
        if key in seen:
            raise SchemaError(f"duplicate {what} {name!r}")
        seen.add(key)


@dataclass(frozen=True)
class AttributeDef:
    name: str
    value_type: str
    is_primary_key: bool = False
    nullable: bool = True

    def __post_init__(self) -> None:
        _check_identifier(self.name, "attribute")
        _check_value_type(self.value_type, f"attribute {self.name!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value_type": self.value_type,
            "is_primary_key": self.is_primary_key,
            "nullable": self.nullable,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AttributeDef:
        return cls(
            name=data["name"],
            value_type=data["value_type"],
            is_primary_key=bool(data.get("is_primary_key", False)),
            nullable=bool(data.get("nullable", True)),
        )


@dataclass(frozen=True)
class EntityDef:
    name: str
    attributes: tuple[AttributeDef, ...]
    source_kind: str = "db_table"

    def __post_init__(self) -> None:
        _check_identifier(self.name, "entity")
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not self.attributes:
            raise SchemaError(f"entity {self.name!r} has no attributes")
        if self.source_kind not in SOURCE_KINDS:
            raise SchemaError(f"entity {self.name!r}: source_kind {self.source_kind!r} not in {SOURCE_KINDS}")
        _unique((a.name for a in self.attributes), f"attribute in entity {self.name!r}")

    def attribute(self, name: str) -> AttributeDef | None:
        key = name.lower()
        for attr in self.attributes:
            if attr.name.lower() == key:
                return attr
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "attributes": [a.to_dict() for a in self.attributes],
            "source_kind": self.source_kind,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EntityDef:
        return cls(
            name=data["name"],
            attributes=tuple(AttributeDef.from_dict(a) for a in data["attributes"]),
            source_kind=data.get("source_kind", "db_table"),
        )


@dataclass(frozen=True)
class RelationshipDef:
    from_entity: str
    from_attr: str
    to_entity: str
    to_attr: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "from_entity": self.from_entity,
            "from_attr": self.from_attr,
            "to_entity": self.to_entity,
            "to_attr": self.to_attr,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RelationshipDef:
        return cls(data["from_entity"], data["from_attr"], data["to_entity"], data["to_attr"])


@dataclass(frozen=True)
class AbstractSchema:
    entities: tuple[EntityDef, ...] = ()
    relationships: tuple[RelationshipDef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relationships", tuple(self.relationships))
        _unique((e.name for e in self.entities), "entity")
        for rel in self.relationships:
            src = self.resolve(rel.from_entity, rel.from_attr)
            dst = self.resolve(rel.to_entity, rel.to_attr)
            if src.value_type != dst.value_type:
                raise SchemaError(
                    f"relationship {rel.from_entity}.{rel.from_attr} -> {rel.to_entity}.{rel.to_attr} "
                    f"joins {src.value_type} to {dst.value_type}"
                )

    def entity(self, name: str) -> EntityDef | None:
        key = name.lower()
        for ent in self.entities:
            if ent.name.lower() == key:
                return ent
        return None

    def resolve(self, entity: str, attr: str) -> AttributeDef:
        ent = self.entity(entity)
        if ent is None:
            raise SchemaError(f"relationship references unknown entity {entity!r}")
        found = ent.attribute(attr)
        if found is None:
            raise SchemaError(f"relationship references unknown attribute {entity}.{attr}")
        return found

    def with_source_kinds(self, api_entities: Iterable[str]) -> AbstractSchema:
        """Return a copy where the named entities are served by APIs."""
        wanted = {n.lower() for n in api_entities}
        ents = tuple(
            EntityDef(e.name, e.attributes, "api" if e.name.lower() in wanted else "db_table")
            for e in self.entities
        )
        return AbstractSchema(ents, self.relationships)

    def to_dict(self) -> dict[str, Any]:
        return {
            "entities": [e.to_dict() for e in self.entities],
            "relationships": [r.to_dict() for r in self.relationships],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AbstractSchema:
        return cls(
            entities=tuple(EntityDef.from_dict(e) for e in data.get("entities", [])),
            relationships=tuple(RelationshipDef.from_dict(r) for r in data.get("relationships", [])),
        )


@dataclass(frozen=True)
class ApiParam:
    name: str
    value_type: str
    required: bool = False

    def __post_init__(self) -> None:
        _check_identifier(self.name, "parameter")
        _check_value_type(self.value_type, f"parameter {self.name!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value_type": self.value_type, "required": self.required}


@dataclass(frozen=True)
class ApiField:
    name: str
    value_type: str

    def __post_init__(self) -> None:
        _check_identifier(self.name, "output field")
        _check_value_type(self.value_type, f"output field {self.name!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value_type": self.value_type}


@dataclass(frozen=True)
class ApiMapping:
    entity_name: str
    url: str
    method: str = "GET"
    input_params: tuple[ApiParam, ...] = ()
    output_fields: tuple[ApiField, ...] = ()

    def __post_init__(self) -> None:
        _check_identifier(self.entity_name, "entity")
        object.__setattr__(self, "input_params", tuple(self.input_params))
        object.__setattr__(self, "output_fields", tuple(self.output_fields))
        if self.method not in METHODS:
            raise SchemaError(f"mapping {self.entity_name!r}: method {self.method!r} not in {METHODS}")
        parsed = urlparse(self.url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise SchemaError(f"mapping {self.entity_name!r}: url {self.url!r} is not absolute")
        if not self.output_fields:
            raise SchemaError(f"mapping {self.entity_name!r} has no output fields")
        _unique((f.name for f in self.output_fields), f"output field of {self.entity_name!r}")
        _unique((p.name for p in self.input_params), f"parameter of {self.entity_name!r}")
        outputs = {f.name.lower() for f in self.output_fields}
        for param in self.input_params:
            if param.name.lower() not in outputs:
                raise SchemaError(
                    f"mapping {self.entity_name!r}: parameter {param.name!r} is not an output field"
                )

    def param(self, name: str) -> ApiParam | None:
        key = name.lower()
        for p in self.input_params:
            if p.name.lower() == key:
                return p
        return None

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.input_params)

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity_name": self.entity_name,
            "url": self.url,
            "method": self.method,
            "input_params": [p.to_dict() for p in self.input_params],
            "output_fields": [f.to_dict() for f in self.output_fields],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ApiMapping:
        return cls(
            entity_name=data["entity_name"],
            url=data["url"],
            method=data.get("method", "GET"),
            input_params=tuple(
                ApiParam(p["name"], p["value_type"], bool(p.get("required", False)))
                for p in data.get("input_params", [])
            ),
            output_fields=tuple(ApiField(f["name"], f["value_type"]) for f in data["output_fields"]),
        )


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[AttributeDef, ...]
    kind: str = "base"
    udf_name: str | None = None
    api: ApiMapping | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.kind not in ("base", "virtual"):
            raise SchemaError(f"table {self.name!r}: kind {self.kind!r} must be base or virtual")
        if (self.kind == "virtual") != (self.udf_name is not None):
            raise SchemaError(f"table {self.name!r}: virtual tables need a udf_name and base tables must not have one")
        if self.kind == "virtual" and self.api is None:
            raise SchemaError(f"virtual table {self.name!r} carries no API mapping")

    @property
    def is_virtual(self) -> bool:
        return self.kind == "virtual"

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> AttributeDef | None:
        key = name.lower()
        for col in self.columns:
            if col.name.lower() == key:
                return col
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "columns": [c.to_dict() for c in self.columns],
            "kind": self.kind,
            "udf_name": self.udf_name,
            "api": self.api.to_dict() if self.api else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TableDef:
        api = data.get("api")
        return cls(
            name=data["name"],
            columns=tuple(AttributeDef.from_dict(c) for c in data["columns"]),
            kind=data.get("kind", "base"),
            udf_name=data.get("udf_name"),
            api=ApiMapping.from_dict(api) if api else None,
        )


@dataclass(frozen=True)
class TableView:
    tables: tuple[TableDef, ...] = ()
    _index: dict[str, TableDef] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(self.tables))
        _unique((t.name for t in self.tables), "table")
        _unique((t.udf_name for t in self.tables if t.udf_name), "udf_name")
        index = {t.name.lower(): t for t in self.tables}
        for t in self.tables:
            if t.udf_name and t.udf_name.lower() in index:
                raise SchemaError(f"udf_name {t.udf_name!r} collides with a table name")
        object.__setattr__(self, "_index", index)

    def table(self, name: str) -> TableDef | None:
        return self._index.get(name.lower())

    def by_udf(self, udf_name: str) -> TableDef | None:
        key = udf_name.lower()
        for t in self.tables:
            if t.udf_name and t.udf_name.lower() == key:
                return t
        return None

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    @property
    def virtual_tables(self) -> tuple[TableDef, ...]:
        return tuple(t for t in self.tables if t.is_virtual)

    def catalog(self) -> dict[str, tuple[str, ...]]:
        """Table name -> column names, the shape the SQL analysis functions consume."""
        return {t.name: t.column_names for t in self.tables}

    def extended(self, extra: Iterable[TableDef]) -> TableView:
        return TableView(self.tables + tuple(extra))

    def to_dict(self) -> dict[str, Any]:
        return {"tables": [t.to_dict() for t in self.tables]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TableView:
        return cls(tuple(TableDef.from_dict(t) for t in data.get("tables", [])))


def dumps(obj: Any) -> str:
    """Canonical JSON text for any schema object (or list of them)."""
    if isinstance(obj, (list, tuple)):
        payload: Any = [o.to_dict() for o in obj]
    else:
        payload = obj.to_dict()
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_mappings(data: Any) -> list[ApiMapping]:
    if isinstance(data, dict):
        data = data.get("mappings", [])
    return [ApiMapping.from_dict(m) for m in data]
