"""Deterministic derivation of the unified table view."""

from __future__ import annotations

from fedsql.errors import MissingMappingError, OrphanMappingError, SchemaError
from fedsql.schema.model import AbstractSchema, ApiMapping, TableDef, TableView

UDF_PREFIX = "api_"


def udf_name_for(entity: str) -> str:
    return UDF_PREFIX + entity


def generate_table_view(schema: AbstractSchema, mappings: list[ApiMapping] | tuple[ApiMapping, ...] = ()) -> TableView:
    """Every entity becomes a table; API entities become virtual tables bound to ``api_<entity>``."""
    by_entity: dict[str, ApiMapping] = {}
    for m in mappings:
        key = m.entity_name.lower()
        if key in by_entity:
            raise SchemaError(f"entity {m.entity_name!r} has more than one mapping")
        ent = schema.entity(m.entity_name)
        if ent is None or ent.source_kind != "api":
            raise OrphanMappingError(f"mapping for {m.entity_name!r} has no api entity in the abstract schema")
        by_entity[key] = m

    tables = []
    for ent in schema.entities:
        if ent.source_kind == "db_table":
            tables.append(TableDef(ent.name, ent.attributes, "base"))
            continue
        mapping = by_entity.get(ent.name.lower())
        if mapping is None:
            raise MissingMappingError(f"api entity {ent.name!r} has no mapping")
        outputs = [(f.name.lower(), f.value_type) for f in mapping.output_fields]
        attrs = [(a.name.lower(), a.value_type) for a in ent.attributes]
        if outputs != attrs:
            raise SchemaError(f"mapping for {ent.name!r} returns {outputs}, entity declares {attrs}")
        tables.append(TableDef(ent.name, ent.attributes, "virtual", udf_name_for(ent.name), mapping))
    return TableView(tuple(tables))
