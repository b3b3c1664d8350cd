"""Abstract schema, API mapping schema and the unified table view."""

from fedsql.schema.ddl import derive_abstract_from_db, schema_dump_from_sqlite, sqlite_type_to_value_type
from fedsql.schema.model import (
    VALUE_TYPES,
    AbstractSchema,
    ApiField,
    ApiMapping,
    ApiParam,
    AttributeDef,
    EntityDef,
    RelationshipDef,
    TableDef,
    TableView,
    dumps,
    load_mappings,
)
from fedsql.schema.openapi import derive_api_mapping_from_openapi, emit_openapi
from fedsql.schema.view import generate_table_view, udf_name_for

__all__ = [
    "VALUE_TYPES",
    "AbstractSchema",
    "ApiField",
    "ApiMapping",
    "ApiParam",
    "AttributeDef",
    "EntityDef",
    "RelationshipDef",
    "TableDef",
    "TableView",
    "derive_abstract_from_db",
    "derive_api_mapping_from_openapi",
    "dumps",
    "emit_openapi",
    "generate_table_view",
    "load_mappings",
    "schema_dump_from_sqlite",
    "sqlite_type_to_value_type",
    "udf_name_for",
]
