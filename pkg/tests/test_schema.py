from __future__ import annotations

import json
import re

import pytest
import yaml

from fedsql.bench.corpus import bundled_script
from fedsql.errors import MappingError, MissingMappingError, OrphanMappingError, SchemaError, SchemaParseError
from fedsql.schema import (
    AbstractSchema,
    ApiField,
    ApiMapping,
    ApiParam,
    AttributeDef,
    EntityDef,
    RelationshipDef,
    TableView,
    derive_abstract_from_db,
    derive_api_mapping_from_openapi,
    dumps,
    emit_openapi,
    generate_table_view,
    schema_dump_from_sqlite,
)

MUSEUM_DDL = """
CREATE TABLE "museum" (
"Museum_ID" int,
"Name" text,
"Num_of_Staff" int,
"Open_Year" text,
PRIMARY KEY ("Museum_ID")
);
CREATE TABLE "visitor" (
"ID" int,
"Name" text,
"Level_of_membership" int,
"Age" int,
PRIMARY KEY ("ID")
);
CREATE TABLE "visit" (
"Museum_ID" int,
"visitor_ID" text,
"Num_of_Ticket" int,
"Total_spent" real,
PRIMARY KEY ("Museum_ID","visitor_ID"),
FOREIGN KEY ("Museum_ID") REFERENCES "museum"("Museum_ID"),
FOREIGN KEY ("visitor_ID") REFERENCES "visitor"("ID")
);
"""

MUSEUM_SPEC = {
    "openapi": "3.0.3",
    "info": {"title": "museum", "version": "1"},
    "servers": [{"url": "http://127.0.0.1:8000/museum_visit"}],
    "paths": {
        "/museum": {
            "get": {
                "parameters": [
                    {"name": "Museum_ID", "in": "query", "schema": {"type": "integer"}},
                    {"name": "name", "in": "query", "schema": {"type": "string"}},
                    {"name": "Num_of_Staff", "in": "query", "schema": {"type": "integer"}},
                    {"name": "Open_Year", "in": "query", "schema": {"type": "string"}},
                ],
                "responses": {"200": {"content": {"application/json": {"schema": {
                    "type": "array",
                    "items": {"type": "object", "properties": {
                        "Museum_ID": {"type": "integer"}, "Name": {"type": "string"},
                        "Num_of_Staff": {"type": "integer"}, "Open_Year": {"type": "string"}}}}}}}},
            }
        }
    },
}


def test_museum_ddl_gives_three_entities_and_fk_edges():
    schema = derive_abstract_from_db(MUSEUM_DDL)
    assert [e.name for e in schema.entities] == ["museum", "visitor", "visit"]
    assert all(e.source_kind == "db_table" for e in schema.entities)
    assert [a.name for a in schema.entity("museum").attributes] == ["Museum_ID", "Name", "Num_of_Staff", "Open_Year"]
    assert schema.entity("museum").attribute("museum_id").is_primary_key
    edges = {(r.from_entity, r.from_attr, r.to_entity, r.to_attr) for r in schema.relationships}
    assert ("visit", "Museum_ID", "museum", "Museum_ID") in edges
    # visitor_ID is text but visitor.ID is int: the edge would join unequal types, so it is dropped
    assert all(r.to_entity != "visitor" for r in schema.relationships)


def test_empty_dump():
    assert derive_abstract_from_db("") == AbstractSchema()


def test_bad_ddl_names_statement():
    with pytest.raises(SchemaParseError, match="CREATE TABLE broken"):
        derive_abstract_from_db("CREATE TABLE broken (a int, ")


@pytest.mark.parametrize("db_id", ["museum_visit", "concert_singer", "pets_1", "employee_hire_evaluation"])
def test_entity_count_matches_create_table_count(corpus, db_id):
    script = bundled_script(db_id)
    expected = len(re.findall(r"create\s+table", script, re.I))
    dump = schema_dump_from_sqlite(str(corpus.db_path(db_id)))
    assert len(derive_abstract_from_db(dump).entities) == expected


def test_value_types_are_closed():
    with pytest.raises(SchemaError):
        AttributeDef("x", "date")
    with pytest.raises(SchemaError):
        EntityDef("e", ())


def test_relationship_endpoints_must_resolve_with_equal_types():
    a = EntityDef("a", (AttributeDef("id", "integer"),))
    b = EntityDef("b", (AttributeDef("a_id", "text"),))
    with pytest.raises(SchemaError):
        AbstractSchema((a, b), (RelationshipDef("b", "a_id", "a", "id"),))
    with pytest.raises(SchemaError):
        AbstractSchema((a,), (RelationshipDef("a", "id", "zzz", "id"),))


def test_openapi_museum_spec():
    (m,) = derive_api_mapping_from_openapi(json.dumps(MUSEUM_SPEC))
    assert m.entity_name == "museum"
    assert m.method == "GET"
    assert m.url == "http://127.0.0.1:8000/museum_visit/museum"
    assert [(p.name, p.value_type) for p in m.input_params] == [
        ("Museum_ID", "integer"), ("name", "text"), ("Num_of_Staff", "integer"), ("Open_Year", "text")]
    assert len(m.output_fields) == 4
    assert m.param("NAME").name == "name"


def test_openapi_yaml_and_empty():
    assert derive_api_mapping_from_openapi(yaml.safe_dump(MUSEUM_SPEC))[0].entity_name == "museum"
    empty = {"openapi": "3.0.3", "info": {}, "servers": [{"url": "http://h"}], "paths": {}}
    assert derive_api_mapping_from_openapi(empty) == []


def test_openapi_rejects_unsupported_method_and_non_tabular_response():
    spec = json.loads(json.dumps(MUSEUM_SPEC))
    spec["paths"]["/museum"] = {"delete": spec["paths"]["/museum"]["get"]}
    with pytest.raises(MappingError, match="/museum"):
        derive_api_mapping_from_openapi(spec)
    spec = json.loads(json.dumps(MUSEUM_SPEC))
    spec["paths"]["/museum"]["get"]["responses"]["200"]["content"]["application/json"]["schema"] = {"type": "object"}
    with pytest.raises(MappingError, match="/museum"):
        derive_api_mapping_from_openapi(spec)


def _mapping(entity="museum", method="GET"):
    cols = (("Museum_ID", "integer"), ("Name", "text"), ("Num_of_Staff", "integer"), ("Open_Year", "text"))
    return ApiMapping(entity, f"http://127.0.0.1:8000/museum_visit/{entity}", method,
                      tuple(ApiParam(n, t) for n, t in cols), tuple(ApiField(n, t) for n, t in cols))


@pytest.mark.parametrize("method", ["GET", "POST"])
def test_emit_then_derive_is_identity(method):
    m = _mapping(method=method)
    assert derive_api_mapping_from_openapi(emit_openapi(m)) == [m]


def test_mutator_specs_round_trip(instances):
    for inst in instances.values():
        for db in inst.databases.values():
            for table, path in db.spec_paths.items():
                assert derive_api_mapping_from_openapi(path.read_text()) == [db.mappings[table]]


def test_museum_view_with_museum_as_api():
    schema = derive_abstract_from_db(MUSEUM_DDL).with_source_kinds(["museum"])
    view = generate_table_view(schema, [_mapping()])
    assert view.table_names == ("museum", "visitor", "visit")
    museum = view.table("museum")
    assert museum.kind == "virtual" and museum.udf_name == "api_museum"
    assert view.table("visitor").kind == "base" and view.table("visit").udf_name is None
    assert [c.name for c in museum.columns] == [f.name for f in museum.api.output_fields]
    assert {p.name for p in museum.api.input_params} == set(museum.column_names)


def test_view_identity_without_apis():
    schema = derive_abstract_from_db(MUSEUM_DDL)
    view = generate_table_view(schema)
    assert view.virtual_tables == ()
    assert [(t.name, t.columns) for t in view.tables] == [(e.name, e.attributes) for e in schema.entities]


def test_view_mapping_errors():
    schema = derive_abstract_from_db(MUSEUM_DDL)
    with pytest.raises(MissingMappingError):
        generate_table_view(schema.with_source_kinds(["museum"]))
    with pytest.raises(OrphanMappingError):
        generate_table_view(schema, [_mapping()])


def test_view_is_pure_and_serialization_canonical():
    schema = derive_abstract_from_db(MUSEUM_DDL).with_source_kinds(["museum"])
    a = dumps(generate_table_view(schema, [_mapping()]))
    b = dumps(generate_table_view(schema, [_mapping()]))
    assert a == b
    assert dumps(TableView.from_dict(json.loads(a))) == a
    assert dumps(AbstractSchema.from_dict(json.loads(dumps(schema)))) == dumps(schema)


def test_virtual_count_matches_manifest(instances):
    for inst in instances.values():
        manifest = inst.manifest()
        for db_id, db in inst.databases.items():
            assert len(db.view.virtual_tables) == manifest["databases"][db_id]["n_replaced"]
            assert {t.name for t in db.view.virtual_tables} == set(db.replaced)


def test_view_rejects_udf_collision():
    schema = AbstractSchema((
        EntityDef("museum", (AttributeDef("Museum_ID", "integer"),), "api"),
        EntityDef("api_museum", (AttributeDef("x", "integer"),)),
    ))
    m = ApiMapping("museum", "http://h/museum", "GET", (ApiParam("Museum_ID", "integer"),),
                   (ApiField("Museum_ID", "integer"),))
    with pytest.raises(SchemaError):
        generate_table_view(schema, [m])
