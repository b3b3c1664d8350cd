from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsql.errors import SQLSyntaxError
from fedsql.guardrails import (
    INVALID_API_SIGNATURE,
    INVALID_ENTITY,
    INVALID_SUBQUERY_COLUMN,
    check,
    damerau_levenshtein,
    hint_for,
    near_misses,
    parse_failure_hint,
)
from fedsql.rewriter import rewrite
from fedsql.schema import derive_abstract_from_db, generate_table_view
from fedsql.sql import parse

from oracles import edit_distance_bfs
from test_schema import MUSEUM_DDL, _mapping


@pytest.fixture(scope="module")
def view():
    schema = derive_abstract_from_db(MUSEUM_DDL).with_source_kinds(["museum"])
    return generate_table_view(schema, [_mapping()])


@settings(max_examples=300, deadline=None)
@given(st.text("abc", max_size=4), st.text("abc", max_size=4))
def test_distance_matches_breadth_first_oracle(a, b):
    assert damerau_levenshtein(a, b) == edit_distance_bfs(a, b, limit=5)


@given(st.text(max_size=8), st.text(max_size=8), st.text(max_size=8))
def test_distance_is_a_metric(a, b, c):
    assert damerau_levenshtein(a, b) == damerau_levenshtein(b, a)
    assert (damerau_levenshtein(a, b) == 0) == (a == b)
    assert damerau_levenshtein(a, c) <= damerau_levenshtein(a, b) + damerau_levenshtein(b, c)


def test_unrestricted_transposition():
    # optimal string alignment would say 3 here
    assert damerau_levenshtein("ca", "abc") == 2


def test_near_misses_threshold_ties_and_tokens():
    assert near_misses("nme", ["Name", "Num_of_Staff", "Open_Year"]) == ("Name",)
    assert near_misses("ab", ["ac", "aa", "zzz"]) == ("aa", "ac")
    assert near_misses("staff_num", ["Museum_ID", "Name", "Num_of_Staff"]) == ("Num_of_Staff",)
    assert near_misses("qqqqqq", ["Name"]) == ()
    assert near_misses("NAME", ["Name"]) == ()


def _violations(sql, view):
    return check(parse(sql), view)


def test_clean_query_has_no_violations(view):
    assert _violations("SELECT Num_of_Staff, Open_Year FROM museum WHERE name = 'Plaza Museum'", view) == []


def test_unknown_column_hint(view):
    (v,) = _violations("SELECT staff_num FROM museum", view)
    assert (v.rule, v.subject, v.candidates) == (INVALID_ENTITY, "staff_num", ("Num_of_Staff",))
    assert (v.location.line, v.location.column) == (1, 8)
    assert hint_for(v).text == "Column 'staff_num' does not exist on table 'museum'; did you mean 'Num_of_Staff'?"


def test_unknown_table_hint(view):
    (v,) = _violations("SELECT * FROM foo", view)
    assert v.rule == INVALID_ENTITY and v.kind == "table"
    assert hint_for(v).text == "Table 'foo' does not exist; valid tables are: museum, visitor, visit."


def test_subquery_column(view):
    (v,) = _violations("SELECT Name FROM museum WHERE Museum_ID IN (SELECT musem_id FROM visit)", view)
    assert v.rule == INVALID_SUBQUERY_COLUMN and v.candidates == ("Museum_ID",)
    (v,) = _violations("SELECT Name FROM museum UNION SELECT nam FROM visitor", view)
    assert v.rule == INVALID_ENTITY


def test_api_parameter_and_function(view):
    rq = rewrite(parse("SELECT * FROM museum WHERE Name = 'x'", catalog=view), view)
    bad = rq.sql.replace('"Name"', '"nme"')
    (v,) = _violations(bad, view)
    assert v.rule == INVALID_API_SIGNATURE and v.subject == "nme"
    assert hint_for(v).text == ("Parameter 'nme' is not accepted by api_museum (valid parameters: Museum_ID, "
                                "Name, Num_of_Staff, Open_Year); did you mean 'Name'?")
    (v,) = _violations("SELECT * FROM api_musuem('{}')", view)
    assert v.rule == INVALID_API_SIGNATURE and v.candidates == ("api_museum",)


def test_alias_and_ambiguity(view):
    (v,) = _violations("SELECT T3.Name FROM museum AS T1", view)
    assert hint_for(v).text == "Table or alias 'T3' is not defined in this query; did you mean 'T1'?"
    (v,) = _violations("SELECT Museum_ID FROM museum JOIN visit ON museum.Museum_ID = visit.Museum_ID", view)
    assert hint_for(v).text == "Column 'Museum_ID' is ambiguous; qualify it with one of: museum, visit."


def test_output_alias_and_uncatalogued_sources_are_not_flagged(view):
    assert _violations("SELECT count(*) AS n FROM museum ORDER BY n", view) == []
    assert _violations("SELECT x.anything FROM (SELECT Name AS anything FROM museum) AS x", view) == []


def test_violations_sorted_and_serializable(view):
    vs = _violations("SELECT zzz, staff_num FROM museum WHERE nme = 1", view)
    assert [v.subject for v in vs] == ["zzz", "staff_num", "nme"]
    assert all(set(v.to_dict()) >= {"rule", "subject", "candidates"} for v in vs)


def test_parse_failure_hint():
    with pytest.raises(SQLSyntaxError) as err:
        parse("SELECT FROM")
    assert "line 1" in parse_failure_hint(err.value).text


@pytest.mark.parametrize("attr", [0, 100])
def test_no_false_positives_on_gold(instances, corpus, attr):
    for q in corpus.questions:
        view = instances[attr].databases[q.db_id].view
        ast = parse(q.query, catalog=view)
        assert check(ast, view) == [], q.question_id
        assert check(rewrite(ast, view).ast, view) == [], q.question_id
