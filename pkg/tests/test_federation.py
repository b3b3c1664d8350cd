from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import apsw
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsql.bench.evaluate import context_for
from fedsql.errors import CoercionError, ExecutionError
from fedsql.federation import ExecContext, ResultTable, Session, call_api, coerce_rows, coerce_value, execute
from fedsql.federation import materialize_temp
from fedsql.rewriter import rewrite
from fedsql.schema import ApiField, ApiMapping, ApiParam
from fedsql.sql import parse

from oracles import brute_filter, multiset, sqlite_rows

DECLARED = {"integer": "INTEGER", "real": "REAL", "text": "TEXT"}


def test_select_one_without_any_api():
    result = execute(parse("SELECT 1"), ExecContext(None))
    assert result.rows == [(1,)]
    assert result.columns == ("1",)


@settings(max_examples=400, deadline=None)
@given(st.sampled_from(sorted(DECLARED)),
       st.one_of(st.none(), st.booleans(), st.integers(-2**62, 2**62),
                 st.floats(allow_nan=False, allow_infinity=False, width=64),
                 st.text(max_size=6), st.sampled_from(["12", " 7 ", "1.50", "3e2", "-0", "0x10", "1.0"])))
def test_coercion_matches_column_affinity(value_type, value):
    """Storing the value in a column of that declared type, in the engine's library, is the oracle."""
    con = apsw.Connection(":memory:")
    con.execute(f"CREATE TABLE t (v {DECLARED[value_type]})")
    con.execute("INSERT INTO t VALUES (?)", (value,))
    ((expected,),) = con.execute("SELECT v FROM t").fetchall()
    got = coerce_value(value, value_type)
    assert type(got) is type(expected) and (got == expected or got != got), (value, got, expected)


def test_coerce_rows_orders_fields_and_rejects_non_objects():
    m = ApiMapping("e", "http://h/e", "GET", (), (ApiField("a", "integer"), ApiField("b", "text")))
    assert coerce_rows(m, [{"b": 2, "a": "3", "zzz": 1}, {}]) == [(3, "2"), (None, None)]
    with pytest.raises(CoercionError) as err:
        coerce_rows(m, [{"a": 1}, [1, 2]])
    assert err.value.row_index == 1
    with pytest.raises(CoercionError):
        coerce_rows(m, [{"a": [1]}])


def _museum(museum_full):
    inst, handle = museum_full
    db = inst.databases["museum_visit"]
    return inst, db, context_for(db, handle.base_url("museum_visit"))


def test_museum_example_end_to_end(museum_full, corpus):
    _, db, ctx = _museum(museum_full)
    sql = "SELECT Num_of_Staff , Open_Year FROM museum WHERE name = 'Plaza Museum'"
    rq = rewrite(parse(sql, catalog=db.view), db.view)
    with Session(ctx) as s:
        assert s.run(rq).rows == sqlite_rows(corpus.db_path("museum_visit"), sql) == [(62, "2000")]
    assert ctx.calls[-1].entity == "museum" and ctx.calls[-1].args == {"Name": "Plaza Museum"}


def test_one_call_per_occurrence(museum_full):
    _, db, ctx = _museum(museum_full)
    sql = ("SELECT count(*) FROM museum AS a JOIN visit AS v ON a.Museum_ID = v.Museum_ID "
           "JOIN museum AS b ON b.Museum_ID = v.Museum_ID WHERE b.Open_Year = '2008'")
    rq = rewrite(parse(sql, catalog=db.view), db.view)
    ctx.calls.clear()
    with Session(ctx) as s:
        s.run(rq)
        assert [c.entity for c in ctx.calls] == ["museum", "visit", "museum"]
        s.run(rq)
    assert len(ctx.calls) == 6


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.sampled_from(["Museum_ID", "Name", "Num_of_Staff", "Open_Year"]),
                       st.sampled_from([1, 5, 16, 62, 2008, "2008", "2010", "Plaza Museum", "x", 16.0]),
                       max_size=2))
def test_call_api_matches_brute_force_filter(museum_full, args):
    inst, db, ctx = _museum(museum_full)
    mapping = db.mappings["museum"]
    fixture = inst.fixture_rows("museum_visit", "museum")
    typed = {k: coerce_value(v, mapping.param(k).value_type) for k, v in args.items()}
    expected = [tuple(r[f.name] for f in mapping.output_fields) for r in brute_filter(fixture, typed)]
    assert call_api(mapping, args, ctx) == expected


def test_post_endpoint(museum_full):
    inst, db, ctx = _museum(museum_full)
    m = db.mappings["visitor"]
    post = ApiMapping(m.entity_name, m.url, "POST", m.input_params, m.output_fields)
    assert call_api(post, {"Level_of_membership": 1}, ctx) == call_api(m, {"Level_of_membership": 1}, ctx)
    assert len(call_api(post, {"Level_of_membership": 1}, ctx)) == 2


def test_http_errors_are_typed(museum_full):
    _, db, ctx = _museum(museum_full)
    m = db.mappings["museum"]
    bad = ApiMapping(m.entity_name, m.url, "GET", m.input_params + (ApiParam("bogus", "text"),),
                     m.output_fields + (ApiField("bogus", "text"),))
    with pytest.raises(ExecutionError) as err:
        call_api(bad, {"bogus": "x"}, ctx)
    assert err.value.status == 400 and err.value.entity == "museum"
    missing = ApiMapping("nothing", "http://127.0.0.1:1/nothing", "GET", (), m.output_fields)
    with pytest.raises(ExecutionError) as err:
        call_api(missing, {}, ExecContext(None, base_url=ctx.base_url))
    assert err.value.status == 404
    with pytest.raises(ExecutionError, match="unreachable"):
        call_api(missing, {}, ExecContext(None, http_timeout=2))


class _Garbage(BaseHTTPRequestHandler):
    def log_message(self, *a):
        pass

    def do_GET(self):
        body = b"not json" if "text" in self.path else json.dumps({"rows": []}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def test_non_json_and_non_array_bodies():
    srv = HTTPServer(("127.0.0.1", 0), _Garbage)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        for seg, msg in (("text", "not JSON"), ("obj", "not an array")):
            m = ApiMapping("e", f"{base}/{seg}", "GET", (), (ApiField("a", "integer"),))
            with pytest.raises(ExecutionError, match=msg):
                call_api(m, {}, ExecContext(None))
    finally:
        srv.shutdown()
        srv.server_close()


def test_unknown_parameter_in_table_function_is_rejected_before_http(museum_full):
    _, db, ctx = _museum(museum_full)
    ctx.calls.clear()
    with Session(ctx) as s, pytest.raises(ExecutionError) as err:
        s.run("""SELECT * FROM api_museum('{"nme":"x"}')""")
    assert err.value.status == 400 and ctx.calls == []


def test_materialize_and_reuse_temp_tables(museum_full, corpus):
    _, db, ctx = _museum(museum_full)
    with Session(ctx) as s:
        q1 = rewrite(parse("SELECT Museum_ID FROM museum WHERE Open_Year = '2008'", catalog=db.view), db.view)
        name, count = materialize_temp(q1, ctx, s)
        assert (name, count) == ("tmp_step_1", 2)
        view2 = s.view_with_temps(db.view)
        q2 = parse("SELECT count(*) FROM visit WHERE Museum_ID IN (SELECT Museum_ID FROM tmp_step_1)", catalog=view2)
        assert s.run(rewrite(q2, view2), record=True).rows == [(1,)]
        assert s.temp_tables == ("tmp_step_1",)
        trace = s.trace.to_dict()["steps"]
        assert [st_["temp_table"] for st_ in trace] == ["tmp_step_1", None]
        assert [st_["row_count"] for st_ in trace] == [2, 1]
        with pytest.raises(ExecutionError):
            materialize_temp(q1, ExecContext(None), s)
    with Session(ctx) as s:
        with pytest.raises(ExecutionError):
            s.run("SELECT * FROM tmp_step_1")


def test_trace_records_failures_without_rows(museum_full):
    _, db, ctx = _museum(museum_full)
    with Session(ctx) as s:
        with pytest.raises(ExecutionError):
            s.run("SELECT nope FROM api_museum('{}')", record=True)
        (step,) = s.trace.steps
        assert step.status == "error" and step.row_count is None
        assert "Plaza" not in s.trace.to_json()


def test_result_table_checks_arity_and_formats():
    with pytest.raises(ValueError):
        ResultTable(("a",), [(1, 2)])
    text = ResultTable(("a", "b"), [(1, None)]).format()
    assert "NULL" in text and text.endswith("(1 row)")


@pytest.mark.parametrize("attr", [0, 40, 100])
def test_gold_queries_federated_equal_original(instances, servers, corpus, attr):
    inst, handle = instances[attr], servers[attr]
    for q in corpus.questions:
        db = inst.databases[q.db_id]
        rq = rewrite(parse(q.query, catalog=db.view), db.view)
        with Session(context_for(db, handle.base_url(q.db_id))) as s:
            got = s.run(rq)
        assert multiset(got.rows) == multiset(sqlite_rows(corpus.db_path(q.db_id), q.query)), q.question_id
