"""Execute rewritten queries on an embedded engine with API-backed table functions.

Each virtual table's UDF is registered as an eponymous virtual-table module,
so ``api_museum('{"Name":"Plaza Museum"}')`` is valid in a FROM clause. The
single hidden argument carries the pushed-down bindings as a JSON object.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

import apsw
import apsw.ext

from fedsql.errors import ExecutionError, FedSQLError
from fedsql.federation.http import coerce_rows, fetch_json
from fedsql.schema.ddl import sqlite_type_to_value_type
from fedsql.schema.model import ApiMapping, AttributeDef, TableDef, TableView
from fedsql.sql.analysis import analyze
from fedsql.sql.ast import TableFunction
from fedsql.sql.parser import parse
from fedsql.sql.render import ident, render

log = logging.getLogger(__name__)

ARGS_COLUMN = "fedsql_args"
_DECLARED = {"integer": "INTEGER", "real": "REAL", "text": "TEXT", "boolean": "NUMERIC"}


@dataclass
class ApiCall:
    entity: str
    args: dict[str, Any]


@dataclass
class ExecContext:
    """Everything needed to run a rewritten query.

    ``base_url`` re-roots every mapping URL (useful when the mock server runs
    on an ephemeral port); ``base_urls`` does the same per entity and wins.
    """

    db_path: str | None
    registered_udfs: dict[str, ApiMapping] = field(default_factory=dict)
    http_timeout: float = 10.0
    base_url: str | None = None
    base_urls: dict[str, str] = field(default_factory=dict)
    calls: list[ApiCall] = field(default_factory=list)

    @classmethod
    def for_view(cls, view: TableView, db_path: str | None, **kwargs: Any) -> ExecContext:
        udfs = {t.udf_name: t.api for t in view.virtual_tables}
        return cls(db_path, udfs, **kwargs)

    def base_for(self, mapping: ApiMapping) -> str | None:
        return self.base_urls.get(mapping.entity_name, self.base_url)


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self) -> None:
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row arity {len(r)} does not match {len(self.columns)} columns")

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows], "row_count": self.row_count}

    def format(self) -> str:
        """Plain-text rendering for terminals."""
        cells = [list(self.columns)] + [["NULL" if v is None else str(v) for v in r] for r in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.columns))]
        lines = [" | ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        lines.append(f"({self.row_count} row{'s' if self.row_count != 1 else ''})")
        return "\n".join(lines)


@dataclass
class StepRecord:
    index: int
    description: str
    temp_table: str | None = None
    row_count: int | None = None
    status: str = "ok"
    error_kind: str | None = None


@dataclass
class StepTrace:
    """Explainer trace: what ran, where its rows went, how many. Never the rows."""

    steps: list[StepRecord] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"steps": [asdict(s) for s in self.steps]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def format(self) -> str:
        lines = []
        for s in self.steps:
            target = f" -> {s.temp_table}" if s.temp_table else ""
            count = f", {s.row_count} rows" if s.row_count is not None else ""
            err = f" ({s.error_kind})" if s.error_kind else ""
            lines.append(f"[{s.index}] {s.status}{err}: {s.description}{target}{count}")
        return "\n".join(lines)


# -- virtual table module ----------------------------------------------------


def _args_key(udf: str, args: Mapping[str, Any]) -> tuple[str, str]:
    return udf.lower(), json.dumps(dict(args), sort_keys=True)


class _ApiModule:
    def __init__(self, session: Session, udf: str, mapping: ApiMapping):
        self.session = session
        self.udf = udf
        self.mapping = mapping

    def Connect(self, connection, modulename, databasename, tablename, *args):  # noqa: N802
        cols = ", ".join(f"{ident(f.name)} {_DECLARED[f.value_type]}" for f in self.mapping.output_fields)
        schema = f"CREATE TABLE x({cols}, {ARGS_COLUMN} HIDDEN)"
        return schema, _ApiTable(self)

    Create = Connect


class _ApiTable:
    def __init__(self, module: _ApiModule):
        self.module = module
        self.args_index = len(module.mapping.output_fields)

    def BestIndex(self, constraints, orderbys):  # noqa: N802
        used: list[Any] = []
        found = False
        for col, op in constraints:
            if col == self.args_index and op == apsw.SQLITE_INDEX_CONSTRAINT_EQ and not found:
                used.append((0, True))
                found = True
            else:
                used.append(None)
        # strongly prefer plans that supply the argument
        return used, 1 if found else 0, None, False, 10.0 if found else 1e9

    def Open(self):  # noqa: N802
        return _ApiCursor(self.module)

    def Disconnect(self):  # noqa: N802
        pass

    Destroy = Disconnect


class _ApiCursor:
    def __init__(self, module: _ApiModule):
        self.module = module
        self.rows: list[tuple] = []
        self.pos = 0
        self.raw_args = "{}"

    def Filter(self, indexnum, indexname, constraintargs):  # noqa: N802
        self.raw_args = constraintargs[0] if indexnum and constraintargs else "{}"
        try:
            args = json.loads(self.raw_args) if self.raw_args else {}
        except (TypeError, json.JSONDecodeError):
            raise ExecutionError(f"{self.module.udf}: argument is not a JSON object",
                                 entity=self.module.mapping.entity_name) from None
        if not isinstance(args, dict):
            raise ExecutionError(f"{self.module.udf}: argument is not a JSON object",
                                 entity=self.module.mapping.entity_name)
        self.rows = self.module.session._rows_for(self.module.udf, self.module.mapping, args)
        self.pos = 0

    def Eof(self):  # noqa: N802
        return self.pos >= len(self.rows)

    def Rowid(self):  # noqa: N802
        return self.pos

    def Column(self, n):  # noqa: N802
        if n == -1:
            return self.pos
        if n >= len(self.rows[self.pos]):
            return self.raw_args
        return self.rows[self.pos][n]

    def Next(self):  # noqa: N802
        self.pos += 1

    def Close(self):  # noqa: N802
        pass


# -- sessions ----------------------------------------------------------------


def _as_ast(query: Any) -> Any:
    if isinstance(query, str):
        return parse(query)
    return getattr(query, "ast", query)


class Session:
    """One engine connection with registered UDFs, a temp-table namespace and a trace.

    Not thread-safe; use one session per thread.
    """

    def __init__(self, ctx: ExecContext):
        self.ctx = ctx
        self.trace = StepTrace()
        self._next_step = 1
        self._cache: dict[tuple[str, str], list[tuple]] = {}
        self._temp: list[str] = []
        if ctx.db_path:
            flags = apsw.SQLITE_OPEN_READONLY | apsw.SQLITE_OPEN_URI
            self.con = apsw.Connection(f"file:{ctx.db_path}?mode=ro", flags=flags)
        else:
            self.con = apsw.Connection(":memory:")
        for udf, mapping in ctx.registered_udfs.items():
            self.con.createmodule(udf, _ApiModule(self, udf, mapping), use_bestindex_object=False,
                                  eponymous=True, eponymous_only=True)

    def __enter__(self) -> Session:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def close(self) -> None:
        if self.con is None:
            return
        for name in self._temp:
            try:
                self.con.execute(f"DROP TABLE IF EXISTS temp.{name}")
            except apsw.Error:
                pass
        self._temp.clear()
        self.con.close()
        self.con = None

    # -- API access ----------------------------------------------------------

    def call_api(self, mapping: ApiMapping, args: Mapping[str, Any]) -> list[tuple]:
        self.ctx.calls.append(ApiCall(mapping.entity_name, dict(args)))
        records = fetch_json(mapping, args, self.ctx.http_timeout, self.ctx.base_for(mapping))
        return coerce_rows(mapping, records)

    def _rows_for(self, udf: str, mapping: ApiMapping, args: Mapping[str, Any]) -> list[tuple]:
        key = _args_key(udf, args)
        if key not in self._cache:
            unknown = [p for p in args if mapping.param(p) is None]
            if unknown:
                raise ExecutionError(f"{udf} does not accept parameter(s) {', '.join(unknown)}",
                                     entity=mapping.entity_name, status=400)
            self._cache[key] = self.call_api(mapping, args)
        return self._cache[key]

    def _prime(self, ast: Any) -> list[str]:
        """One API call per table-function occurrence, in occurrence order."""
        self._cache.clear()
        tables = []
        for occ in analyze(ast).occurrences:
            tables.append(occ.name)
            if not isinstance(occ.node, TableFunction):
                continue
            mapping = self.ctx.registered_udfs.get(occ.name) or self._udf_ci(occ.name)
            if mapping is None:
                raise ExecutionError(f"no UDF registered under {occ.name!r}")
            args = dict(occ.node.args)
            key = _args_key(occ.name, args)
            unknown = [p for p in args if mapping.param(p) is None]
            if unknown:
                raise ExecutionError(f"{occ.name} does not accept parameter(s) {', '.join(unknown)}",
                                     entity=mapping.entity_name, status=400)
            self._cache[key] = self.call_api(mapping, args)
        return tables

    def _udf_ci(self, name: str) -> ApiMapping | None:
        for udf, mapping in self.ctx.registered_udfs.items():
            if udf.lower() == name.lower():
                return mapping
        return None

    # -- execution -----------------------------------------------------------

    def _run(self, sql: str) -> ResultTable:
        try:
            columns = tuple(name for name, _ in apsw.ext.query_info(self.con, sql).description or ())
            rows = list(self.con.execute(sql))
        except FedSQLError:
            raise
        except apsw.Error as exc:
            raise ExecutionError(f"engine error: {exc}") from None
        return ResultTable(columns, rows)

    def run(self, query: Any, record: bool = False) -> ResultTable:
        """Execute a query (rewritten query, AST or SQL text) and return its rows."""
        ast = _as_ast(query)
        tables: list[str] = []
        try:
            tables = self._prime(ast)
            result = self._run(render(ast))
        except FedSQLError as exc:
            if record:
                self._record(_describe(tables, None), None, None, "error", type(exc).__name__)
            raise
        finally:
            self._cache.clear()
        if record:
            self._record(_describe(tables, len(result.columns)), None, result.row_count)
        return result

    def materialize(self, query: Any) -> tuple[str, int]:
        """Store a query's rows in the next ``tmp_step_<k>`` temp table."""
        ast = _as_ast(query)
        name = f"tmp_step_{self._next_step}"
        tables: list[str] = []
        try:
            tables = self._prime(ast)
            self.con.execute(f"CREATE TEMP TABLE {name} AS {render(ast)}")
            count = self.con.execute(f"SELECT count(*) FROM temp.{name}").fetchall()[0][0]
            ncols = len(self.con.execute(f"PRAGMA temp.table_info({name})").fetchall())
        except (FedSQLError, apsw.Error) as exc:
            self._record(_describe(tables, None), None, None, "error", type(exc).__name__)
            if isinstance(exc, FedSQLError):
                raise
            raise ExecutionError(f"engine error: {exc}") from None
        finally:
            self._cache.clear()
        self._temp.append(name)
        self._record(_describe(tables, ncols), name, count)
        return name, count

    def _record(self, description: str, temp: str | None, count: int | None,
                status: str = "ok", error_kind: str | None = None) -> None:
        self.trace.steps.append(StepRecord(self._next_step, description, temp, count, status, error_kind))
        self._next_step += 1

    @property
    def temp_tables(self) -> tuple[str, ...]:
        return tuple(self._temp)

    def temp_table_defs(self) -> list[TableDef]:
        """Schema of each temp table, so later queries can reference them."""
        out = []
        for name in self._temp:
            cols = [
                AttributeDef(row[1], sqlite_type_to_value_type(row[2] or ""))
                for row in self.con.execute(f"PRAGMA temp.table_info({name})")
            ]
            out.append(TableDef(name, tuple(cols)))
        return out

    def view_with_temps(self, view: TableView) -> TableView:
        return view.extended(self.temp_table_defs())


def _describe(tables: Iterable[str], ncols: int | None) -> str:
    names = sorted({t for t in tables})
    src = ", ".join(names) if names else "no tables"
    shape = f"{ncols} column{'s' if ncols != 1 else ''} " if ncols is not None else ""
    return f"query producing {shape}from {src}"


def execute(rq: Any, ctx: ExecContext) -> ResultTable:
    """Run one (rewritten) query in a fresh session."""
    with Session(ctx) as session:
        return session.run(rq)


def materialize_temp(rq: Any, ctx: ExecContext, session: Session) -> tuple[str, int]:
    """Materialize into ``session``; ``ctx`` must be the one the session was opened with."""
    if session.ctx is not ctx:
        raise ExecutionError("session belongs to a different execution context")
    return session.materialize(rq)


def call_api(mapping: ApiMapping, args: Any, ctx: ExecContext) -> list[tuple]:
    """One HTTP request for ``mapping`` with the given bindings, coerced to column types."""
    if args is None:
        params: dict[str, Any] = {}
    elif isinstance(args, Mapping):
        params = dict(args)
    else:
        params = {b.param: b.value for b in args}
    ctx.calls.append(ApiCall(mapping.entity_name, params))
    records = fetch_json(mapping, params, ctx.http_timeout, ctx.base_for(mapping))
    return coerce_rows(mapping, records)
