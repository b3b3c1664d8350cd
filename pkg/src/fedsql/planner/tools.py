"""The tools a ReAct model may call. Every observation carries schema text,
temp-table names and row counts only, never cell values."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from fedsql.errors import FedSQLError, ResolutionError, SQLSyntaxError
from fedsql.federation.engine import ResultTable, Session
from fedsql.guardrails import check, hint_for, near_misses, parse_failure_hint
from fedsql.rewriter import rewrite
from fedsql.schema.model import TableDef, TableView
from fedsql.sql.parser import parse

LIST_TABLES = "sql_db_list_tables"
SCHEMA = "sql_db_schema"
QUERY_CHECKER = "sql_db_query_checker"
MATERIALIZE = "sql_db_materialize"
QUERY = "sql_db_query"

_SQL_TYPES = {"integer": "INTEGER", "real": "REAL", "text": "TEXT", "boolean": "BOOLEAN"}


@dataclass
class ToolResult:
    observation: str
    ok: bool = True
    sql: str | None = None
    result: ResultTable | None = None  # kept out of every prompt


@dataclass(frozen=True)
class Tool:
    name: str
    description: str
    run: Callable[[str], ToolResult]


def clean_sql(text: str) -> str:
    """Strip markdown fences, backticks and a trailing semicolon from model output."""
    s = text.strip()
    fence = re.match(r"^```[a-zA-Z]*\s*(.*?)\s*```$", s, re.S)
    if fence:
        s = fence.group(1)
    s = s.strip("`").strip()
    while s.endswith(";"):
        s = s[:-1].rstrip()
    return s


def table_schema(table: TableDef) -> str:
    cols = ",\n".join(f"  {c.name} {_SQL_TYPES.get(c.value_type, 'TEXT')}" for c in table.columns)
    text = f"CREATE TABLE {table.name} (\n{cols}\n)"
    if table.is_virtual:
        text += "\n/* rows come from a retrieval API; equality filters on its columns are passed to the API */"
    return text


class Toolkit:
    """Binds the five tools to one table view and one engine session."""

    def __init__(self, view: TableView, session: Session, selected: Iterable[str] | None = None):
        self.view = view
        self.session = session
        self.selected = tuple(selected) if selected else view.table_names
        self.tools: dict[str, Tool] = {
            t.name: t
            for t in (
                Tool(LIST_TABLES, "Input is an empty string, output is a comma-separated list of tables "
                                  "in the database, including temporary tables created by "
                                  f"{MATERIALIZE}.", self.list_tables),
                Tool(SCHEMA, "Input is a comma-separated list of tables, output is the schema for those "
                             f"tables. Be sure the tables exist by calling {LIST_TABLES} first!", self.schema),
                Tool(QUERY_CHECKER, "Use this tool to double check if your query is correct before "
                                    f"executing it. Always use this tool before executing a query with "
                                    f"{QUERY}!", self.query_checker),
                Tool(MATERIALIZE, "Input is a SQL query computing an intermediate result. The rows are "
                                  "stored in a new temporary table whose name and row count are returned; "
                                  "query that table by name in later steps.", self.materialize),
                Tool(QUERY, "Input to this tool is a detailed and correct SQL query, output is a "
                            "confirmation with the number of rows it returns. If the query is not correct, "
                            "an error message or a repair hint will be returned. If an error is returned, "
                            "rewrite the query, check the query, and try again.", self.query),
            )
        }

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.tools)

    def descriptions(self) -> str:
        return "\n".join(f"{t.name}: {t.description}" for t in self.tools.values())

    def current_view(self) -> TableView:
        return self.session.view_with_temps(self.view)

    def run(self, action: str, action_input: str) -> ToolResult:
        return self.tools[action].run(action_input)

    # -- tools ---------------------------------------------------------------

    def list_tables(self, _: str = "") -> ToolResult:
        return ToolResult(", ".join(self.selected + self.session.temp_tables))

    def schema(self, text: str) -> ToolResult:
        view = self.current_view()
        wanted = [w.strip().strip("`'\"") for w in re.split(r"[,\n]", text) if w.strip()]
        if not wanted:
            wanted = list(self.selected + self.session.temp_tables)
        parts, errors = [], []
        for name in wanted:
            table = view.table(name)
            if table is None:
                best = near_misses(name, view.table_names)
                tip = f"; did you mean '{best[0]}'?" if best else f"; valid tables are: {', '.join(view.table_names)}."
                errors.append(f"Error: table '{name}' does not exist{tip}")
            else:
                parts.append(table_schema(table))
        return ToolResult("\n\n".join(parts + errors), ok=not errors)

    def _prepare(self, text: str) -> tuple[Any, str, ToolResult | None]:
        sql = clean_sql(text)
        view = self.current_view()
        try:
            try:
                ast = parse(sql, catalog=view)
            except ResolutionError:
                ast = parse(sql)
        except SQLSyntaxError as exc:
            return None, sql, ToolResult(parse_failure_hint(exc).text, ok=False, sql=sql)
        violations = check(ast, view)
        if violations:
            hints = "\n".join(hint_for(v).text for v in violations)
            return None, sql, ToolResult(hints, ok=False, sql=sql)
        return ast, sql, None

    def query_checker(self, text: str) -> ToolResult:
        ast, sql, failure = self._prepare(text)
        return failure or ToolResult("The query is valid.", sql=sql)

    def materialize(self, text: str) -> ToolResult:
        ast, sql, failure = self._prepare(text)
        if failure:
            return failure
        try:
            name, count = self.session.materialize(rewrite(ast, self.current_view()))
        except FedSQLError as exc:
            return ToolResult(f"Error: {exc}", ok=False, sql=sql)
        cols = ", ".join(self.current_view().table(name).column_names)
        rows = "1 row" if count == 1 else f"{count} rows"
        return ToolResult(f"Stored the result in temporary table {name} ({rows}; columns: {cols}). "
                          f"Refer to it by name in later queries.", sql=sql)

    def query(self, text: str) -> ToolResult:
        ast, sql, failure = self._prepare(text)
        if failure:
            return failure
        try:
            result = self.session.run(rewrite(ast, self.current_view()), record=True)
        except FedSQLError as exc:
            return ToolResult(f"Error: {exc}", ok=False, sql=sql)
        plural = "" if result.row_count == 1 else "s"
        return ToolResult(f"Query executed successfully and returned {result.row_count} row{plural} "
                          f"(columns: {', '.join(result.columns)}).", sql=sql, result=result)
