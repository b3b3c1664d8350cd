"""Derive an :class:`AbstractSchema` from a SQLite schema dump (CREATE TABLE text)."""

from __future__ import annotations

import logging
import re

from fedsql.errors import SchemaError, SchemaParseError
from fedsql.schema.model import AbstractSchema, AttributeDef, EntityDef, RelationshipDef

log = logging.getLogger(__name__)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*|/\*.*?\*/)
  | (?P<dq>"(?:[^"]|"")*")
  | (?P<bq>`(?:[^`]|``)*`)
  | (?P<br>\[[^\]]*\])
  | (?P<str>'(?:[^']|'')*')
  | (?P<num>[+-]?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|[+-]?\.\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<punct>[(),;.])
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_CONSTRAINT_WORDS = {"PRIMARY", "NOT", "NULL", "UNIQUE", "DEFAULT", "REFERENCES", "COLLATE", "CHECK", "CONSTRAINT", "GENERATED", "AS"}


def sqlite_type_to_value_type(declared: str) -> str:
    """Map a declared column type onto the four-type universe via SQLite affinity rules."""
    t = declared.upper()
    if "INT" in t:
        return "integer"
    if "BOOL" in t:
        return "boolean"
    if any(k in t for k in ("CHAR", "CLOB", "TEXT")):
        return "text"
    if not t.strip() or "BLOB" in t:
        return "text"
    return "real"


def split_statements(dump: str) -> list[str]:
    """Split SQL text on top-level semicolons, respecting quotes and comments."""
    statements: list[str] = []
    start = 0
    for m in _TOKEN.finditer(dump):
        if m.lastgroup == "punct" and m.group() == ";":
            statements.append(dump[start:m.start()])
            start = m.end()
    statements.append(dump[start:])
    return [s for s in (st.strip() for st in statements) if s and _strip_comments(s)]


def _strip_comments(text: str) -> str:
    return "".join(m.group() for m in _TOKEN.finditer(text) if m.lastgroup != "comment").strip()


def _tokens(stmt: str) -> list[tuple[str, str]]:
    out = []
    for m in _TOKEN.finditer(stmt):
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        out.append((kind, m.group()))
    return out


def _unquote(kind: str, text: str) -> str:
    if kind == "dq":
        return text[1:-1].replace('""', '"')
    if kind == "bq":
        return text[1:-1].replace("``", "`")
    if kind == "br":
        return text[1:-1]
    if kind == "str":
        return text[1:-1].replace("''", "'")
    return text


class _Cursor:
    def __init__(self, tokens: list[tuple[str, str]], stmt: str):
        self.toks = tokens
        self.i = 0
        self.stmt = stmt

    def peek(self, offset: int = 0) -> tuple[str, str] | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def word(self, offset: int = 0) -> str:
        tok = self.peek(offset)
        return tok[1].upper() if tok and tok[0] == "word" else ""

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise SchemaParseError("unexpected end of statement", self.stmt)
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.take()
        if tok[1].upper() != text:
            raise SchemaParseError(f"expected {text!r}, found {tok[1]!r}", self.stmt)

    def name(self) -> str:
        kind, text = self.take()
        if kind not in ("word", "dq", "bq", "br", "str"):
            raise SchemaParseError(f"expected identifier, found {text!r}", self.stmt)
        return _unquote(kind, text)

    def name_list(self) -> list[str]:
        self.expect("(")
        names = [self.name()]
        # ASC/DESC/COLLATE inside index lists are tolerated
        while True:
            while self.word() in ("ASC", "DESC"):
                self.take()
            if self.peek() and self.peek()[1] == ",":
                self.take()
                names.append(self.name())
                continue
            break
        self.expect(")")
        return names

    def skip_group(self) -> None:
        """Skip a parenthesised group starting at the current '('."""
        depth = 0
        while True:
            _, text = self.take()
            if text == "(":
                depth += 1
            elif text == ")":
                depth -= 1
                if depth == 0:
                    return

    def skip_expr(self) -> None:
        """Skip one DEFAULT/CHECK operand."""
        tok = self.peek()
        if tok and tok[1] == "(":
            self.skip_group()
        else:
            self.take()


def _parse_create_table(stmt: str) -> tuple[EntityDef, list[tuple[list[str], str, list[str]]]]:
    cur = _Cursor(_tokens(stmt), stmt)
    cur.expect("CREATE")
    if cur.word() in ("TEMP", "TEMPORARY"):
        cur.take()
    cur.expect("TABLE")
    if cur.word() == "IF":
        cur.take()
        cur.expect("NOT")
        cur.expect("EXISTS")
    name = cur.name()
    if cur.peek() and cur.peek()[1] == ".":
        cur.take()
        name = cur.name()
    if cur.word() == "AS":
        raise SchemaParseError("CREATE TABLE ... AS SELECT is not supported", stmt)
    cur.expect("(")

    columns: list[dict] = []
    table_pk: list[str] = []
    fks: list[tuple[list[str], str, list[str]]] = []

    while True:
        w = cur.word()
        if w == "CONSTRAINT":
            cur.take()
            cur.name()
            w = cur.word()
        if w == "PRIMARY":
            cur.take()
            cur.expect("KEY")
            table_pk = cur.name_list()
            _skip_conflict_clause(cur)
        elif w == "FOREIGN":
            cur.take()
            cur.expect("KEY")
            src = cur.name_list()
            cur.expect("REFERENCES")
            target = cur.name()
            dst = cur.name_list() if cur.peek() and cur.peek()[1] == "(" else []
            fks.append((src, target, dst))
            _skip_fk_actions(cur)
        elif w in ("UNIQUE", "CHECK"):
            cur.take()
            cur.skip_group()
            _skip_conflict_clause(cur)
        else:
            columns.append(_parse_column(cur, name, fks))
        tok = cur.take()
        if tok[1] == ",":
            continue
        if tok[1] == ")":
            break
        raise SchemaParseError(f"unexpected token {tok[1]!r} in table body", stmt)

    if not columns:
        raise SchemaParseError("table has no columns", stmt)
    pk = {c.lower() for c in table_pk}
    attrs = tuple(
        AttributeDef(
            name=c["name"],
            value_type=sqlite_type_to_value_type(c["type"]),
            is_primary_key=c["pk"] or c["name"].lower() in pk,
            nullable=not c["not_null"],
        )
        for c in columns
    )
    try:
        return EntityDef(name, attrs, "db_table"), fks
    except SchemaError as exc:
        raise SchemaParseError(str(exc), stmt) from exc


def _skip_conflict_clause(cur: _Cursor) -> None:
    if cur.word() == "ON" and cur.word(1) == "CONFLICT":
        cur.take(), cur.take(), cur.take()


def _skip_fk_actions(cur: _Cursor) -> None:
    while True:
        w = cur.word()
        if w == "ON":
            cur.take()
            cur.take()
            if cur.word() in ("SET", "NO"):
                cur.take()
            cur.take()
        elif w == "MATCH":
            cur.take(), cur.take()
        elif w == "NOT" and cur.word(1) == "DEFERRABLE" or w == "DEFERRABLE":
            while cur.word() in ("NOT", "DEFERRABLE", "INITIALLY", "DEFERRED", "IMMEDIATE"):
                cur.take()
        else:
            return


def _parse_column(cur: _Cursor, table: str, fks: list) -> dict:
    col_name = cur.name()
    type_parts: list[str] = []
    while True:
        tok = cur.peek()
        if tok is None or tok[1] in (",", ")") or cur.word() in _CONSTRAINT_WORDS:
            break
        if tok[1] == "(":
            # varchar(12), decimal(10,2)
            start = cur.i
            cur.skip_group()
            type_parts.append("".join(t[1] for t in cur.toks[start:cur.i]))
            continue
        type_parts.append(_unquote(*cur.take()))
    col = {"name": col_name, "type": " ".join(type_parts), "pk": False, "not_null": False}
    while True:
        w = cur.word()
        if w == "CONSTRAINT":
            cur.take()
            cur.name()
        elif w == "PRIMARY":
            cur.take()
            cur.expect("KEY")
            while cur.word() in ("ASC", "DESC"):
                cur.take()
            _skip_conflict_clause(cur)
            if cur.word() == "AUTOINCREMENT":
                cur.take()
            col["pk"] = True
        elif w == "NOT":
            cur.take()
            cur.expect("NULL")
            _skip_conflict_clause(cur)
            col["not_null"] = True
        elif w == "NULL":
            cur.take()
        elif w == "UNIQUE":
            cur.take()
            _skip_conflict_clause(cur)
        elif w == "DEFAULT":
            cur.take()
            cur.skip_expr()
        elif w == "CHECK":
            cur.take()
            cur.skip_group()
        elif w == "COLLATE":
            cur.take()
            cur.take()
        elif w == "REFERENCES":
            cur.take()
            target = cur.name()
            dst = cur.name_list() if cur.peek() and cur.peek()[1] == "(" else []
            fks.append(([col_name], target, dst))
            _skip_fk_actions(cur)
        else:
            tok = cur.peek()
            if tok is None or tok[1] in (",", ")"):
                return col
            raise SchemaParseError(f"unsupported column constraint {tok[1]!r} on {table}.{col_name}", cur.stmt)


def _is_create_table(stmt: str) -> bool:
    words = _strip_comments(stmt).split(None, 3)
    upper = [w.upper() for w in words[:3]]
    return len(upper) >= 2 and upper[0] == "CREATE" and (
        upper[1] == "TABLE" or (upper[1] in ("TEMP", "TEMPORARY") and len(upper) > 2 and upper[2] == "TABLE")
    )


def derive_abstract_from_db(db_schema_dump: str) -> AbstractSchema:
    """Build an abstract schema with one ``db_table`` entity per CREATE TABLE.

    Non-table statements (INSERT, CREATE INDEX, PRAGMA, ...) are ignored.
    Single-column foreign keys become relationships; composite keys, dangling
    references and type-mismatched keys are skipped with a warning.
    """
    entities: list[EntityDef] = []
    pending: list[tuple[str, list[str], str, list[str]]] = []
    for stmt in split_statements(db_schema_dump):
        if not _is_create_table(stmt):
            continue
        entity, fks = _parse_create_table(stmt)
        if any(e.name.lower() == entity.name.lower() for e in entities):
            raise SchemaParseError(f"table {entity.name!r} defined twice", stmt)
        entities.append(entity)
        pending.extend((entity.name, src, target, dst) for src, target, dst in fks)

    by_name = {e.name.lower(): e for e in entities}
    relationships: list[RelationshipDef] = []
    for source, src_cols, target, dst_cols in pending:
        target_ent = by_name.get(target.lower())
        if target_ent is None:
            log.warning("foreign key %s -> %s: unknown table, skipped", source, target)
            continue
        if not dst_cols:
            dst_cols = [a.name for a in target_ent.attributes if a.is_primary_key]
        if len(src_cols) != 1 or len(dst_cols) != 1:
            log.warning("composite foreign key %s%s -> %s%s skipped", source, src_cols, target, dst_cols)
            continue
        src_attr = by_name[source.lower()].attribute(src_cols[0])
        dst_attr = target_ent.attribute(dst_cols[0])
        if src_attr is None or dst_attr is None:
            log.warning("foreign key %s.%s -> %s.%s: unknown column, skipped", source, src_cols[0], target, dst_cols[0])
            continue
        if src_attr.value_type != dst_attr.value_type:
            log.warning("foreign key %s.%s -> %s.%s joins %s to %s, skipped", source, src_attr.name,
                        target_ent.name, dst_attr.name, src_attr.value_type, dst_attr.value_type)
            continue
        rel = RelationshipDef(by_name[source.lower()].name, src_attr.name, target_ent.name, dst_attr.name)
        if rel not in relationships:
            relationships.append(rel)
    return AbstractSchema(tuple(entities), tuple(relationships))


def schema_dump_from_sqlite(db_path: str) -> str:
    """Read the CREATE TABLE statements stored in a SQLite database file."""
    import sqlite3

    con = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    try:
        rows = con.execute(
            "SELECT sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' AND sql IS NOT NULL ORDER BY rowid"
        ).fetchall()
    finally:
        con.close()
    return ";\n".join(r[0] for r in rows) + (";\n" if rows else "")
