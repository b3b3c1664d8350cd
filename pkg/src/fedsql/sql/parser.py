"""Recursive-descent parser for the SQL subset used by text-to-SQL gold queries."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

from fedsql.errors import SQLSyntaxError, UnsupportedConstructError
from fedsql.sql.ast import (
    AGGREGATES,
    Between,
    Binary,
    Column,
    Expr,
    FuncCall,
    InList,
    InSubquery,
    IsNull,
    Join,
    Like,
    Literal,
    OrderItem,
    Query,
    Select,
    SelectItem,
    SetOperation,
    Source,
    Span,
    Star,
    Subquery,
    SubquerySource,
    TableFunction,
    TableRef,
    Unary,
)

RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "OFFSET", "UNION",
    "INTERSECT", "EXCEPT", "ALL", "DISTINCT", "AS", "ON", "JOIN", "INNER", "LEFT", "RIGHT", "FULL",
    "OUTER", "CROSS", "NATURAL", "USING", "AND", "OR", "NOT", "IN", "IS", "NULL", "LIKE", "BETWEEN",
    "EXISTS", "CASE", "WHEN", "THEN", "ELSE", "END", "ASC", "DESC", "GLOB", "ESCAPE", "CAST", "WITH",
    "COLLATE", "REGEXP", "MATCH", "OVER", "FILTER", "WINDOW", "VALUES",
}

_STATEMENT_WORDS = {"INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ALTER", "REPLACE", "PRAGMA", "ATTACH", "DETACH",
                    "VACUUM", "BEGIN", "COMMIT", "ROLLBACK", "EXPLAIN"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*|/\*.*?\*/)
  | (?P<string>'(?:[^']|'')*')
  | (?P<dq>"(?:[^"]|"")*")
  | (?P<qident>`(?:[^`]|``)*`|\[[^\]]*\])
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<op>:=|==|!=|<>|<=|>=|\|\||[=<>+\-*/%(),.;])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, qident, dq, string, number, op, eof
    text: str
    value: Any
    span: Span

    @property
    def upper(self) -> str:
        return self.text.upper() if self.kind == "ident" else ""


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(sql):
        m = _TOKEN.match(sql, pos)
        if m is None:
            raise SQLSyntaxError(f"unexpected character {sql[pos]!r}", pos, line, pos - line_start + 1)
        kind, text = m.lastgroup, m.group()
        span = Span(pos, m.end(), line, pos - line_start + 1)
        if kind not in ("ws", "comment"):
            if kind == "string":
                value: Any = text[1:-1].replace("''", "'")
            elif kind == "dq":
                value = text[1:-1].replace('""', '"')
            elif kind == "qident":
                value = text[1:-1].replace("``", "`") if text[0] == "`" else text[1:-1]
            elif kind == "number":
                value = float(text) if any(c in text for c in ".eE") else int(text)
            else:
                value = text
            tokens.append(Token(kind, text, value, span))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", None, Span(len(sql), len(sql), line, len(sql) - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, sql: str):
        self.sql = sql
        self.toks = tokenize(sql)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at_kw(self, *words: str) -> bool:
        return self.tok.upper in words

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def accept_kw(self, word: str) -> bool:
        if self.tok.upper == word:
            self.advance()
            return True
        return False

    def accept_op(self, op: str) -> bool:
        if self.at_op(op):
            self.advance()
            return True
        return False

    def error(self, message: str, tok: Token | None = None) -> SQLSyntaxError:
        tok = tok or self.tok
        return SQLSyntaxError(message, tok.span.start, tok.span.line, tok.span.column)

    def unsupported(self, construct: str, tok: Token | None = None) -> UnsupportedConstructError:
        tok = tok or self.tok
        return UnsupportedConstructError(construct, tok.span.start, tok.span.line, tok.span.column)

    def expect_kw(self, word: str) -> Token:
        if self.tok.upper != word:
            raise self.error(f"expected {word}, found {self._describe()}")
        return self.advance()

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.error(f"expected {op!r}, found {self._describe()}")
        return self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "eof" else repr(self.tok.text)

    def _span_from(self, start: Token) -> Span:
        end = self.toks[self.i - 1].span.end if self.i > 0 else start.span.end
        return Span(start.span.start, end, start.span.line, start.span.column)

    def is_name_token(self, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        if tok.kind in ("qident", "dq"):
            return True
        return tok.kind == "ident" and tok.upper not in RESERVED

    def name(self, what: str = "identifier") -> str:
        if not self.is_name_token():
            raise self.error(f"expected {what}, found {self._describe()}")
        return self.advance().value

    # -- statements ----------------------------------------------------------

    def statement(self) -> Query:
        first = self.tok
        if first.upper == "WITH":
            raise self.unsupported("WITH clause")
        if first.upper in _STATEMENT_WORDS:
            raise self.unsupported(f"{first.upper} statement")
        if first.upper != "SELECT":
            raise self.error(f"expected SELECT, found {self._describe()}")
        query = self.query()
        self.accept_op(";")
        if self.tok.kind != "eof":
            if self.at_kw("UNION", "INTERSECT", "EXCEPT"):
                raise self.error("set operation after ORDER BY/LIMIT")
            raise self.error(f"unexpected {self._describe()} after end of query")
        return query

    def query(self) -> Query:
        start = self.tok
        left: Query = self.select_core()
        while self.at_kw("UNION", "INTERSECT", "EXCEPT"):
            op = self.advance().upper
            if op == "UNION" and self.accept_kw("ALL"):
                op = "UNION ALL"
            if self.at_op("("):
                raise self.unsupported("parenthesised set-operation operand")
            right = self.select_core()
            left = SetOperation(op, left, right, span=self._span_from(start))
        order_by, limit, offset = self.order_limit()
        if order_by or limit is not None:
            left = replace(left, order_by=order_by, limit=limit, offset=offset)
        return left

    def select_core(self) -> Select:
        start = self.expect_kw("SELECT")
        distinct = False
        if self.accept_kw("DISTINCT"):
            distinct = True
        else:
            self.accept_kw("ALL")
        items = [self.select_item()]
        while self.accept_op(","):
            items.append(self.select_item())
        from_ = self.from_clause() if self.accept_kw("FROM") else None
        where = self.expr() if self.accept_kw("WHERE") else None
        group_by: list[Expr] = []
        having = None
        if self.accept_kw("GROUP"):
            self.expect_kw("BY")
            group_by.append(self.expr())
            while self.accept_op(","):
                group_by.append(self.expr())
        if self.accept_kw("HAVING"):
            having = self.expr()
        if self.at_kw("WINDOW"):
            raise self.unsupported("WINDOW clause")
        return Select(tuple(items), from_, where, tuple(group_by), having, distinct=distinct,
                      span=self._span_from(start))

    def select_item(self) -> SelectItem:
        if self.at_op("*"):
            tok = self.advance()
            return SelectItem(Star(None, tok.span))
        if self.is_name_token() and self.peek().kind == "op" and self.peek().text == "." \
                and self.peek(2).kind == "op" and self.peek(2).text == "*":
            tok = self.advance()
            self.advance()
            self.advance()
            return SelectItem(Star(tok.value, self._span_from(tok)))
        expr = self.expr()
        alias = None
        if self.accept_kw("AS"):
            alias = self.name("column alias")
        elif self.is_name_token() and self.tok.kind != "dq":
            alias = self.advance().value
        elif self.tok.kind == "string":
            alias = self.advance().value
        return SelectItem(expr, alias)

    def order_limit(self) -> tuple[tuple[OrderItem, ...], Expr | None, Expr | None]:
        order: list[OrderItem] = []
        limit = offset = None
        if self.accept_kw("ORDER"):
            self.expect_kw("BY")
            while True:
                expr = self.expr()
                if self.at_kw("COLLATE"):
                    raise self.unsupported("COLLATE")
                direction = self.advance().upper if self.at_kw("ASC", "DESC") else None
                if self.at_kw("NULLS"):
                    raise self.unsupported("NULLS FIRST/LAST")
                order.append(OrderItem(expr, direction))
                if not self.accept_op(","):
                    break
        if self.accept_kw("LIMIT"):
            limit = self.expr()
            if self.accept_kw("OFFSET"):
                offset = self.expr()
            elif self.accept_op(","):
                # LIMIT skip, count
                offset, limit = limit, self.expr()
        return tuple(order), limit, offset

    # -- FROM ----------------------------------------------------------------

    def from_clause(self) -> Source:
        left = self.source()
        while True:
            start = self.tok
            if self.accept_op(","):
                left = Join(left, self.source(), ",", None, self._span_from(start))
                continue
            if self.at_kw("NATURAL", "RIGHT", "FULL"):
                raise self.unsupported(f"{self.tok.upper} JOIN")
            kind = None
            if self.accept_kw("JOIN"):
                kind = "JOIN"
            elif self.accept_kw("INNER"):
                self.expect_kw("JOIN")
                kind = "INNER JOIN"
            elif self.accept_kw("LEFT"):
                self.accept_kw("OUTER")
                self.expect_kw("JOIN")
                kind = "LEFT JOIN"
            elif self.accept_kw("CROSS"):
                self.expect_kw("JOIN")
                kind = "CROSS JOIN"
            if kind is None:
                return left
            right = self.source()
            on = None
            if self.accept_kw("ON"):
                on = self.expr()
            elif self.at_kw("USING"):
                raise self.unsupported("JOIN ... USING")
            left = Join(left, right, kind, on, self._span_from(start))

    def source(self) -> Source:
        start = self.tok
        if self.accept_op("("):
            if not self.at_kw("SELECT"):
                raise self.unsupported("parenthesised join")
            query = self.query()
            self.expect_op(")")
            return SubquerySource(query, self.alias(), self._span_from(start))
        name = self.name("table name")
        if self.at_op("."):
            raise self.unsupported("schema-qualified table name")
        if self.at_op("("):
            args, arg_spans = self.function_args()
            return TableFunction(name, args, self.alias(), self._span_from(start), arg_spans)
        return TableRef(name, self.alias(), self._span_from(start))

    def alias(self) -> str | None:
        if self.accept_kw("AS"):
            return self.name("alias")
        if self.is_name_token():
            return self.advance().value
        return None

    def function_args(self) -> tuple[tuple[tuple[str, Any], ...], tuple[Span, ...]]:
        open_tok = self.expect_op("(")
        if self.accept_op(")"):
            return (), ()
        if self.tok.kind == "string" and self.peek().kind == "op" and self.peek().text == ")":
            tok = self.advance()
            self.advance()
            try:
                decoded = json.loads(tok.value)
            except json.JSONDecodeError as exc:
                raise self.error(f"table function argument is not a JSON object: {exc.msg}", tok) from None
            if not isinstance(decoded, dict):
                raise self.error("table function argument must be a JSON object", tok)
            return tuple(decoded.items()), tuple(tok.span for _ in decoded)
        args: list[tuple[str, Any]] = []
        spans: list[Span] = []
        while True:
            name_tok = self.tok
            param = self.name("parameter name")
            self.expect_op(":=")
            value = self.literal_value()
            if any(p.lower() == param.lower() for p, _ in args):
                raise self.error(f"parameter {param!r} bound twice", name_tok)
            args.append((param, value))
            spans.append(name_tok.span)
            if not self.accept_op(","):
                break
        self.expect_op(")")
        del open_tok
        return tuple(args), tuple(spans)

    def literal_value(self) -> Any:
        negative = self.accept_op("-")
        tok = self.advance()
        if tok.kind == "number":
            return -tok.value if negative else tok.value
        if negative:
            raise self.error("expected a number after '-'", tok)
        if tok.kind in ("string", "dq"):
            return tok.value
        if tok.upper in ("TRUE", "FALSE"):
            return tok.upper == "TRUE"
        raise self.error(f"expected a literal, found {tok.text!r}", tok)

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        start = self.tok
        left = self.and_expr()
        while self.accept_kw("OR"):
            left = Binary("OR", left, self.and_expr(), self._span_from(start))
        return left

    def and_expr(self) -> Expr:
        start = self.tok
        left = self.not_expr()
        while self.accept_kw("AND"):
            left = Binary("AND", left, self.not_expr(), self._span_from(start))
        return left

    def not_expr(self) -> Expr:
        start = self.tok
        if self.accept_kw("NOT"):
            if self.at_kw("EXISTS"):
                raise self.unsupported("EXISTS")
            return Unary("NOT", self.not_expr(), self._span_from(start))
        return self.comparison()

    def comparison(self) -> Expr:
        start = self.tok
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in ("=", "==", "!=", "<>", "<", "<=", ">", ">="):
            op = self.advance().text
            op = {"==": "=", "<>": "!="}.get(op, op)
            right = self.additive()
            node: Expr = Binary(op, left, right, self._span_from(start))
            if self.tok.kind == "op" and self.tok.text in ("=", "==", "!=", "<>", "<", "<=", ">", ">="):
                raise self.unsupported("chained comparison")
            return node
        negated = False
        if self.at_kw("NOT") and self.peek().upper in ("LIKE", "IN", "BETWEEN"):
            self.advance()
            negated = True
        if self.accept_kw("LIKE"):
            pattern = self.additive()
            if self.at_kw("ESCAPE"):
                raise self.unsupported("LIKE ... ESCAPE")
            return Like(left, pattern, negated, self._span_from(start))
        if self.accept_kw("IN"):
            self.expect_op("(")
            if self.at_kw("SELECT"):
                query = self.query()
                self.expect_op(")")
                return InSubquery(left, query, negated, self._span_from(start))
            items = [self.expr()]
            while self.accept_op(","):
                items.append(self.expr())
            self.expect_op(")")
            return InList(left, tuple(items), negated, self._span_from(start))
        if self.accept_kw("BETWEEN"):
            low = self.additive()
            self.expect_kw("AND")
            high = self.additive()
            return Between(left, low, high, negated, self._span_from(start))
        if negated:
            raise self.error("expected LIKE, IN or BETWEEN after NOT")
        if self.accept_kw("IS"):
            neg = self.accept_kw("NOT")
            if not self.accept_kw("NULL"):
                raise self.unsupported("IS <expression> (only IS [NOT] NULL)")
            return IsNull(left, neg, self._span_from(start))
        if self.at_kw("GLOB", "REGEXP", "MATCH"):
            raise self.unsupported(self.tok.upper)
        return left

    def additive(self) -> Expr:
        start = self.tok
        left = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.advance().text
            left = Binary(op, left, self.multiplicative(), self._span_from(start))
        return left

    def multiplicative(self) -> Expr:
        start = self.tok
        left = self.concat()
        while self.at_op("*", "/", "%"):
            op = self.advance().text
            left = Binary(op, left, self.concat(), self._span_from(start))
        return left

    def concat(self) -> Expr:
        start = self.tok
        left = self.unary()
        while self.at_op("||"):
            self.advance()
            left = Binary("||", left, self.unary(), self._span_from(start))
        return left

    def unary(self) -> Expr:
        start = self.tok
        if self.at_op("-", "+"):
            op = self.advance().text
            return Unary(op, self.unary(), self._span_from(start))
        return self.primary()

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Literal(tok.value, tok.text, tok.span)
        if tok.kind == "string":
            self.advance()
            return Literal(tok.value, tok.text, tok.span)
        if tok.kind == "dq":
            self.advance()
            if self.at_op("."):
                self.advance()
                col = self.name("column name")
                return Column(col, tok.value, self._span_from(tok))
            # resolved against the catalog later; SQLite treats unmatched ones as strings
            return Literal(tok.value, tok.text, tok.span)
        if tok.upper == "NULL":
            self.advance()
            return Literal(None, "NULL", tok.span)
        if tok.upper in ("CASE", "CAST", "EXISTS"):
            raise self.unsupported(tok.upper)
        if self.at_op("("):
            self.advance()
            if self.at_kw("SELECT"):
                query = self.query()
                self.expect_op(")")
                return Subquery(query, self._span_from(tok))
            inner = self.expr()
            if self.at_op(","):
                raise self.unsupported("row value")
            self.expect_op(")")
            return inner
        if self.is_name_token():
            self.advance()
            if self.at_op("(") and tok.kind == "ident":
                return self.function(tok)
            if self.accept_op("."):
                if self.at_op("*"):
                    raise self.error("'*' is only allowed in the select list")
                col = self.name("column name")
                if self.at_op("."):
                    raise self.unsupported("schema-qualified column")
                return Column(col, tok.value, self._span_from(tok))
            return Column(tok.value, None, tok.span)
        raise self.error(f"unexpected {self._describe()}")

    def function(self, name_tok: Token) -> Expr:
        name = name_tok.text.lower()
        if name not in AGGREGATES:
            raise self.unsupported(f"function {name_tok.text}()", name_tok)
        self.expect_op("(")
        if self.accept_op("*"):
            if name != "count":
                raise self.error(f"{name}(*) is not valid", name_tok)
            self.expect_op(")")
            node = FuncCall(name, (), False, True, self._span_from(name_tok))
        else:
            distinct = self.accept_kw("DISTINCT")
            args = [self.expr()]
            while self.accept_op(","):
                args.append(self.expr())
            self.expect_op(")")
            if len(args) != 1:
                raise self.unsupported(f"{name}() with {len(args)} arguments", name_tok)
            node = FuncCall(name, tuple(args), distinct, False, self._span_from(name_tok))
        if self.at_kw("OVER", "FILTER"):
            raise self.unsupported("window function")
        return node


def parse(sql_text: str, catalog: Mapping[str, Sequence[str]] | None = None) -> Query:
    """Parse one query.

    With a ``catalog`` (table or udf name -> column names) every column
    reference is resolved up front: ambiguous references raise
    :class:`~fedsql.errors.ResolutionError`, and double-quoted tokens that
    name a column in scope become column references instead of strings.
    """
    query = _Parser(sql_text).statement()
    if catalog is not None:
        from fedsql.sql.analysis import analyze, promote_quoted_columns

        query = promote_quoted_columns(query, catalog)
        analyze(query, catalog, strict=True)
    return query
