"""Canonical SQL text for an AST (SQLite dialect)."""

from __future__ import annotations

import json
import re
from typing import Any

from fedsql.sql.ast import (
    Between,
    Binary,
    Column,
    FuncCall,
    InList,
    InSubquery,
    IsNull,
    Join,
    Like,
    Literal,
    OrderItem,
    Select,
    SetOperation,
    Star,
    Subquery,
    SubquerySource,
    TableFunction,
    TableRef,
    Unary,
)
from fedsql.sql.parser import RESERVED

_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# binding strength, higher binds tighter
_PREC = {"OR": 1, "AND": 2, "NOT": 3, "CMP": 4, "+": 6, "-": 6, "*": 7, "/": 7, "%": 7, "||": 8, "UNARY": 9}


def ident(name: str) -> str:
    if _BARE.match(name) and name.upper() not in RESERVED:
        return name
    return "`" + name.replace("`", "``") + "`"


def sql_literal(value: Any) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float)):
        return repr(value)
    return "'" + str(value).replace("'", "''") + "'"


def _prec(node: Any) -> int:
    if isinstance(node, Binary):
        if node.op in ("AND", "OR"):
            return _PREC[node.op]
        if node.op in ("=", "!=", "<", "<=", ">", ">="):
            return _PREC["CMP"]
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _PREC["NOT"] if node.op == "NOT" else _PREC["UNARY"]
    if isinstance(node, (Like, InList, InSubquery, Between, IsNull)):
        return _PREC["CMP"]
    return 10


def _wrap(node: Any, min_prec: int) -> str:
    text = render_expr(node)
    return f"({text})" if _prec(node) < min_prec else text


def render_expr(node: Any) -> str:
    if isinstance(node, Literal):
        return node.raw
    if isinstance(node, Column):
        return f"{ident(node.table)}.{ident(node.name)}" if node.table else ident(node.name)
    if isinstance(node, Star):
        return f"{ident(node.table)}.*" if node.table else "*"
    if isinstance(node, Binary):
        p = _prec(node)
        if node.op in ("AND", "OR"):
            return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"
        # comparisons are non-associative; arithmetic is left-associative
        left_min = p + 1 if p == _PREC["CMP"] else p
        return f"{_wrap(node.left, left_min)} {node.op} {_wrap(node.right, p + 1)}"
    if isinstance(node, Unary):
        if node.op == "NOT":
            return f"NOT {_wrap(node.operand, _PREC['NOT'])}"
        return f"{node.op}{_wrap(node.operand, _PREC['UNARY'])}"
    cmp = _PREC["CMP"] + 1
    if isinstance(node, Like):
        neg = "NOT " if node.negated else ""
        return f"{_wrap(node.expr, cmp)} {neg}LIKE {_wrap(node.pattern, cmp)}"
    if isinstance(node, InList):
        neg = "NOT " if node.negated else ""
        return f"{_wrap(node.expr, cmp)} {neg}IN ({', '.join(render_expr(i) for i in node.items)})"
    if isinstance(node, InSubquery):
        neg = "NOT " if node.negated else ""
        return f"{_wrap(node.expr, cmp)} {neg}IN ({render(node.query)})"
    if isinstance(node, Between):
        neg = "NOT " if node.negated else ""
        return f"{_wrap(node.expr, cmp)} {neg}BETWEEN {_wrap(node.low, cmp)} AND {_wrap(node.high, cmp)}"
    if isinstance(node, IsNull):
        return f"{_wrap(node.expr, cmp)} IS {'NOT ' if node.negated else ''}NULL"
    if isinstance(node, FuncCall):
        if node.star:
            return f"{node.name}(*)"
        inner = ", ".join(render_expr(a) for a in node.args)
        return f"{node.name}({'DISTINCT ' if node.distinct else ''}{inner})"
    if isinstance(node, Subquery):
        return f"({render(node.query)})"
    raise TypeError(f"not an expression node: {node!r}")


def table_function_args(node: TableFunction) -> str:
    """Engine form of table-function arguments: one JSON object literal."""
    payload = json.dumps(dict(node.args), ensure_ascii=False, separators=(",", ":"))
    return sql_literal(payload)


def render_source(node: Any) -> str:
    if isinstance(node, TableRef):
        return ident(node.name) + (f" AS {ident(node.alias)}" if node.alias else "")
    if isinstance(node, TableFunction):
        return f"{ident(node.name)}({table_function_args(node)})" + (f" AS {ident(node.alias)}" if node.alias else "")
    if isinstance(node, SubquerySource):
        return f"({render(node.query)})" + (f" AS {ident(node.alias)}" if node.alias else "")
    if isinstance(node, Join):
        left = render_source(node.left)
        right = render_source(node.right)
        if node.kind == ",":
            return f"{left}, {right}"
        on = f" ON {render_expr(node.on)}" if node.on is not None else ""
        return f"{left} {node.kind} {right}{on}"
    raise TypeError(f"not a FROM node: {node!r}")


def _order_limit(order_by: tuple[OrderItem, ...], limit: Any, offset: Any) -> str:
    parts = []
    if order_by:
        items = ", ".join(render_expr(o.expr) + (f" {o.direction}" if o.direction else "") for o in order_by)
        parts.append(f"ORDER BY {items}")
    if limit is not None:
        parts.append(f"LIMIT {render_expr(limit)}")
        if offset is not None:
            parts.append(f"OFFSET {render_expr(offset)}")
    return " ".join(parts)


def _core(node: Select) -> str:
    items = ", ".join(
        render_expr(i.expr) + (f" AS {ident(i.alias)}" if i.alias else "") for i in node.items
    )
    parts = [f"SELECT {'DISTINCT ' if node.distinct else ''}{items}"]
    if node.from_ is not None:
        parts.append(f"FROM {render_source(node.from_)}")
    if node.where is not None:
        parts.append(f"WHERE {render_expr(node.where)}")
    if node.group_by:
        parts.append("GROUP BY " + ", ".join(render_expr(g) for g in node.group_by))
    if node.having is not None:
        parts.append(f"HAVING {render_expr(node.having)}")
    return " ".join(parts)


def render(ast: Any) -> str:
    """Render a query AST to SQL text accepted by SQLite."""
    if isinstance(ast, Select):
        tail = _order_limit(ast.order_by, ast.limit, ast.offset)
        return _core(ast) + (f" {tail}" if tail else "")
    if isinstance(ast, SetOperation):
        text = f"{_operand(ast.left)} {ast.op} {_operand(ast.right)}"
        tail = _order_limit(ast.order_by, ast.limit, ast.offset)
        return text + (f" {tail}" if tail else "")
    raise TypeError(f"not a query node: {ast!r}")


def _operand(node: Any) -> str:
    if isinstance(node, Select):
        return _core(node)
    return render(node)


def describe_table_function(node: TableFunction) -> str:
    """Human-readable form, e.g. ``api_museum(Name := 'Plaza Museum')``."""
    args = ", ".join(f"{p} := {sql_literal(v)}" for p, v in node.args)
    return f"{node.name}({args})"
