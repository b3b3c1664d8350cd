"""Immutable AST for the supported SQL subset.

Source spans are carried on nodes but excluded from equality, so two ASTs are
structurally equal when they differ only in layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Iterator, Union

AGGREGATES = ("count", "sum", "avg", "min", "max")


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


NO_SPAN = Span(0, 0, 1, 1)


def _span() -> Any:
    return field(default=NO_SPAN, compare=False, repr=False)


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    name: str
    table: str | None = None
    span: Span = _span()


@dataclass(frozen=True)
class Star:
    table: str | None = None
    span: Span = _span()


@dataclass(frozen=True)
class Literal:
    """A literal; ``raw`` is the exact source text and wins on rendering."""

    value: Any
    raw: str
    span: Span = _span()

    @property
    def kind(self) -> str:
        if self.value is None:
            return "null"
        if isinstance(self.value, bool):
            return "boolean"
        if isinstance(self.value, int):
            return "integer"
        if isinstance(self.value, float):
            return "real"
        return "text"


@dataclass(frozen=True)
class Unary:
    op: str  # '-', '+', 'NOT'
    operand: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Binary:
    op: str  # AND OR = != < <= > >= + - * / % ||
    left: "Expr"
    right: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Like:
    expr: "Expr"
    pattern: "Expr"
    negated: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class InList:
    expr: "Expr"
    items: tuple["Expr", ...]
    negated: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class InSubquery:
    expr: "Expr"
    query: "Query"
    negated: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class Between:
    expr: "Expr"
    low: "Expr"
    high: "Expr"
    negated: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class IsNull:
    expr: "Expr"
    negated: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple["Expr", ...] = ()
    distinct: bool = False
    star: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class Subquery:
    query: "Query"
    span: Span = _span()


Expr = Union[Column, Star, Literal, Unary, Binary, Like, InList, InSubquery, Between, IsNull, FuncCall, Subquery]

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")


# -- FROM clause -------------------------------------------------------------


@dataclass(frozen=True)
class TableRef:
    name: str
    alias: str | None = None
    span: Span = _span()

    @property
    def binding(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class TableFunction:
    """Table-valued function call ``udf(args)``; ``args`` are (param, value) pairs in binding order."""

    name: str
    args: tuple[tuple[str, Any], ...] = ()
    alias: str | None = None
    span: Span = _span()
    arg_spans: tuple[Span, ...] = field(default=(), compare=False, repr=False)

    @property
    def binding(self) -> str:
        return self.alias or self.name


@dataclass(frozen=True)
class SubquerySource:
    query: "Query"
    alias: str | None = None
    span: Span = _span()

    @property
    def binding(self) -> str | None:
        return self.alias


@dataclass(frozen=True)
class Join:
    left: "Source"
    right: "Source"
    kind: str = "JOIN"  # JOIN, INNER JOIN, LEFT JOIN, CROSS JOIN, ','
    on: Expr | None = None
    span: Span = _span()


Source = Union[TableRef, TableFunction, SubquerySource, Join]


# -- queries -----------------------------------------------------------------


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: str | None = None


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    direction: str | None = None  # 'ASC', 'DESC' or None when implicit


@dataclass(frozen=True)
class Select:
    items: tuple[SelectItem, ...]
    from_: Source | None = None
    where: Expr | None = None
    group_by: tuple[Expr, ...] = ()
    having: Expr | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: Expr | None = None
    offset: Expr | None = None
    distinct: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class SetOperation:
    op: str  # UNION, UNION ALL, INTERSECT, EXCEPT
    left: "Query"
    right: "Query"
    order_by: tuple[OrderItem, ...] = ()
    limit: Expr | None = None
    offset: Expr | None = None
    span: Span = _span()


Query = Union[Select, SetOperation]
QueryAst = Query
Node = Union[Expr, Source, Query, SelectItem, OrderItem]


def children(node: Any) -> Iterator[Any]:
    """Direct AST children of ``node`` in source order."""
    for f in fields(node):
        if f.name in ("span", "arg_spans"):
            continue
        value = getattr(node, f.name)
        if isinstance(value, tuple):
            for v in value:
                if _is_node(v):
                    yield v
        elif _is_node(value):
            yield value


def _is_node(value: Any) -> bool:
    return hasattr(value, "__dataclass_fields__") and not isinstance(value, Span)


def walk(node: Any) -> Iterator[Any]:
    """Pre-order traversal over ``node`` and all descendants, subqueries included."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(list(children(current))))


def split_conjuncts(expr: Expr | None) -> list[Expr]:
    """Top-level AND operands of ``expr``, left to right."""
    if expr is None:
        return []
    if isinstance(expr, Binary) and expr.op == "AND":
        return split_conjuncts(expr.left) + split_conjuncts(expr.right)
    return [expr]


def join_conjuncts(conjuncts: list[Expr]) -> Expr | None:
    """Inverse of :func:`split_conjuncts` (left-deep AND chain)."""
    if not conjuncts:
        return None
    out = conjuncts[0]
    for c in conjuncts[1:]:
        out = Binary("AND", out, c)
    return out


def source_leaves(source: Source | None) -> list[TableRef | TableFunction | SubquerySource]:
    """Table-level items of a FROM tree, left to right."""
    if source is None:
        return []
    if isinstance(source, Join):
        return source_leaves(source.left) + source_leaves(source.right)
    return [source]


def is_aggregate(expr: Any) -> bool:
    return isinstance(expr, FuncCall) and expr.name in AGGREGATES
