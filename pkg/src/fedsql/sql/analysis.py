"""Static analysis over query ASTs: scopes, table occurrences, column resolution, conjuncts.

Scope paths name every SELECT core: the outermost query is ``root``; operands
of a set operation get ``<path>/set[i]``; subqueries get
``<path>/<clause>[k]`` where clause is one of select, from, on, where, group,
having, order and ``k`` counts subqueries of that clause left to right (for
``from`` it is the position of the item in the FROM list).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Callable, Iterable, Mapping, Sequence

from fedsql.errors import ResolutionError
from fedsql.sql.ast import (
    Between,
    Binary,
    Column,
    Expr,
    InList,
    InSubquery,
    IsNull,
    Join,
    Like,
    Literal,
    Query,
    Select,
    SetOperation,
    Span,
    Star,
    Subquery,
    SubquerySource,
    TableFunction,
    Unary,
    split_conjuncts,
)

ROOT = "root"

Catalog = Mapping[str, Sequence[str]]


def normalize_catalog(catalog: Any) -> dict[str, tuple[str, tuple[str, ...]]]:
    """Lower-cased name -> (canonical name, columns). Accepts a mapping or a TableView."""
    if catalog is None:
        return {}
    out: dict[str, tuple[str, tuple[str, ...]]] = {}
    if hasattr(catalog, "tables"):
        for t in catalog.tables:
            out[t.name.lower()] = (t.name, t.column_names)
            if t.udf_name:
                out[t.udf_name.lower()] = (t.udf_name, t.column_names)
        return out
    for name, cols in catalog.items():
        out[name.lower()] = (name, tuple(cols))
    return out


@dataclass(frozen=True)
class TableOccurrence:
    name: str
    alias: str | None
    scope: str
    index: int
    nullable: bool = False
    node: Any = field(default=None, compare=False, repr=False)

    @property
    def binding(self) -> str:
        return self.alias or self.name

    @property
    def is_function(self) -> bool:
        return isinstance(self.node, TableFunction)


@dataclass
class SourceBinding:
    name: str | None  # binding name (alias or table name)
    occurrence: TableOccurrence | None
    columns: tuple[str, ...] | None  # None when not in the catalog
    table: str | None  # underlying table/udf name; None for derived tables


@dataclass
class ScopeInfo:
    path: str
    select: Select
    parent: str | None
    depth: int
    sources: list[SourceBinding] = field(default_factory=list)
    aliases: tuple[str, ...] = ()


@dataclass
class ColumnBinding:
    column: Column
    scope: str
    clause: str
    depth: int
    status: str  # table | derived | alias | output | uncatalogued | unknown_qualifier | unknown_column | ambiguous
    occurrence: TableOccurrence | None = None
    table: str | None = None  # table the column was looked up on, when known
    candidates_from: tuple[str, ...] = ()  # column names the lookup could have matched

    @property
    def ok(self) -> bool:
        return self.status in ("table", "derived", "alias", "output", "uncatalogued")


@dataclass(frozen=True)
class Predicate:
    """A top-level WHERE conjunct with a column on its left-hand side."""

    lhs: Column
    op: str
    rhs: Any
    expr: Expr = field(compare=False)
    index: int = field(default=0, compare=False)
    span: Span | None = field(default=None, compare=False)


class Analysis:
    def __init__(self, query: Query, catalog: Any = None, strict: bool = False):
        self.query = query
        self.catalog = normalize_catalog(catalog)
        self.has_catalog = catalog is not None
        self.strict = strict
        self.scopes: dict[str, ScopeInfo] = {}
        self.occurrences: list[TableOccurrence] = []
        self.bindings: list[ColumnBinding] = []
        self._by_id: dict[int, ColumnBinding] = {}
        self.outputs: dict[str, tuple[str | None, ...]] = {}
        self._query(query, ROOT, None, 0)

    # -- traversal -----------------------------------------------------------

    def _query(self, query: Query, path: str, parent: str | None, depth: int) -> tuple[str | None, ...]:
        if isinstance(query, Select):
            return self._select(query, path, parent, depth)
        operands: list[Query] = []
        node: Query = query
        while isinstance(node, SetOperation):
            operands.insert(0, node.right)
            node = node.left
        operands.insert(0, node)
        outs = [self._query(q, f"{path}/set[{i}]", parent, depth) for i, q in enumerate(operands)]
        first = outs[0]
        self.outputs[path] = first
        # compound ORDER BY terms name result columns of the first operand
        for item in query.order_by:
            for col in _columns_outside_subqueries(item.expr):
                hit = col.table is None and any(o and o.lower() == col.name.lower() for o in first)
                status = "output" if hit else "unknown_column"
                self._record(ColumnBinding(col, path, "order", depth, status,
                                           candidates_from=tuple(o for o in first if o)))
        for k, sub in enumerate(_subqueries_in([i.expr for i in query.order_by])):
            self._query(sub, f"{path}/order[{k}]", parent, depth + 1)
        return first

    def _select(self, sel: Select, path: str, parent: str | None, depth: int) -> tuple[str | None, ...]:
        scope = ScopeInfo(path, sel, parent, depth, aliases=tuple(i.alias for i in sel.items if i.alias))
        self.scopes[path] = scope
        nullable = _nullable_leaves(sel.from_)
        leaves = _leaves(sel.from_)
        for idx, leaf in enumerate(leaves):
            if isinstance(leaf, SubquerySource):
                cols = self._query(leaf.query, f"{path}/from[{idx}]", parent, depth + 1)
                scope.sources.append(SourceBinding(leaf.alias, None, tuple(c for c in cols if c is not None), None))
                continue
            occ = TableOccurrence(leaf.name, leaf.alias, path, idx, id(leaf) in nullable, leaf)
            self.occurrences.append(occ)
            entry = self.catalog.get(leaf.name.lower())
            scope.sources.append(SourceBinding(leaf.binding, occ, entry[1] if entry else None, leaf.name))

        clauses: list[tuple[str, list[Any]]] = [
            ("on", _on_conditions(sel.from_)),
            ("select", [i.expr for i in sel.items]),
            ("where", [sel.where] if sel.where is not None else []),
            ("group", list(sel.group_by)),
            ("having", [sel.having] if sel.having is not None else []),
            ("order", [o.expr for o in sel.order_by]),
        ]
        for clause, exprs in clauses:
            for expr in exprs:
                for col in _columns_outside_subqueries(expr):
                    self._record(self._resolve(col, scope, clause))
            for k, sub in enumerate(_subqueries_in(exprs)):
                self._query(sub, f"{path}/{clause}[{k}]", path, depth + 1)
        for item in sel.items:
            if isinstance(item.expr, Star) and item.expr.table is not None:
                if self._find_source(item.expr.table, scope) is None:
                    col = Column("*", item.expr.table, item.expr.span)
                    self._record(ColumnBinding(col, path, "select", depth, "unknown_qualifier", table=item.expr.table))

        outs = self._select_outputs(sel, scope)
        self.outputs[path] = outs
        return outs

    def _select_outputs(self, sel: Select, scope: ScopeInfo) -> tuple[str | None, ...]:
        outs: list[str | None] = []
        for item in sel.items:
            if item.alias:
                outs.append(item.alias)
            elif isinstance(item.expr, Column):
                outs.append(item.expr.name)
            elif isinstance(item.expr, Star):
                for src in scope.sources:
                    if item.expr.table is None or (src.name and src.name.lower() == item.expr.table.lower()):
                        outs.extend(src.columns or ())
            else:
                outs.append(None)
        return tuple(outs)

    # -- resolution ----------------------------------------------------------

    def _chain(self, scope: ScopeInfo) -> Iterable[ScopeInfo]:
        current: ScopeInfo | None = scope
        while current is not None:
            yield current
            current = self.scopes.get(current.parent) if current.parent else None

    def _find_source(self, qualifier: str, scope: ScopeInfo) -> SourceBinding | None:
        key = qualifier.lower()
        for sc in self._chain(scope):
            for src in sc.sources:
                if src.name and src.name.lower() == key:
                    return src
        return None

    def _resolve(self, col: Column, scope: ScopeInfo, clause: str) -> ColumnBinding:
        key = col.name.lower()
        base = dict(column=col, scope=scope.path, clause=clause, depth=scope.depth)
        if col.table is not None:
            src = self._find_source(col.table, scope)
            if src is None:
                return ColumnBinding(status="unknown_qualifier", table=col.table, **base)
            if src.columns is None:
                return ColumnBinding(status="uncatalogued", occurrence=src.occurrence, table=src.table, **base)
            if key in (c.lower() for c in src.columns):
                status = "table" if src.occurrence else "derived"
                return ColumnBinding(status=status, occurrence=src.occurrence, table=src.table, **base)
            return ColumnBinding(status="unknown_column", occurrence=src.occurrence, table=src.table or src.name,
                                 candidates_from=src.columns, **base)

        if clause == "order" and any(a.lower() == key for a in scope.aliases):
            return ColumnBinding(status="alias", **base)
        for sc in self._chain(scope):
            hits = [s for s in sc.sources if s.columns is not None and key in (c.lower() for c in s.columns)]
            unknown = [s for s in sc.sources if s.columns is None]
            if len(hits) > 1:
                names = ", ".join(s.name or "?" for s in hits)
                if self.strict:
                    raise ResolutionError(f"ambiguous column {col.name!r} (candidates: {names})")
                return ColumnBinding(status="ambiguous", table=None, **base)
            if len(hits) == 1:
                src = hits[0]
                status = "table" if src.occurrence else "derived"
                return ColumnBinding(status=status, occurrence=src.occurrence, table=src.table, **base)
            if unknown:
                if len(sc.sources) == 1:
                    return ColumnBinding(status="uncatalogued", occurrence=unknown[0].occurrence,
                                         table=unknown[0].table, **base)
                return ColumnBinding(status="uncatalogued", **base)
        if any(a.lower() == key for a in scope.aliases):
            return ColumnBinding(status="alias", **base)
        table = scope.sources[0].table if len(scope.sources) == 1 else None
        pool: list[str] = []
        for src in scope.sources:
            pool.extend(src.columns or ())
        occ = scope.sources[0].occurrence if len(scope.sources) == 1 else None
        return ColumnBinding(status="unknown_column", occurrence=occ, table=table, candidates_from=tuple(pool), **base)

    def _record(self, binding: ColumnBinding) -> None:
        self.bindings.append(binding)
        self._by_id[id(binding.column)] = binding

    # -- queries -------------------------------------------------------------

    def resolution(self, col: Column) -> ColumnBinding | None:
        return self._by_id.get(id(col))


def analyze(query: Query, catalog: Any = None, strict: bool = False) -> Analysis:
    return Analysis(query, catalog, strict)


def _leaves(source: Any) -> list[Any]:
    if source is None:
        return []
    if isinstance(source, Join):
        return _leaves(source.left) + _leaves(source.right)
    return [source]


def _nullable_leaves(source: Any) -> set[int]:
    """ids of FROM leaves on the null-supplying side of a LEFT JOIN."""
    out: set[int] = set()

    def visit(node: Any, nullable: bool) -> None:
        if isinstance(node, Join):
            visit(node.left, nullable)
            visit(node.right, nullable or node.kind == "LEFT JOIN")
        elif node is not None and nullable:
            out.add(id(node))

    visit(source, False)
    return out


def _on_conditions(source: Any) -> list[Any]:
    if not isinstance(source, Join):
        return []
    return _on_conditions(source.left) + _on_conditions(source.right) + ([source.on] if source.on is not None else [])


def _columns_outside_subqueries(expr: Any) -> list[Column]:
    out: list[Column] = []

    def visit(node: Any) -> None:
        if isinstance(node, Column):
            out.append(node)
            return
        if isinstance(node, (Subquery,)):
            return
        if isinstance(node, InSubquery):
            visit(node.expr)
            return
        if is_dataclass(node):
            for f in fields(node):
                if f.name == "span":
                    continue
                value = getattr(node, f.name)
                if isinstance(value, tuple):
                    for v in value:
                        visit(v)
                elif is_dataclass(value) and not isinstance(value, Span):
                    visit(value)

    visit(expr)
    return out


def _subqueries_in(exprs: list[Any]) -> list[Query]:
    """Queries nested directly in ``exprs`` (not inside other subqueries), in order."""
    out: list[Query] = []

    def visit(node: Any) -> None:
        if isinstance(node, Subquery):
            out.append(node.query)
            return
        if isinstance(node, InSubquery):
            visit(node.expr)
            out.append(node.query)
            return
        if is_dataclass(node) and not isinstance(node, Span):
            for f in fields(node):
                if f.name == "span":
                    continue
                value = getattr(node, f.name)
                if isinstance(value, tuple):
                    for v in value:
                        visit(v)
                elif is_dataclass(value):
                    visit(value)

    for e in exprs:
        visit(e)
    return out


# -- public operations -------------------------------------------------------


def table_refs(ast: Query) -> list[TableOccurrence]:
    """Every table (or table-function) occurrence, subqueries and set operands included."""
    return list(analyze(ast).occurrences)


def find_scope(ast: Query, path: str) -> Select:
    analysis = analyze(ast)
    try:
        return analysis.scopes[path].select
    except KeyError:
        raise KeyError(f"no SELECT at scope {path!r}") from None


_FLIP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


def _as_predicate(conj: Expr, index: int) -> Predicate | None:
    if isinstance(conj, Binary) and conj.op in _FLIP:
        if isinstance(conj.left, Column):
            return Predicate(conj.left, conj.op, conj.right, conj, index, conj.span)
        if isinstance(conj.right, Column) and _is_constant(conj.left):
            return Predicate(conj.right, _FLIP[conj.op], conj.left, conj, index, conj.span)
        return None
    if isinstance(conj, Like) and isinstance(conj.expr, Column):
        return Predicate(conj.expr, "NOT LIKE" if conj.negated else "LIKE", conj.pattern, conj, index, conj.span)
    if isinstance(conj, InList) and isinstance(conj.expr, Column):
        return Predicate(conj.expr, "NOT IN" if conj.negated else "IN", conj.items, conj, index, conj.span)
    if isinstance(conj, InSubquery) and isinstance(conj.expr, Column):
        return Predicate(conj.expr, "NOT IN" if conj.negated else "IN", conj.query, conj, index, conj.span)
    if isinstance(conj, Between) and isinstance(conj.expr, Column):
        op = "NOT BETWEEN" if conj.negated else "BETWEEN"
        return Predicate(conj.expr, op, (conj.low, conj.high), conj, index, conj.span)
    if isinstance(conj, IsNull) and isinstance(conj.expr, Column):
        return Predicate(conj.expr, "IS NOT NULL" if conj.negated else "IS NULL", None, conj, index, conj.span)
    return None


def _is_constant(expr: Any) -> bool:
    if isinstance(expr, Literal):
        return True
    return isinstance(expr, Unary) and expr.op in ("-", "+") and isinstance(expr.operand, Literal)


def literal_value(expr: Any) -> tuple[bool, Any]:
    """(is_literal, value) for a literal or a signed numeric literal."""
    if isinstance(expr, Literal):
        return True, expr.value
    if isinstance(expr, Unary) and expr.op in ("-", "+") and isinstance(expr.operand, Literal):
        v = expr.operand.value
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return True, -v if expr.op == "-" else v
    return False, None


def conjuncts_for(ast: Query, ref: TableOccurrence, catalog: Any = None,
                  analysis: Analysis | None = None) -> list[Predicate]:
    """Top-level AND conjuncts of the WHERE enclosing ``ref`` whose column side resolves to ``ref``.

    Conjuncts nested under OR or NOT, or inside subqueries, are never returned.
    """
    analysis = analysis or analyze(ast, catalog)
    scope = analysis.scopes.get(ref.scope)
    if scope is None:
        raise KeyError(f"occurrence {ref} does not belong to this AST")
    out = []
    for index, conj in enumerate(split_conjuncts(scope.select.where)):
        pred = _as_predicate(conj, index)
        if pred is None:
            continue
        binding = analysis.resolution(pred.lhs)
        if binding is None or binding.occurrence != ref:
            continue
        out.append(pred)
    return out


# -- tree rewriting helpers --------------------------------------------------


def transform(node: Any, fn: Callable[[Any], Any]) -> Any:
    """Bottom-up rebuild of an AST; ``fn`` maps each (already rebuilt) node to its replacement."""
    if not is_dataclass(node) or isinstance(node, Span):
        return node
    changes = {}
    for f in fields(node):
        if f.name in ("span", "arg_spans"):
            continue
        value = getattr(node, f.name)
        if isinstance(value, tuple):
            new = tuple(transform(v, fn) for v in value)
            if any(a is not b for a, b in zip(new, value)):
                changes[f.name] = new
        elif is_dataclass(value) and not isinstance(value, Span):
            new = transform(value, fn)
            if new is not value:
                changes[f.name] = new
    rebuilt = replace(node, **changes) if changes else node
    return fn(rebuilt)


def promote_quoted_columns(query: Query, catalog: Any) -> Query:
    """Turn double-quoted string literals that name a known column into column references."""
    cat = normalize_catalog(catalog)
    analysis = analyze(query, catalog)
    known: set[str] = set()
    for occ in analysis.occurrences:
        entry = cat.get(occ.name.lower())
        if entry:
            known.update(c.lower() for c in entry[1])

    def fn(node: Any) -> Any:
        if isinstance(node, Literal) and node.raw.startswith('"') and str(node.value).lower() in known:
            return Column(node.value, None, node.span)
        return node

    return transform(query, fn)
