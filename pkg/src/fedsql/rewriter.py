"""Replace virtual-table references with API-invoking table functions.

Only top-level equality conjuncts of the form ``column = literal`` whose
column is an input parameter of the table's API are pushed into the call.
Everything else stays in the query and is evaluated by the engine over the
rows the API returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any

from fedsql.errors import BindingError, UnknownTableError
from fedsql.schema.model import ApiMapping, TableView
from fedsql.sql.analysis import Analysis, Predicate, TableOccurrence, analyze, conjuncts_for, literal_value
from fedsql.sql.ast import Select, Span, TableFunction, TableRef, join_conjuncts, split_conjuncts
from fedsql.sql.render import render


@dataclass(frozen=True)
class ArgBinding:
    param: str
    value: Any
    origin: Span | None = field(default=None, compare=False)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"param": self.param, "value": self.value}
        if self.origin is not None:
            out["origin"] = {"line": self.origin.line, "column": self.origin.column}
        return out


@dataclass(frozen=True)
class RewrittenOccurrence:
    """One virtual-table occurrence and what became of it."""

    original: TableOccurrence
    term: TableFunction
    mapping: ApiMapping
    pushed: tuple[ArgBinding, ...]
    residual: tuple[Predicate, ...]

    @property
    def args(self) -> dict[str, Any]:
        return {b.param: b.value for b in self.pushed}


@dataclass(frozen=True)
class RewrittenQuery:
    ast: Any
    occurrences: tuple[RewrittenOccurrence, ...] = ()

    @property
    def sql(self) -> str:
        return render(self.ast)

    @property
    def pushed(self) -> dict[TableOccurrence, tuple[ArgBinding, ...]]:
        return {o.original: o.pushed for o in self.occurrences}

    @property
    def residual(self) -> dict[TableOccurrence, tuple[Predicate, ...]]:
        return {o.original: o.residual for o in self.occurrences}

    @property
    def provenance(self) -> dict[TableFunction, TableOccurrence]:
        return {o.term: o.original for o in self.occurrences}

    def to_dict(self) -> dict[str, Any]:
        from fedsql.sql.render import describe_table_function, render_expr

        return {
            "sql": self.sql,
            "occurrences": [
                {
                    "table": o.original.name,
                    "alias": o.original.alias,
                    "scope": o.original.scope,
                    "call": describe_table_function(o.term),
                    "pushed": [b.to_dict() for b in o.pushed],
                    "residual": [render_expr(p.expr) for p in o.residual],
                }
                for o in self.occurrences
            ],
        }


def _compatible(value: Any, value_type: str) -> bool:
    if value is None:
        return False
    if value_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if value_type == "real":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if value_type == "text":
        return isinstance(value, str)
    if value_type == "boolean":
        return isinstance(value, bool) or (isinstance(value, int) and value in (0, 1))
    return False


def _api_value(value: Any, value_type: str) -> Any:
    if value_type == "boolean":
        return bool(value)
    return value


def bind_arguments(conjuncts: list[Predicate], mapping: ApiMapping,
                   strict: bool = False) -> tuple[list[ArgBinding], list[Predicate]]:
    """Split conjuncts into pushed API arguments and residual predicates.

    A parameter bound to two different literals is contradictory; both
    conjuncts stay residual so the engine returns no rows. With ``strict``,
    a literal whose type does not fit the parameter raises
    :class:`BindingError` instead of being left residual.
    """
    candidates: dict[str, list[tuple[Predicate, Any]]] = {}
    residual: list[Predicate] = []
    for pred in conjuncts:
        param = mapping.param(pred.lhs.name) if pred.op == "=" else None
        is_lit, value = literal_value(pred.rhs) if param else (False, None)
        if param is None or not is_lit or value is None:
            residual.append(pred)
            continue
        if not _compatible(value, param.value_type):
            if strict:
                raise BindingError(
                    f"literal {value!r} does not match parameter {param.name!r} of type {param.value_type}"
                )
            residual.append(pred)
            continue
        candidates.setdefault(param.name, []).append((pred, _api_value(value, param.value_type)))

    pushed: list[ArgBinding] = []
    for param_name, entries in candidates.items():
        values = {_key(v) for _, v in entries}
        if len(values) > 1:
            residual.extend(p for p, _ in entries)
            continue
        pred, value = entries[0]
        pushed.append(ArgBinding(param_name, value, pred.span))
    residual.sort(key=lambda p: p.index)
    return pushed, residual


def _key(value: Any) -> tuple[str, Any]:
    # 1 and 1.0 bind the same API filter
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return ("num", float(value))
    return (type(value).__name__, value)


def _check_tables(analysis: Analysis, view: TableView) -> None:
    for occ in analysis.occurrences:
        if isinstance(occ.node, TableFunction):
            if view.by_udf(occ.name) is None:
                raise UnknownTableError(occ.name)
        elif view.table(occ.name) is None:
            raise UnknownTableError(occ.name)


def rewrite(ast: Any, view: TableView, strict: bool = False) -> RewrittenQuery:
    """Rewrite ``ast`` against ``view``; identity when no virtual table is referenced."""
    analysis = analyze(ast, view)
    _check_tables(analysis, view)
    virtual = [
        occ for occ in analysis.occurrences
        if isinstance(occ.node, TableRef) and view.table(occ.name).is_virtual
    ]
    if not virtual:
        return RewrittenQuery(ast)

    replacements: dict[int, TableFunction] = {}
    removals: dict[int, set[int]] = {}
    results: list[RewrittenOccurrence] = []
    for occ in virtual:
        table = view.table(occ.name)
        preds = conjuncts_for(ast, occ, analysis=analysis)
        if occ.nullable:
            # filtering the null-supplying side before the join would change the result
            pushed, residual = [], list(preds)
        else:
            pushed, residual = bind_arguments(preds, table.api, strict=strict)
        kept = {id(p.expr) for p in residual}
        select = analysis.scopes[occ.scope].select
        for pred in preds:
            if id(pred.expr) not in kept:
                removals.setdefault(id(select), set()).add(id(pred.expr))
        node: TableRef = occ.node
        term = TableFunction(
            table.udf_name,
            tuple((b.param, b.value) for b in pushed),
            node.alias or node.name,
            node.span,
            tuple(b.origin or node.span for b in pushed),
        )
        replacements[id(node)] = term
        results.append(RewrittenOccurrence(occ, term, table.api, tuple(pushed), tuple(residual)))

    new_ast = _rebuild(ast, replacements, removals)
    return RewrittenQuery(new_ast, tuple(results))


def _rebuild(node: Any, replacements: dict[int, Any], removals: dict[int, set[int]]) -> Any:
    if id(node) in replacements:
        return replacements[id(node)]
    if not is_dataclass(node) or isinstance(node, Span):
        return node
    changes: dict[str, Any] = {}
    for f in fields(node):
        if f.name in ("span", "arg_spans"):
            continue
        value = getattr(node, f.name)
        if isinstance(node, Select) and f.name == "where" and id(node) in removals:
            drop = removals[id(node)]
            kept = [c for c in split_conjuncts(value) if id(c) not in drop]
            changes["where"] = join_conjuncts([_rebuild(c, replacements, removals) for c in kept])
            continue
        if isinstance(value, tuple):
            new = tuple(_rebuild(v, replacements, removals) for v in value)
            if any(a is not b for a, b in zip(new, value)):
                changes[f.name] = new
        elif is_dataclass(value):
            new = _rebuild(value, replacements, removals)
            if new is not value:
                changes[f.name] = new
    return replace(node, **changes) if changes else node
