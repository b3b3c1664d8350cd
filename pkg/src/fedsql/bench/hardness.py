"""Difficulty buckets by component counting (the Spider evaluation rules).

Reimplemented over our AST, version ``spider-2018-components/1``. The
original toolkit works on its own parse tree; the counting below mirrors it
clause by clause, including its quirks (a NOT in a WHERE condition counts as
an aggregate, only the first operand of a set operation is inspected, and
conjunction tokens in HAVING count as aggregates).
"""

from __future__ import annotations

from typing import Any

from fedsql.sql.ast import (
    Binary,
    InSubquery,
    Join,
    Like,
    Select,
    SetOperation,
    Subquery,
    Unary,
    is_aggregate,
    source_leaves,
)

VERSION = "spider-2018-components/1"
BUCKETS = ("easy", "medium", "hard", "extra")


def _conditions(expr: Any) -> tuple[list[Any], list[str]]:
    """Flatten an AND/OR tree into (condition units, connector tokens)."""
    if expr is None:
        return [], []
    if isinstance(expr, Binary) and expr.op in ("AND", "OR"):
        lc, lt = _conditions(expr.left)
        rc, rt = _conditions(expr.right)
        return lc + rc, lt + [expr.op.lower()] + rt
    return [expr], []


def _negated(cond: Any) -> bool:
    if isinstance(cond, Unary) and cond.op == "NOT":
        return True
    return bool(getattr(cond, "negated", False))


def _nested(cond: Any) -> list[Any]:
    """Subqueries directly used as condition values."""
    if isinstance(cond, Unary) and cond.op == "NOT":
        return _nested(cond.operand)
    out = []
    if isinstance(cond, InSubquery):
        out.append(cond.query)
    for attr in ("left", "right", "expr", "low", "high", "pattern"):
        value = getattr(cond, attr, None)
        if isinstance(value, Subquery):
            out.append(value.query)
    return out


def _first_select(q: Any) -> tuple[Select, int]:
    """Left-most SELECT and the number of set operations above it."""
    depth = 0
    while isinstance(q, SetOperation):
        depth += 1
        q = q.left
    return q, depth


def _from_conditions(source: Any) -> list[Any]:
    if not isinstance(source, Join):
        return []
    conds = _from_conditions(source.left) + _from_conditions(source.right)
    if source.on is not None:
        conds += _conditions(source.on)[0]
    return conds


def count_component1(sel: Select) -> int:
    where, where_tok = _conditions(sel.where)
    having, having_tok = _conditions(sel.having)
    count = 0
    count += 1 if where else 0
    count += 1 if sel.group_by else 0
    count += 1 if sel.order_by else 0
    count += 1 if sel.limit is not None else 0
    leaves = source_leaves(sel.from_)
    if leaves:
        count += len(leaves) - 1
    count += sum(1 for t in where_tok + having_tok if t == "or")
    count += sum(1 for c in where + having if isinstance(_strip_not(c), Like))
    return count


def _strip_not(cond: Any) -> Any:
    return cond.operand if isinstance(cond, Unary) and cond.op == "NOT" else cond


def count_component2(sel: Select, set_ops: int) -> int:
    nested = 0
    for cond in _from_conditions(sel.from_) + _conditions(sel.where)[0] + _conditions(sel.having)[0]:
        nested += len(_nested(cond))
    return nested + (1 if set_ops else 0)


def count_others(sel: Select) -> int:
    where, _ = _conditions(sel.where)
    having, having_tok = _conditions(sel.having)
    agg = sum(1 for item in sel.items if is_aggregate(item.expr))
    agg += sum(1 for c in where if _negated(c))
    agg += sum(1 for g in sel.group_by if is_aggregate(g))
    agg += sum(1 for o in sel.order_by if is_aggregate(o.expr))
    agg += sum(1 for c in having if _negated(c)) + len(having_tok)
    count = 0
    if agg > 1:
        count += 1
    if len(sel.items) > 1:
        count += 1
    if len(where) > 1:
        count += 1
    if len(sel.group_by) > 1:
        count += 1
    return count


def classify(query: Any) -> str:
    """Bucket a gold query (SQL text or AST) into easy / medium / hard / extra."""
    if isinstance(query, str):
        from fedsql.sql.parser import parse

        query = parse(query)
    sel, set_ops = _first_select(query)
    c1 = count_component1(sel)
    c2 = count_component2(sel, set_ops)
    others = count_others(sel)
    if c1 <= 1 and others == 0 and c2 == 0:
        return "easy"
    if (others <= 2 and c1 <= 1 and c2 == 0) or (c1 <= 2 and others < 2 and c2 == 0):
        return "medium"
    if ((others > 2 and c1 <= 2 and c2 == 0)
            or (2 < c1 <= 3 and others <= 2 and c2 == 0)
            or (c1 <= 1 and others == 0 and c2 <= 1)):
        return "hard"
    return "extra"

