"""Schema guardrails for candidate queries, with one-line repair hints.

Three rules ship: unknown tables or root-level columns (``invalid_entity``),
unknown table functions or parameters (``invalid_api_signature``) and
unknown columns inside subqueries (``invalid_subquery_column``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from fedsql.schema.model import TableView
from fedsql.sql.analysis import analyze
from fedsql.sql.ast import NO_SPAN, Span, TableFunction

INVALID_ENTITY = "invalid_entity"
INVALID_API_SIGNATURE = "invalid_api_signature"
INVALID_SUBQUERY_COLUMN = "invalid_subquery_column"
RULES = (INVALID_ENTITY, INVALID_API_SIGNATURE, INVALID_SUBQUERY_COLUMN)

MAX_DISTANCE = 2
MAX_CANDIDATES = 3


def damerau_levenshtein(a: str, b: str) -> int:
    """Unrestricted Damerau-Levenshtein distance (transpositions of non-adjacent edits allowed)."""
    inf = len(a) + len(b)
    last_row: dict[str, int] = {}
    d = [[inf] * (len(b) + 2) for _ in range(len(a) + 2)]
    for i in range(len(a) + 1):
        d[i + 1][0] = inf
        d[i + 1][1] = i
    for j in range(len(b) + 1):
        d[0][j + 1] = inf
        d[1][j + 1] = j
    for i in range(1, len(a) + 1):
        last_match_col = 0
        for j in range(1, len(b) + 1):
            i1 = last_row.get(b[j - 1], 0)
            j1 = last_match_col
            cost = 0 if a[i - 1] == b[j - 1] else 1
            if cost == 0:
                last_match_col = j
            d[i + 1][j + 1] = min(
                d[i][j] + cost,
                d[i + 1][j] + 1,
                d[i][j + 1] + 1,
                d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1),
            )
        last_row[a[i - 1]] = i
    return d[len(a) + 1][len(b) + 1]


def _tokens(name: str) -> set[str]:
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", name)
    return {t for t in re.split(r"[^A-Za-z0-9]+", spaced.lower()) if t}


def near_misses(subject: str, pool: Iterable[str], limit: int = MAX_CANDIDATES) -> tuple[str, ...]:
    """Closest names to ``subject``.

    First every name within case-insensitive edit distance 2 (closest first,
    ties alphabetical), then names whose word tokens contain all of the
    subject's tokens (``staff_num`` -> ``Num_of_Staff``).
    """
    key = subject.lower()
    names = sorted(set(pool), key=lambda n: (n.lower(), n))
    scored = [(damerau_levenshtein(key, n.lower()), n) for n in names if n.lower() != key]
    close = [n for d, n in sorted(scored, key=lambda x: (x[0], x[1].lower(), x[1])) if d <= MAX_DISTANCE]
    want = _tokens(subject)
    extra = [n for d, n in sorted(scored, key=lambda x: (x[0], x[1].lower(), x[1]))
             if d > MAX_DISTANCE and want and want <= _tokens(n)]
    return tuple((close + extra)[:limit])


@dataclass(frozen=True)
class Violation:
    rule: str
    location: Span
    subject: str
    candidates: tuple[str, ...] = ()
    kind: str = "column"  # table | column | qualifier | ambiguous | function | parameter
    context: str | None = None  # table, alias or udf the subject was looked up on
    valid: tuple[str, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule": self.rule,
            "kind": self.kind,
            "subject": self.subject,
            "candidates": list(self.candidates),
            "context": self.context,
            "line": self.location.line,
            "column": self.location.column,
        }


@dataclass(frozen=True)
class Hint:
    text: str
    violation: Violation | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "violation": self.violation.to_dict() if self.violation else None}


def check(ast: Any, view: TableView) -> list[Violation]:
    """All guardrail violations of ``ast`` against ``view``, in source order."""
    analysis = analyze(ast, view)
    out: list[Violation] = []
    table_pool = view.table_names
    udf_pool = tuple(t.udf_name for t in view.virtual_tables)

    for occ in analysis.occurrences:
        node = occ.node
        span = getattr(node, "span", NO_SPAN)
        if isinstance(node, TableFunction):
            table = view.by_udf(node.name)
            if table is None:
                out.append(Violation(INVALID_API_SIGNATURE, span, node.name, near_misses(node.name, udf_pool),
                                     "function", None, udf_pool))
                continue
            params = table.api.param_names
            for i, (param, _) in enumerate(node.args):
                if table.api.param(param) is None:
                    loc = node.arg_spans[i] if i < len(node.arg_spans) else span
                    out.append(Violation(INVALID_API_SIGNATURE, loc, param, near_misses(param, params),
                                         "parameter", table.udf_name, params))
        elif view.table(node.name) is None and view.by_udf(node.name) is None:
            out.append(Violation(INVALID_ENTITY, span, node.name, near_misses(node.name, table_pool),
                                 "table", None, table_pool))

    for b in analysis.bindings:
        if b.ok:
            continue
        rule = INVALID_SUBQUERY_COLUMN if b.depth > 0 else INVALID_ENTITY
        col = b.column
        if b.status == "unknown_qualifier":
            scope_names = _bindings_in_scope(analysis, b.scope)
            out.append(Violation(rule, col.span, col.table, near_misses(col.table, scope_names),
                                 "qualifier", None, scope_names))
        elif b.status == "ambiguous":
            owners = _owners(analysis, b.scope, col.name)
            out.append(Violation(rule, col.span, col.name, owners[:MAX_CANDIDATES], "ambiguous", None, owners))
        else:
            pool = tuple(dict.fromkeys(b.candidates_from))
            out.append(Violation(rule, col.span, col.name, near_misses(col.name, pool), "column", b.table, pool))

    out.sort(key=lambda v: (v.location.start, v.location.end, v.rule, v.subject))
    return out


def _bindings_in_scope(analysis: Any, path: str) -> tuple[str, ...]:
    names: list[str] = []
    scope = analysis.scopes.get(path)
    while scope is not None:
        names.extend(s.name for s in scope.sources if s.name)
        scope = analysis.scopes.get(scope.parent) if scope.parent else None
    return tuple(dict.fromkeys(names))


def _owners(analysis: Any, path: str, column: str) -> tuple[str, ...]:
    scope = analysis.scopes.get(path)
    if scope is None:
        return ()
    key = column.lower()
    return tuple(s.name for s in scope.sources
                 if s.name and s.columns and key in (c.lower() for c in s.columns))


def _quoted_list(names: Iterable[str]) -> str:
    return ", ".join(names)


def hint_for(v: Violation) -> Hint:
    """A single-sentence instruction naming the offending identifier and the best candidate."""
    best = f"; did you mean '{v.candidates[0]}'?" if v.candidates else ""
    if v.kind == "table":
        tail = best or f"; valid tables are: {_quoted_list(v.valid)}."
        text = f"Table '{v.subject}' does not exist{tail}"
    elif v.kind == "function":
        tail = best or f"; valid functions are: {_quoted_list(v.valid) or 'none'}."
        text = f"Function '{v.subject}' does not exist{tail}"
    elif v.kind == "parameter":
        text = (f"Parameter '{v.subject}' is not accepted by {v.context} "
                f"(valid parameters: {_quoted_list(v.valid)}){best or '.'}")
    elif v.kind == "qualifier":
        tail = best or f"; tables in scope are: {_quoted_list(v.valid) or 'none'}."
        text = f"Table or alias '{v.subject}' is not defined in this query{tail}"
    elif v.kind == "ambiguous":
        text = f"Column '{v.subject}' is ambiguous; qualify it with one of: {_quoted_list(v.valid)}."
    else:
        where = f"on table '{v.context}'" if v.context else "in any table in scope"
        prefix = "In a subquery, column" if v.rule == INVALID_SUBQUERY_COLUMN and not v.context else "Column"
        tail = best or (f"; valid columns are: {_quoted_list(v.valid)}." if v.valid else ".")
        text = f"{prefix} '{v.subject}' does not exist {where}{tail}"
    return Hint(text, v)


def parse_failure_hint(exc: Exception) -> Hint:
    """Hint for SQL that does not parse (its own class, outside the three rules)."""
    message = " ".join(str(exc).split())
    return Hint(f"The SQL could not be parsed ({message}); rewrite it using the supported SELECT syntax.")
