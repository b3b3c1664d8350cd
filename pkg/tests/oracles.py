"""Reference implementations used as test oracles.

Each one is written independently of the package code it checks: simpler
algorithms, different libraries, or brute force.
"""

from __future__ import annotations

import random
import re
import sqlite3
from collections import Counter, deque
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable

SENTINEL = "ZXQ-SENTINEL-91"


def expected_replaced(attr: float, n: int) -> int:
    """k via decimal round-half-up, floor 1 for attr > 0, 0 at attr 0."""
    if attr == 0 or n == 0:
        return 0
    k = int((Decimal(str(attr)) * n / 100).quantize(Decimal(1), rounding=ROUND_HALF_UP))
    return min(n, max(1, k))


def edit_distance_bfs(a: str, b: str, limit: int = 4) -> int:
    """Shortest sequence of insert / delete / substitute / adjacent-swap edits, by breadth-first search."""
    alphabet = sorted(set(a + b)) or ["x"]
    if a == b:
        return 0
    seen = {a}
    frontier = deque([(a, 0)])
    while frontier:
        s, d = frontier.popleft()
        if d >= limit:
            continue
        nxt = set()
        for i in range(len(s) + 1):
            for ch in alphabet:
                nxt.add(s[:i] + ch + s[i:])
        for i in range(len(s)):
            nxt.add(s[:i] + s[i + 1:])
            for ch in alphabet:
                nxt.add(s[:i] + ch + s[i + 1:])
            if i + 1 < len(s):
                nxt.add(s[:i] + s[i + 1] + s[i] + s[i + 2:])
        for t in nxt:
            if t == b:
                return d + 1
            if t not in seen and len(t) <= max(len(a), len(b)) + 1:
                seen.add(t)
                frontier.append((t, d + 1))
    return limit + 1


def brute_filter(rows: Iterable[dict], params: dict[str, Any]) -> list[dict]:
    """Equality filter by Python comparison on already typed values."""
    out = []
    for r in rows:
        if all(r.get(k) is not None and v is not None and r.get(k) == v for k, v in params.items()):
            out.append(r)
    return out


def multiset(rows: Iterable[tuple]) -> Counter:
    return Counter(tuple(round(v, 9) if isinstance(v, float) else v for v in r) for r in rows)


def sqlite_rows(db: Path | str, sql: str) -> list[tuple]:
    con = sqlite3.connect(f"file:{db}?mode=ro", uri=True)
    try:
        return con.execute(sql).fetchall()
    finally:
        con.close()


def table_rows(db: Path | str, table: str) -> tuple[list[str], list[tuple]]:
    con = sqlite3.connect(f"file:{db}?mode=ro", uri=True)
    try:
        cur = con.execute(f'SELECT * FROM "{table}"')
        return [d[0] for d in cur.description], cur.fetchall()
    finally:
        con.close()


def seed_sentinels(db: Path | str) -> int:
    """Append the sentinel to every TEXT cell of every table; returns the number of cells tagged."""
    con = sqlite3.connect(db)
    tagged = 0
    try:
        tables = [r[0] for r in con.execute("SELECT name FROM sqlite_master WHERE type='table'")]
        for t in tables:
            cols = [r[1] for r in con.execute(f'PRAGMA table_info("{t}")') if "CHAR" in r[2].upper()
                    or "TEXT" in r[2].upper()]
            for c in cols:
                cur = con.execute(f'UPDATE "{t}" SET "{c}" = "{c}" || \' {SENTINEL}\' WHERE "{c}" IS NOT NULL')
                tagged += cur.rowcount
        con.commit()
    finally:
        con.close()
    return tagged


# -- single-identifier fault injection ----------------------------------------------

KEYWORDS = {
    "select", "from", "where", "and", "or", "not", "in", "is", "null", "as", "on", "join", "group", "by",
    "order", "having", "limit", "union", "intersect", "except", "like", "between", "asc", "desc", "left",
    "inner", "cross", "distinct", "count", "sum", "avg", "min", "max", "all", "case", "when", "then", "end",
    "else", "exists", "offset", "outer", "natural", "using", "cast", "true", "false", "glob", "escape",
}


@dataclass(frozen=True)
class Fault:
    kind: str        # table | column | param
    original: str
    corrupted: str
    sql: str


def one_edit(name: str, rng: random.Random) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    ops = ["insert", "substitute", "transpose"] + (["delete"] if len(name) > 2 else [])
    op = rng.choice(ops)
    i = rng.randrange(len(name))
    if op == "insert":
        return name[:i] + rng.choice(letters) + name[i:]
    if op == "delete":
        return name[:i] + name[i + 1:]
    if op == "substitute":
        return name[:i] + rng.choice([c for c in letters if c != name[i].lower()]) + name[i + 1:]
    if len(name) < 2:
        return name + rng.choice(letters)
    j = min(i, len(name) - 2)
    if name[j] == name[j + 1]:
        return name[:j] + rng.choice(letters) + name[j + 1:]
    return name[:j] + name[j + 1] + name[j] + name[j + 2:]


def corrupt_name(name: str, taken: set[str], rng: random.Random) -> str:
    for _ in range(200):
        new = one_edit(name, rng)
        low = new.lower()
        if (low not in taken and low not in KEYWORDS and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", new)):
            return new
    raise AssertionError(f"could not corrupt {name}")


def _identifiers(sql: str) -> set[str]:
    return {w.lower() for w in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", sql)}


def view_names(view: Any) -> set[str]:
    names = set()
    for t in view.tables:
        names.add(t.name.lower())
        if t.udf_name:
            names.add(t.udf_name.lower())
        names.update(c.name.lower() for c in t.columns)
    return names


def table_fault(sql: str, ast: Any, analysis: Any, view: Any, rng: random.Random) -> Fault | None:
    from fedsql.sql.ast import TableRef

    occs = [o for o in analysis.occurrences if isinstance(o.node, TableRef)]
    occs = [o for o in occs if sql[o.node.span.start:o.node.span.start + len(o.name)] == o.name]
    if not occs:
        return None
    occ = rng.choice(occs)
    new = corrupt_name(occ.name, view_names(view) | _identifiers(sql), rng)
    s = occ.node.span.start
    return Fault("table", occ.name, new, sql[:s] + new + sql[s + len(occ.name):])


def column_fault(sql: str, analysis: Any, view: Any, rng: random.Random) -> Fault | None:
    cands = []
    for b in analysis.bindings:
        col = b.column
        if b.status != "table" or col.span.end == 0:
            continue
        if sql[col.span.end - len(col.name):col.span.end] == col.name:
            cands.append(col)
    if not cands:
        return None
    col = rng.choice(cands)
    new = corrupt_name(col.name, view_names(view) | _identifiers(sql), rng)
    e = col.span.end
    return Fault("column", col.name, new, sql[:e - len(col.name)] + new + sql[e:])


def param_fault(rewritten_ast: Any, view: Any, rng: random.Random) -> Fault | None:
    """Rename one bound argument of one table function in an already rewritten query."""
    from fedsql.sql.analysis import transform
    from fedsql.sql.ast import TableFunction, walk
    from fedsql.sql.render import render

    funcs = [n for n in walk(rewritten_ast) if isinstance(n, TableFunction) and n.args]
    if not funcs:
        return None
    target = rng.choice(funcs)
    i = rng.randrange(len(target.args))
    param, value = target.args[i]
    taken = {p.lower() for t in view.virtual_tables for p in t.api.param_names} | view_names(view)
    new = corrupt_name(param, taken, rng)
    args = target.args[:i] + ((new, value),) + target.args[i + 1:]
    bad = transform(rewritten_ast, lambda n: replace(n, args=args) if n is target else n)
    return Fault("param", param, new, render(bad))
