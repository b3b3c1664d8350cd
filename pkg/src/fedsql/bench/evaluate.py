"""Execution-accuracy evaluation of predicted SQL against gold results on the original databases."""

from __future__ import annotations

import math
import sqlite3
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from fedsql.bench.corpus import Corpus, Question
from fedsql.bench.hardness import BUCKETS
from fedsql.bench.mutate import BenchmarkConfig, BenchmarkInstance, DatabaseInstance, mutate
from fedsql.bench.server import ServerHandle, serve
from fedsql.errors import FedSQLError
from fedsql.federation.engine import ExecContext, ResultTable, Session
from fedsql.rewriter import rewrite
from fedsql.sql.ast import SetOperation, Select
from fedsql.sql.parser import parse

REL_TOL = 1e-6
ATTR_LEVELS = (0, 20, 40, 60, 80, 100)

# Accuracies published for the original system with a hosted model, keyed by
# ATTR. Printed next to our numbers for context only.
PUBLISHED_REFERENCE = {
    "overall": (0.66, 0.66, 0.64, 0.61, 0.58, 0.56),
    "easy": (0.85, 0.84, 0.80, 0.79, 0.73, 0.69),
    "medium": (0.74, 0.76, 0.73, 0.71, 0.66, 0.65),
    "hard": (0.48, 0.50, 0.46, 0.44, 0.45, 0.44),
    "extra": (0.34, 0.33, 0.34, 0.28, 0.29, 0.27),
}


# -- result comparison -------------------------------------------------------


def values_equal(a: Any, b: Any, rel_tol: float = REL_TOL) -> bool:
    if a is None or b is None:
        return a is None and b is None
    num = (int, float)
    if isinstance(a, num) and isinstance(b, num) and not isinstance(a, bool) and not isinstance(b, bool):
        if isinstance(a, float) or isinstance(b, float):
            return math.isclose(a, b, rel_tol=rel_tol, abs_tol=0.0)
        return a == b
    if type(a) is not type(b) and not (isinstance(a, str) and isinstance(b, str)):
        return False
    return a == b


def rows_equal(r: tuple, s: tuple, rel_tol: float = REL_TOL) -> bool:
    return len(r) == len(s) and all(values_equal(x, y, rel_tol) for x, y in zip(r, s))


def _sort_key(row: tuple) -> tuple:
    key = []
    for v in row:
        if v is None:
            key.append((0, 0))
        elif isinstance(v, (int, float)):
            key.append((1, float(v)))
        elif isinstance(v, str):
            key.append((2, v))
        else:
            key.append((3, repr(v)))
    return tuple(key)


def compare_result_sets(a: ResultTable, b: ResultTable, ordered: bool = False, rel_tol: float = REL_TOL) -> bool:
    """Same arity and the same rows, as sequences (ordered) or multisets.

    Reals compare with a relative tolerance, NULL equals NULL and 5 equals 5.0.
    Column names are not compared.
    """
    if len(a.columns) != len(b.columns) or len(a.rows) != len(b.rows):
        return False
    if ordered:
        return all(rows_equal(r, s, rel_tol) for r, s in zip(a.rows, b.rows))
    left = sorted(a.rows, key=_sort_key)
    right = sorted(b.rows, key=_sort_key)
    if all(rows_equal(r, s, rel_tol) for r, s in zip(left, right)):
        return True
    # tolerance can reorder near-equal reals; fall back to matching
    remaining = list(right)
    for r in left:
        for i, s in enumerate(remaining):
            if rows_equal(r, s, rel_tol):
                del remaining[i]
                break
        else:
            return False
    return True


def has_top_level_order(ast: Any) -> bool:
    return isinstance(ast, (Select, SetOperation)) and bool(ast.order_by)


# -- execution ---------------------------------------------------------------


def execute_gold(db_path: str | Path, sql: str) -> ResultTable:
    """Run gold SQL as-is on an original database with the stock driver."""
    con = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    try:
        cur = con.execute(sql)
        rows = cur.fetchall()
        columns = tuple(d[0] for d in cur.description or ())
    finally:
        con.close()
    return ResultTable(columns, rows)


def context_for(db: DatabaseInstance, base_url: str | None, timeout: float = 10.0) -> ExecContext:
    return ExecContext.for_view(db.view, str(db.db_path), base_url=base_url, http_timeout=timeout)


def run_federated(sql: str, db: DatabaseInstance, base_url: str | None, timeout: float = 10.0) -> ResultTable:
    """Parse, rewrite and execute a query against one database of an instance."""
    ast = parse(sql, catalog=db.view)
    rq = rewrite(ast, db.view)
    with Session(context_for(db, base_url, timeout)) as session:
        return session.run(rq)


# -- reports -----------------------------------------------------------------


@dataclass
class Verdict:
    question_id: str
    db_id: str
    difficulty: str
    correct: bool
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"question_id": self.question_id, "db_id": self.db_id, "difficulty": self.difficulty,
                "correct": self.correct, "error": self.error}


@dataclass
class EvalReport:
    attr: float
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def correct(self) -> int:
        return sum(v.correct for v in self.verdicts)

    @property
    def total(self) -> int:
        return len(self.verdicts)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def by_difficulty(self) -> dict[str, dict[str, Any]]:
        out = {}
        for bucket in BUCKETS:
            vs = [v for v in self.verdicts if v.difficulty == bucket]
            c = sum(v.correct for v in vs)
            out[bucket] = {"correct": c, "total": len(vs), "accuracy": c / len(vs) if vs else None}
        return out

    def to_dict(self) -> dict[str, Any]:
        attr = int(self.attr) if float(self.attr).is_integer() else self.attr
        return {
            "attr": attr,
            "correct": self.correct,
            "total": self.total,
            "execution_accuracy": self.accuracy,
            "by_difficulty": self.by_difficulty(),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def _cell(x: float | None) -> str:
    return "  -  " if x is None else f"{x:.3f}"


def format_table(reports: Iterable[EvalReport], reference: bool = True) -> str:
    """ATTR x difficulty accuracy table, one row per ATTR level."""
    reports = sorted(reports, key=lambda r: r.attr)
    head = f"{'ATTR':>6}  {'overall':>7}  " + "  ".join(f"{b:>6}" for b in BUCKETS) + f"  {'n':>5}"
    lines = [head, "-" * len(head)]
    for r in reports:
        per = r.by_difficulty()
        cells = "  ".join(f"{_cell(per[b]['accuracy']):>6}" for b in BUCKETS)
        lines.append(f"{r.attr:>5g}%  {_cell(r.accuracy):>7}  {cells}  {r.total:>5}")
    if reference:
        lines.append("")
        lines.append("published reference (hosted model, context only):")
        for i, attr in enumerate(ATTR_LEVELS):
            cells = "  ".join(f"{PUBLISHED_REFERENCE[b][i]:>6.2f}" for b in BUCKETS)
            lines.append(f"{attr:>5}%  {PUBLISHED_REFERENCE['overall'][i]:>7.2f}  {cells}")
    return "\n".join(lines)


class GoldCache:
    """Gold results on original databases, shared across ATTR levels."""

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self._results: dict[str, ResultTable] = {}

    def get(self, q: Question) -> ResultTable:
        if q.question_id not in self._results:
            self._results[q.question_id] = execute_gold(self.corpus.db_path(q.db_id), q.query)
        return self._results[q.question_id]


def evaluate(predictions: Mapping[str, Any], corpus: Corpus, instance: BenchmarkInstance,
             server: ServerHandle | str | None, gold: GoldCache | None = None,
             questions: Iterable[Question] | None = None) -> EvalReport:
    """Score predictions (SQL text or a :class:`ResultTable` per question id).

    Missing predictions and execution errors count as incorrect.
    """
    gold = gold or GoldCache(corpus)
    report = EvalReport(instance.config.attr)
    pool = list(questions) if questions is not None else [
        q for q in corpus.questions if q.db_id in instance.databases
    ]
    for q in pool:
        db = instance.databases[q.db_id]
        base = server.base_url(q.db_id) if isinstance(server, ServerHandle) else (
            f"{server.rstrip('/')}/{q.db_id}" if server else None)
        ordered = has_top_level_order(parse(q.query))
        pred = predictions.get(q.question_id)
        error = None
        try:
            if pred is None:
                raise FedSQLError("no prediction")
            result = pred if isinstance(pred, ResultTable) else run_federated(pred, db, base)
            ok = compare_result_sets(result, gold.get(q), ordered=ordered)
        except FedSQLError as exc:
            ok, error = False, f"{type(exc).__name__}: {exc}"
        report.verdicts.append(Verdict(q.question_id, q.db_id, q.difficulty, ok, error))
    return report


def gold_predictions(corpus: Corpus) -> dict[str, str]:
    return {q.question_id: q.query for q in corpus.questions}


def sweep(corpus: Corpus, attrs: Iterable[float] = ATTR_LEVELS, seed: int = 0,
          predict: Callable[[Corpus, BenchmarkInstance, ServerHandle], Mapping[str, Any]] | None = None,
          workdir: str | Path | None = None) -> list[EvalReport]:
    """Mutate, serve and evaluate at each ATTR level. Defaults to gold predictions."""
    base = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="fedsql-sweep-"))
    gold = GoldCache(corpus)
    reports = []
    for attr in attrs:
        instance = mutate(corpus, BenchmarkConfig(attr, seed, corpus.db_ids), base / f"attr_{attr:g}")
        with serve(instance) as handle:
            preds = predict(corpus, instance, handle) if predict else gold_predictions(corpus)
            reports.append(evaluate(preds, corpus, instance, handle, gold))
    return reports
