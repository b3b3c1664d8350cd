"""Produce predictions for a benchmark instance with one of the planners."""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

from fedsql.bench.corpus import Corpus, Question
from fedsql.bench.evaluate import context_for
from fedsql.bench.mutate import BenchmarkInstance, DatabaseInstance
from fedsql.bench.server import ServerHandle
from fedsql.errors import PlannerError
from fedsql.federation.engine import Session
from fedsql.planner import ANSWERED, LexicalSelector, PlannerResult, ScriptedLLM, Toolkit, answer, gold_replay
from fedsql.planner.llm import LLM

PLANNERS = ("gold-replay", "llm", "stub")


def plan_question(planner: str, question: str, db: DatabaseInstance, base_url: str | None, *,
                  question_id: str = "", gold_sql: str | None = None, llm: LLM | None = None,
                  script: Sequence[str] | None = None, max_steps: int = 15) -> PlannerResult:
    """Answer one question against one database of an instance; the session is closed afterwards."""
    with Session(context_for(db, base_url)) as session:
        if planner == "gold-replay":
            if gold_sql is None:
                raise PlannerError("gold replay needs the reference query of a corpus question")
            return gold_replay(question_id, gold_sql, Toolkit(db.view, session))
        if planner == "stub":
            model = ScriptedLLM(list(script or ()))
            return answer(question, db.view, session, model, LexicalSelector(db.view.catalog()), max_steps)
        if planner == "llm":
            if llm is None:
                raise PlannerError("the llm planner needs a completion endpoint")
            return answer(question, db.view, session, llm, max_steps=max_steps)
    raise PlannerError(f"unknown planner {planner!r} (expected one of {', '.join(PLANNERS)})")


def planner_predictions(planner: str, corpus: Corpus, instance: BenchmarkInstance,
                        server: ServerHandle | str | None, *, llm_factory: Callable[[], LLM] | None = None,
                        scripts: Mapping[str, Sequence[str]] | None = None, max_steps: int = 15,
                        questions: Iterable[Question] | None = None) -> dict[str, str]:
    """Final SQL per question id; questions the planner could not answer are left out."""
    llm = llm_factory() if (planner == "llm" and llm_factory) else None
    pool = list(questions) if questions is not None else [
        q for q in corpus.questions if q.db_id in instance.databases
    ]
    out: dict[str, str] = {}
    for q in pool:
        if planner == "gold-replay":
            out[q.question_id] = gold_replay(q.question_id, q.query).final_sql
            continue
        if planner == "stub" and (scripts is None or q.question_id not in scripts):
            continue
        base = server.base_url(q.db_id) if isinstance(server, ServerHandle) else (
            f"{server.rstrip('/')}/{q.db_id}" if server else None)
        result = plan_question(planner, q.question, instance.databases[q.db_id], base,
                               question_id=q.question_id, llm=llm,
                               script=(scripts or {}).get(q.question_id), max_steps=max_steps)
        if result.status == ANSWERED:
            out[q.question_id] = result.final_sql
    return out
