"""Table selection, the ReAct loop and the gold-replay planner."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from fedsql.errors import PlannerError
from fedsql.federation.engine import ResultTable, Session, StepTrace
from fedsql.planner.llm import LLM
from fedsql.planner.prompt import PromptTemplate, table_selector_prompt
from fedsql.planner.tools import QUERY, Toolkit, clean_sql, table_schema
from fedsql.schema.model import TableView

DEFAULT_MAX_STEPS = 15
ANSWERED, GAVE_UP, STEP_LIMIT = "answered", "gave_up", "step_limit"


@dataclass
class ReactStep:
    thought: str
    action: str
    action_input: str
    observation: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"thought": self.thought, "action": self.action, "action_input": self.action_input,
                "observation": self.observation}


@dataclass
class PlannerResult:
    final_sql: str
    steps: list[ReactStep]
    trace: StepTrace
    status: str
    tables: tuple[str, ...] = ()
    model_calls: int = 0
    result: ResultTable | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "final_sql": self.final_sql,
            "tables": list(self.tables),
            "model_calls": self.model_calls,
            "steps": [s.to_dict() for s in self.steps],
            "trace": self.trace.to_dict(),
        }


# -- step grammar --------------------------------------------------------------

class StepFormatError(PlannerError):
    pass


@dataclass
class ParsedOutput:
    thought: str
    action: str | None = None
    action_input: str | None = None
    final_answer: str | None = None


_ACTION = re.compile(r"^[ \t]*Action[ \t]*:[ \t]*(.*?)[ \t]*$", re.M)
_INPUT = re.compile(r"^[ \t]*Action[ \t]+Input[ \t]*:[ \t]*", re.M)
_FINAL = re.compile(r"^[ \t]*Final[ \t]+Answer[ \t]*:[ \t]*", re.M)
_THOUGHT = re.compile(r"^\s*Thought\s*:\s*")


def parse_output(text: str, tool_names: tuple[str, ...] = ()) -> ParsedOutput:
    """Split one model completion into Thought / Action / Action Input / Final Answer.

    Anything from an ``Observation:`` line on is discarded, since observations
    come from the tools, not the model.
    """
    cut = re.search(r"^[ \t]*Observation[ \t]*:", text, re.M)
    if cut:
        text = text[: cut.start()]
    action = _ACTION.search(text)
    final = _FINAL.search(text)
    if action:
        thought = _THOUGHT.sub("", text[: action.start()]).strip()
        name = action.group(1).strip().strip("`'\"[]")
        if tool_names and name not in tool_names:
            raise StepFormatError(f"'{name}' is not a valid tool, try one of [{', '.join(tool_names)}]")
        inp = _INPUT.search(text, action.end())
        if not inp:
            raise StepFormatError("missing 'Action Input:' after 'Action:'")
        rest = text[inp.end():]
        stop = re.search(r"^[ \t]*(Thought|Final[ \t]+Answer)[ \t]*:", rest, re.M)
        return ParsedOutput(thought, name, (rest[: stop.start()] if stop else rest).strip())
    if final:
        thought = _THOUGHT.sub("", text[: final.start()]).strip()
        return ParsedOutput(thought, final_answer=text[final.end():].strip())
    raise StepFormatError("expected 'Action:' with 'Action Input:', or 'Final Answer:'")


def format_scratchpad(steps: list[ReactStep], note: str | None = None) -> str:
    parts = [
        f"Thought: {s.thought}\nAction: {s.action}\nAction Input: {s.action_input}\nObservation: {s.observation}\n"
        for s in steps
    ]
    if note:
        parts.append(f"Observation: {note}\n")
    return "".join(parts) + "Thought:"


# -- table selection -----------------------------------------------------------

def select_tables(question: str, view: TableView, llm: LLM | None) -> tuple[str, ...]:
    """Tables the model deems necessary; all tables when the answer names none."""
    names = view.table_names
    if not names:
        raise PlannerError("the table view is empty")
    if len(names) == 1 or llm is None:
        return names
    lines = "\n".join(f"{t.name}({', '.join(t.column_names)})" for t in view.tables)
    answer = llm(table_selector_prompt(question, lines))
    picked: list[str] = []
    for token in re.split(r"[,\n]", answer):
        table = view.table(token.strip().strip("`'\".*- "))
        if table is not None and table.name not in picked:
            picked.append(table.name)
    return tuple(picked) or names


# -- the loop --------------------------------------------------------------------

def _user_input(question: str, toolkit: Toolkit) -> str:
    view = toolkit.view
    schemas = "\n\n".join(table_schema(view.table(n)) for n in toolkit.selected if view.table(n))
    return f"Relevant tables:\n{schemas}\n\nQuestion: {question}"


def render_prompt(question: str, toolkit: Toolkit, steps: list[ReactStep], template: PromptTemplate,
                  dialect: str = "SQLite", model_answer_prefix: str = "", note: str | None = None) -> str:
    return template.render(
        dialect=dialect,
        materialized_tables=", ".join(toolkit.session.temp_tables),
        tool_descriptions=toolkit.descriptions(),
        tool_names=", ".join(toolkit.names),
        user_input=_user_input(question, toolkit),
        model_answer_prefix=model_answer_prefix,
        agent_scratchpad=format_scratchpad(steps, note),
    )


def react_loop(question: str, view: TableView, tools: Toolkit, llm: LLM, max_steps: int = DEFAULT_MAX_STEPS,
               template: PromptTemplate | None = None, dialect: str = "SQLite",
               model_answer_prefix: str = "") -> PlannerResult:
    """Drive the model until a query executes, it gives up, or ``max_steps`` model calls are spent.

    Guardrail hints and errors come back to the model as Observations. A
    malformed completion earns one retry with a format reminder; a second
    malformed completion in a row ends the session.
    """
    if tools.view is not view:
        raise PlannerError("toolkit is bound to a different table view")
    template = template or PromptTemplate.default()
    steps: list[ReactStep] = []
    calls = 0
    note: str | None = None

    def done(status: str, sql: str = "", result: ResultTable | None = None) -> PlannerResult:
        return PlannerResult(sql, steps, tools.session.trace, status, tools.selected, calls, result)

    while calls < max_steps:
        prompt = render_prompt(question, tools, steps, template, dialect, model_answer_prefix, note)
        calls += 1
        text = llm(prompt)
        try:
            parsed = parse_output(text, tools.names)
        except StepFormatError as exc:
            if note is not None:
                return done(GAVE_UP)
            note = f"Invalid format: {exc}. Reply with Thought/Action/Action Input lines or a Final Answer."
            continue
        note = None
        if parsed.action is None:
            answer = clean_sql(parsed.final_answer or "")
            if not answer or "i don't know" in answer.lower():
                return done(GAVE_UP)
            # A bare final answer is run through the query tool so the last action is always a query.
            parsed = ParsedOutput(parsed.thought, QUERY, answer)
        outcome = tools.run(parsed.action, parsed.action_input)
        steps.append(ReactStep(parsed.thought, parsed.action, parsed.action_input, outcome.observation))
        if parsed.action == QUERY and outcome.ok:
            return done(ANSWERED, outcome.sql or "", outcome.result)
    return done(STEP_LIMIT)


def gold_replay(question_id: str, gold_sql: str, tools: Toolkit | None = None) -> PlannerResult:
    """Emit the gold query unchanged as a single query action."""
    thought = f"Replaying the reference query for {question_id}."
    if tools is None:
        step = ReactStep(thought, QUERY, gold_sql)
        return PlannerResult(gold_sql, [step], StepTrace(), ANSWERED)
    outcome = tools.query(gold_sql)
    step = ReactStep(thought, QUERY, gold_sql, outcome.observation)
    status = ANSWERED if outcome.ok else GAVE_UP
    return PlannerResult(gold_sql, [step], tools.session.trace, status, tools.selected, 0, outcome.result)


def answer(question: str, view: TableView, session: Session, llm: LLM, selector: LLM | None = None,
           max_steps: int = DEFAULT_MAX_STEPS, **kwargs: Any) -> PlannerResult:
    """Table selection followed by the ReAct loop over the selected tables."""
    selected = select_tables(question, view, selector if selector is not None else llm)
    return react_loop(question, view, Toolkit(view, session, selected), llm, max_steps, **kwargs)
