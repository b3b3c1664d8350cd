"""Question answering: table selection, the ReAct loop and gold replay."""

from fedsql.planner.llm import EndpointConfig, EndpointLLM, LexicalSelector, ScriptedLLM, complete
from fedsql.planner.prompt import PLACEHOLDERS, PromptTemplate, fill
from fedsql.planner.react import (
    ANSWERED,
    GAVE_UP,
    STEP_LIMIT,
    ParsedOutput,
    PlannerResult,
    ReactStep,
    StepFormatError,
    answer,
    gold_replay,
    parse_output,
    react_loop,
    render_prompt,
    select_tables,
)
from fedsql.planner.tools import Tool, Toolkit, ToolResult, clean_sql, table_schema

__all__ = [
    "ANSWERED", "GAVE_UP", "STEP_LIMIT", "PLACEHOLDERS",
    "EndpointConfig", "EndpointLLM", "LexicalSelector", "ParsedOutput", "PlannerResult", "PromptTemplate",
    "ReactStep", "ScriptedLLM", "StepFormatError", "Tool", "ToolResult", "Toolkit",
    "answer", "clean_sql", "complete", "fill", "gold_replay", "parse_output", "react_loop",
    "render_prompt", "select_tables", "table_schema",
]
