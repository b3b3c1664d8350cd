"""ReAct prompt templates stored as text files under ``fedsql/data/prompts``."""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping

from fedsql.errors import PromptError

PLACEHOLDERS = (
    "dialect",
    "materialized_tables",
    "tool_descriptions",
    "tool_names",
    "user_input",
    "model_answer_prefix",
    "agent_scratchpad",
)


def read_prompt(name: str) -> str:
    return resources.files("fedsql").joinpath("data", "prompts", name).read_text(encoding="utf-8")


def placeholders(text: str) -> list[str]:
    """Field names used in ``text``, in order of appearance."""
    try:
        return [f for _, f, _, _ in string.Formatter().parse(text) if f is not None]
    except ValueError as exc:
        raise PromptError(f"malformed template: {exc}") from None


def fill(text: str, values: Mapping[str, Any]) -> str:
    """Substitute every placeholder; a placeholder without a value is an error."""
    missing = [f for f in placeholders(text) if f not in values]
    if missing:
        raise PromptError(f"unresolved placeholder(s): {', '.join(sorted(set(missing)))}")
    if any(not f.isidentifier() for f in placeholders(text)):
        raise PromptError("placeholders must be plain names")
    return text.format_map(dict(values))


@dataclass(frozen=True)
class PromptTemplate:
    prefix: str
    format_instructions: str
    suffix: str

    @classmethod
    def default(cls) -> PromptTemplate:
        return cls(read_prompt("sql_prefix.txt"), read_prompt("format_instructions.txt"), read_prompt("suffix.txt"))

    @property
    def text(self) -> str:
        return "\n\n".join(p.strip("\n") for p in (self.prefix, self.format_instructions, self.suffix)) + "\n"

    def render(self, **values: Any) -> str:
        return fill(self.text, values)


def table_selector_prompt(question: str, schema_lines: str) -> str:
    return fill(read_prompt("table_selector.txt"), {"tables": schema_lines, "question": question})
