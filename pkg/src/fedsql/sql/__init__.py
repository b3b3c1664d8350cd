"""SQL subset: parser, AST, canonical printer and static analysis."""

from fedsql.sql.analysis import (
    Analysis,
    ColumnBinding,
    Predicate,
    TableOccurrence,
    analyze,
    conjuncts_for,
    table_refs,
)
from fedsql.sql.parser import parse, tokenize
from fedsql.sql.render import describe_table_function, render, render_expr

__all__ = [
    "Analysis",
    "ColumnBinding",
    "Predicate",
    "TableOccurrence",
    "analyze",
    "conjuncts_for",
    "describe_table_function",
    "parse",
    "render",
    "render_expr",
    "table_refs",
    "tokenize",
]
