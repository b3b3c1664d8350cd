"""Federated execution: embedded engine plus API-backed table functions."""

from fedsql.federation.engine import (
    ApiCall,
    ExecContext,
    ResultTable,
    Session,
    StepRecord,
    StepTrace,
    call_api,
    execute,
    materialize_temp,
)
from fedsql.federation.http import coerce_rows, coerce_value

__all__ = [
    "ApiCall",
    "ExecContext",
    "ResultTable",
    "Session",
    "StepRecord",
    "StepTrace",
    "call_api",
    "coerce_rows",
    "coerce_value",
    "execute",
    "materialize_temp",
]
