"""Exception hierarchy shared by every subsystem."""

from __future__ import annotations


class FedSQLError(Exception):
    """Base class for all domain errors raised by the toolkit."""


class SchemaError(FedSQLError):
    """Invalid schema object or failed schema derivation."""


class SchemaParseError(SchemaError):
    def __init__(self, message: str, statement: str = ""):
        self.statement = statement
        snippet = " ".join(statement.split())[:120]
        super().__init__(f"{message}: {snippet!r}" if statement else message)


class MappingError(SchemaError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MissingMappingError(SchemaError):
    pass


class OrphanMappingError(SchemaError):
    pass


class SQLSyntaxError(FedSQLError):
    def __init__(self, message: str, pos: int = 0, line: int = 1, column: int = 1):
        self.pos = pos
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnsupportedConstructError(SQLSyntaxError):
    def __init__(self, construct: str, pos: int = 0, line: int = 1, column: int = 1):
        self.construct = construct
        super().__init__(f"unsupported construct: {construct}", pos, line, column)


class ResolutionError(FedSQLError):
    """Column or alias that cannot be resolved to exactly one table reference."""


class RewriteError(FedSQLError):
    pass


class UnknownTableError(RewriteError):
    def __init__(self, table: str):
        self.table = table
        super().__init__(f"table {table!r} is not part of the table view")


class BindingError(RewriteError):
    pass


class ExecutionError(FedSQLError):
    def __init__(self, message: str, entity: str | None = None, status: int | None = None):
        self.entity = entity
        self.status = status
        super().__init__(message)


class CoercionError(ExecutionError):
    def __init__(self, message: str, entity: str | None = None, row_index: int | None = None):
        self.row_index = row_index
        super().__init__(message, entity=entity)


class PlannerError(FedSQLError):
    pass


class PromptError(PlannerError):
    pass


class BenchmarkError(FedSQLError):
    pass
