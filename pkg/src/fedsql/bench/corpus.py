"""Text-to-SQL corpus in the usual Spider layout.

A corpus directory holds ``tables.json``, ``dev.json`` and
``database/<db_id>/<db_id>.sqlite``. A small corpus ships with the package
(DDL and data as SQL scripts plus a question file) and is materialized into
that layout by :func:`build_bundled_corpus`.
"""

from __future__ import annotations

import json
import sqlite3
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from fedsql.errors import BenchmarkError
from fedsql.schema.ddl import derive_abstract_from_db, schema_dump_from_sqlite
from fedsql.schema.model import AbstractSchema
from fedsql.sql.parser import parse

BUNDLED_DATABASES = ("museum_visit", "concert_singer", "pets_1", "employee_hire_evaluation")


@dataclass(frozen=True)
class Question:
    question_id: str
    db_id: str
    question: str
    query: str
    difficulty: str

    def to_dict(self) -> dict:
        return {"question_id": self.question_id, "db_id": self.db_id, "question": self.question,
                "query": self.query, "difficulty": self.difficulty}


@dataclass
class Corpus:
    root: Path
    questions: list[Question]
    db_ids: tuple[str, ...]
    _schemas: dict[str, AbstractSchema] = field(default_factory=dict, repr=False)

    def db_path(self, db_id: str) -> Path:
        path = self.root / "database" / db_id / f"{db_id}.sqlite"
        if not path.exists():
            raise BenchmarkError(f"database {db_id!r} not found at {path}")
        return path

    def schema(self, db_id: str) -> AbstractSchema:
        if db_id not in self._schemas:
            self._schemas[db_id] = derive_abstract_from_db(schema_dump_from_sqlite(str(self.db_path(db_id))))
        return self._schemas[db_id]

    def for_db(self, db_id: str) -> list[Question]:
        return [q for q in self.questions if q.db_id == db_id]

    def question(self, question_id: str) -> Question:
        for q in self.questions:
            if q.question_id == question_id:
                return q
        raise BenchmarkError(f"unknown question {question_id!r}")

    def subset(self, db_ids: Iterable[str]) -> Corpus:
        wanted = tuple(db_ids)
        missing = [d for d in wanted if d not in self.db_ids]
        if missing:
            raise BenchmarkError(f"unknown database(s): {', '.join(missing)}")
        return Corpus(self.root, [q for q in self.questions if q.db_id in wanted], wanted, self._schemas)


def load_corpus(root: str | Path) -> Corpus:
    """Load a Spider-layout corpus; difficulty labels are computed when absent."""
    from fedsql.bench.hardness import classify

    root = Path(root)
    try:
        entries = json.loads((root / "dev.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise BenchmarkError(f"{root} has no dev.json") from None
    db_ids: list[str] = []
    questions = []
    counters: dict[str, int] = {}
    for entry in entries:
        db = entry["db_id"]
        if db not in db_ids:
            db_ids.append(db)
        n = counters.get(db, 0)
        counters[db] = n + 1
        qid = entry.get("question_id") or f"{db}/{n:03d}"
        difficulty = entry.get("hardness") or entry.get("difficulty") or classify(parse(entry["query"]))
        questions.append(Question(qid, db, entry["question"], entry["query"], difficulty))
    return Corpus(root, questions, tuple(db_ids))


def _bundled_files() -> resources.abc.Traversable:  # type: ignore[name-defined]
    return resources.files("fedsql").joinpath("data", "corpus")


def bundled_script(db_id: str) -> str:
    return _bundled_files().joinpath(f"{db_id}.sql").read_text(encoding="utf-8")


def _tables_entry(db_id: str, con: sqlite3.Connection) -> dict:
    schema = derive_abstract_from_db(schema_dump_from_sqlite_con(con))
    table_names = [e.name for e in schema.entities]
    columns: list[list] = [[-1, "*"]]
    types = ["text"]
    pks = []
    for ti, entity in enumerate(schema.entities):
        for attr in entity.attributes:
            if attr.is_primary_key:
                pks.append(len(columns))
            columns.append([ti, attr.name])
            types.append({"integer": "number", "real": "number", "boolean": "boolean"}.get(attr.value_type, "text"))
    index = {(table_names[t].lower(), c.lower()): i for i, (t, c) in enumerate(columns) if t >= 0}
    fks = [[index[(r.from_entity.lower(), r.from_attr.lower())], index[(r.to_entity.lower(), r.to_attr.lower())]]
           for r in schema.relationships]
    return {
        "db_id": db_id,
        "table_names_original": table_names,
        "table_names": [n.lower().replace("_", " ") for n in table_names],
        "column_names_original": columns,
        "column_names": [[t, c.lower().replace("_", " ")] for t, c in columns],
        "column_types": types,
        "primary_keys": pks,
        "foreign_keys": fks,
    }


def schema_dump_from_sqlite_con(con: sqlite3.Connection) -> str:
    rows = con.execute("SELECT sql FROM sqlite_master WHERE type = 'table' AND sql IS NOT NULL ORDER BY rowid")
    return ";\n".join(r[0] for r in rows) + ";\n"


def build_bundled_corpus(dest: str | Path, db_ids: Iterable[str] = BUNDLED_DATABASES) -> Corpus:
    """Materialize the bundled corpus into ``dest`` (Spider layout) and load it."""
    from fedsql.bench.hardness import classify

    dest = Path(dest)
    wanted = tuple(db_ids)
    tables = []
    for db_id in wanted:
        db_dir = dest / "database" / db_id
        db_dir.mkdir(parents=True, exist_ok=True)
        path = db_dir / f"{db_id}.sqlite"
        if path.exists():
            path.unlink()
        con = sqlite3.connect(path)
        try:
            con.executescript(bundled_script(db_id))
            con.commit()
            tables.append(_tables_entry(db_id, con))
        finally:
            con.close()
    raw = json.loads(_bundled_files().joinpath("questions.json").read_text(encoding="utf-8"))
    dev = []
    for entry in raw:
        if entry["db_id"] in wanted:
            dev.append(dict(entry, hardness=classify(parse(entry["query"]))))
    (dest / "tables.json").write_text(json.dumps(tables, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (dest / "dev.json").write_text(json.dumps(dev, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return load_corpus(dest)


_CACHE: dict[tuple[str, ...], Corpus] = {}


def bundled_corpus(db_ids: Iterable[str] = BUNDLED_DATABASES) -> Corpus:
    """The bundled corpus built once per process into a temporary directory."""
    key = tuple(db_ids)
    if key not in _CACHE:
        tmp = tempfile.mkdtemp(prefix="fedsql-corpus-")
        _CACHE[key] = build_bundled_corpus(tmp, key)
    return _CACHE[key]
