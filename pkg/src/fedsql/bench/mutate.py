"""Replace a fraction (ATTR) of each database's tables with equivalent retrieval APIs.

Instance directory layout::

    manifest.json
    db/<db_id>.sqlite                 pruned database
    specs/<db_id>/<table>.json        OpenAPI document per replaced table
    fixtures/<db_id>/<table>.jsonl    original rows, one canonical JSON object per line
    views/<db_id>.json                unified table view
"""

from __future__ import annotations

import json
import random
import shutil
import sqlite3
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

from fedsql.errors import BenchmarkError
from fedsql.schema.model import AbstractSchema, ApiField, ApiMapping, ApiParam, TableView, dumps
from fedsql.schema.openapi import derive_api_mapping_from_openapi, emit_openapi
from fedsql.schema.view import generate_table_view

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8000
FORMAT_VERSION = 1


@dataclass(frozen=True)
class BenchmarkConfig:
    attr: float
    seed: int = 0
    databases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "databases", tuple(self.databases))
        if not 0 <= self.attr <= 100:
            raise BenchmarkError(f"attr must be within [0, 100], got {self.attr}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise BenchmarkError("seed must fit in 64 bits")

    def to_dict(self) -> dict[str, Any]:
        attr = int(self.attr) if float(self.attr).is_integer() else self.attr
        return {"attr": attr, "seed": self.seed, "databases": list(self.databases)}


def replaced_count(attr: float, n: int) -> int:
    """k = max(1, round-half-up(attr/100 * n)) for attr > 0, capped at n; 0 when attr = 0."""
    if attr <= 0 or n == 0:
        return 0
    exact = Fraction(str(attr)) * n / 100
    k = int(exact + Fraction(1, 2))  # floor(x + 1/2) is round-half-up for x >= 0
    return min(n, max(1, k))


def choose_tables(db_id: str, tables: Iterable[str], attr: float, seed: int) -> list[str]:
    """The seeded per-database choice of tables to replace, in sorted order."""
    names = sorted(tables)
    k = replaced_count(attr, len(names))
    rng = random.Random(f"{seed}/{db_id}")
    return sorted(rng.sample(names, k))


def mapping_for_table(db_id: str, entity: Any, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT) -> ApiMapping:
    """GET /<db_id>/<table> with one optional equality filter per column."""
    return ApiMapping(
        entity_name=entity.name,
        url=f"http://{host}:{port}/{db_id}/{entity.name}",
        method="GET",
        input_params=tuple(ApiParam(a.name, a.value_type, False) for a in entity.attributes),
        output_fields=tuple(ApiField(a.name, a.value_type) for a in entity.attributes),
    )


def canonical_line(columns: list[str], row: tuple) -> str:
    return json.dumps(dict(zip(columns, row)), sort_keys=True, ensure_ascii=False)


def dump_fixture(con: sqlite3.Connection, table: str) -> list[str]:
    cur = con.execute(f'SELECT * FROM "{table}" ORDER BY rowid')
    columns = [d[0] for d in cur.description]
    return [canonical_line(columns, row) for row in cur]


@dataclass
class DatabaseInstance:
    db_id: str
    tables: list[tuple[str, bool]]
    db_path: Path
    view: TableView
    mappings: dict[str, ApiMapping] = field(default_factory=dict)
    spec_paths: dict[str, Path] = field(default_factory=dict)
    fixture_paths: dict[str, Path] = field(default_factory=dict)

    @property
    def replaced(self) -> list[str]:
        return [t for t, r in self.tables if r]


@dataclass
class BenchmarkInstance:
    root: Path
    config: BenchmarkConfig
    databases: dict[str, DatabaseInstance]

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def manifest(self) -> dict[str, Any]:
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def fixture_rows(self, db_id: str, table: str) -> list[dict]:
        path = self.databases[db_id].fixture_paths[table]
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def mutate_database(db_id: str, db_path: str | Path, schema: AbstractSchema, cfg: BenchmarkConfig,
                    out_dir: str | Path) -> DatabaseInstance:
    out = Path(out_dir)
    db_path = Path(db_path)
    if not db_path.exists():
        raise BenchmarkError(f"cannot read database {db_path}")
    names = [e.name for e in schema.entities]
    chosen = set(choose_tables(db_id, names, cfg.attr, cfg.seed))

    pruned = out / "db" / f"{db_id}.sqlite"
    pruned.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(db_path, pruned)

    inst = DatabaseInstance(db_id, [(n, n in chosen) for n in names], pruned, TableView())
    if chosen:
        src = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
        try:
            for name in sorted(chosen):
                entity = schema.entity(name)
                mapping = mapping_for_table(db_id, entity)
                inst.mappings[name] = mapping
                spec_path = out / "specs" / db_id / f"{name}.json"
                spec_path.parent.mkdir(parents=True, exist_ok=True)
                spec_path.write_text(json.dumps(emit_openapi(mapping, f"{db_id}.{name}"), indent=2,
                                                sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
                inst.spec_paths[name] = spec_path
                fx_path = out / "fixtures" / db_id / f"{name}.jsonl"
                fx_path.parent.mkdir(parents=True, exist_ok=True)
                lines = dump_fixture(src, name)
                fx_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
                inst.fixture_paths[name] = fx_path
        finally:
            src.close()
        con = sqlite3.connect(pruned)
        try:
            con.execute("PRAGMA foreign_keys = OFF")
            for name in sorted(chosen):
                con.execute(f'DROP TABLE "{name}"')
            con.commit()
            con.execute("VACUUM")
        finally:
            con.close()

    api_schema = schema.with_source_kinds(chosen)
    inst.view = generate_table_view(api_schema, [inst.mappings[n] for n in sorted(chosen)])
    view_path = out / "views" / f"{db_id}.json"
    view_path.parent.mkdir(parents=True, exist_ok=True)
    view_path.write_text(dumps(inst.view), encoding="utf-8")
    return inst


def mutate(corpus: Any, cfg: BenchmarkConfig, out_dir: str | Path) -> BenchmarkInstance:
    """Build an ATTR instance of ``corpus`` for every database in ``cfg`` (all when empty)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    db_ids = cfg.databases or tuple(corpus.db_ids)
    cfg = BenchmarkConfig(cfg.attr, cfg.seed, db_ids)
    databases = {}
    for db_id in db_ids:
        databases[db_id] = mutate_database(db_id, corpus.db_path(db_id), corpus.schema(db_id), cfg, out)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "corpus": str(corpus.root),
        "databases": {
            db_id: {
                "tables": [{"name": t, "replaced": r} for t, r in inst.tables],
                "n_tables": len(inst.tables),
                "n_replaced": len(inst.replaced),
                "db": str(inst.db_path.relative_to(out)),
                "view": f"views/{db_id}.json",
                "specs": {t: str(p.relative_to(out)) for t, p in sorted(inst.spec_paths.items())},
                "fixtures": {t: str(p.relative_to(out)) for t, p in sorted(inst.fixture_paths.items())},
            }
            for db_id, inst in databases.items()
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return BenchmarkInstance(out, cfg, databases)


def load_instance(root: str | Path) -> BenchmarkInstance:
    """Re-open an instance directory from its manifest (specs are re-derived from OpenAPI)."""
    root = Path(root)
    try:
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise BenchmarkError(f"{root} is not a benchmark instance (no manifest.json)") from None
    c = manifest["config"]
    cfg = BenchmarkConfig(c["attr"], c["seed"], tuple(c["databases"]))
    databases = {}
    for db_id, entry in manifest["databases"].items():
        view = TableView.from_dict(json.loads((root / entry["view"]).read_text(encoding="utf-8")))
        inst = DatabaseInstance(db_id, [(t["name"], t["replaced"]) for t in entry["tables"]],
                                root / entry["db"], view)
        for table, rel in entry["specs"].items():
            inst.spec_paths[table] = root / rel
            (mapping,) = derive_api_mapping_from_openapi((root / rel).read_text(encoding="utf-8"))
            inst.mappings[table] = mapping
        inst.fixture_paths = {t: root / rel for t, rel in entry["fixtures"].items()}
        databases[db_id] = inst
    return BenchmarkInstance(root, cfg, databases)
