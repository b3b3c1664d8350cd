"""Command-line entry point: ``fedsql <subcommand> [options]``.

Exit codes: 0 success, 1 domain error (or violations found by ``check``),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from fedsql.bench.corpus import Corpus, bundled_corpus, load_corpus
from fedsql.bench.evaluate import ATTR_LEVELS, GoldCache, evaluate, format_table, sweep
from fedsql.bench.mutate import BenchmarkConfig, BenchmarkInstance, load_instance, mutate
from fedsql.bench.predict import PLANNERS, plan_question, planner_predictions
from fedsql.bench.server import serve
from fedsql.errors import FedSQLError, ResolutionError
from fedsql.guardrails import check, hint_for
from fedsql.planner import EndpointConfig, EndpointLLM
from fedsql.rewriter import rewrite
from fedsql.schema.model import TableView
from fedsql.sql.parser import parse

log = logging.getLogger("fedsql")


class UsageError(Exception):
    pass


def _emit(args: argparse.Namespace, payload: Any, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, default=str))
    else:
        print(text)


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FedSQLError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise FedSQLError(f"{path} is not valid JSON: {exc}") from None


def _db_list(values: Sequence[str] | None) -> tuple[str, ...]:
    out: list[str] = []
    for v in values or ():
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return tuple(out)


def _corpus(args: argparse.Namespace, instance: BenchmarkInstance | None = None) -> Corpus:
    if getattr(args, "corpus", None):
        return load_corpus(args.corpus)
    if instance is not None:
        recorded = Path(instance.manifest().get("corpus", ""))
        if (recorded / "dev.json").exists():
            return load_corpus(recorded)
        return bundled_corpus(tuple(instance.databases))
    return bundled_corpus()


def _view(args: argparse.Namespace) -> TableView:
    if args.view:
        return TableView.from_dict(_read_json(args.view))
    if args.instance and args.db:
        return load_instance(args.instance).databases[args.db].view
    raise UsageError("pass --view FILE, or --instance DIR with --db ID")


def _sql(args: argparse.Namespace) -> str:
    if args.sql is not None:
        return args.sql
    if args.sql_file:
        return Path(args.sql_file).read_text(encoding="utf-8")
    raise UsageError("pass --sql TEXT or --sql-file FILE")


def _parse_for(sql: str, view: TableView) -> Any:
    try:
        return parse(sql, catalog=view)
    except ResolutionError:
        return parse(sql)


def _endpoint(args: argparse.Namespace) -> EndpointConfig:
    return EndpointConfig.resolve(args.config, url=args.endpoint, model=args.model, timeout=args.timeout,
                                  temperature=args.temperature)


# -- subcommands ---------------------------------------------------------------

def cmd_gen_bench(args: argparse.Namespace) -> int:
    corpus = _corpus(args)
    dbs = _db_list(args.db)
    if dbs:
        corpus = corpus.subset(dbs)
    instance = mutate(corpus, BenchmarkConfig(args.attr, args.seed, corpus.db_ids), args.out)
    manifest = instance.manifest()
    lines = [f"instance written to {instance.root} (attr {args.attr:g}%, seed {args.seed})"]
    for db_id, db in instance.databases.items():
        replaced = ", ".join(db.replaced) or "none"
        lines.append(f"  {db_id}: {len(db.replaced)}/{len(db.tables)} tables replaced ({replaced})")
    _emit(args, manifest, "\n".join(lines))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    handle = serve(instance, args.host, args.port)
    paths = [f"/{db_id}/{t}" for db_id, db in instance.databases.items() for t in db.replaced]
    _emit(args, {"url": handle.url, "endpoints": paths},
          f"serving {len(paths)} endpoint(s) on {handle.url}\n" + "\n".join(f"  {p}" for p in paths))
    sys.stdout.flush()
    try:
        handle.wait()
    except KeyboardInterrupt:
        pass
    finally:
        handle.stop()
    return 0


def _predict(args: argparse.Namespace, corpus: Corpus, instance: BenchmarkInstance, server: Any) -> dict:
    if args.predictions and args.predictions != "gold":
        return {str(k): v for k, v in _read_json(args.predictions).items()}
    planner = "gold-replay" if args.predictions == "gold" else args.planner
    scripts = _read_json(args.script) if args.script else None
    factory = (lambda: EndpointLLM(_endpoint(args))) if planner == "llm" else None
    questions = [q for q in corpus.questions if q.db_id in instance.databases]
    if args.limit:
        questions = questions[: args.limit]
    return planner_predictions(planner, corpus, instance, server, llm_factory=factory, scripts=scripts,
                               max_steps=args.max_steps, questions=questions)


def cmd_eval(args: argparse.Namespace) -> int:
    reports = []
    if args.instance:
        for path in args.instance:
            instance = load_instance(path)
            corpus = _corpus(args, instance)
            questions = [q for q in corpus.questions if q.db_id in instance.databases]
            if args.limit:
                questions = questions[: args.limit]
            gold = GoldCache(corpus)
            if args.server:
                preds = _predict(args, corpus, instance, args.server)
                reports.append(evaluate(preds, corpus, instance, args.server, gold, questions))
            else:
                with serve(instance) as handle:
                    preds = _predict(args, corpus, instance, handle)
                    reports.append(evaluate(preds, corpus, instance, handle, gold, questions))
    else:
        corpus = _corpus(args)
        dbs = _db_list(args.db)
        if dbs:
            corpus = corpus.subset(dbs)
        attrs = [float(a) for a in args.attr.split(",")] if args.attr else list(ATTR_LEVELS)
        if args.predictions == "gold" or (not args.predictions and args.planner == "gold-replay"):
            predict = None
        else:
            def predict(c: Corpus, inst: BenchmarkInstance, handle: Any) -> dict:
                return _predict(args, c, inst, handle)
        reports = sweep(corpus, attrs, args.seed, predict, args.workdir)
    overall = [f"ATTR {r.attr:g}%: execution accuracy {r.accuracy:.3f} ({r.correct}/{r.total})" for r in reports]
    text = format_table(reports, reference=not args.no_reference) + "\n\n" + "\n".join(overall)
    _emit(args, {"reports": [r.to_dict() for r in reports]}, text)
    return 0


def cmd_rewrite(args: argparse.Namespace) -> int:
    view = _view(args)
    sql = _sql(args)
    ast = _parse_for(sql, view)
    rq = rewrite(ast, view, strict=args.strict)
    out = sql if rq.ast is ast else rq.sql
    payload = rq.to_dict()
    payload["sql"] = out
    _emit(args, payload, out)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    view = _view(args)
    violations = check(_parse_for(_sql(args), view), view)
    hints = [hint_for(v) for v in violations]
    text = "\n".join(f"{v.location.line}:{v.location.column}: {v.rule}: {h.text}"
                     for v, h in zip(violations, hints)) or "no violations"
    _emit(args, {"violations": [dict(v.to_dict(), hint=h.text) for v, h in zip(violations, hints)]}, text)
    return 1 if violations else 0


def cmd_ask(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance)
    db_id = args.db or (next(iter(instance.databases)) if len(instance.databases) == 1 else None)
    if db_id not in instance.databases:
        raise UsageError("pass --db with one of: " + ", ".join(instance.databases))
    db = instance.databases[db_id]
    question, gold_sql, qid = args.question, None, args.question_id or ""
    if args.planner == "gold-replay":
        if not qid:
            raise UsageError("the gold-replay planner needs --question-id")
        q = _corpus(args, instance).question(qid)
        question, gold_sql = q.question, q.query
    if not question:
        raise UsageError("pass --question TEXT")
    script = _read_json(args.script) if args.script else None
    if isinstance(script, dict):
        script = script.get(qid) or script.get(question)
    llm = EndpointLLM(_endpoint(args)) if args.planner == "llm" else None

    def run(base: str | None) -> Any:
        return plan_question(args.planner, question, db, base, question_id=qid, gold_sql=gold_sql, llm=llm,
                             script=script, max_steps=args.max_steps)

    if args.server:
        result = run(f"{args.server.rstrip('/')}/{db_id}")
    else:
        with serve(instance) as handle:
            result = run(handle.base_url(db_id))
    payload = result.to_dict()
    if result.result is not None:
        payload["result"] = result.result.to_dict()
    lines = [f"status: {result.status}", f"sql: {result.final_sql or '-'}"]
    if result.result is not None:
        lines += ["", result.result.format()]
    if args.explain:
        lines += ["", "trace:", result.trace.format() or "(empty)"]
    if not args.explain:
        payload.pop("trace", None)
    _emit(args, payload, "\n".join(lines))
    return 0 if result.status == "answered" else 1


# -- parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _endpoint_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", help="completion endpoint URL (overrides FEDSQL_ENDPOINT_URL)")
    p.add_argument("--model", help="model id sent to the endpoint")
    p.add_argument("--timeout", type=float, help="endpoint timeout in seconds")
    p.add_argument("--temperature", type=float)
    p.add_argument("--config", help="JSON endpoint config file (lowest precedence)")
    p.add_argument("--script", help="JSON file of scripted completions for the stub planner")
    p.add_argument("--max-steps", type=int, default=15)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsql", description="Federated text-to-SQL toolkit.")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-bench", help="replace an ATTR share of tables with mock APIs")
    p.add_argument("--corpus", help="Spider-layout corpus directory (default: bundled corpus)")
    p.add_argument("--db", action="append", help="database id (repeatable or comma-separated)")
    p.add_argument("--attr", type=float, required=True, help="percentage of tables to replace")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="instance directory to write")
    _common(p)
    p.set_defaults(func=cmd_gen_bench)

    p = sub.add_parser("serve", help="serve an instance's APIs until interrupted")
    p.add_argument("--instance", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    _common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="execution accuracy over instances or an ATTR sweep")
    p.add_argument("--instance", action="append", help="instance directory (repeatable)")
    p.add_argument("--corpus", help="corpus with the original databases (default: recorded or bundled)")
    p.add_argument("--db", action="append", help="databases for a sweep (default: all)")
    p.add_argument("--attr", help="comma-separated ATTR levels for a sweep (default: 0,20,...,100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workdir", help="where sweep instances are written (default: a temp dir)")
    p.add_argument("--predictions", help="'gold' or a JSON file mapping question id to SQL")
    p.add_argument("--planner", choices=PLANNERS, default="gold-replay")
    p.add_argument("--server", help="base URL of an already running mock server")
    p.add_argument("--limit", type=int, help="only the first N questions")
    p.add_argument("--no-reference", action="store_true", help="omit the published reference numbers")
    _endpoint_flags(p)
    _common(p)
    p.set_defaults(func=cmd_eval)

    for name, func, helptext in (("rewrite", cmd_rewrite, "rewrite SQL against a table view"),
                                 ("check", cmd_check, "run the guardrails on SQL")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--view", help="table view JSON file")
        p.add_argument("--instance", help="instance directory (with --db)")
        p.add_argument("--db")
        p.add_argument("--sql")
        p.add_argument("--sql-file")
        if name == "rewrite":
            p.add_argument("--strict", action="store_true", help="fail on type-incompatible pushdown")
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("ask", help="answer one question with a planner")
    p.add_argument("--instance", required=True)
    p.add_argument("--db")
    p.add_argument("--question")
    p.add_argument("--question-id", help="corpus question id (required by gold-replay)")
    p.add_argument("--corpus")
    p.add_argument("--planner", choices=PLANNERS, default="llm")
    p.add_argument("--server", help="base URL of an already running mock server")
    p.add_argument("--explain", action="store_true", help="print the step trace (names and counts only)")
    _endpoint_flags(p)
    _common(p)
    p.set_defaults(func=cmd_ask)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except FedSQLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
