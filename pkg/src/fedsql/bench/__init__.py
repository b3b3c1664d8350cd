"""Benchmark kit: ATTR mutation, mock API serving and execution-accuracy evaluation."""

from fedsql.bench.corpus import Corpus, Question, build_bundled_corpus, bundled_corpus, load_corpus
from fedsql.bench.evaluate import (
    EvalReport,
    GoldCache,
    Verdict,
    compare_result_sets,
    evaluate,
    format_table,
    sweep,
)
from fedsql.bench.hardness import classify
from fedsql.bench.mutate import (
    BenchmarkConfig,
    BenchmarkInstance,
    choose_tables,
    load_instance,
    mutate,
    replaced_count,
)
from fedsql.bench.server import ServerHandle, serve

__all__ = [
    "BenchmarkConfig",
    "BenchmarkInstance",
    "Corpus",
    "EvalReport",
    "GoldCache",
    "Question",
    "ServerHandle",
    "Verdict",
    "build_bundled_corpus",
    "bundled_corpus",
    "choose_tables",
    "classify",
    "compare_result_sets",
    "evaluate",
    "format_table",
    "load_corpus",
    "load_instance",
    "mutate",
    "replaced_count",
    "serve",
    "sweep",
]
