from __future__ import annotations

from pathlib import Path

import pytest

from fedsql.bench import BenchmarkConfig, bundled_corpus, mutate, serve
from fedsql.bench.evaluate import ATTR_LEVELS

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def corpus():
    return bundled_corpus()


@pytest.fixture(scope="session")
def instances(corpus, tmp_path_factory):
    """One instance per ATTR level over every bundled database, seed 0."""
    root = tmp_path_factory.mktemp("instances")
    return {attr: mutate(corpus, BenchmarkConfig(attr, 0), root / f"attr_{attr}") for attr in ATTR_LEVELS}


@pytest.fixture(scope="session")
def servers(instances):
    handles = {attr: serve(inst) for attr, inst in instances.items()}
    yield handles
    for h in handles.values():
        h.stop()


@pytest.fixture(scope="session")
def museum_full(corpus, tmp_path_factory):
    """museum_visit with every table replaced, served."""
    inst = mutate(corpus.subset(["museum_visit"]), BenchmarkConfig(100, 0),
                  Path(tmp_path_factory.mktemp("museum_full")))
    handle = serve(inst)
    yield inst, handle
    handle.stop()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
