import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # planting / oracles helpers

from synsearch import engine, patterns, querylang
from synsearch.corpus import Corpus, read_conllu

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance_criterion(name): spec acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    mark = item.get_closest_marker("acceptance_criterion")
    if mark is not None:
        _ACCEPTANCE_RESULTS[mark.kwargs["name"]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {name}")


@pytest.fixture(scope="session")
def fixture_queries():
    return querylang.load_query_file(FIXTURES / "queries.txt")


@pytest.fixture(scope="session")
def fixture_parses():
    return read_conllu(FIXTURES / "query_parses.conllu")


@pytest.fixture(scope="session")
def fixture_patterns(fixture_queries, fixture_parses):
    """Every fixture query compiled against its frozen parse, keyed by id."""
    assert len(fixture_queries) == len(fixture_parses)
    compiled = {}
    for query, parse in zip(fixture_queries, fixture_parses):
        assert query.id == parse.id, "queries and parses must align by position"
        compiled[query.id] = patterns.compile_query(query, parse, pattern_id=query.id)
    return compiled


@pytest.fixture(scope="session")
def trigger_map():
    return querylang.load_trigger_map(FIXTURES / "triggers.json")


@pytest.fixture(scope="session")
def founded_sentence():
    sentences = read_conllu(FIXTURES / "founded.conllu")
    assert len(sentences) == 1
    return sentences[0]


@pytest.fixture(scope="session")
def planted_small():
    """Small planted corpus: 12 fully covered positives + 60 mixed negatives."""
    from planting import corpus_sentences, plant_corpus

    positives, negatives = plant_corpus(12, 60, seed=11)
    corpus = Corpus(corpus_sentences(positives, negatives))
    return corpus, positives, negatives


@pytest.fixture(scope="session")
def planted_small_index(planted_small):
    corpus, _, _ = planted_small
    return engine.build_index(corpus)


@pytest.fixture(scope="session")
def founded_patterns(fixture_patterns):
    return [fixture_patterns["founded-1"], fixture_patterns["founded-2"],
            fixture_patterns["founded-3"]]
