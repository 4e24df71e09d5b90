from __future__ import annotations

import pytest

from score.kb import KnowledgeBase
from score.kdef import Interpreter, fixture_path

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    for mark in item.iter_markers("criterion"):
        n, text = mark.args
        entry = _criteria.setdefault(n, [[], True])
        if text not in entry[0]:
            entry[0].append(text)
        entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        texts, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {'; '.join(texts)}")


class Loaded:
    """A KB with fixtures loaded and every trace line captured."""

    def __init__(self, *names, **kb_args):
        self.trace: list[str] = []
        self.kb = KnowledgeBase(tracer=self.trace.append, **kb_args)
        self.interp = Interpreter(self.kb)
        self.summaries = [self.interp.load_file(fixture_path(n)) for n in names]

    def ev(self, text: str):
        from score.kdef import parse
        result = None
        for datum in parse(text):
            result = self.interp.eval_form(datum)
        return result

    def id(self, name: str) -> int:
        return self.kb.id_of(name)


@pytest.fixture
def load():
    return Loaded


@pytest.fixture
def kb():
    return KnowledgeBase()
