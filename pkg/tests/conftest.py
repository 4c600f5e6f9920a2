from __future__ import annotations

from fractions import Fraction

import pytest

from dynarisk.fixtures import paper53_process, paper53_tree


@pytest.fixture(scope="session")
def tree():
    return paper53_tree()


@pytest.fixture(scope="session")
def X(tree):
    return paper53_process(tree)


@pytest.fixture(scope="session")
def ones(tree):
    return {l: Fraction(1) for l in tree.leaves}


def leaf(tree, *values):
    """Leaf function from values listed in leaf order."""
    return dict(zip(tree.leaves, (Fraction(v) for v in values)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
