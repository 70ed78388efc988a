from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        def order(name):
            tag = name.split("-")[1]
            return int(tag.rstrip("abcd")), tag
        for name in sorted(RESULTS, key=order):
            terminalreporter.write_line(RESULTS[name][1])
