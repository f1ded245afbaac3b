import os

import pytest
from hypothesis import HealthCheck, settings

from monorule.problems import random_corpus
from monorule.shape import classify

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion -> list of (label, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[str, list[tuple[str, bool, str]]] = {}


@pytest.fixture(scope="session")
def corpus():
    return random_corpus(200, seed=20240917)


@pytest.fixture(scope="session")
def corpus_verdicts(corpus):
    return [classify(item.problem) for item in corpus]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        for label, ok, detail in ACCEPTANCE[crit]:
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit}: {label}  {detail}")
