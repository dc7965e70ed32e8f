import functools
import sys

import pytest

from solvol import models


@functools.lru_cache(maxsize=None)
def generated(key):
    return models.generated_model(key)


METRIC_MEASURE_KEYS = list(models.PERTURBED_GAUSSIANS)
FLAT_QE_KEYS = list(models.FLAT_QE_MODELS)


@pytest.fixture(scope="session")
def gen():
    return generated


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
