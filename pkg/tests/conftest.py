import time

import pytest

SESSION = {"start": None}


def pytest_sessionstart(session):
    SESSION["start"] = time.perf_counter()


def pytest_collection_modifyitems(config, items):
    # the acceptance module measures the whole-suite wall time, so it goes last
    items.sort(key=lambda item: item.module.__name__.endswith("test_acceptance"))


@pytest.fixture
def elapsed():
    return lambda: time.perf_counter() - SESSION["start"]
