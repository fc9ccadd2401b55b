import functools

import numpy as np
import pytest
from hypothesis import settings

from cf_audit.data import make_half_moons, split, standardize

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def moons_split(n=500, noise=0.2, seed=0):
    ds = make_half_moons(n, noise, seed)
    tr, te = split(ds, 0.7, seed)
    tr, te, _ = standardize(tr, te)
    return tr, te


@pytest.fixture
def moons():
    return moons_split()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
