import functools

import numpy as np
import pytest

from pmfht.geometry import build_lbo, solve_harmonic_basis
from pmfht.models import MODELS
from pmfht.transform import build_transform

ACCEPTANCE: dict = {}


@functools.lru_cache(maxsize=None)
def cloud_transform(model: str, n: int, seed: int = 0):
    """(cloud, lbo, basis, transform) for a library model; cached across tests."""
    cloud = MODELS[model](n, seed=seed)
    lbo = build_lbo(cloud)
    basis = solve_harmonic_basis(lbo)
    return cloud, lbo, basis, build_transform(basis, lbo)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blob12():
    return cloud_transform("blob", 12, 3)


@pytest.fixture(scope="session")
def blob40():
    return cloud_transform("blob", 40, 1)


def record_acceptance(key: str, passed, detail: str) -> None:
    """Store one summary line; ``passed=None`` marks a skipped criterion."""
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    line = f"[{status}] criterion {key}: {detail}"
    ACCEPTANCE[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
