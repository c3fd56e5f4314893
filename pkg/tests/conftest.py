import math

import numpy as np
import pytest
from hypothesis import settings

from hrlab import DomainSpec, HRParameters, build_basis

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE = {}


def record_acceptance(number: int, ok: bool, detail: str):
    ACCEPTANCE[number] = (ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")


@pytest.fixture(scope="session")
def params():
    return HRParameters()


@pytest.fixture(scope="session")
def basis_1d():
    return build_basis(DomainSpec.for_modes((math.pi,), 16), 16)


@pytest.fixture(scope="session")
def basis_2d():
    return build_basis(DomainSpec.for_modes((math.pi, 2.0), 12), 12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
