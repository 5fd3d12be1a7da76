import cmath
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "repo", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def rand_complex(rng, scale=1.0):
    return complex(rng.normal(0, scale), rng.normal(0, scale))


def rand_matrix(rng, min_det=1e-3):
    while True:
        A = tuple(rand_complex(rng) for _ in range(4))
        if abs(A[0] * A[3] - A[1] * A[2]) > min_det:
            return A


def rand_su2(rng):
    a, b = rand_complex(rng), rand_complex(rng)
    n = math.hypot(abs(a), abs(b))
    a, b = a / n, b / n
    return (a, -b.conjugate(), b, a.conjugate())


def rand_point(rng):
    return rand_complex(rng, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)
matrices = st.tuples(complexes, complexes, complexes, complexes).filter(
    lambda A: abs(A[0] * A[3] - A[1] * A[2]) > 1e-2)
unit_phase = st.floats(0, 2 * math.pi).map(lambda t: cmath.exp(1j * t))


# ---------------------------------------------------------------- acceptance lines

_ACCEPTANCE: dict = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
