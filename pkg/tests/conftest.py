import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

os.environ.setdefault("NUMBA_CACHE_DIR", "/tmp/slezip-numba-cache")

settings.register_profile("slezip", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("slezip")


def upper_sqrt(z):
    """Square root with non-negative imaginary part."""
    r = np.sqrt(np.asarray(z, complex))
    return np.where(r.imag < 0, -r, r)


@pytest.fixture(scope="session")
def sle_chain():
    from slezip import MapChain, sample_sle_driving
    return MapChain.from_path(sample_sle_driving(2.0, 1e-4, 0.5, 11))


@pytest.fixture(scope="session")
def zipper_args():
    # kappa, T, replicates, seed
    return 2.0, 0.3, 200, 2024


@pytest.fixture(scope="session")
def zipper_runs(zipper_args):
    from slezip import run_zipper
    return run_zipper(*zipper_args)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; asserts after recording."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(label, ok, detail):
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
