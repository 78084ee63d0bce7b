import numpy as np
import pytest
from hypothesis import settings

# fixed example streams keep the suite reproducible run to run
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


def random_psd(rng, n, real=False, spectrum=(0.0, 1.0)):
    """Hermitian matrix with eigenvalues drawn uniformly from ``spectrum``."""
    X = rng.normal(size=(n, n))
    if not real:
        X = X + 1j * rng.normal(size=(n, n))
    Q, _ = np.linalg.qr(X)
    w = rng.uniform(*spectrum, size=n)
    A = (Q * w) @ Q.conj().T
    return 0.5 * (A + A.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Record one PASS/FAIL line per acceptance criterion.

    Lines are echoed immediately (visible with ``-s``) and repeated in the
    terminal summary so they always reach the log.
    """

    def _report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
