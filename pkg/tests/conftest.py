import pytest
from hypothesis import settings

from retrial_osa.model import ModelParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BASELINE_RATES = dict(lambda_p=0.1, lambda_s=1.5, mu_p=0.2, mu_s=0.4)


def baseline(M, N, L, theta=2.0, **overrides):
    rates = {**BASELINE_RATES, **overrides}
    return ModelParams(M=M, N=N, L=L, theta=theta, **rates)


@pytest.fixture
def hand_params():
    return baseline(1, 1, 0)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
