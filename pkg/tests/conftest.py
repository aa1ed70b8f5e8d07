import numpy as np
import pytest

from ml2r.models import NestedSampler, gaussian_cos_spec, gaussian_nested_oracle


@pytest.fixture(scope="session")
def cos_sampler():
    return NestedSampler(gaussian_cos_spec())


@pytest.fixture(scope="session")
def cos_oracle():
    return gaussian_nested_oracle()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance
    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.LINES):
            terminalreporter.write_line(test_acceptance.LINES[n])
