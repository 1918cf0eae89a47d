import warnings

import pytest
from hypothesis import settings

from ocular.diagnostics import NumericalDegeneracyWarning

settings.register_profile("ocular", deadline=None, max_examples=60)
settings.load_profile("ocular")


@pytest.fixture(autouse=True)
def _quiet_flags():
    # flagged degeneracies are asserted explicitly where they matter
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalDegeneracyWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
