import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Write one PASS/FAIL line to the terminal, then assert."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def check(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        if tr is not None:
            tr.ensure_newline()
            tr.write_line(line)
        else:
            print(line)
        assert ok, detail

    return check
