import warnings

import pytest

from wavetrans.modes import reference_config
from wavetrans.scattering import build_model

ACCEPTANCE_KEY = pytest.StashKey[list]()
KINDS = ("medium", "boundary")
ELLS = (1, 3, 5)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    store = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        store.append((number, line))
        return ok

    return record


_MODELS = {}


def reference_model(kind: str, ell: float = 1):
    key = (kind, ell)
    if key not in _MODELS:
        cfg = reference_config(ell, kind)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            basis, model = build_model(cfg)
        _MODELS[key] = (cfg, basis, model)
    return _MODELS[key]


@pytest.fixture(scope="session")
def six_configs():
    return {(k, e): reference_model(k, e) for k in KINDS for e in ELLS}
