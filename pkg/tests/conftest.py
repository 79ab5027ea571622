from pathlib import Path

import numpy as np
import pytest

from drowsiness import synth
from drowsiness.haar import load_cascade
from drowsiness.pipeline import DATA_DIR


@pytest.fixture(scope="session")
def face_cascade_path() -> Path:
    return DATA_DIR / "face.cascade"


@pytest.fixture(scope="session")
def face_cascade(face_cascade_path):
    return load_cascade(face_cascade_path)


@pytest.fixture(scope="session")
def eye_cascade_paths() -> dict[str, Path]:
    return {"open": DATA_DIR / "eye_open.cascade", "closed": DATA_DIR / "eye_closed.cascade"}


@pytest.fixture(scope="session")
def eye_models(tmp_path_factory) -> dict[str, Path]:
    """Toy eigen, NIR and SVM eye models, trained once per session."""
    return synth.toy_eye_models(tmp_path_factory.mktemp("models"), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_cascade():
    import toy_blobs

    return toy_blobs.train()


# --- acceptance report -------------------------------------------------------

_CRITERIA: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        verdict = "PASS" if kind is None else "FAIL"
        note = self.detail if kind is None else (str(exc).splitlines() or [kind.__name__])[0]
        line = f"criterion {self.number:2d} {verdict}: {self.title}" + (f" ({note})" if note else "")
        _CRITERIA[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c:`` records one pass/fail line."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
