import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
for p in (ROOT, ROOT / "tests"):
    if str(p) not in sys.path:
        sys.path.insert(0, str(p))

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def toy_dir() -> Path:
    return FIXTURES / "toy"


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv("SPREADER_GNN_THREADS", raising=False)
