import shutil
from pathlib import Path

import numpy as np
import pytest

from app.utils.cache import clear_cache

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def _fresh_cache():
    clear_cache()
    yield
    clear_cache()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def screen_copy(tmp_path) -> Path:
    """The 4x4 fixture screenshot and scoring dataset copied into a scratch dir."""
    for name in ("screen_4x4.pgm", "score_4x4.jsonl"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    return tmp_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
