import os
import tempfile
from pathlib import Path

# Settings are read at import time; point the cache at a throwaway database first.
_DB_DIR = tempfile.mkdtemp(prefix="nearcrit-tests-")
os.environ["NEARCRIT_DATABASE_URL"] = f"sqlite+aiosqlite:///{Path(_DB_DIR) / 'test.db'}"
os.environ.setdefault("NEARCRIT_LOG_LEVEL", "WARNING")

import pytest  # noqa: E402


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"
