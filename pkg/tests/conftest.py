from __future__ import annotations

from pathlib import Path

import pytest

from authmine.ir import load_program

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "src" / "authmine" / "fixtures" / "userrestriction"
DATA_DIR = Path(__file__).resolve().parent / "data"
LIBRARY = (FIXTURE_DIR / "library.ir").read_text()

UMS = "com.android.server.pm.UserManagerService"


@pytest.fixture(scope="session")
def two_entry_program():
    return load_program([FIXTURE_DIR / n for n in ("library.ir", "restrictions_utils.ir", "two_entries.ir")])


@pytest.fixture(scope="session")
def ums_program():
    return load_program([FIXTURE_DIR / n for n in ("library.ir", "restrictions_utils.ir", "user_manager.ir")])
