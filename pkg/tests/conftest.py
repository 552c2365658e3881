from pathlib import Path

import pytest

from pseudotext.corpus import read_jsonl
from pseudotext.kg import load_kg

REPO = Path(__file__).resolve().parents[1]
DATA = REPO / "data"
SCRIPTS = REPO / "scripts"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def scripts_dir() -> Path:
    return SCRIPTS


@pytest.fixture(scope="session")
def fixture_kg():
    return load_kg(DATA / "kg_fixture.jsonl")


@pytest.fixture(scope="session")
def table1_doc():
    return read_jsonl((DATA / "table1.jsonl").read_text(encoding="utf-8"))[0]
