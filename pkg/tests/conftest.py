from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

TOY_DIR = Path(__file__).resolve().parents[1] / "data" / "toy"


@pytest.fixture(scope="session")
def toy_dir() -> Path:
    return TOY_DIR


@pytest.fixture(scope="session")
def toy_records():
    from deathwatch.transcripts import AliasTable, read_scene_file

    aliases = AliasTable.from_csv(TOY_DIR / "aliases.csv")
    return read_scene_file(TOY_DIR / "scenes.txt", aliases)
