from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture
def emissions_dir() -> Path:
    return FIXTURES / "emissions"


@pytest.fixture
def golden_dir() -> Path:
    return FIXTURES / "golden"


def emission(name: str) -> str:
    return (FIXTURES / "emissions" / f"{name}.py").read_text(encoding="utf-8")
