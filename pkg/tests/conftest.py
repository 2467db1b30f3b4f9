from pathlib import Path

import pytest

from amreval.penman import read_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def identity_graphs():
    return read_corpus(FIXTURES / "identity.amr")


@pytest.fixture(scope="session")
def figure2():
    gold = read_corpus(FIXTURES / "figure2_gold.amr")[0]
    cand1 = read_corpus(FIXTURES / "figure2_cand1.amr")[0]
    cand2 = read_corpus(FIXTURES / "figure2_cand2.amr")[0]
    return gold, cand1, cand2
