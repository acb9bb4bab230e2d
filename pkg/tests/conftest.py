"""Shared fixtures: the worked three- and four-country examples.

Expected values quoted in the tests for these fixtures were either
computed by hand from the vectors below or produced by the oracles in
``oracles.py`` and frozen.
"""

from __future__ import annotations

import pytest

from oracles import make_dataset

# Three countries, two goods; passes both consistency tests and gives
# round Fisher/GEKS parities (F_AB ~ 1.004, geometric chains below).
ABC = {
    "ids": ["A", "B", "C"],
    "prices": [(5, 9), (7, 7), (10, 10)],
    "quantities": [(8, 6), (7, 10), (1, 9)],
}

# Fourth country that forms a strict affordability cycle with A.
D_ROW = {"id": "D", "prices": (10, 4), "quantities": (10, 2)}

# Three countries with violent price dispersion; consistent.
DISPERSED = {
    "ids": ["1", "2", "3"],
    "prices": [(1, 1), (10, 0.1), (0.1, 10)],
    "quantities": [(1, 2), (1, 100), (1000, 10)],
}

# Three countries, three goods; fails both consistency tests through the
# cycle 2 -> 1 -> 3 -> 2.
THREE_GOOD_CYCLE = {
    "ids": ["1", "2", "3"],
    "prices": [(2.5, 4.5, 2), (3.5, 1, 5.5), (5.5, 3, 2.5)],
    "quantities": [(5, 3.5, 1), (3.5, 4, 2.5), (3.5, 2, 5.5)],
}

# Four countries where {1,2} and {3,4} are each consistent pairs but the
# pooled graph has a strict 1 <-> 4 cycle.
TWO_PAIRS = {
    "ids": ["1", "2", "3", "4"],
    "prices": [(10, 10), (1, 2), (10, 5), (4, 15)],
    "quantities": [(5, 5), (10, 10), (1, 1), (2, 6)],
}


@pytest.fixture
def abc():
    return make_dataset(ABC["ids"], ABC["prices"], ABC["quantities"], base="A")


@pytest.fixture
def abcd():
    return make_dataset(
        ABC["ids"] + [D_ROW["id"]],
        ABC["prices"] + [D_ROW["prices"]],
        ABC["quantities"] + [D_ROW["quantities"]],
        base="A",
    )


@pytest.fixture
def dispersed():
    return make_dataset(DISPERSED["ids"], DISPERSED["prices"], DISPERSED["quantities"])


@pytest.fixture
def three_good_cycle():
    return make_dataset(
        THREE_GOOD_CYCLE["ids"], THREE_GOOD_CYCLE["prices"], THREE_GOOD_CYCLE["quantities"]
    )


@pytest.fixture
def two_pairs():
    return make_dataset(TWO_PAIRS["ids"], TWO_PAIRS["prices"], TWO_PAIRS["quantities"])
