from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from weightscape import TINY64, build_graph
from weightscape.checkpoint import synthesize


@pytest.fixture(scope="session")
def tiny_graph():
    return build_graph(TINY64)


@pytest.fixture(scope="session")
def base_unit():
    """tiny64 base checkpoint, unit-normal weights (every element nonzero)."""
    return synthesize(TINY64, seed=0, scheme="unit_normal")


@pytest.fixture(scope="session")
def base_scaled():
    """tiny64 base checkpoint with fan-in scaled weights (the rendering base)."""
    return synthesize(TINY64, seed=0, scheme="scaled_fan_in")
