import json
from pathlib import Path

import numpy as np
import pytest

from subnsw.conflp.master import FractionalSolution
from subnsw.harness.io import load_instance
from subnsw.rounding import build_graph, graph_from_edges

DATA = Path(__file__).parent / "data"


def mixed_solution(inst):
    meta = json.loads((DATA / "mixed.json").read_text())["metadata"]["solution"]
    entries = {}
    for row in meta:
        i = inst.agent_index(row["agent"])
        S = frozenset(inst.item_ids.index(j) for j in row["items"])
        entries[(i, S)] = row["y"]
    return FractionalSolution(entries, 0.0, method="fixture")


@pytest.fixture
def triad():
    return load_instance(DATA / "triad.json")


@pytest.fixture
def mixed():
    return load_instance(DATA / "mixed.json")


@pytest.fixture
def mixed_graph(mixed):
    return build_graph(mixed, mixed_solution(mixed))


@pytest.fixture
def square_cycle():
    # two agents, two items, all four marked edges at one half
    return graph_from_edges(2, 2, [(0, 0, True, 0.5), (0, 1, True, 0.5),
                                   (1, 0, True, 0.5), (1, 1, True, 0.5)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
