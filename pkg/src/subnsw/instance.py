"""Problem instances: weighted agents with valuations over a shared item set."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .valuations import Valuation

WEIGHT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Agent:
    id: str
    weight: float
    valuation: Valuation


@dataclass(frozen=True, eq=False)
class Instance:
    item_ids: tuple
    agents: tuple
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.item_ids) < 1:
            raise InputError("items: at least one item is required")
        if len(set(self.item_ids)) != len(self.item_ids):
            raise InputError("items: duplicate item id")
        if len(self.agents) < 1:
            raise InputError("agents: at least one agent is required")
        if len({a.id for a in self.agents}) != len(self.agents):
            raise InputError("agents: duplicate agent id")
        for k, a in enumerate(self.agents):
            if not (0 < a.weight <= 1):
                raise InputError(f"agents[{k}].weight: must lie in (0, 1], got {a.weight}")
            if a.valuation.m != len(self.item_ids):
                raise InputError(f"agents[{k}].valuation: ground set has {a.valuation.m} items, "
                                 f"instance has {len(self.item_ids)}")
        total = sum(a.weight for a in self.agents)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InputError(f"agents: weights sum to {total!r}, expected 1")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.item_ids)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.agents])

    def valuation(self, i: int) -> Valuation:
        return self.agents[i].valuation

    def agent_index(self, agent_id: str) -> int:
        for k, a in enumerate(self.agents):
            if a.id == agent_id:
                return k
        raise InputError(f"unknown agent id {agent_id!r}")


def make_instance(valuations, weights=None, item_ids=None, agent_ids=None, name="") -> Instance:
    """Convenience constructor: equal weights and generated ids by default."""
    n = len(valuations)
    m = valuations[0].m
    if weights is None:
        weights = [1.0 / n] * n
    item_ids = item_ids or [f"j{k + 1}" for k in range(m)]
    agent_ids = agent_ids or [f"a{k + 1}" for k in range(n)]
    agents = [Agent(agent_ids[k], float(weights[k]), valuations[k]) for k in range(n)]
    return Instance(tuple(item_ids), tuple(agents), name=name)
