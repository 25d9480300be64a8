"""Influence-graph model of a managed network.

Three domains are modeled: management agents, service-domain elements (VNFs)
and a single end user.  Agent -> element edges are the ownership links,
element -> user edges carry the impact factor.  Each agent holds a share of a
common resource pool and spreads it evenly over the elements it controls.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, IllegalAllocation, InvalidConfig

# Single comparison tolerance used across the package for value equality.
EPS = 1e-9

MAX_BUILD_RETRIES = 100


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable influence graph.

    ``links[e]`` is the agent owning element ``e``; ``impact[e]`` is the
    element's weight on the end user; ``resources[a]`` is agent ``a``'s share
    of ``pool_total``.
    """

    num_agents: int
    links: tuple
    impact: tuple
    resources: tuple
    pool_total: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(int(a) for a in self.links))
        object.__setattr__(self, "impact", tuple(float(x) for x in self.impact))
        object.__setattr__(self, "resources", tuple(float(x) for x in self.resources))
        if self.num_agents < 1:
            raise InvalidConfig("num_agents must be positive")
        if len(self.links) < 1:
            raise InvalidConfig("a graph needs at least one element")
        if len(self.impact) != len(self.links):
            raise InvalidConfig(
                f"impact has {len(self.impact)} entries for {len(self.links)} elements"
            )
        if len(self.resources) != self.num_agents:
            raise InvalidConfig(
                f"resources has {len(self.resources)} entries for {self.num_agents} agents"
            )
        for e, a in enumerate(self.links):
            if not 0 <= a < self.num_agents:
                raise InvalidConfig(f"element {e} linked to unknown agent {a}")
        counts = self.link_counts
        idle = [a for a, c in enumerate(counts) if c == 0]
        if idle:
            raise InvalidConfig(f"agents {idle} control no elements")
        if any(r < 0 or not math.isfinite(r) for r in self.resources):
            raise InvalidConfig("resources must be finite and non-negative")
        if not self.pool_total > 0:
            raise InvalidConfig("pool_total must be positive")

    @property
    def num_elements(self) -> int:
        return len(self.links)

    @property
    def link_counts(self) -> tuple:
        counts = [0] * self.num_agents
        for a in self.links:
            counts[a] += 1
        return tuple(counts)

    def elements_of(self, agent: int) -> list:
        return [e for e, a in enumerate(self.links) if a == agent]

    def shares(self) -> np.ndarray:
        """Per-agent resource per controlled element."""
        return np.asarray(self.resources) / np.asarray(self.link_counts, dtype=float)

    def with_resources(self, resources: Sequence[float]) -> "NetworkGraph":
        return replace(self, resources=tuple(resources))

    def same_topology(self, other: "NetworkGraph") -> bool:
        return (
            self.num_agents == other.num_agents
            and self.links == other.links
            and self.impact == other.impact
            and self.pool_total == other.pool_total
        )

    def to_dict(self) -> dict:
        return {
            "num_agents": self.num_agents,
            "num_elements": self.num_elements,
            "links": list(self.links),
            "impact": list(self.impact),
            "resources": list(self.resources),
            "pool_total": self.pool_total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkGraph":
        return cls(
            num_agents=d["num_agents"],
            links=d["links"],
            impact=d["impact"],
            resources=d["resources"],
            pool_total=d.get("pool_total", 1.0),
        )


@dataclass
class NetworkConfig:
    """Serializable recipe for a :class:`NetworkGraph`.

    Any of ``links``, ``impact`` and ``resources`` left as ``None`` is drawn
    from ``seed``.  Random impacts come from ``impact_choices``; random
    resources are a Dirichlet split of ``allocated_fraction * pool_total`` so
    the pool keeps headroom for agents to grow.
    """

    num_agents: int = 3
    num_elements: int = 8
    links: Optional[list] = None
    impact: Optional[list] = None
    resources: Optional[list] = None
    pool_total: float = 1.0
    seed: Optional[int] = 0
    impact_choices: list = field(default_factory=lambda: [1.0, 2.0])
    allocated_fraction: float = 0.8

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def load(cls, path) -> "NetworkConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def check_allocation_legal(resources: Sequence[float], pool_total: float) -> bool:
    """Return True iff the resources fit in the pool.

    The sum is evaluated exactly over the binary floats, so an accepted
    allocation never exceeds the pool through rounding.
    """
    if any(r < 0 for r in resources):
        raise DomainError("resources must be non-negative")
    total = sum((Fraction(float(r)) for r in resources), Fraction(0))
    return total <= Fraction(float(pool_total))


def values_distinct(graph: NetworkGraph, eps: float = EPS) -> bool:
    """True when every pair of agents has a different per-element share."""
    s = np.sort(graph.shares())
    return bool(np.all(np.diff(s) > eps))


def validate_graph(graph: NetworkGraph) -> None:
    """Raise InvalidConfig unless the graph meets every build-time invariant."""
    if any(x <= 0 for x in graph.impact):
        raise InvalidConfig("impact values must be strictly positive")
    if not check_allocation_legal(graph.resources, graph.pool_total):
        raise InvalidConfig(
            f"resources sum to {math.fsum(graph.resources)} > pool {graph.pool_total}"
        )
    if not values_distinct(graph):
        raise InvalidConfig("per-element values of distinct agents collide")


def _random_links(rng, num_agents, num_elements):
    # Every agent gets one element up front; the rest are assigned freely.
    links = list(range(num_agents)) + list(
        rng.integers(0, num_agents, size=num_elements - num_agents)
    )
    rng.shuffle(links)
    return [int(a) for a in links]


def build_network(config: NetworkConfig) -> NetworkGraph:
    """Resolve ``config`` into a validated graph.

    Random draws are retried up to ``MAX_BUILD_RETRIES`` times when the
    per-element values of two agents collide; explicit configurations fail
    immediately.
    """
    if config.num_agents < 2:
        raise InvalidConfig("num_agents must be at least 2")
    if config.num_elements < config.num_agents:
        raise InvalidConfig("num_elements must be at least num_agents")
    if not config.pool_total > 0:
        raise InvalidConfig("pool_total must be positive")

    random_parts = config.links is None or config.impact is None or config.resources is None
    rng = np.random.default_rng(config.seed)
    last_error = None
    for _ in range(MAX_BUILD_RETRIES if random_parts else 1):
        links = config.links
        if links is None:
            links = _random_links(rng, config.num_agents, config.num_elements)
        if len(links) != config.num_elements:
            raise InvalidConfig(f"links has {len(links)} entries, expected {config.num_elements}")
        impact = config.impact
        if impact is None:
            impact = [float(x) for x in rng.choice(config.impact_choices, size=config.num_elements)]
        resources = config.resources
        if resources is None:
            split = rng.dirichlet(np.ones(config.num_agents))
            resources = [float(x) for x in split * config.allocated_fraction * config.pool_total]
        graph = NetworkGraph(
            num_agents=config.num_agents,
            links=links,
            impact=impact,
            resources=resources,
            pool_total=config.pool_total,
        )
        try:
            validate_graph(graph)
            return graph
        except InvalidConfig as exc:
            last_error = exc
    raise InvalidConfig(f"could not build a valid network: {last_error}")


def apply_resource_change(graph: NetworkGraph, agent: int, delta: float) -> NetworkGraph:
    """Return a copy of ``graph`` with ``resources[agent] += delta``.

    Raises IllegalAllocation if the agent would go negative or the pool would
    be exceeded.  The input graph is never modified.
    """
    if not 0 <= agent < graph.num_agents:
        raise DomainError(f"agent {agent} out of range")
    resources = list(graph.resources)
    resources[agent] = resources[agent] + delta
    if resources[agent] < 0:
        raise IllegalAllocation(f"agent {agent} would hold {resources[agent]}")
    if not check_allocation_legal(resources, graph.pool_total):
        raise IllegalAllocation(
            f"allocation {math.fsum(resources)} exceeds pool {graph.pool_total}"
        )
    return graph.with_resources(resources)


def element_values(graph: NetworkGraph) -> np.ndarray:
    """Per-element influence on the end user: resource share times impact."""
    shares = graph.shares()
    return shares[np.asarray(graph.links)] * np.asarray(graph.impact)
