"""Closed-form responsibility equations over network snapshots.

The pipeline is: detect the first element whose value moved between two
snapshots, look up the agent that owns it, and split responsibility for the
end user's experience over elements (mu) and agents (nu).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    LengthMismatch,
    NoChangeToAttribute,
    TopologyMismatch,
    ZeroInfluence,
)
from .network import EPS, NetworkGraph, element_values


@dataclass(frozen=True)
class ChangeIndex:
    """Result of change detection; ``index`` is None when nothing changed."""

    index: Optional[int] = None

    @property
    def changed(self) -> bool:
        return self.index is not None

    @classmethod
    def no_change(cls) -> "ChangeIndex":
        return cls(None)

    def code(self) -> int:
        # Integer form: 0 for no change, otherwise the 1-based element index.
        return 0 if self.index is None else self.index + 1


@dataclass
class AttributionReport:
    """Outcome of auditing one change.  Serialized by the CLI ``audit`` verb."""

    modifying_agent: int
    change_index: int
    nu: list
    delta_nu: list
    mu: list
    mode: str = "equations"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "modifying_agent": self.modifying_agent,
            "change_index": self.change_index,
            "nu": list(self.nu),
            "delta_nu": list(self.delta_nu),
            "mu": list(self.mu),
            "mode": self.mode,
        }
        d.update(self.extra)
        return d


def influence_score(graph: NetworkGraph, theta: float = 1.0) -> float:
    """Total influence of all elements on the end user, scaled by ``theta``."""
    return float(theta * np.sum(element_values(graph)))


def mu_from_values(values: Sequence[float]) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    total = values.sum()
    if total <= 0:
        raise ZeroInfluence("total influence is zero")
    return values / total * 100.0


def nu_from_values(values: Sequence[float], links: Sequence[int], num_agents: int) -> np.ndarray:
    mu = mu_from_values(values)
    return np.bincount(np.asarray(links), weights=mu, minlength=num_agents)


def element_responsibility(graph: NetworkGraph) -> np.ndarray:
    """Percentage of the end-user influence carried by each element."""
    return mu_from_values(element_values(graph))


def detect_change(prev: Sequence[float], curr: Sequence[float], eps: float = EPS) -> ChangeIndex:
    """Lowest index whose value moved, or ``ChangeIndex.no_change()``.

    Entries are compared by ratio, scaled by the larger magnitude so that
    detection does not depend on argument order.  Where either side is zero
    the absolute difference is used instead, so 0 -> 0 counts as unchanged.
    """
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise LengthMismatch(f"{prev.shape} vs {curr.shape}")
    diff = np.abs(curr - prev)
    zero = (prev == 0) | (curr == 0)
    moved = np.empty(prev.shape, dtype=bool)
    moved[zero] = diff[zero] > eps
    nz = ~zero
    moved[nz] = diff[nz] > eps * np.maximum(np.abs(prev[nz]), np.abs(curr[nz]))
    hits = np.flatnonzero(moved)
    if hits.size == 0:
        return ChangeIndex.no_change()
    return ChangeIndex(int(hits[0]))


def identify_agent(graph_or_links, change: ChangeIndex) -> int:
    """Agent owning the changed element."""
    if not change.changed:
        raise NoChangeToAttribute("no change to attribute")
    links = graph_or_links.links if isinstance(graph_or_links, NetworkGraph) else graph_or_links
    return int(links[change.index])


def agent_responsibility(prev: NetworkGraph, curr: NetworkGraph):
    """Return ``(nu_curr, delta_nu)`` as per-agent percentage arrays."""
    if not prev.same_topology(curr):
        raise TopologyMismatch("snapshots differ in links, impact or pool")
    nu_prev = nu_from_values(element_values(prev), prev.links, prev.num_agents)
    nu_curr = nu_from_values(element_values(curr), curr.links, curr.num_agents)
    return nu_curr, nu_curr - nu_prev


def audit_values(prev_values, curr_values, links, num_agents) -> AttributionReport:
    """Run the equation pipeline on two observed value vectors."""
    change = detect_change(prev_values, curr_values)
    agent = identify_agent(links, change)
    nu_prev = nu_from_values(prev_values, links, num_agents)
    nu_curr = nu_from_values(curr_values, links, num_agents)
    return AttributionReport(
        modifying_agent=agent,
        change_index=change.index,
        nu=nu_curr.tolist(),
        delta_nu=(nu_curr - nu_prev).tolist(),
        mu=mu_from_values(curr_values).tolist(),
        mode="equations",
    )
