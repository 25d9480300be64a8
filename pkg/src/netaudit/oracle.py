"""Learning-free attribution by inverting the observation.

Elements owned by the same agent carry the same per-element share, so
grouping equal (impact-normalized) values recovers the ownership partition,
and ``share * group size`` recovers each agent's resources.  Comparing the
recovered resources of two snapshots shows which group moved.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .audit import AttributionReport
from .errors import (
    AmbiguousGrouping,
    GroupMismatch,
    LengthMismatch,
    MultipleAgentsChanged,
    NoChangeDetected,
    ZeroLinks,
)
from .network import EPS


class ChangeClass(str, Enum):
    GAINED = "Gained"
    LOST = "Lost"
    NEITHER = "Neither"


@dataclass(frozen=True)
class AgentGroup:
    label: int
    element_indices: tuple
    per_element_value: float

    @property
    def recovered_resources(self) -> float:
        return self.per_element_value * len(self.element_indices)


def initial_imp(resources: Sequence[float], link_counts: Sequence[int]) -> np.ndarray:
    """Per-agent share of resources per controlled element."""
    counts = np.asarray(link_counts, dtype=float)
    if np.any(counts < 1):
        raise ZeroLinks("every agent needs at least one link")
    return np.asarray(resources, dtype=float) / counts


def group_elements(values: Sequence[float], impact: Optional[Sequence[float]] = None,
                   eps: float = EPS) -> list:
    """Partition element indices by equal per-element share.

    With ``impact`` given, each value is divided by its element's impact
    before comparison.  Groups are ordered by their first element.
    """
    v = np.asarray(values, dtype=float)
    if impact is not None:
        impact = np.asarray(impact, dtype=float)
        if impact.shape != v.shape:
            raise LengthMismatch("impact and values differ in length")
        v = v / impact
    keys = []
    members = []
    for e, x in enumerate(v):
        hits = [g for g, k in enumerate(keys) if abs(x - k) <= eps]
        if len(hits) > 1:
            raise AmbiguousGrouping(f"element {e} matches several groups")
        if hits:
            members[hits[0]].append(e)
        else:
            keys.append(x)
            members.append([e])
    return [
        AgentGroup(label=i, element_indices=tuple(m), per_element_value=float(np.mean(v[m])))
        for i, m in enumerate(members)
    ]


def classify_change(init_groups: Sequence[AgentGroup], curr_groups: Sequence[AgentGroup],
                    eps: float = EPS) -> list:
    """Label each group Gained / Lost / Neither from ``init - current`` resources."""
    init_by_set = {g.element_indices: g for g in init_groups}
    curr_sets = {g.element_indices for g in curr_groups}
    if set(init_by_set) != curr_sets:
        raise GroupMismatch("element partitions differ between snapshots")
    labels = []
    for g in curr_groups:
        change = init_by_set[g.element_indices].recovered_resources - g.recovered_resources
        if change < -eps:
            labels.append(ChangeClass.GAINED)
        elif change > eps:
            labels.append(ChangeClass.LOST)
        else:
            labels.append(ChangeClass.NEITHER)
    return labels


def attribute(init_values, curr_values, links: Sequence[int], impact=None,
              pool_total: float = 1.0) -> AttributionReport:
    """Name the agent whose group changed between the two snapshots."""
    init_values = np.asarray(init_values, dtype=float)
    curr_values = np.asarray(curr_values, dtype=float)
    if init_values.shape != curr_values.shape or len(links) != init_values.size:
        raise LengthMismatch("snapshots and links must have equal length")
    init_groups = group_elements(init_values, impact)
    curr_groups = group_elements(curr_values, impact)
    labels = classify_change(init_groups, curr_groups)
    init_by_set = {g.element_indices: g for g in init_groups}

    changed = [i for i, c in enumerate(labels) if c is not ChangeClass.NEITHER]
    if not changed:
        raise NoChangeDetected("snapshots are identical")
    if len(changed) > 1:
        raise MultipleAgentsChanged(f"{len(changed)} groups changed")

    n_total = init_values.size
    contrib = np.array([
        abs(init_by_set[g.element_indices].recovered_resources - g.recovered_resources)
        for g in curr_groups
    ])
    net_change = contrib.sum() / (n_total * pool_total)
    responsibility = contrib / contrib.sum() * 100.0
    literal = contrib / net_change * 100.0

    num_agents = max(links) + 1
    agent_of_group = [int(links[g.element_indices[0]]) for g in curr_groups]
    resp_by_agent = np.zeros(num_agents)
    literal_by_agent = np.zeros(num_agents)
    for a, r, lit in zip(agent_of_group, responsibility, literal):
        resp_by_agent[a] += r
        literal_by_agent[a] += lit

    target = curr_groups[changed[0]]
    mu_prev = init_values / init_values.sum() * 100.0
    mu = curr_values / curr_values.sum() * 100.0
    nu = np.zeros(num_agents)
    nu_prev = np.zeros(num_agents)
    for g, a in zip(curr_groups, agent_of_group):
        idx = list(g.element_indices)
        nu[a] += mu[idx].sum()
        nu_prev[a] += mu_prev[idx].sum()

    return AttributionReport(
        modifying_agent=agent_of_group[changed[0]],
        change_index=int(target.element_indices[0]),
        nu=nu.tolist(),
        delta_nu=(nu - nu_prev).tolist(),
        mu=mu.tolist(),
        mode="oracle",
        extra={
            "change_class": labels[changed[0]].value,
            "net_change": float(net_change),
            "responsibility": resp_by_agent.tolist(),
            "literal_responsibility": literal_by_agent.tolist(),
            "recovered_resources": {
                str(agent_of_group[i]): g.recovered_resources for i, g in enumerate(curr_groups)
            },
        },
    )
