"""Attribute network changes to the AI management agents that made them."""

from .audit import (
    AttributionReport,
    ChangeIndex,
    agent_responsibility,
    detect_change,
    element_responsibility,
    identify_agent,
    influence_score,
)
from .dqn import AgentHyperparams, DQNAgent, QNetwork, ReplayMemory, epsilon_at, select_action
from .env import AuditEnv, EnvOptions, StepResult, Transition
from .network import (
    NetworkConfig,
    NetworkGraph,
    apply_resource_change,
    build_network,
    check_allocation_legal,
    element_values,
)
from .oracle import attribute, classify_change, group_elements, initial_imp

__version__ = "0.1.0"
