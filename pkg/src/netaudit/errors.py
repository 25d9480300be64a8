"""Exception hierarchy shared by every netaudit module."""


class NetAuditError(Exception):
    """Base class for all netaudit errors."""

    code = "netaudit_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class InvalidConfig(NetAuditError):
    code = "invalid_config"


class DomainError(NetAuditError, ValueError):
    code = "domain_error"


class IllegalAllocation(NetAuditError):
    code = "illegal_allocation"


class ZeroInfluence(NetAuditError):
    code = "zero_influence"


class LengthMismatch(NetAuditError, ValueError):
    code = "length_mismatch"


class NoChangeToAttribute(NetAuditError):
    code = "no_change_to_attribute"


class TopologyMismatch(NetAuditError):
    code = "topology_mismatch"


class ActionOutOfRange(NetAuditError, ValueError):
    code = "action_out_of_range"


class SteppingFinishedEpisode(NetAuditError):
    code = "stepping_finished_episode"


class PerturbationError(NetAuditError):
    code = "perturbation_error"


class ZeroLinks(NetAuditError, ValueError):
    code = "zero_links"


class AmbiguousGrouping(NetAuditError):
    code = "ambiguous_grouping"


class GroupMismatch(NetAuditError):
    code = "group_mismatch"


class NoChangeDetected(NetAuditError):
    code = "no_change_detected"


class MultipleAgentsChanged(NetAuditError):
    code = "multiple_agents_changed"


class DimensionMismatch(NetAuditError, ValueError):
    code = "dimension_mismatch"


class ShapeMismatch(NetAuditError, ValueError):
    code = "shape_mismatch"


class InsufficientMemory(NetAuditError):
    code = "insufficient_memory"


class CheckpointMismatch(NetAuditError):
    code = "checkpoint_mismatch"


class ParseError(NetAuditError):
    code = "parse_error"


class ContractViolation(NetAuditError):
    code = "contract_violation"


class MissingArtifacts(NetAuditError):
    code = "missing_artifacts"
