"""
Errors Module
Exception types raised across the lab.
"""


class LabError(Exception):
    """Base class for every error raised by the lab."""


class UnknownGameError(LabError, KeyError):
    """Game name is not registered."""


class IllegalActionError(LabError, ValueError):
    """Action is not legal in the given state."""


class InvalidStateError(LabError, ValueError):
    """Operation called on a terminal or chance node."""


class MissingPolicyError(LabError, KeyError):
    """Profile has no distribution at a reachable information set."""


class EmptyActionSetError(LabError, ValueError):
    """Mask rules would leave a decision with no legal action."""


class NotZeroSumError(LabError, ValueError):
    """Operation requires a zero-sum game."""


class NotZeroContingencyError(LabError, ValueError):
    """Rules leave the forced player with a real choice somewhere."""


class OutOfBoundsError(LabError, ValueError):
    """Reward lies outside the game's reward bounds."""


class TreeTooLargeError(LabError, ValueError):
    """Game is too large for full-tree enumeration."""


class UnknownExperimentError(LabError, KeyError):
    """Experiment id is not registered."""


class InvalidOverrideError(LabError, ValueError):
    """Override key is unknown or its value cannot be cast."""


class MetricUnavailableError(LabError, ValueError):
    """Trace metric cannot be computed for the configured agent."""


class StatsInputError(LabError, ValueError):
    """Samples do not satisfy the statistic's preconditions."""


class InvalidConfigError(LabError, ValueError):
    """Agent or match configuration is inconsistent."""
