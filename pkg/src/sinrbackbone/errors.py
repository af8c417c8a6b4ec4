"""Exception hierarchy with machine-readable codes for CLI error reporting."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all package errors."""

    code = "error"


class DegenerateDistanceError(SimulationError):
    """Two stations relevant to an SINR evaluation coincide."""

    code = "degenerate-distance"


class UndefinedRatioError(SimulationError):
    """SINR denominator is zero (no noise and no interference)."""

    code = "undefined-ratio"


class UnboundedRangeError(SimulationError):
    """Zero ambient noise makes the transmission range infinite."""

    code = "unbounded-range"


class DisconnectedInstanceError(SimulationError):
    """The induced communication graph is not connected."""

    code = "disconnected-instance"


class NoDilutionError(SimulationError):
    """No dilution constant up to the cap satisfies the interference bound."""

    code = "no-dilution"


class FamilySizeCapError(SimulationError):
    """Family construction hit the set-count cap before certifying."""

    code = "family-size-cap"


class CursorExhaustedError(SimulationError):
    """A round schedule was advanced past the end of its family."""

    code = "cursor-exhausted"


class DoubleRoleError(SimulationError):
    """A node was assigned both transmit and listen intents in one round."""

    code = "double-role"


class TokenDeliveryError(SimulationError):
    """A token grant was not received by the addressed node."""

    code = "token-delivery"


class MessageSizeError(SimulationError):
    """A message exceeded the configured O(lg N) size budget."""

    code = "message-size"


class ExactBranchTooLargeError(SimulationError):
    """Exact minimum-CDS search was forced on an oversized instance."""

    code = "exact-branch-too-large"


class RetryCapError(SimulationError):
    """Instance generation exhausted its rejection-sampling budget."""

    code = "retry-cap"


class InstanceFormatError(SimulationError):
    """An instance file failed validation."""

    code = "instance-format"
