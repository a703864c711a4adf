"""Exception hierarchy. Each validation failure gets its own class so callers
can distinguish which invariant was violated."""


class NomaMimoError(Exception):
    """Base class for all package errors."""


class ScenarioError(NomaMimoError, ValueError):
    """Invalid system parameters."""


class KOddError(ScenarioError):
    """User count K must be a positive even integer."""


class PilotsExceedCoherenceError(ScenarioError):
    """K/2 orthogonal pilots do not fit into a coherence interval of T symbols."""


class NonPositiveParameterError(ScenarioError):
    """A parameter that must be strictly positive is not."""


class LengthMismatchError(ScenarioError):
    """Per-group parameter sequences do not all have length K/2."""


class PowerControlError(NomaMimoError, ValueError):
    """Invalid power-control point."""


class AlphaOutOfRangeError(PowerControlError):
    """Pilot power factor outside [0, 1]."""


class GammaOutOfRangeError(PowerControlError):
    """Negative data power factor."""


class EtaOutOfRangeError(PowerControlError):
    """Time share outside [0, 1]."""


class SumPowerExceededError(PowerControlError):
    """A scheme sum-power constraint is violated."""

    def __init__(self, constraint, total, limit):
        self.constraint = constraint
        self.total = float(total)
        self.limit = float(limit)
        super().__init__(
            f"{constraint} power {total:.6g} exceeds {limit:.6g} "
            f"by {total - limit:.3g}"
        )


class TrialOutOfRangeError(NomaMimoError, ValueError):
    """Requested Monte-Carlo trial index is outside [0, trials)."""


class SchemeMismatchError(NomaMimoError, ValueError):
    """An input produced under one access scheme was fed to another."""


class DecodabilityViolatedError(NomaMimoError):
    """Shared-pilot SIC ordering condition fails for at least one group."""


class DegenerateEstimateError(NomaMimoError):
    """Downlink gain estimate collapsed below the numeric floor in every trial."""


class McDivergenceError(NomaMimoError):
    """A Monte-Carlo trial produced a non-finite intermediate value."""


class EmptyGridError(NomaMimoError):
    """No grid point satisfies the scheme's power constraints."""


class InfeasibleError(NomaMimoError):
    """No grid point meets the edge-rate target."""

    def __init__(self, message, shortfall=None):
        self.shortfall = shortfall
        super().__init__(message)


class ConfigError(NomaMimoError):
    """Config file missing, unparseable, or semantically invalid."""
