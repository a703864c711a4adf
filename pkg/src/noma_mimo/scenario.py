"""System parameters, power control points, and prelog bookkeeping.

All values are linear scale and normalized by the receiver noise variance.
Users come in two classes of equal size K/2: "center" users with large-scale
gains ``beta_g`` and "edge" users with gains ``beta_h``. Group k pairs the
k-th entry of each sequence. The class names are descriptive only; the math
holds for any gain values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    AlphaOutOfRangeError,
    EtaOutOfRangeError,
    GammaOutOfRangeError,
    KOddError,
    LengthMismatchError,
    NonPositiveParameterError,
    PilotsExceedCoherenceError,
    ScenarioError,
    SumPowerExceededError,
)

SCHEME_O = "O"
SCHEME_N = "N"
SCHEME_BASELINE = "baseline_K"
SCHEMES = (SCHEME_O, SCHEME_N, SCHEME_BASELINE)

REGIME_PERFECT_CSIR = "perfect_csir"
REGIME_NO_CSIR = "no_csir"
REGIME_DL_PILOT = "dl_pilot"
REGIMES = (REGIME_PERFECT_CSIR, REGIME_NO_CSIR, REGIME_DL_PILOT)

PRELOG_APPLY = "apply"
PRELOG_OMIT = "omit"

# Slack for floating-point sums of grid-generated power levels.
_SUM_TOL = 1e-9


def _as_float_tuple(value, n=None):
    """Coerce a scalar or sequence to a tuple of floats; scalars broadcast to n."""
    if isinstance(value, (int, float)):
        if n is None:
            return (float(value),)
        return (float(value),) * n
    return tuple(float(v) for v in value)


@dataclass(frozen=True)
class Scenario:
    """Immutable system parameters shared by every evaluator.

    M: base-station antenna count.
    K: total single-antenna user count (even); K/2 groups.
    T: coherence-interval length in symbols.
    beta_g, beta_h: per-group large-scale gains (scalar broadcasts to K/2).
    p_u, p_d: normalized uplink pilot / downlink data power.
    noise_free_ul: use the noiseless uplink-training limit.
    prelog_mode: "apply" or "omit" the pilot-overhead rate penalty.
    """

    M: int
    K: int
    T: int
    beta_g: tuple = field(default=(1.0,))
    beta_h: tuple = field(default=(1.0,))
    p_u: float = 1.0
    p_d: float = 1.0
    noise_free_ul: bool = False
    prelog_mode: str = PRELOG_APPLY

    def __post_init__(self):
        n = self.K // 2 if isinstance(self.K, int) and self.K > 0 else None
        object.__setattr__(self, "beta_g", _as_float_tuple(self.beta_g, n))
        object.__setattr__(self, "beta_h", _as_float_tuple(self.beta_h, n))
        object.__setattr__(self, "p_u", float(self.p_u))
        object.__setattr__(self, "p_d", float(self.p_d))

    @property
    def n_groups(self) -> int:
        return self.K // 2

    @property
    def ul_noise_var(self) -> float:
        """Post-correlation pilot noise variance per antenna."""
        return 0.0 if self.noise_free_ul else 1.0


@dataclass(frozen=True)
class PowerControl:
    """Pilot weights (alpha, in [0,1]) and data weights (gamma, >= 0) per group,
    plus the orthogonal scheme's time share eta. The shared-pilot scheme and
    the orthogonal-UL-pilots baseline ignore eta."""

    alpha_g: tuple = (1.0,)
    alpha_h: tuple = (1.0,)
    gamma_g: tuple = (0.5,)
    gamma_h: tuple = (0.5,)
    eta: float = 1.0

    def __post_init__(self):
        for name in ("alpha_g", "alpha_h", "gamma_g", "gamma_h"):
            object.__setattr__(self, name, _as_float_tuple(getattr(self, name)))
        object.__setattr__(self, "eta", float(self.eta))

    @staticmethod
    def uniform(n_groups, alpha_g=1.0, alpha_h=1.0, gamma_g=0.5, gamma_h=0.5,
                eta=1.0) -> "PowerControl":
        """Same allocation in every group."""
        return PowerControl(
            alpha_g=(float(alpha_g),) * n_groups,
            alpha_h=(float(alpha_h),) * n_groups,
            gamma_g=(float(gamma_g),) * n_groups,
            gamma_h=(float(gamma_h),) * n_groups,
            eta=eta,
        )


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo execution parameters.

    trials: number of channel realizations.
    base_seed: root of every random stream.
    chunk: trials per deterministic-reduction block; partial sums are always
        combined in chunk order, so results do not depend on worker count.
    """

    trials: int = 100_000
    base_seed: int = 12345
    chunk: int = 8192

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError(f"trials must be >= 1, got {self.trials}")
        if self.chunk < 1:
            raise ScenarioError(f"chunk must be >= 1, got {self.chunk}")


def validate_scenario(sc: Scenario) -> Scenario:
    """Return sc unchanged iff every invariant holds.

    Raises a distinct error kind per violated invariant: KOddError,
    PilotsExceedCoherenceError, NonPositiveParameterError, LengthMismatchError.
    """
    if not isinstance(sc.M, int) or sc.M < 1:
        raise NonPositiveParameterError(f"M must be a positive integer, got {sc.M}")
    if not isinstance(sc.K, int) or sc.K < 2:
        raise NonPositiveParameterError(f"K must be a positive even integer, got {sc.K}")
    if sc.K % 2 != 0:
        raise KOddError(f"K must be even, got {sc.K}")
    if not isinstance(sc.T, int) or sc.T < 1:
        raise NonPositiveParameterError(f"T must be a positive integer, got {sc.T}")
    if sc.K // 2 > sc.T:
        raise PilotsExceedCoherenceError(
            f"K/2 = {sc.K // 2} pilots do not fit in a coherence interval of T = {sc.T}"
        )
    if len(sc.beta_g) != sc.K // 2 or len(sc.beta_h) != sc.K // 2:
        raise LengthMismatchError(
            f"beta_g ({len(sc.beta_g)}) and beta_h ({len(sc.beta_h)}) "
            f"must both have length K/2 = {sc.K // 2}"
        )
    for name, values in (("beta_g", sc.beta_g), ("beta_h", sc.beta_h)):
        if any(b <= 0 for b in values):
            raise NonPositiveParameterError(f"{name} entries must be > 0, got {values}")
    if sc.p_u <= 0:
        raise NonPositiveParameterError(f"p_u must be > 0, got {sc.p_u}")
    if sc.p_d <= 0:
        raise NonPositiveParameterError(f"p_d must be > 0, got {sc.p_d}")
    if sc.prelog_mode not in (PRELOG_APPLY, PRELOG_OMIT):
        raise ScenarioError(f"prelog_mode must be 'apply' or 'omit', got {sc.prelog_mode!r}")
    return sc


def validate_power(pc: PowerControl, sc: Scenario, scheme: str) -> PowerControl:
    """Return pc unchanged iff it satisfies the scheme's constraint set.

    Shared-pilot scheme (and the baseline): joint constraint
    sum(gamma_g) + sum(gamma_h) <= 1. Orthogonal scheme: per-slot constraints
    sum(gamma_g) <= 1 and sum(gamma_h) <= 1.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n = sc.n_groups
    for name in ("alpha_g", "alpha_h", "gamma_g", "gamma_h"):
        if len(getattr(pc, name)) != n:
            raise LengthMismatchError(
                f"{name} has length {len(getattr(pc, name))}, expected K/2 = {n}"
            )
    for name in ("alpha_g", "alpha_h"):
        values = getattr(pc, name)
        if any(a < 0 or a > 1 for a in values):
            raise AlphaOutOfRangeError(f"{name} entries must lie in [0, 1], got {values}")
    for name in ("gamma_g", "gamma_h"):
        values = getattr(pc, name)
        if any(g < 0 for g in values):
            raise GammaOutOfRangeError(f"{name} entries must be >= 0, got {values}")
    if pc.eta < 0 or pc.eta > 1:
        raise EtaOutOfRangeError(f"eta must lie in [0, 1], got {pc.eta}")

    sum_g = sum(pc.gamma_g)
    sum_h = sum(pc.gamma_h)
    if scheme == SCHEME_O:
        if sum_g > 1 + _SUM_TOL:
            raise SumPowerExceededError("center-slot data", sum_g, 1.0)
        if sum_h > 1 + _SUM_TOL:
            raise SumPowerExceededError("edge-slot data", sum_h, 1.0)
    else:
        if sum_g + sum_h > 1 + _SUM_TOL:
            raise SumPowerExceededError("joint data", sum_g + sum_h, 1.0)
    return pc


def prelog_factor(sc: Scenario, regime: str, scheme: str = SCHEME_N) -> float:
    """Rate multiplier for the pilot symbols spent in each coherence interval.

    Without downlink pilots the overhead is K/2 symbols; with downlink pilots
    (and in the perfect-receiver-CSI benchmark, which presumes them) it is K.
    The all-orthogonal-pilots baseline spends K uplink symbols in any regime.
    The orthogonal scheme's eta split is applied by the rate evaluators, not
    here. Returns 1 when prelog_mode is "omit"; never negative.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if sc.prelog_mode == PRELOG_OMIT:
        return 1.0
    if scheme == SCHEME_BASELINE:
        value = 1.0 - sc.K / sc.T
    elif regime == REGIME_NO_CSIR:
        value = 1.0 - sc.K / (2.0 * sc.T)
    else:
        value = 1.0 - sc.K / sc.T
    return max(value, 0.0)
