"""Ergodic-rate simulation for training-based multiuser MIMO downlinks.

Compares shared-pilot NOMA ("N") with orthogonal access ("O") and an
all-orthogonal-pilots baseline ("baseline_K") across three receiver-CSI
regimes, and builds time-sharing rate regions and constrained sum-rate
experiments via power-control grid search.
"""

from .channel import (
    ChannelDraw,
    ProcessedPilots,
    draw_small_scale,
    processed_ul_pilots,
)
from .errors import (
    ConfigError,
    DecodabilityViolatedError,
    DegenerateEstimateError,
    EmptyGridError,
    InfeasibleError,
    McDivergenceError,
    NomaMimoError,
)
from .estimation import (
    DlGainEstimates,
    QualityFactors,
    UlEstimates,
    dl_gain_estimate,
    estimation_quality,
    mmse_ul_estimates,
)
from .rates import (
    Beams,
    GainSamples,
    HardeningMoments,
    RatePoint,
    SinrDecomposition,
    build_mrt_beams,
    effective_rate,
    hardening_closed_form_moments,
    hardening_oracle_moments,
    noma_decodability_margin,
    rate_dl_pilot,
    rate_no_csir,
    rate_perfect_csir,
)
from .region import (
    ConstrainedSumRateResult,
    GridSpec,
    RateRegion,
    constrained_sum_rate,
    default_grid,
    pareto_hull,
    power_grid,
    sweep_rate_region,
)
from .scenario import (
    PRELOG_APPLY,
    PRELOG_OMIT,
    REGIME_DL_PILOT,
    REGIME_NO_CSIR,
    REGIME_PERFECT_CSIR,
    REGIMES,
    SCHEME_BASELINE,
    SCHEME_N,
    SCHEME_O,
    SCHEMES,
    McConfig,
    PowerControl,
    Scenario,
    prelog_factor,
    validate_power,
    validate_scenario,
)

__version__ = "0.1.0"
