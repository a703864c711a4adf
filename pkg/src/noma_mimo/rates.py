"""Per-user ergodic achievable rates for every (scheme x CSI-regime)
combination, the NOMA decodability margin, and the Monte-Carlo moment oracle
that cross-checks the closed forms.

Rate conventions:
  * Evaluators return fully scaled rates: the pilot-overhead prelog and the
    orthogonal scheme's eta time split are already applied (see
    ``effective_rate``).
  * The shared-pilot edge rate is the minimum of the two MC-converged ergodic
    averages (the rate of the edge symbol at its own receiver and at the SIC
    receiver); the min is never taken per trial, which would be a different
    and incorrect bound.
  * Closed no-CSI forms use the canonical SINR p_d*lambda*beta*gamma*M over
    (coherent term + p_d*beta + 1): the worst-case-noise floor at full
    transmit power, which remains a valid lower bound at partial power.

All Monte-Carlo reductions are accumulated per fixed-size chunk and combined
in chunk order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel
from .channel import (
    ROLE_DL_PILOT_NOISE,
    ROLE_DL_PILOT_NOISE_EDGE,
    map_chunks,
    n_chunks,
)
from .errors import (
    DecodabilityViolatedError,
    DegenerateEstimateError,
    McDivergenceError,
)
from .estimation import UlEstimates, estimation_quality, lmmse_gain_estimate
from .scenario import (
    REGIME_DL_PILOT,
    REGIME_NO_CSIR,
    REGIME_PERFECT_CSIR,
    SCHEME_BASELINE,
    SCHEME_N,
    SCHEME_O,
    McConfig,
    PowerControl,
    Scenario,
    prelog_factor,
)

# Trials with |fhat| below FLOOR_SCALE * sqrt(M lambda) are rejected from the
# equalization moments and counted; the model gives no guidance there.
FLOOR_SCALE = 1e-9

_JACKKNIFE_BATCHES = 16


@dataclass(frozen=True)
class Beams:
    """Unit-expected-norm MRT beams for one trial.

    b: center beams (M x K/2); a: edge beams. The shared-pilot scheme uses one
    beam per group (a is b). c_center / c_edge map conj(processed pilots) to
    beams; the normalization is the analytic expectation, not a sample mean.
    """

    scheme: str
    a: np.ndarray
    b: np.ndarray
    c_center: np.ndarray
    c_edge: np.ndarray


@dataclass(frozen=True)
class RatePoint:
    """Per-user ergodic rates (b/s/Hz) for one (scheme, regime, power) tuple.

    rates_g are center-user rates, rates_h edge-user rates, each of length
    K/2. stderr_* carry Monte-Carlo standard errors where applicable.
    """

    scheme: str
    regime: str
    pc: PowerControl
    rates_g: np.ndarray
    rates_h: np.ndarray
    stderr_g: np.ndarray | None = None
    stderr_h: np.ndarray | None = None

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates_g) + np.sum(self.rates_h))


@dataclass(frozen=True)
class SinrDecomposition:
    """The five effective-noise ingredients of the hardening bound, per user."""

    signal_power: np.ndarray
    coherent_self_interference: np.ndarray
    gain_variance: np.ndarray
    other_group_interference: np.ndarray
    noise_power: np.ndarray

    @property
    def total_noise(self) -> np.ndarray:
        return (self.coherent_self_interference + self.gain_variance
                + self.other_group_interference + self.noise_power)

    @property
    def noncoherent_noise(self) -> np.ndarray:
        """Denominator without the coherent intra-group term; for the edge
        user this equals p_d*beta_h + 1 at full power, independent of M."""
        return (self.gain_variance + self.other_group_interference
                + self.noise_power)

    @property
    def sinr(self) -> np.ndarray:
        return self.signal_power / self.total_noise


@dataclass(frozen=True)
class HardeningMoments:
    """SINR decompositions for both user classes."""

    scheme: str
    center: SinrDecomposition
    edge: SinrDecomposition


@dataclass(frozen=True)
class GainSamples:
    """Per-trial squared effective gains |channel_k . beam_j|^2.

    center[t, k, j] couples center user k to beam j; edge[t, k, j] couples
    edge user k to beam j. Depends on the pilot weights but not on the data
    weights, so one sample set serves a whole data-power sweep.
    """

    scheme: str
    center: np.ndarray
    edge: np.ndarray

    @property
    def n_trials(self) -> int:
        return self.center.shape[0]


def beam_energy(sc: Scenario, pc: PowerControl, scheme: str):
    """Per-antenna expected pilot energy (E||ybar||^2 / M) per group/slot."""
    amp_g, amp_h = channel.pilot_amplitudes(sc, pc, scheme)
    sigma = sc.ul_noise_var
    if scheme == SCHEME_N:
        e = amp_g**2 + amp_h**2 + sigma
        return e, e
    return amp_g**2 + sigma, amp_h**2 + sigma


def beam_norm_constants(sc: Scenario, pc: PowerControl, scheme: str):
    """Constants c with beam = c * conj(ybar); zero when a group sends no
    pilot energy in the noise-free limit (the beam is then undefined and the
    group is simply not served)."""
    e_c, e_e = beam_energy(sc, pc, scheme)
    with np.errstate(divide="ignore"):
        c_c = np.where(e_c > 0, 1.0 / np.sqrt(e_c * sc.M), 0.0)
        c_e = np.where(e_e > 0, 1.0 / np.sqrt(e_e * sc.M), 0.0)
    return c_c, c_e


def build_mrt_beams(est: UlEstimates, sc: Scenario, pc: PowerControl,
                    scheme: str) -> Beams:
    """MRT beams from one trial's uplink estimates.

    Any of the parallel estimates gives the same beam after normalization by
    its analytic expected squared norm; the shared-pilot scheme uses the
    combined-channel estimate.
    """
    c_c, c_e = beam_norm_constants(sc, pc, scheme)
    if scheme == SCHEME_N:
        scale = np.where(est.scale_w > 0, est.scale_w, 1.0)
        beam = np.conj(est.what) * np.where(est.scale_w > 0, c_c / scale, 0.0)
        return Beams(scheme, a=beam, b=beam, c_center=c_c, c_edge=c_e)
    scale_g = np.where(est.scale_g > 0, est.scale_g, 1.0)
    scale_h = np.where(est.scale_h > 0, est.scale_h, 1.0)
    b = np.conj(est.ghat) * np.where(est.scale_g > 0, c_c / scale_g, 0.0)
    a = np.conj(est.hhat) * np.where(est.scale_h > 0, c_e / scale_h, 0.0)
    return Beams(scheme, a=a, b=b, c_center=c_c, c_edge=c_e)


def _chunk_draws(sc, mc, chunk_index, scheme, dl_pilot=False):
    """All random draws of one chunk, shared across pilot-weight points.

    The streams depend only on (seed, chunk, role), so every power-control
    point of a sweep sees the same realizations (common random numbers).
    """
    g, h = channel.channel_chunk(sc, mc, chunk_index)
    k2 = sc.n_groups
    draws = {"g": g, "h": h, "n_ul": None, "n_ul_edge": None}
    if not sc.noise_free_ul:
        draws["n_ul"] = channel.noise_chunk(sc, mc, chunk_index,
                                            channel.ROLE_UL_NOISE, k2)
        if scheme != SCHEME_N:
            draws["n_ul_edge"] = channel.noise_chunk(
                sc, mc, chunk_index, channel.ROLE_UL_NOISE_EDGE, k2)
    if dl_pilot:
        draws["n_dp_c"] = channel.noise_chunk(sc, mc, chunk_index,
                                              ROLE_DL_PILOT_NOISE, k2,
                                              vector=False)
        draws["n_dp_e"] = channel.noise_chunk(sc, mc, chunk_index,
                                              ROLE_DL_PILOT_NOISE_EDGE, k2,
                                              vector=False)
    return draws


def _beams_from_draws(sc, pc, scheme, draws):
    """(beams_center, beams_edge) of shapes (n, M, K/2) for one chunk."""
    amp_g, amp_h = channel.pilot_amplitudes(sc, pc, scheme)
    c_c, c_e = beam_norm_constants(sc, pc, scheme)
    if scheme == SCHEME_N:
        ybar = amp_g * draws["g"] + amp_h * draws["h"]
        if draws["n_ul"] is not None:
            ybar = ybar + draws["n_ul"]
        beam = np.conj(ybar) * c_c
        return beam, beam
    ybar_c = amp_g * draws["g"]
    ybar_e = amp_h * draws["h"]
    if draws["n_ul"] is not None:
        ybar_c = ybar_c + draws["n_ul"]
        ybar_e = ybar_e + draws["n_ul_edge"]
    return np.conj(ybar_c) * c_c, np.conj(ybar_e) * c_e


def _chunk_beam_blocks(sc, pc, scheme, mc, chunk_index, dl_pilot=False):
    """(G, H, beams_center, beams_edge[, draws]) for one chunk."""
    draws = _chunk_draws(sc, mc, chunk_index, scheme, dl_pilot=dl_pilot)
    bc, be = _beams_from_draws(sc, pc, scheme, draws)
    return draws["g"], draws["h"], bc, be, draws


def _coupling(channels, beams):
    """Complex couplings channel_k . beam_j, shape (n, K/2, K/2)."""
    return np.einsum("tmk,tmj->tkj", channels, beams)


def _check_finite(arr, chunk_index, label):
    if not np.all(np.isfinite(arr)):
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise McDivergenceError(
            f"{bad} non-finite {label} value(s) in chunk {chunk_index}"
        )


def alpha_key(pc: PowerControl, scheme: str):
    """Cache key for pilot-weight-dependent Monte-Carlo passes."""
    return (pc.alpha_g, pc.alpha_h) if scheme == SCHEME_N else "shared"


def _unique_alpha_points(pcs, scheme):
    reps = {}
    for pc in pcs:
        reps.setdefault(alpha_key(pc, scheme), pc)
    return reps


def perfect_csir_gains_batch(sc: Scenario, pcs, scheme: str,
                             mc: McConfig) -> dict:
    """Squared effective gains for each distinct pilot-weight point, drawing
    every chunk's channels and noise once (common random numbers)."""
    reps = _unique_alpha_points(pcs, scheme)

    def one(ci, start, n_used):
        draws = _chunk_draws(sc, mc, ci, scheme)
        out = {}
        for key, pc in reps.items():
            bc, be = _beams_from_draws(sc, pc, scheme, draws)
            gc = np.abs(_coupling(draws["g"], bc)) ** 2
            ge = np.abs(_coupling(draws["h"], be)) ** 2
            _check_finite(gc, ci, "center gain")
            _check_finite(ge, ci, "edge gain")
            out[key] = (gc, ge)
        return out

    parts = map_chunks(mc, one)
    return {
        key: GainSamples(
            scheme=scheme,
            center=np.concatenate([p[key][0] for p in parts], axis=0),
            edge=np.concatenate([p[key][1] for p in parts], axis=0),
        )
        for key in reps
    }


def perfect_csir_gains(sc: Scenario, pc: PowerControl, scheme: str,
                       mc: McConfig) -> GainSamples:
    """Sample the squared effective gains for the perfect-receiver-CSI rates.

    Only the pilot weights of pc matter here; reuse the result across data
    power allocations.
    """
    return perfect_csir_gains_batch(sc, [pc], scheme, mc)[alpha_key(pc, scheme)]


def _sinr_logs_scheme_n(sc, pc, gains):
    """log2(1+SINR) samples for the shared-pilot scheme, shapes (n, K/2).

    Returns (own-data at edge user, edge symbol at SIC receiver, own-data at
    center user after cancelling its group's coherent NOMA term).
    """
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    idx = np.arange(sc.n_groups)
    own_c = gains.center[:, idx, idx]
    own_e = gains.edge[:, idx, idx]
    wc_h = np.einsum("tkj,j->tk", gains.center, gh)
    wc_g = np.einsum("tkj,j->tk", gains.center, gg)
    we_h = np.einsum("tkj,j->tk", gains.edge, gh)
    we_g = np.einsum("tkj,j->tk", gains.edge, gg)
    pd = sc.p_d

    sinr_eh = (pd * bh * gh * own_e) / (pd * bh * ((we_h - gh * own_e) + we_g) + 1.0)
    sinr_gh = (pd * bg * gh * own_c) / (pd * bg * ((wc_h - gh * own_c) + wc_g) + 1.0)
    sinr_gg = (pd * bg * gg * own_c) / (
        pd * bg * ((wc_h - gh * own_c) + (wc_g - gg * own_c)) + 1.0)
    return np.log2(1 + sinr_eh), np.log2(1 + sinr_gh), np.log2(1 + sinr_gg)


def _sinr_logs_scheme_o(sc, pc, gains):
    """log2(1+SINR) samples for the orthogonal scheme's two slots."""
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    idx = np.arange(sc.n_groups)
    own_c = gains.center[:, idx, idx]
    own_e = gains.edge[:, idx, idx]
    wc_g = np.einsum("tkj,j->tk", gains.center, gg)
    we_h = np.einsum("tkj,j->tk", gains.edge, gh)
    pd = sc.p_d
    sinr_c = (pd * bg * gg * own_c) / (pd * bg * (wc_g - gg * own_c) + 1.0)
    sinr_e = (pd * bh * gh * own_e) / (pd * bh * (we_h - gh * own_e) + 1.0)
    return np.log2(1 + sinr_c), np.log2(1 + sinr_e)


def _mean_se(samples):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    se = samples.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, se


def rate_perfect_csir(sc: Scenario, pc: PowerControl, scheme: str,
                      mc: McConfig, gains: GainSamples | None = None) -> RatePoint:
    """Monte-Carlo ergodic rates with perfect CSI at the receivers.

    Shared-pilot scheme: the edge rate is min over the two ergodic averages
    so the SIC receiver can decode the edge codeword; the center rate has the
    group's coherent NOMA term cancelled. Orthogonal scheme: single-stream
    SINRs per slot. Prelog and eta are applied before returning.
    """
    if scheme not in (SCHEME_N, SCHEME_O):
        raise ValueError(f"perfect-CSIR rates support schemes N and O, got {scheme!r}")
    if gains is None:
        gains = perfect_csir_gains(sc, pc, scheme, mc)
    if scheme == SCHEME_N:
        log_eh, log_gh, log_gg = _sinr_logs_scheme_n(sc, pc, gains)
        r_eh, se_eh = _mean_se(log_eh)
        r_gh, se_gh = _mean_se(log_gh)
        r_gg, se_gg = _mean_se(log_gg)
        pick_own = r_eh <= r_gh
        rates_h = np.where(pick_own, r_eh, r_gh)
        se_h = np.where(pick_own, se_eh, se_gh)
        raw = RatePoint(scheme, REGIME_PERFECT_CSIR, pc, r_gg, rates_h, se_gg, se_h)
    else:
        log_c, log_e = _sinr_logs_scheme_o(sc, pc, gains)
        r_c, se_c = _mean_se(log_c)
        r_e, se_e = _mean_se(log_e)
        raw = RatePoint(scheme, REGIME_PERFECT_CSIR, pc, r_c, r_e, se_c, se_e)
    return effective_rate(raw, sc, REGIME_PERFECT_CSIR, scheme)


def _no_csir_sinrs(sc: Scenario, pc: PowerControl, scheme: str):
    """Closed-form effective SINRs (center, edge) per group/user."""
    lam = estimation_quality(sc, pc, scheme)
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    m = sc.M
    pd = sc.p_d
    if scheme == SCHEME_N:
        sinr_h = (pd * lam.lambda_h * bh * gh * m) / (
            pd * lam.lambda_h * bh * gg * m + pd * bh + 1.0)
        sinr_g = (pd * lam.lambda_g * bg * gg * m) / (pd * bg + 1.0)
        return sinr_g, sinr_h
    # Orthogonal slots and the all-orthogonal-pilots baseline share one form;
    # they differ only in scheduling, which the prelog/eta scaling captures.
    sinr_g = (pd * lam.lambda_g * bg * gg * m) / (pd * bg + 1.0)
    sinr_h = (pd * lam.lambda_h * bh * gh * m) / (pd * bh + 1.0)
    return sinr_g, sinr_h


def decodability_violations(sc: Scenario, pc: PowerControl) -> np.ndarray:
    """Boolean mask of groups whose SIC ordering condition fails.

    The sufficient condition is alpha_h*beta_h <= alpha_g*beta_g (compared
    with a relative slack so boundary grid points are not lost to float
    jitter). It is vacuous when either symbol of the group carries no power:
    with no center data there is nothing to cancel for, and with no edge
    data nothing to cancel.
    """
    ahbh = np.asarray(pc.alpha_h) * np.asarray(sc.beta_h)
    agbg = np.asarray(pc.alpha_g) * np.asarray(sc.beta_g)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    slack = 1e-9 * np.maximum(ahbh, 1.0)
    return (ahbh > agbg + slack) & (gg > 0) & (gh > 0)


def rate_no_csir(sc: Scenario, pc: PowerControl, scheme: str) -> RatePoint:
    """Closed-form ergodic rates when users only know channel statistics.

    Schemes: "N" (shared pilots), "O" (orthogonal slots), "baseline_K" (all K
    users served at once with K orthogonal pilots, joint power constraint,
    prelog 1 - K/T). For the shared-pilot scheme the SIC ordering condition
    must hold in every group that superposes two data streams.
    """
    if scheme == SCHEME_N:
        bad = decodability_violations(sc, pc)
        if np.any(bad):
            groups = np.flatnonzero(bad).tolist()
            raise DecodabilityViolatedError(
                f"SIC ordering condition alpha_h*beta_h <= alpha_g*beta_g "
                f"fails for group(s) {groups}"
            )
    sinr_g, sinr_h = _no_csir_sinrs(sc, pc, scheme)
    raw = RatePoint(scheme, REGIME_NO_CSIR, pc,
                    np.log2(1 + sinr_g), np.log2(1 + sinr_h))
    return effective_rate(raw, sc, REGIME_NO_CSIR, scheme)


def noma_decodability_margin(sc: Scenario, pc: PowerControl, regime: str,
                             mc: McConfig | None = None) -> np.ndarray:
    """Per-group ergodic-rate margin of the edge symbol at the SIC receiver
    over the edge receiver. Nonnegative margins certify the NOMA ordering.

    perfect_csir: Monte-Carlo difference of the two ergodic averages. Other
    regimes: closed-form difference of the effective-SINR rates; the pilot
    powers govern decodability in both estimated-gain regimes.
    """
    if regime == REGIME_PERFECT_CSIR:
        if mc is None:
            raise ValueError("perfect-CSIR margin needs an McConfig")
        gains = perfect_csir_gains(sc, pc, SCHEME_N, mc)
        log_eh, log_gh, _ = _sinr_logs_scheme_n(sc, pc, gains)
        return log_gh.mean(axis=0) - log_eh.mean(axis=0)
    lam = estimation_quality(sc, pc, SCHEME_N)
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    m, pd = sc.M, sc.p_d
    sinr_at_h = (pd * lam.lambda_h * bh * gh * m) / (
        pd * lam.lambda_h * bh * gg * m + pd * bh + 1.0)
    sinr_at_g = (pd * lam.lambda_g * bg * gh * m) / (
        pd * lam.lambda_g * bg * gg * m + pd * bg + 1.0)
    return np.log2(1 + sinr_at_g) - np.log2(1 + sinr_at_h)


@dataclass(frozen=True)
class DlPilotMoments:
    """Per-batch accumulated equalization moments for the DL-pilot rates.

    Arrays are indexed (batch, group) or (batch, group, group); batches are
    contiguous chunk groups, enabling jackknife standard errors while keeping
    the chunk-ordered deterministic reduction.
    """

    scheme: str
    valid_c: np.ndarray
    sum_ratio_c: np.ndarray
    sum_ratio2_c: np.ndarray
    sum_inv2_c: np.ndarray
    sum_cross_c: np.ndarray
    rejected_c: np.ndarray
    valid_e: np.ndarray
    sum_ratio_e: np.ndarray
    sum_ratio2_e: np.ndarray
    sum_inv2_e: np.ndarray
    sum_cross_e: np.ndarray
    rejected_e: np.ndarray

    @property
    def n_batches(self) -> int:
        return self.valid_c.shape[0]

    def reduce(self, exclude: int | None = None):
        """Collapse batches (optionally leaving one out) to the per-user
        moments E[f/fhat], Var[f/fhat], E[|1/fhat|^2] and the cross-gain
        expectation matrix E[|coupling_kj|^2 / |fhat_k|^2]."""
        keep = np.ones(self.n_batches, dtype=bool)
        if exclude is not None:
            keep[exclude] = False

        def collapse(valid, s_ratio, s_ratio2, s_inv2, s_cross):
            n = valid[keep].sum(axis=0)
            if np.any(n == 0):
                raise DegenerateEstimateError(
                    "no valid trials for at least one user's gain estimate"
                )
            e_ratio = s_ratio[keep].sum(axis=0) / n
            m2 = s_ratio2[keep].sum(axis=0) / n
            var = np.maximum(m2 - np.abs(e_ratio) ** 2, 0.0)
            inv2 = s_inv2[keep].sum(axis=0) / n
            cross = s_cross[keep].sum(axis=0) / n[:, None]
            return e_ratio, var, inv2, cross

        return (collapse(self.valid_c, self.sum_ratio_c, self.sum_ratio2_c,
                         self.sum_inv2_c, self.sum_cross_c),
                collapse(self.valid_e, self.sum_ratio_e, self.sum_ratio2_e,
                         self.sum_inv2_e, self.sum_cross_e))


def _dl_chunk_part(sc, pc, scheme, draws, consts, ci):
    """One chunk's masked moment sums for both user classes."""
    k2 = sc.n_groups
    snr_c, snr_e, prior_c, prior_e, floor_c, floor_e = consts
    bc, be = _beams_from_draws(sc, pc, scheme, draws)
    coup_c = _coupling(draws["g"], bc)
    coup_e = _coupling(draws["h"], be)
    _check_finite(coup_c, ci, "center coupling")
    _check_finite(coup_e, ci, "edge coupling")
    idx = np.arange(k2)
    f_c = coup_c[:, idx, idx]
    f_e = coup_e[:, idx, idx]
    fhat_c = lmmse_gain_estimate(f_c * np.sqrt(snr_c) + draws["n_dp_c"],
                                 prior_c, snr_c)
    fhat_e = lmmse_gain_estimate(f_e * np.sqrt(snr_e) + draws["n_dp_e"],
                                 prior_e, snr_e)

    def reduce_class(f, fhat, coup, floor):
        mag = np.abs(fhat)
        mask = (mag >= floor) & (mag > 0)
        safe = np.where(mask, fhat, 1.0)
        inv2 = np.where(mask, 1.0 / np.abs(safe) ** 2, 0.0)
        ratio = np.where(mask, f / safe, 0.0)
        gains2 = np.abs(coup) ** 2
        cross = np.einsum("tkj,tk->kj", gains2, inv2)
        return (mask.sum(axis=0), ratio.sum(axis=0),
                (np.abs(ratio) ** 2).sum(axis=0), inv2.sum(axis=0),
                cross, (~mask).sum(axis=0))

    return (reduce_class(f_c, fhat_c, coup_c, floor_c),
            reduce_class(f_e, fhat_e, coup_e, floor_e))


def _dl_consts(sc, pc, scheme):
    lam = estimation_quality(sc, pc, scheme)
    snr_c = sc.p_d * np.asarray(sc.beta_g)
    snr_e = sc.p_d * np.asarray(sc.beta_h)
    prior_c = np.sqrt(sc.M * lam.lambda_g)
    prior_e = np.sqrt(sc.M * lam.lambda_h)
    return (snr_c, snr_e, prior_c, prior_e,
            FLOOR_SCALE * prior_c, FLOOR_SCALE * prior_e)


def _dl_parts_to_moments(parts, scheme, k2):
    nc = len(parts)
    n_b = min(nc, _JACKKNIFE_BATCHES)

    def batched(side):
        valid = np.zeros((n_b, k2))
        s_ratio = np.zeros((n_b, k2), dtype=complex)
        s_ratio2 = np.zeros((n_b, k2))
        s_inv2 = np.zeros((n_b, k2))
        s_cross = np.zeros((n_b, k2, k2))
        rejected = np.zeros(k2)
        for ci, part in enumerate(parts):
            b = ci * n_b // nc
            v, r, r2, i2, cr, rej = part[side]
            valid[b] += v
            s_ratio[b] += r
            s_ratio2[b] += r2
            s_inv2[b] += i2
            s_cross[b] += cr
            rejected += rej
        return valid, s_ratio, s_ratio2, s_inv2, s_cross, rejected

    return DlPilotMoments(scheme, *batched(0), *batched(1))


def dl_pilot_moments_batch(sc: Scenario, pcs, scheme: str,
                           mc: McConfig) -> dict:
    """Equalization moments for each distinct pilot-weight point, drawing
    every chunk's channels, pilot noise, and DL pilot noise once."""
    reps = _unique_alpha_points(pcs, scheme)
    consts = {key: _dl_consts(sc, pc, scheme) for key, pc in reps.items()}

    def one(ci, start, n_used):
        draws = _chunk_draws(sc, mc, ci, scheme, dl_pilot=True)
        return {key: _dl_chunk_part(sc, pc, scheme, draws, consts[key], ci)
                for key, pc in reps.items()}

    parts = map_chunks(mc, one)
    k2 = sc.n_groups
    return {key: _dl_parts_to_moments([p[key] for p in parts], scheme, k2)
            for key in reps}


def dl_pilot_moments(sc: Scenario, pc: PowerControl, scheme: str,
                     mc: McConfig) -> DlPilotMoments:
    """Monte-Carlo moments of the equalized downlink channel.

    Each trial draws fading, uplink pilot noise, beams, and one beamformed
    downlink pilot per group (shared scheme) or per user (orthogonal scheme),
    forms the LMMSE gain estimate, and accumulates the ratio moments. Trials
    whose |fhat| falls below the numeric floor are rejected and counted.
    Depends on pc only through the pilot weights.
    """
    return dl_pilot_moments_batch(sc, [pc], scheme, mc)[alpha_key(pc, scheme)]


def _dl_pilot_raw_rates(sc, pc, scheme, moments, exclude=None):
    """Unscaled DL-pilot rates assembled from the equalization moments,
    exactly in the published denominator grouping."""
    (er_c, var_c, inv2_c, cross_c), (er_e, var_e, inv2_e, cross_e) = \
        moments.reduce(exclude)
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    pd = sc.p_d
    e2_c = np.abs(er_c) ** 2
    e2_e = np.abs(er_e) ** 2
    off = 1.0 - np.eye(sc.n_groups)

    if scheme == SCHEME_N:
        weights = gg + gh
        intf_c = pd * bg * ((cross_c * off) @ weights)
        intf_e = pd * bh * ((cross_e * off) @ weights)
        num_g = pd * bg * gg * e2_c
        den_g = pd * bg * var_c + intf_c + inv2_c
        num_h = pd * bh * gh * e2_e
        den_h = pd * bh * gh * var_e + pd * bh * gg * e2_e + intf_e + inv2_e
    else:
        intf_c = pd * bg * ((cross_c * off) @ gg)
        intf_e = pd * bh * ((cross_e * off) @ gh)
        num_g = pd * bg * gg * e2_c
        den_g = pd * bg * var_c + intf_c + inv2_c
        num_h = pd * bh * gh * e2_e
        den_h = pd * bh * var_e + intf_e + inv2_e
    return np.log2(1 + num_g / den_g), np.log2(1 + num_h / den_h)


def rate_dl_pilot(sc: Scenario, pc: PowerControl, scheme: str, mc: McConfig,
                  moments: DlPilotMoments | None = None) -> RatePoint:
    """Ergodic rates with LMMSE-estimated effective gains at the users.

    The receiver divides by its gain estimate; the resulting worst-case-noise
    SINR uses the Monte-Carlo moments E[f/fhat], Var[f/fhat], E[|I/fhat|^2]
    and E[|1/fhat|^2]. Standard errors come from a jackknife over chunk
    batches. Prelog (1 - K/T) and the eta split are applied before returning.
    """
    if scheme not in (SCHEME_N, SCHEME_O):
        raise ValueError(f"DL-pilot rates support schemes N and O, got {scheme!r}")
    if moments is None:
        moments = dl_pilot_moments(sc, pc, scheme, mc)
    r_g, r_h = _dl_pilot_raw_rates(sc, pc, scheme, moments)
    n_b = moments.n_batches
    if n_b >= 2:
        loo = [_dl_pilot_raw_rates(sc, pc, scheme, moments, exclude=b)
               for b in range(n_b)]
        loo_g = np.stack([x[0] for x in loo])
        loo_h = np.stack([x[1] for x in loo])
        factor = (n_b - 1) / n_b
        se_g = np.sqrt(factor * ((loo_g - loo_g.mean(axis=0)) ** 2).sum(axis=0))
        se_h = np.sqrt(factor * ((loo_h - loo_h.mean(axis=0)) ** 2).sum(axis=0))
    else:
        se_g = se_h = None
    raw = RatePoint(scheme, REGIME_DL_PILOT, pc, r_g, r_h, se_g, se_h)
    return effective_rate(raw, sc, REGIME_DL_PILOT, scheme)


def hardening_oracle_moments(sc: Scenario, pc: PowerControl, mc: McConfig,
                             scheme: str = SCHEME_N) -> HardeningMoments:
    """Monte-Carlo estimate of the hardening-bound SINR ingredients, computed
    from simulated realizations without the closed forms.

    The effective own-beam gain t_k = c_k sqrt(beta_k) channel_k . conj(ybar_k)
    yields the signal power p_d gamma |E t|^2, the coherent intra-group term,
    and the gain-fluctuation variance; cross couplings give the other-group
    interference. Noise power is the model's unit constant.
    """
    k2 = sc.n_groups
    if scheme == SCHEME_BASELINE:
        beta = np.concatenate([sc.beta_g, sc.beta_h])
        gamma = np.concatenate([pc.gamma_g, pc.gamma_h])
        n_users = 2 * k2
    else:
        n_users = k2

    def one(ci, start, n_used):
        g, h, bc, be, _ = _chunk_beam_blocks(sc, pc, scheme, mc, ci)
        if scheme == SCHEME_BASELINE:
            u = np.concatenate([g, h], axis=2)
            v = np.concatenate([bc, be], axis=2)
            coup = np.einsum("tmu,tmj->tuj", u, v)
            _check_finite(coup, ci, "coupling")
            idx = np.arange(n_users)
            t = np.sqrt(beta) * coup[:, idx, idx]
            cross2 = beta[:, None] * np.abs(coup) ** 2
            return (t.sum(axis=0), (np.abs(t) ** 2).sum(axis=0),
                    cross2.sum(axis=0))
        coup_c = _coupling(g, bc)
        coup_e = _coupling(h, be)
        _check_finite(coup_c, ci, "center coupling")
        _check_finite(coup_e, ci, "edge coupling")
        idx = np.arange(k2)
        bg = np.asarray(sc.beta_g)
        bh = np.asarray(sc.beta_h)
        t_c = np.sqrt(bg) * coup_c[:, idx, idx]
        t_e = np.sqrt(bh) * coup_e[:, idx, idx]
        cross_c = bg[:, None] * np.abs(coup_c) ** 2
        cross_e = bh[:, None] * np.abs(coup_e) ** 2
        return (t_c.sum(axis=0), (np.abs(t_c) ** 2).sum(axis=0),
                cross_c.sum(axis=0),
                t_e.sum(axis=0), (np.abs(t_e) ** 2).sum(axis=0),
                cross_e.sum(axis=0))

    parts = map_chunks(mc, one)
    n = mc.trials
    pd = sc.p_d
    off_all = 1.0 - np.eye(n_users)

    if scheme == SCHEME_BASELINE:
        sum_t = sum(p[0] for p in parts)
        sum_t2 = sum(p[1] for p in parts)
        sum_cross = sum(p[2] for p in parts)
        e_t = sum_t / n
        var_t = sum_t2 / n - np.abs(e_t) ** 2
        cross = sum_cross / n
        signal = pd * gamma * np.abs(e_t) ** 2
        gain_var = pd * gamma * var_t
        other = pd * ((cross * off_all) @ gamma)
        coh = np.zeros(n_users)
        noise = np.ones(n_users)
        center = SinrDecomposition(signal[:k2], coh[:k2], gain_var[:k2],
                                   other[:k2], noise[:k2])
        edge = SinrDecomposition(signal[k2:], coh[k2:], gain_var[k2:],
                                 other[k2:], noise[k2:])
        return HardeningMoments(scheme, center, edge)

    sum_tc = sum(p[0] for p in parts)
    sum_tc2 = sum(p[1] for p in parts)
    sum_cc = sum(p[2] for p in parts)
    sum_te = sum(p[3] for p in parts)
    sum_te2 = sum(p[4] for p in parts)
    sum_ce = sum(p[5] for p in parts)
    e_tc = sum_tc / n
    e_te = sum_te / n
    var_tc = sum_tc2 / n - np.abs(e_tc) ** 2
    var_te = sum_te2 / n - np.abs(e_te) ** 2
    cross_c = sum_cc / n
    cross_e = sum_ce / n
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    off = 1.0 - np.eye(k2)
    noise = np.ones(k2)

    if scheme == SCHEME_N:
        weights = gg + gh
        center = SinrDecomposition(
            signal_power=pd * gg * np.abs(e_tc) ** 2,
            coherent_self_interference=np.zeros(k2),
            gain_variance=pd * weights * var_tc,
            other_group_interference=pd * ((cross_c * off) @ weights),
            noise_power=noise,
        )
        edge = SinrDecomposition(
            signal_power=pd * gh * np.abs(e_te) ** 2,
            coherent_self_interference=pd * gg * np.abs(e_te) ** 2,
            gain_variance=pd * weights * var_te,
            other_group_interference=pd * ((cross_e * off) @ weights),
            noise_power=noise,
        )
    else:
        center = SinrDecomposition(
            signal_power=pd * gg * np.abs(e_tc) ** 2,
            coherent_self_interference=np.zeros(k2),
            gain_variance=pd * gg * var_tc,
            other_group_interference=pd * ((cross_c * off) @ gg),
            noise_power=noise,
        )
        edge = SinrDecomposition(
            signal_power=pd * gh * np.abs(e_te) ** 2,
            coherent_self_interference=np.zeros(k2),
            gain_variance=pd * gh * var_te,
            other_group_interference=pd * ((cross_e * off) @ gh),
            noise_power=noise,
        )
    return HardeningMoments(scheme, center, edge)


def hardening_closed_form_moments(sc: Scenario, pc: PowerControl,
                                  scheme: str = SCHEME_N) -> HardeningMoments:
    """Analytic counterparts of the oracle's SINR decomposition."""
    lam = estimation_quality(sc, pc, scheme)
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    gg = np.asarray(pc.gamma_g)
    gh = np.asarray(pc.gamma_h)
    pd, m = sc.p_d, sc.M
    k2 = sc.n_groups
    noise = np.ones(k2)
    off = 1.0 - np.eye(k2)

    if scheme == SCHEME_N:
        weights = gg + gh
        other_c = pd * bg * (off @ weights)
        other_e = pd * bh * (off @ weights)
        center = SinrDecomposition(
            signal_power=pd * lam.lambda_g * bg * gg * m,
            coherent_self_interference=np.zeros(k2),
            gain_variance=pd * bg * weights,
            other_group_interference=other_c,
            noise_power=noise,
        )
        edge = SinrDecomposition(
            signal_power=pd * lam.lambda_h * bh * gh * m,
            coherent_self_interference=pd * lam.lambda_h * bh * gg * m,
            gain_variance=pd * bh * weights,
            other_group_interference=other_e,
            noise_power=noise,
        )
        return HardeningMoments(scheme, center, edge)

    if scheme == SCHEME_BASELINE:
        gamma = np.concatenate([gg, gh])
        beta = np.concatenate([bg, bh])
        lam_all = np.concatenate([lam.lambda_g, lam.lambda_h])
        off_all = 1.0 - np.eye(2 * k2)
        signal = pd * lam_all * beta * gamma * m
        gain_var = pd * beta * gamma
        other = pd * beta * (off_all @ gamma)
        coh = np.zeros(2 * k2)
        noise_all = np.ones(2 * k2)
        center = SinrDecomposition(signal[:k2], coh[:k2], gain_var[:k2],
                                   other[:k2], noise_all[:k2])
        edge = SinrDecomposition(signal[k2:], coh[k2:], gain_var[k2:],
                                 other[k2:], noise_all[k2:])
        return HardeningMoments(scheme, center, edge)

    center = SinrDecomposition(
        signal_power=pd * lam.lambda_g * bg * gg * m,
        coherent_self_interference=np.zeros(k2),
        gain_variance=pd * bg * gg,
        other_group_interference=pd * bg * (off @ gg),
        noise_power=noise,
    )
    edge = SinrDecomposition(
        signal_power=pd * lam.lambda_h * bh * gh * m,
        coherent_self_interference=np.zeros(k2),
        gain_variance=pd * bh * gh,
        other_group_interference=pd * bh * (off @ gh),
        noise_power=noise,
    )
    return HardeningMoments(scheme, center, edge)


def effective_rate(raw: RatePoint, sc: Scenario, regime: str,
                   scheme: str) -> RatePoint:
    """Apply the prelog factor and the orthogonal scheme's eta time shares.

    Identity when prelog_mode is "omit" and eta splits do not apply; the
    evaluators call this exactly once, so their outputs are final.
    """
    pl = prelog_factor(sc, regime, scheme)
    factor_g = pl * (raw.pc.eta if scheme == SCHEME_O else 1.0)
    factor_h = pl * ((1.0 - raw.pc.eta) if scheme == SCHEME_O else 1.0)

    def scale(arr, f):
        return None if arr is None else arr * f

    return RatePoint(
        scheme=raw.scheme, regime=raw.regime, pc=raw.pc,
        rates_g=raw.rates_g * factor_g,
        rates_h=raw.rates_h * factor_h,
        stderr_g=scale(raw.stderr_g, factor_g),
        stderr_h=scale(raw.stderr_h, factor_h),
    )
