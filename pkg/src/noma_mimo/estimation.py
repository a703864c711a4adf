"""MMSE uplink channel estimation, scalar estimation-quality factors, and
downlink LMMSE effective-gain estimation.

For this signal model the MMSE estimate of each channel (or of the combined
group channel) is a scalar multiple of the processed pilot vector, so all
estimates of one group are parallel and lead to the same normalized beam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    ROLE_DL_PILOT_NOISE,
    ROLE_DL_PILOT_NOISE_EDGE,
    ChannelDraw,
    ProcessedPilots,
    complex_normal,
    stream_rng,
)
from .errors import SchemeMismatchError, TrialOutOfRangeError
from .scenario import (
    SCHEME_BASELINE,
    SCHEME_N,
    SCHEME_O,
    McConfig,
    PowerControl,
    Scenario,
)


@dataclass(frozen=True)
class QualityFactors:
    """Fraction of each user's channel energy captured by its uplink estimate.

    lambda_g / lambda_h are per-group arrays of shape (K/2,), each in [0, 1].
    """

    scheme: str
    lambda_g: np.ndarray
    lambda_h: np.ndarray


@dataclass(frozen=True)
class UlEstimates:
    """Per-group uplink estimates for one trial (each column length M).

    Orthogonal scheme: ghat / hhat from the two slots. Shared-pilot scheme:
    additionally the combined-channel estimate what; ghat, hhat, what are
    pairwise parallel. The scale_* factors are the scalars applied to the
    processed pilots.
    """

    scheme: str
    ghat: np.ndarray
    hhat: np.ndarray
    what: np.ndarray | None
    scale_g: np.ndarray
    scale_h: np.ndarray
    scale_w: np.ndarray | None


@dataclass(frozen=True)
class DlGainEstimates:
    """LMMSE estimates of the beamformed downlink gains for one trial.

    f_* are the true effective gains, fhat_* their estimates, one entry per
    group for each user class. prior_mean_* = sqrt(M * lambda); the prior
    variance is 1 for every user under the beam normalization used here.
    """

    f_center: np.ndarray
    fhat_center: np.ndarray
    f_edge: np.ndarray
    fhat_edge: np.ndarray
    prior_mean_center: np.ndarray
    prior_mean_edge: np.ndarray
    prior_var: float = 1.0


def estimation_quality(sc: Scenario, pc: PowerControl, scheme: str) -> QualityFactors:
    """Closed-form quality factors.

    Shared pilots: lambda = p_u a b / (p_u a_g b_g + p_u a_h b_h + 1); the two
    users of a group split less than the full energy for finite pilot power.
    Orthogonal pilots: lambda = p_u b / (p_u b + 1). In the noise-free limit
    the +1 disappears (orthogonal estimates become exact, lambda = 1).
    """
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    sigma = sc.ul_noise_var
    if scheme == SCHEME_N:
        ag = np.asarray(pc.alpha_g)
        ah = np.asarray(pc.alpha_h)
        den = sc.p_u * (ag * bg + ah * bh) + sigma
        safe = np.where(den > 0, den, 1.0)
        lam_g = np.where(den > 0, sc.p_u * ag * bg / safe, 0.0)
        lam_h = np.where(den > 0, sc.p_u * ah * bh / safe, 0.0)
    elif scheme in (SCHEME_O, SCHEME_BASELINE):
        lam_g = sc.p_u * bg / (sc.p_u * bg + sigma)
        lam_h = sc.p_u * bh / (sc.p_u * bh + sigma)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return QualityFactors(scheme=scheme, lambda_g=lam_g, lambda_h=lam_h)


def ul_estimate_scales(sc: Scenario, pc: PowerControl, scheme: str):
    """Scalars mapping processed pilots to MMSE estimates, per group.

    Returns (scale_g, scale_h, scale_w); scale_w is None for the orthogonal
    scheme. The noise-free limit drops the +1 so the orthogonal estimates are
    exact and the combined estimate equals the true combined channel.
    """
    sigma = sc.ul_noise_var
    if scheme == SCHEME_N:
        amp_g = np.sqrt(sc.p_u * np.asarray(pc.alpha_g) * np.asarray(sc.beta_g))
        amp_h = np.sqrt(sc.p_u * np.asarray(pc.alpha_h) * np.asarray(sc.beta_h))
        den = amp_g**2 + amp_h**2 + sigma
        safe = np.where(den > 0, den, 1.0)
        zero = den <= 0
        scale_g = np.where(zero, 0.0, amp_g / safe)
        scale_h = np.where(zero, 0.0, amp_h / safe)
        # E[w ybar^H] = sqrt(p_u) (a_g b_g + a_h b_h) I
        scale_w = np.where(zero, 0.0,
                           (amp_g**2 + amp_h**2) / (np.sqrt(sc.p_u) * safe))
        return scale_g, scale_h, scale_w
    amp_g = np.sqrt(sc.p_u * np.asarray(sc.beta_g))
    amp_h = np.sqrt(sc.p_u * np.asarray(sc.beta_h))
    scale_g = amp_g / (amp_g**2 + sigma)
    scale_h = amp_h / (amp_h**2 + sigma)
    return scale_g, scale_h, None


def mmse_ul_estimates(proc: ProcessedPilots, sc: Scenario, pc: PowerControl,
                      scheme: str) -> UlEstimates:
    """MMSE estimates from one trial's processed pilots."""
    if proc.scheme != scheme:
        raise SchemeMismatchError(
            f"pilots were processed for scheme {proc.scheme!r}, not {scheme!r}"
        )
    scale_g, scale_h, scale_w = ul_estimate_scales(sc, pc, scheme)
    if scheme == SCHEME_N:
        ghat = proc.ybar * scale_g
        hhat = proc.ybar * scale_h
        what = proc.ybar * scale_w
        return UlEstimates(scheme, ghat, hhat, what, scale_g, scale_h, scale_w)
    ghat = proc.ybar_center * scale_g
    hhat = proc.ybar_edge * scale_h
    return UlEstimates(scheme, ghat, hhat, None, scale_g, scale_h, None)


def lmmse_gain_estimate(y_pilot: np.ndarray, prior_mean, dl_snr,
                        prior_var: float = 1.0) -> np.ndarray:
    """LMMSE estimate of an effective gain f from y = f*sqrt(dl_snr) + n,
    with unit-variance noise. dl_snr = p_d * beta for the receiving user."""
    amp = np.sqrt(dl_snr)
    coef = amp * prior_var / (dl_snr * prior_var + 1.0)
    return prior_mean + coef * (y_pilot - amp * prior_mean)


def dl_gain_estimate(sc: Scenario, pc: PowerControl, lam: QualityFactors,
                     beams, draw: ChannelDraw, mc: McConfig,
                     trial: int) -> DlGainEstimates:
    """Simulate one trial of beamformed downlink pilots and estimate the
    effective gains at every user.

    The shared-pilot scheme sends one pilot per group; both users of a group
    observe the same beam through their own channels and noises. The
    orthogonal scheme gives each user its own beamformed pilot. Pilot
    reception noise comes from the dedicated per-class streams.
    """
    if draw.trial_index != trial:
        raise ValueError(f"draw is for trial {draw.trial_index}, not {trial}")
    if not 0 <= trial < mc.trials:
        raise TrialOutOfRangeError(f"trial {trial} outside [0, {mc.trials})")
    ci, offset = divmod(trial, mc.chunk)
    k2 = sc.n_groups
    noise_c = complex_normal(stream_rng(mc.base_seed, ci, ROLE_DL_PILOT_NOISE),
                             (mc.chunk, k2))[offset]
    noise_e = complex_normal(stream_rng(mc.base_seed, ci, ROLE_DL_PILOT_NOISE_EDGE),
                             (mc.chunk, k2))[offset]

    # f_(k,g) = g_k . b_k and f_(k,h) = h_k . a_k (plain transpose products;
    # the beams already carry the conjugation).
    f_center = np.einsum("mk,mk->k", draw.G, beams.b)
    f_edge = np.einsum("mk,mk->k", draw.H, beams.a)

    snr_c = sc.p_d * np.asarray(sc.beta_g)
    snr_e = sc.p_d * np.asarray(sc.beta_h)
    prior_c = np.sqrt(sc.M * lam.lambda_g)
    prior_e = np.sqrt(sc.M * lam.lambda_h)

    y_c = f_center * np.sqrt(snr_c) + noise_c
    y_e = f_edge * np.sqrt(snr_e) + noise_e
    fhat_c = lmmse_gain_estimate(y_c, prior_c, snr_c)
    fhat_e = lmmse_gain_estimate(y_e, prior_e, snr_e)
    return DlGainEstimates(
        f_center=f_center, fhat_center=fhat_c,
        f_edge=f_edge, fhat_edge=fhat_e,
        prior_mean_center=prior_c, prior_mean_edge=prior_e,
    )
