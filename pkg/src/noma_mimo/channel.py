"""Rayleigh small-scale fading draws and post-correlation uplink pilot
observations, with counter-based reproducible seeding.

The orthogonal pilot matrix is never materialized: correlating the received
block with it is a unitary map on the pilot subspace, so the per-group
observation vectors can be simulated directly with i.i.d. CN(0, I) noise,
which is statistically exact and cheaper.

Every random stream is keyed by (base_seed, chunk_index, role), so any trial
can be regenerated independently of execution order or worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import TrialOutOfRangeError
from .scenario import SCHEME_N, McConfig, PowerControl, Scenario

# Stream roles. DL data noise is handled analytically and its slot is reserved.
ROLE_CHANNEL_G = 0
ROLE_CHANNEL_H = 1
ROLE_UL_NOISE = 2          # shared-pilot observation noise / center-slot noise
ROLE_DL_NOISE = 3          # reserved
ROLE_DL_PILOT_NOISE = 4    # center users' DL pilot reception
ROLE_UL_NOISE_EDGE = 5     # edge-slot pilot observation noise
ROLE_DL_PILOT_NOISE_EDGE = 6  # edge users' DL pilot reception

_MASK64 = (1 << 64) - 1

WORKERS_ENV = "NOMA_MIMO_WORKERS"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def stream_rng(base_seed: int, chunk_index: int, role: int) -> np.random.Generator:
    """Deterministic generator for one (chunk, role) stream."""
    return np.random.default_rng([base_seed & _MASK64, chunk_index, role])


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circular complex Gaussians with unit second moment E|x|^2 = 1."""
    z = rng.standard_normal(size=tuple(shape) + (2,))
    return np.sqrt(0.5) * (z[..., 0] + 1j * z[..., 1])


def n_chunks(mc: McConfig) -> int:
    return (mc.trials + mc.chunk - 1) // mc.chunk


def chunk_layout(mc: McConfig):
    """Yield (chunk_index, start_trial, n_used) blocks covering all trials."""
    for ci in range(n_chunks(mc)):
        start = ci * mc.chunk
        yield ci, start, min(mc.chunk, mc.trials - start)


def map_chunks(mc: McConfig, fn):
    """Run fn(chunk_index, start, n_used) for every chunk and return the
    partial results in chunk order. Honors the NOMA_MIMO_WORKERS environment
    variable; the ordered reduction keeps results identical for any value."""
    jobs = list(chunk_layout(mc))
    workers = worker_count()
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of the small-scale fading matrices.

    G: M x K/2 center-user channels; H: M x K/2 edge-user channels.
    """

    G: np.ndarray
    H: np.ndarray
    trial_index: int


@dataclass(frozen=True)
class ProcessedPilots:
    """Post-correlation pilot observations for one trial.

    Shared-pilot scheme: one vector per group in ``ybar`` (M x K/2).
    Orthogonal scheme: one set per slot in ``ybar_center`` / ``ybar_edge``.
    """

    scheme: str
    ybar: np.ndarray | None = None
    ybar_center: np.ndarray | None = None
    ybar_edge: np.ndarray | None = None


def channel_chunk(sc: Scenario, mc: McConfig, chunk_index: int):
    """(G, H) fading blocks of shape (n_used, M, K/2).

    A full chunk is always generated and then sliced, so a trial's draw never
    depends on the total trial count.
    """
    n_used = min(mc.chunk, mc.trials - chunk_index * mc.chunk)
    k2 = sc.n_groups
    g = complex_normal(stream_rng(mc.base_seed, chunk_index, ROLE_CHANNEL_G),
                       (mc.chunk, sc.M, k2))
    h = complex_normal(stream_rng(mc.base_seed, chunk_index, ROLE_CHANNEL_H),
                       (mc.chunk, sc.M, k2))
    return g[:n_used], h[:n_used]


def noise_chunk(sc: Scenario, mc: McConfig, chunk_index: int, role: int,
                cols: int, vector: bool = True) -> np.ndarray:
    """Unit-variance complex noise block: (n_used, M, cols) when vector,
    else (n_used, cols) for scalar receptions."""
    n_used = min(mc.chunk, mc.trials - chunk_index * mc.chunk)
    shape = (mc.chunk, sc.M, cols) if vector else (mc.chunk, cols)
    z = complex_normal(stream_rng(mc.base_seed, chunk_index, role), shape)
    return z[:n_used]


def draw_small_scale(sc: Scenario, mc: McConfig, trial: int) -> ChannelDraw:
    """Fading realization for one trial; bit-identical for identical inputs."""
    if not 0 <= trial < mc.trials:
        raise TrialOutOfRangeError(f"trial {trial} outside [0, {mc.trials})")
    ci, offset = divmod(trial, mc.chunk)
    g, h = channel_chunk(sc, mc, ci)
    return ChannelDraw(G=g[offset], H=h[offset], trial_index=trial)


def pilot_amplitudes(sc: Scenario, pc: PowerControl, scheme: str):
    """Per-group received pilot amplitudes.

    Shared-pilot scheme: (sqrt(p_u a_g b_g), sqrt(p_u a_h b_h)) on G and H.
    Orthogonal scheme / baseline: full pilot power per slot, no alpha weights.
    """
    bg = np.asarray(sc.beta_g)
    bh = np.asarray(sc.beta_h)
    if scheme == SCHEME_N:
        ag = np.asarray(pc.alpha_g)
        ah = np.asarray(pc.alpha_h)
        return np.sqrt(sc.p_u * ag * bg), np.sqrt(sc.p_u * ah * bh)
    return np.sqrt(sc.p_u * bg), np.sqrt(sc.p_u * bh)


def processed_pilot_chunk(sc: Scenario, pc: PowerControl, scheme: str,
                          mc: McConfig, chunk_index: int):
    """Chunked pilot observations.

    Returns {"ybar": (n, M, K/2)} for the shared-pilot scheme and
    {"ybar_center": ..., "ybar_edge": ...} for the orthogonal scheme (the
    baseline shares the orthogonal structure, all users in one slot).
    """
    g, h = channel_chunk(sc, mc, chunk_index)
    amp_g, amp_h = pilot_amplitudes(sc, pc, scheme)
    k2 = sc.n_groups
    if scheme == SCHEME_N:
        ybar = amp_g * g + amp_h * h
        if not sc.noise_free_ul:
            ybar = ybar + noise_chunk(sc, mc, chunk_index, ROLE_UL_NOISE, k2)
        return {"ybar": ybar}
    ybar_c = amp_g * g
    ybar_e = amp_h * h
    if not sc.noise_free_ul:
        ybar_c = ybar_c + noise_chunk(sc, mc, chunk_index, ROLE_UL_NOISE, k2)
        ybar_e = ybar_e + noise_chunk(sc, mc, chunk_index, ROLE_UL_NOISE_EDGE, k2)
    return {"ybar_center": ybar_c, "ybar_edge": ybar_e}


def processed_ul_pilots(draw: ChannelDraw, sc: Scenario, pc: PowerControl,
                        scheme: str, mc: McConfig, trial: int) -> ProcessedPilots:
    """Pilot observations for one trial, consistent with the chunked path."""
    if draw.trial_index != trial:
        raise ValueError(f"draw is for trial {draw.trial_index}, not {trial}")
    if not 0 <= trial < mc.trials:
        raise TrialOutOfRangeError(f"trial {trial} outside [0, {mc.trials})")
    ci, offset = divmod(trial, mc.chunk)
    blocks = processed_pilot_chunk(sc, pc, scheme, mc, ci)
    if scheme == SCHEME_N:
        return ProcessedPilots(scheme=scheme, ybar=blocks["ybar"][offset])
    return ProcessedPilots(scheme=scheme,
                           ybar_center=blocks["ybar_center"][offset],
                           ybar_edge=blocks["ybar_edge"][offset])
