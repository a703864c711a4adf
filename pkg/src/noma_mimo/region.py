"""Power-control grid sweeps, time-sharing rate regions, and the constrained
sum-rate experiments.

Grid semantics per scheme:
  * Shared-pilot scheme ("N"): (alpha_g, alpha_h) pilot pairs times the
    center/edge split of each group's equal share (2/K) of the joint data
    budget. The default pilot pairs walk the boundary {max(alpha_g,
    alpha_h) = 1}; scaling both pilot weights up improves both estimation
    qualities, so interior pairs are dominated, and the two endpoints are
    the reduction points to the orthogonal scheme.
  * Orthogonal scheme ("O"): full per-slot power (each scheduled user gets
    2/K) with eta swept; partial-power points never improve the time-sharing
    hull, and the region boundary is the segment between the two
    full-power extremes.
  * Baseline ("baseline_K", all K users on K orthogonal pilots): the
    center/edge split of the joint budget.

One set of channel trials (common random numbers) is shared across all grid
points of a sweep, and pilot-dependent Monte-Carlo passes are cached per
pilot pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodabilityViolatedError, EmptyGridError, InfeasibleError, NomaMimoError
from .rates import (
    RatePoint,
    alpha_key,
    decodability_violations,
    dl_pilot_moments_batch,
    perfect_csir_gains_batch,
    rate_dl_pilot,
    rate_no_csir,
    rate_perfect_csir,
)
from .scenario import (
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
    validate_power,
)

CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Value lists for the swept power-control parameters.

    alpha_g / alpha_h: pilot weight levels, combined per ``alpha_pairing``
    ("zip" pairs them elementwise, "product" takes the Cartesian product).
    split: center-user share of each group's data budget, in [0, 1].
    eta: orthogonal-scheme time shares.
    """

    alpha_g: tuple
    alpha_h: tuple
    split: tuple
    eta: tuple
    alpha_pairing: str = "zip"

    def __post_init__(self):
        for name in ("alpha_g", "alpha_h", "split", "eta"):
            object.__setattr__(self, name,
                               tuple(float(v) for v in getattr(self, name)))
        if self.alpha_pairing not in ("zip", "product"):
            raise ValueError(f"alpha_pairing must be 'zip' or 'product', "
                             f"got {self.alpha_pairing!r}")
        if self.alpha_pairing == "zip" and len(self.alpha_g) != len(self.alpha_h):
            raise ValueError("zip pairing needs alpha lists of equal length")

    def alpha_pairs(self):
        if self.alpha_pairing == "zip":
            return list(zip(self.alpha_g, self.alpha_h))
        return [(ag, ah) for ag in self.alpha_g for ah in self.alpha_h]


def default_grid(n_alpha: int = 21, n_split: int = 21, n_eta: int = 21) -> GridSpec:
    """Default grid: n_alpha pilot pairs along the efficient boundary
    {max(alpha_g, alpha_h) = 1}, n_split data splits, n_eta time shares.

    The free pilot weight is spaced quadratically toward 0, since the useful
    weight of the stronger user scales like the inverse gain ratio; a linear
    path would skip the whole decade below 0.2 that matters when the paired
    gains differ by 20 dB.
    """
    if min(n_alpha, n_split, n_eta) < 1:
        raise ValueError("grid resolutions must be >= 1")
    ag, ah = [], []
    if n_alpha == 1:
        ag, ah = [1.0], [1.0]
    else:
        for t in np.linspace(0.0, 1.0, n_alpha):
            if t <= 0.5:
                ag.append(1.0)
                ah.append((2.0 * t) ** 2)
            else:
                ag.append((2.0 * (1.0 - t)) ** 2)
                ah.append(1.0)
    split = [0.0] if n_split == 1 else list(np.linspace(0.0, 1.0, n_split))
    eta = [0.5] if n_eta == 1 else list(np.linspace(0.0, 1.0, n_eta))
    return GridSpec(alpha_g=tuple(ag), alpha_h=tuple(ah),
                    split=tuple(split), eta=tuple(eta), alpha_pairing="zip")


def power_grid(spec: GridSpec, scheme: str, sc: Scenario) -> list[PowerControl]:
    """Enumerate, in deterministic order, every grid combination that
    satisfies the scheme's power constraints."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n = sc.n_groups
    share = 2.0 / sc.K  # equal data budget per group (per user for "O")
    points = []
    if scheme == SCHEME_N:
        for ag, ah in spec.alpha_pairs():
            for s in spec.split:
                pc = PowerControl.uniform(
                    n, alpha_g=ag, alpha_h=ah,
                    gamma_g=s * share, gamma_h=(1.0 - s) * share, eta=1.0)
                try:
                    validate_power(pc, sc, scheme)
                except NomaMimoError:
                    continue
                points.append(pc)
    elif scheme == SCHEME_O:
        for eta in spec.eta:
            pc = PowerControl.uniform(n, alpha_g=1.0, alpha_h=1.0,
                                      gamma_g=share, gamma_h=share, eta=eta)
            try:
                validate_power(pc, sc, scheme)
            except NomaMimoError:
                continue
            points.append(pc)
    else:
        for s in spec.split:
            pc = PowerControl.uniform(n, alpha_g=1.0, alpha_h=1.0,
                                      gamma_g=s * share, gamma_h=(1.0 - s) * share,
                                      eta=1.0)
            try:
                validate_power(pc, sc, scheme)
            except NomaMimoError:
                continue
            points.append(pc)
    if not points:
        raise EmptyGridError(
            f"no grid point satisfies the {scheme} power constraints")
    return points


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def pareto_hull(points) -> np.ndarray:
    """Upper-right convex boundary of a nonnegative rate-pair cloud.

    Monotone-chain upper hull over the points augmented with the axis
    anchors (0, y_max) and (x_max, 0), using exact float comparisons.
    Returns hull vertices sorted by the first coordinate; collinear interior
    vertices are dropped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("expected a nonempty (n, 2) point array")
    if not np.all(np.isfinite(pts)) or np.any(pts < 0):
        raise ValueError("hull points must be finite and nonnegative")
    anchors = np.array([[0.0, pts[:, 1].max()], [pts[:, 0].max(), 0.0]])
    aug = np.unique(np.vstack([pts, anchors]), axis=0)
    order = np.lexsort((-aug[:, 1], aug[:, 0]))
    hull: list[np.ndarray] = []
    for p in aug[order]:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) >= 0:
            hull.pop()
        hull.append(p)
    return np.array(hull)


def hull_height(hull: np.ndarray, x) -> np.ndarray:
    """Hull boundary height at abscissa x (linear interpolation; 0 outside)."""
    hx = hull[:, 0]
    hy = hull[:, 1]
    keep = np.concatenate([[True], np.diff(hx) > 0])
    return np.interp(x, hx[keep], hy[keep], left=hull[0, 1], right=0.0)


def hull_dominates(hull: np.ndarray, points, tol: float = 1e-9) -> bool:
    """True iff no point lies above the hull boundary (within tol)."""
    pts = np.asarray(points, dtype=float)
    return bool(np.all(pts[:, 1] <= hull_height(hull, pts[:, 0]) + tol))


@dataclass(frozen=True)
class RateRegion:
    """Swept rate pairs and their time-sharing upper boundary.

    pairs[i] projects point i to (sum of edge rates, sum of center rates);
    for K = 2 these are the two user rates.
    """

    scheme: str
    regime: str
    points: tuple
    pairs: np.ndarray
    hull: np.ndarray


def _tag_grid_error(exc: NomaMimoError, index: int, pc: PowerControl):
    exc.args = (
        f"grid point {index} (alpha_g={pc.alpha_g[0]:.4g}, "
        f"alpha_h={pc.alpha_h[0]:.4g}, gamma_g={pc.gamma_g[0]:.4g}, "
        f"gamma_h={pc.gamma_h[0]:.4g}, eta={pc.eta:.4g}): {exc}",
    )
    return exc


def evaluate_grid(sc: Scenario, regime: str, scheme: str,
                  pcs: list[PowerControl], mc: McConfig) -> list[RatePoint]:
    """Evaluate the matching rate operation at every grid point.

    Monte-Carlo passes that depend only on the pilot weights are computed
    once per pilot pair and shared across data splits. Shared-pilot points
    violating the SIC pilot condition are skipped in the estimated-gain
    regimes (the condition is how those bounds become achievable); the
    perfect-CSI evaluator instead lowers the edge rate via its min. The
    baseline is evaluated by its closed form in every regime since it never
    sends downlink pilots.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if scheme == SCHEME_N and regime != REGIME_PERFECT_CSIR:
        live = [pc for pc in pcs
                if not np.any(decodability_violations(sc, pc))]
    else:
        live = list(pcs)

    closed_form = scheme == SCHEME_BASELINE or regime == REGIME_NO_CSIR
    cache = {}
    if not closed_form and live:
        if regime == REGIME_PERFECT_CSIR:
            cache = perfect_csir_gains_batch(sc, live, scheme, mc)
        else:
            cache = dl_pilot_moments_batch(sc, live, scheme, mc)

    results = []
    for i, pc in enumerate(live):
        try:
            if closed_form:
                results.append(rate_no_csir(sc, pc, scheme))
            elif regime == REGIME_PERFECT_CSIR:
                results.append(rate_perfect_csir(
                    sc, pc, scheme, mc, gains=cache[alpha_key(pc, scheme)]))
            else:
                results.append(rate_dl_pilot(
                    sc, pc, scheme, mc, moments=cache[alpha_key(pc, scheme)]))
        except DecodabilityViolatedError:
            continue
        except NomaMimoError as exc:
            raise _tag_grid_error(exc, i, pc)
    return results


def sweep_rate_region(sc: Scenario, regime: str, scheme: str, spec: GridSpec,
                      mc: McConfig) -> RateRegion:
    """Sweep the scheme's grid, collect rate pairs, and take the convex hull.

    The orthogonal scheme's eta sweep realizes time sharing between its two
    full-power extremes. Every swept point lies on or below the returned
    hull (asserted).
    """
    pcs = power_grid(spec, scheme, sc)
    points = evaluate_grid(sc, regime, scheme, pcs, mc)
    if not points:
        raise EmptyGridError(
            f"every {scheme} grid point was filtered out in regime {regime}")
    pairs = np.array([[np.sum(p.rates_h), np.sum(p.rates_g)] for p in points])
    hull = pareto_hull(pairs)
    assert hull_dominates(hull, pairs), "hull fails to dominate swept points"
    return RateRegion(scheme=scheme, regime=regime, points=tuple(points),
                      pairs=pairs, hull=hull)


@dataclass(frozen=True)
class SchemeSumRate:
    """Best constrained allocation found for one scheme."""

    scheme: str
    feasible: bool
    point: RatePoint | None
    sum_rate: float
    shortfall: float


@dataclass(frozen=True)
class ConstrainedSumRateResult:
    """Edge-rate target and the per-scheme constrained maxima."""

    regime: str
    target: np.ndarray
    reference: RatePoint
    results: dict


def scheme_o_reference(sc: Scenario, regime: str, mc: McConfig) -> RatePoint:
    """Orthogonal scheme at eta = 0.5 with full per-slot power (2/K per
    scheduled user); its edge rates are the fairness target."""
    share = 2.0 / sc.K
    pc = PowerControl.uniform(sc.n_groups, alpha_g=1.0, alpha_h=1.0,
                              gamma_g=share, gamma_h=share, eta=0.5)
    return evaluate_grid(sc, regime, SCHEME_O, [pc], mc)[0]


def maximize_sum_rate(sc: Scenario, regime: str, scheme: str, spec: GridSpec,
                      mc: McConfig, target: np.ndarray) -> RatePoint:
    """Maximize the cell sum rate over the scheme's grid subject to every
    edge user reaching its target rate (tolerance 1e-9).

    Raises InfeasibleError with the closest shortfall when no grid point
    qualifies.
    """
    pcs = power_grid(spec, scheme, sc)
    points = evaluate_grid(sc, regime, scheme, pcs, mc)
    best = None
    shortfall = np.inf
    for point in points:
        deficit = float(np.max(target - point.rates_h))
        shortfall = min(shortfall, deficit)
        if deficit <= CONSTRAINT_TOL:
            if best is None or point.sum_rate > best.sum_rate:
                best = point
    if best is None:
        raise InfeasibleError(
            f"no {scheme} grid point meets the edge-rate target in regime "
            f"{regime}; closest shortfall {shortfall:.6g} b/s/Hz",
            shortfall=shortfall if np.isfinite(shortfall) else None,
        )
    return best


def constrained_sum_rate(sc: Scenario, regime: str, spec: GridSpec,
                         mc: McConfig,
                         schemes=(SCHEME_N, SCHEME_O, SCHEME_BASELINE)
                         ) -> ConstrainedSumRateResult:
    """Target = orthogonal scheme's edge rate at eta = 0.5; then maximize
    each scheme's sum rate subject to every edge user meeting the target.
    Per-scheme infeasibility is recorded, not raised."""
    reference = scheme_o_reference(sc, regime, mc)
    target = reference.rates_h.copy()
    results = {}
    for scheme in schemes:
        try:
            point = maximize_sum_rate(sc, regime, scheme, spec, mc, target)
            results[scheme] = SchemeSumRate(
                scheme=scheme, feasible=True, point=point,
                sum_rate=point.sum_rate, shortfall=0.0)
        except InfeasibleError as exc:
            results[scheme] = SchemeSumRate(
                scheme=scheme, feasible=False, point=None,
                sum_rate=float("nan"),
                shortfall=exc.shortfall if exc.shortfall is not None else float("inf"))
    return ConstrainedSumRateResult(regime=regime, target=target,
                                    reference=reference, results=results)
