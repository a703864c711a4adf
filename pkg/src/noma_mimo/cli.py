"""Command-line front end.

Commands: region (rate regions per scheme and regime), sweep-m /
sweep-pathloss / sweep-users (constrained sum-rate experiments), validate
(Monte-Carlo oracle vs closed forms). Results are written as CSV (plus a
JSON mirror and optional plot-data files) with figures rendered alongside.

Exit codes: 0 success, 2 config error, 3 infeasible, 4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import report
from .config import ExperimentConfig, load_config
from .errors import ConfigError, InfeasibleError, NomaMimoError
from .estimation import estimation_quality
from .rates import (
    hardening_closed_form_moments,
    hardening_oracle_moments,
    rate_no_csir,
)
from .region import constrained_sum_rate, sweep_rate_region
from .scenario import (
    PRELOG_APPLY,
    PRELOG_OMIT,
    REGIME_PERFECT_CSIR,
    SCHEME_BASELINE,
    SCHEME_N,
    SCHEME_O,
    McConfig,
    PowerControl,
    Scenario,
    validate_scenario,
)

COMMANDS = ("region", "sweep-m", "sweep-pathloss", "sweep-users", "validate")
FORMATS = ("csv", "json", "plot")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VALIDATION = 4

VALIDATE_DEFAULT_TRIALS = 1_000_000
ORACLE_TOL = 0.01
DL_MEAN_TOL = 0.01
DL_VAR_TOL = 0.02


@dataclasses.dataclass
class ExperimentSpec:
    """A fully resolved CLI invocation."""

    command: str
    cfg: ExperimentConfig
    out_dir: str
    formats: tuple
    figures: bool


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="noma-mimo",
        description="Training-based multiuser MIMO downlink rate experiments "
                    "(shared-pilot NOMA vs orthogonal access)",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.add_argument("--trials", type=int, default=None,
                   help="override Monte-Carlo trials")
    p.add_argument("--prelog", choices=(PRELOG_APPLY, PRELOG_OMIT),
                   default=None, help="override prelog handling")
    p.add_argument("--format", default="csv,json",
                   help="comma list from {csv,json,plot}")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")
    return p


def resolve_spec(args) -> ExperimentSpec:
    cfg = load_config(args.config)
    sc = cfg.scenario
    mc = cfg.mc
    if args.prelog is not None:
        sc = validate_scenario(dataclasses.replace(sc, prelog_mode=args.prelog))
    if args.seed is not None or args.trials is not None:
        trials = args.trials if args.trials is not None else (
            VALIDATE_DEFAULT_TRIALS if args.command == "validate" else mc.trials)
        seed = args.seed if args.seed is not None else mc.base_seed
        mc = McConfig(trials=trials, base_seed=seed, chunk=mc.chunk)
    elif args.command == "validate":
        mc = McConfig(trials=VALIDATE_DEFAULT_TRIALS, base_seed=mc.base_seed,
                      chunk=mc.chunk)
    cfg = dataclasses.replace(cfg, scenario=sc, mc=mc)

    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"unknown output format {f!r}")
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {args.out}: {exc}")
    return ExperimentSpec(command=args.command, cfg=cfg, out_dir=args.out,
                          formats=formats, figures=not args.no_figures)


def _emit(spec, stem, header, rows, meta, payload, plotdata):
    """Write the selected formats for one result set; returns file paths."""
    paths = []
    if "csv" in spec.formats:
        paths.append(report.write_csv(
            os.path.join(spec.out_dir, stem + ".csv"), header, rows, meta))
    if "json" in spec.formats:
        paths.append(report.write_json(
            os.path.join(spec.out_dir, stem + ".json"),
            {"meta": meta, "results": payload}))
    if "plot" in spec.formats:
        for name, xy in plotdata:
            paths.append(report.write_plotdata(
                os.path.join(spec.out_dir, name + ".dat"), xy, meta))
    return paths


def run_region(spec: ExperimentSpec) -> int:
    cfg = spec.cfg
    sc = cfg.scenario
    meta = report.base_metadata("region", cfg, sc.prelog_mode,
                                {"regimes": list(cfg.regimes),
                                 "schemes": list(cfg.schemes)})
    header = ("r_edge", "r_center", "scheme", "regime", "is_hull_vertex")
    rows = []
    payload = {}
    plotdata = []
    by_regime = {}
    for regime in cfg.regimes:
        regions = []
        for scheme in cfg.schemes:
            if scheme == SCHEME_BASELINE and regime == REGIME_PERFECT_CSIR:
                continue  # the baseline has no perfect-CSI rate model
            region = sweep_rate_region(sc, regime, scheme, cfg.grid, cfg.mc)
            regions.append(region)
            hull_set = {(x, y) for x, y in region.hull}
            seen = set()
            for x, y in region.pairs:
                on_hull = (x, y) in hull_set
                if on_hull:
                    seen.add((x, y))
                rows.append((x, y, scheme, regime, on_hull))
            for x, y in region.hull:
                if (x, y) not in seen:
                    rows.append((x, y, scheme, regime, True))
            payload[f"{scheme}/{regime}"] = {
                "hull": [[float(x), float(y)] for x, y in region.hull],
                "n_points": int(region.pairs.shape[0]),
            }
            plotdata.append((f"region_hull_{scheme}_{regime}", region.hull))
        by_regime[regime] = regions
    paths = _emit(spec, "region", header, rows, meta, payload, plotdata)
    if spec.figures:
        for regime, regions in by_regime.items():
            paths.append(report.render_region_figure(
                os.path.join(spec.out_dir, f"region_{regime}.png"),
                regime, regions))
    for p in paths:
        print(p)
    return EXIT_OK


def _sweep_scenarios(spec: ExperimentSpec):
    """(x_label, values, scenario builder) for the three sweep commands."""
    cfg = spec.cfg
    sc = cfg.scenario

    if spec.command == "sweep-m":
        return "antennas M", cfg.m_values, \
            lambda v: dataclasses.replace(sc, M=int(v))
    if spec.command == "sweep-pathloss":
        def build(v):
            return dataclasses.replace(
                sc, beta_g=(float(v),) * sc.n_groups)
        return "center-user large-scale gain beta_g", cfg.beta_g_values, build
    if spec.command == "sweep-users":
        def build(v):
            k = int(v)
            return validate_scenario(dataclasses.replace(
                sc, K=k, beta_g=(sc.beta_g[0],) * (k // 2),
                beta_h=(sc.beta_h[0],) * (k // 2)))
        return "users K", cfg.k_values, build
    raise ValueError(f"not a sweep command: {spec.command}")


def run_sweep(spec: ExperimentSpec) -> int:
    cfg = spec.cfg
    regime = cfg.sweep_regime
    x_label, values, build = _sweep_scenarios(spec)
    stem = spec.command.replace("-", "_")
    meta = report.base_metadata(spec.command, cfg, cfg.scenario.prelog_mode,
                                {"regime": regime, "x_values": list(values)})
    header = ("x_value", "scheme", "sum_rate", "target_edge_rate", "feasible")
    rows = []
    payload = {}
    curves = {s: ([], []) for s in (SCHEME_N, SCHEME_O, SCHEME_BASELINE)}
    target_curve = ([], [])
    any_point_all_infeasible = False
    for v in values:
        sc_v = validate_scenario(build(v))
        result = constrained_sum_rate(sc_v, regime, cfg.grid, cfg.mc)
        target = float(result.target[0])
        target_curve[0].append(v)
        target_curve[1].append(target)
        feasible_any = False
        for scheme, entry in result.results.items():
            rows.append((v, scheme, entry.sum_rate, target, entry.feasible))
            payload[f"{scheme}/{report.fmt(v)}"] = {
                "sum_rate": None if not entry.feasible else float(entry.sum_rate),
                "feasible": bool(entry.feasible),
                "shortfall": float(entry.shortfall),
                "target_edge_rate": target,
            }
            if entry.feasible:
                feasible_any = True
                curves[scheme][0].append(v)
                curves[scheme][1].append(entry.sum_rate)
        if not feasible_any:
            any_point_all_infeasible = True
    plotdata = [(f"{stem}_{scheme}", np.column_stack(curve))
                for scheme, curve in curves.items() if curve[0]]
    paths = _emit(spec, stem, header, rows, meta, payload, plotdata)
    if spec.figures:
        paths.append(report.render_sweep_figure(
            os.path.join(spec.out_dir, stem + ".png"),
            x_label, f"constrained sum rate ({regime})",
            [(s, c[0], c[1]) for s, c in curves.items() if c[0]],
            target=target_curve))
    for p in paths:
        print(p)
    if any_point_all_infeasible:
        raise InfeasibleError(
            "no scheme met the edge-rate target at one or more sweep points")
    return EXIT_OK


def _oracle_checks(sc: Scenario, pc: PowerControl, mc: McConfig, scheme,
                   label):
    """Compare every Monte-Carlo SINR ingredient with its closed form."""
    oracle = hardening_oracle_moments(sc, pc, mc, scheme)
    closed = hardening_closed_form_moments(sc, pc, scheme)
    checks = []
    terms = ("signal_power", "coherent_self_interference", "gain_variance",
             "other_group_interference", "noise_power")
    for side in ("center", "edge"):
        mc_side = getattr(oracle, side)
        cf_side = getattr(closed, side)
        for term in terms:
            expect = np.asarray(getattr(cf_side, term), dtype=float)
            got = np.asarray(getattr(mc_side, term), dtype=float)
            scale = np.where(expect > 0, expect, 1.0)
            err = float(np.max(np.abs(got - expect) / scale))
            checks.append((f"{label}/{side}/{term}", float(np.max(got)),
                           float(np.max(expect)), err, ORACLE_TOL))
        err = float(np.max(np.abs(mc_side.sinr - cf_side.sinr)
                           / np.maximum(cf_side.sinr, 1e-30)))
        checks.append((f"{label}/{side}/sinr", float(np.max(mc_side.sinr)),
                       float(np.max(cf_side.sinr)), err, ORACLE_TOL))
    return checks


def _dl_gain_checks(sc: Scenario, pc: PowerControl, mc: McConfig, label):
    """Sample moments of the beamformed gains against sqrt(M lambda) and 1."""
    from .channel import map_chunks
    from .rates import _chunk_beam_blocks  # noqa: internal reuse

    lam = estimation_quality(sc, pc, SCHEME_N)

    def one(ci, start, n):
        g, h, bc, be, _ = _chunk_beam_blocks(sc, pc, SCHEME_N, mc, ci)
        f_c = np.einsum("tmk,tmk->tk", g, bc)
        f_e = np.einsum("tmk,tmk->tk", h, be)
        return (f_c.sum(axis=0), (np.abs(f_c) ** 2).sum(axis=0),
                f_e.sum(axis=0), (np.abs(f_e) ** 2).sum(axis=0))

    parts = map_chunks(mc, one)
    n = mc.trials
    checks = []
    for name, lam_side, i0, i1 in (("center", lam.lambda_g, 0, 1),
                                   ("edge", lam.lambda_h, 2, 3)):
        mean = sum(p[i0] for p in parts) / n
        m2 = sum(p[i1] for p in parts) / n
        var = m2 - np.abs(mean) ** 2
        expect = np.sqrt(sc.M * lam_side)
        err_mean = float(np.max(np.abs(mean - expect) / expect))
        checks.append((f"{label}/{name}/gain_mean", float(np.abs(mean).max()),
                       float(expect.max()), err_mean, DL_MEAN_TOL))
        err_var = float(np.max(np.abs(var - 1.0)))
        checks.append((f"{label}/{name}/gain_var", float(var.max()), 1.0,
                       err_var, DL_VAR_TOL))
    return checks


def _closed_form_checks():
    """Deterministic anchors: worked closed-form values and the reduction
    identity between the two schemes."""
    checks = []
    sc = Scenario(M=100, K=2, T=200, beta_g=100.0, beta_h=1.0,
                  prelog_mode="apply")
    pc = PowerControl.uniform(1, gamma_g=0.5, gamma_h=0.5)
    point = rate_no_csir(sc, pc, SCHEME_N)
    pl = 1.0 - 2.0 / 400.0
    lam_h = 1.0 / 102.0
    lam_g = 100.0 / 102.0
    edge_expect = pl * np.log2(1 + (lam_h * 1 * 0.5 * 100)
                               / (lam_h * 1 * 0.5 * 100 + 1 + 1))
    center_expect = pl * np.log2(1 + lam_g * 100 * 0.5 * 100 / 101.0)
    checks.append(("closed_form/edge_rate", float(point.rates_h[0]),
                   float(edge_expect),
                   abs(point.rates_h[0] - edge_expect) / edge_expect, 1e-12))
    checks.append(("closed_form/center_rate", float(point.rates_g[0]),
                   float(center_expect),
                   abs(point.rates_g[0] - center_expect) / center_expect, 1e-12))

    sc10 = Scenario(M=10, K=2, T=200, beta_g=100.0, beta_h=1.0,
                    prelog_mode="omit")
    pco = PowerControl.uniform(1, gamma_g=1.0, gamma_h=1.0, eta=0.5)
    point_o = rate_no_csir(sc10, pco, SCHEME_O)
    lam_o = 100.0 / 101.0
    center_o = 0.5 * np.log2(1 + lam_o * 100 * 1 * 10 / 101.0)
    checks.append(("closed_form/orthogonal_center", float(point_o.rates_g[0]),
                   float(center_o),
                   abs(point_o.rates_g[0] - center_o) / center_o, 1e-12))

    pc_red_n = PowerControl.uniform(1, alpha_g=1.0, alpha_h=0.0,
                                    gamma_g=0.7, gamma_h=0.0, eta=1.0)
    pc_red_o = PowerControl.uniform(1, alpha_g=1.0, alpha_h=1.0,
                                    gamma_g=0.7, gamma_h=0.0, eta=1.0)
    r_n = rate_no_csir(sc10, pc_red_n, SCHEME_N).rates_g[0]
    r_o = rate_no_csir(sc10, pc_red_o, SCHEME_O).rates_g[0]
    checks.append(("closed_form/reduction_identity", float(r_n), float(r_o),
                   abs(r_n - r_o) / max(r_o, 1e-30), 1e-12))
    return checks


def run_validate(spec: ExperimentSpec) -> int:
    cfg = spec.cfg
    mc = cfg.mc
    pc = cfg.power or PowerControl.uniform(1, gamma_g=0.5, gamma_h=0.5)
    checks = []
    for m in (10, 100):
        sc = validate_scenario(Scenario(
            M=m, K=2, T=200, beta_g=100.0, beta_h=1.0,
            p_u=cfg.scenario.p_u, p_d=cfg.scenario.p_d))
        checks.extend(_oracle_checks(sc, pc, mc, SCHEME_N, f"N/M{m}"))
        pc_full = PowerControl.uniform(1, gamma_g=1.0, gamma_h=1.0)
        checks.extend(_oracle_checks(sc, pc_full, mc, SCHEME_O, f"O/M{m}"))
        pc_joint = PowerControl.uniform(1, gamma_g=0.5, gamma_h=0.5)
        checks.extend(_oracle_checks(sc, pc_joint, mc, SCHEME_BASELINE,
                                     f"baseline_K/M{m}"))
        mc_dl = McConfig(trials=min(mc.trials, 100_000),
                         base_seed=mc.base_seed, chunk=mc.chunk)
        checks.extend(_dl_gain_checks(sc, pc, mc_dl, f"dl_gain/M{m}"))
    checks.extend(_closed_form_checks())

    all_pass = True
    rows = []
    for name, got, expect, err, tol in checks:
        ok = err <= tol
        all_pass &= ok
        rows.append((name, got, expect, err, tol, ok))
        print(f"[{'ok' if ok else 'FAIL'}] {name}: observed={got:.6g} "
              f"expected={expect:.6g} rel_err={err:.3e} (tol {tol:g})")
    meta = report.base_metadata("validate", cfg, cfg.scenario.prelog_mode)
    header = ("check", "observed", "expected", "rel_err", "tolerance", "passed")
    payload = {name: {"observed": got, "expected": expect, "rel_err": err,
                      "tolerance": tol, "passed": bool(ok)}
               for name, got, expect, err, tol, ok in rows}
    for p in _emit(spec, "validate", header, rows, meta, payload, []):
        print(p)
    if not all_pass:
        print("validation FAILED", file=sys.stderr)
        return EXIT_VALIDATION
    print("validation passed")
    return EXIT_OK


def run_experiment(spec: ExperimentSpec) -> int:
    if spec.command == "region":
        return run_region(spec)
    if spec.command in ("sweep-m", "sweep-pathloss", "sweep-users"):
        return run_sweep(spec)
    if spec.command == "validate":
        return run_validate(spec)
    raise ConfigError(f"unknown command {spec.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = resolve_spec(args)
        return run_experiment(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NomaMimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
