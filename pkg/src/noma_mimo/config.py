"""INI-style configuration files for the CLI.

Sections mirror the core parameter types: [scenario] and the optional
[power] section use the field names of Scenario / PowerControl; [mc] holds
Monte-Carlo settings; [grid] the sweep resolutions or explicit value lists;
[experiment] the per-command options. All powers are linear-scale reals.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigError, NomaMimoError
from .region import GridSpec, default_grid
from .scenario import (
    REGIMES,
    SCHEMES,
    McConfig,
    PowerControl,
    Scenario,
    validate_scenario,
)

DEFAULT_REGIMES = ("perfect_csir", "no_csir", "dl_pilot")
DEFAULT_SCHEMES = ("N", "O", "baseline_K")
DEFAULT_M_VALUES = (20, 50, 100, 200)
DEFAULT_BETA_G_VALUES = (2.0, 5.0, 10.0, 30.0, 100.0, 300.0, 1000.0)
DEFAULT_K_VALUES = (2, 4, 8)


@dataclass
class ExperimentConfig:
    """Everything a CLI command needs besides its output directory."""

    scenario: Scenario
    mc: McConfig
    grid: GridSpec
    power: PowerControl | None = None
    regimes: tuple = DEFAULT_REGIMES
    schemes: tuple = DEFAULT_SCHEMES
    m_values: tuple = DEFAULT_M_VALUES
    beta_g_values: tuple = DEFAULT_BETA_G_VALUES
    k_values: tuple = DEFAULT_K_VALUES
    sweep_regime: str = "dl_pilot"
    raw: dict = field(default_factory=dict)


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def default_config() -> ExperimentConfig:
    """Built-in defaults: the two-user 20 dB gain-imbalance setup."""
    sc = Scenario(M=10, K=2, T=200, beta_g=100.0, beta_h=1.0,
                  p_u=1.0, p_d=1.0, noise_free_ul=False, prelog_mode="omit")
    return ExperimentConfig(
        scenario=validate_scenario(sc),
        mc=McConfig(trials=20_000, base_seed=12345, chunk=8192),
        grid=default_grid(),
    )


def load_config(path: str | None) -> ExperimentConfig:
    """Parse the config file (or return defaults when path is None)."""
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc

    try:
        return _build(parser, cfg)
    except (ValueError, KeyError, NomaMimoError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def _build(parser, cfg: ExperimentConfig) -> ExperimentConfig:
    sc = cfg.scenario
    if parser.has_section("scenario"):
        s = parser["scenario"]
        kwargs = dict(
            M=s.getint("m", sc.M),
            K=s.getint("k", sc.K),
            T=s.getint("t", sc.T),
            p_u=s.getfloat("p_u", sc.p_u),
            p_d=s.getfloat("p_d", sc.p_d),
            noise_free_ul=s.getboolean("noise_free_ul", sc.noise_free_ul),
            prelog_mode=s.get("prelog_mode", sc.prelog_mode).strip(),
        )
        kwargs["beta_g"] = _floats(s.get("beta_g")) if "beta_g" in s else sc.beta_g
        kwargs["beta_h"] = _floats(s.get("beta_h")) if "beta_h" in s else sc.beta_h
        for name in ("beta_g", "beta_h"):
            if len(kwargs[name]) == 1:
                kwargs[name] = kwargs[name] * (kwargs["K"] // 2)
        sc = validate_scenario(Scenario(**kwargs))

    mc = cfg.mc
    if parser.has_section("mc"):
        s = parser["mc"]
        mc = McConfig(trials=s.getint("trials", mc.trials),
                      base_seed=s.getint("seed", mc.base_seed),
                      chunk=s.getint("chunk", mc.chunk))

    grid = cfg.grid
    if parser.has_section("grid"):
        s = parser["grid"]
        explicit = {"alpha_g", "alpha_h", "split", "eta"} & set(s.keys())
        if explicit:
            base = default_grid(s.getint("n_alpha", 21),
                                s.getint("n_split", 21),
                                s.getint("n_eta", 21))
            grid = GridSpec(
                alpha_g=_floats(s.get("alpha_g")) if "alpha_g" in s else base.alpha_g,
                alpha_h=_floats(s.get("alpha_h")) if "alpha_h" in s else base.alpha_h,
                split=_floats(s.get("split")) if "split" in s else base.split,
                eta=_floats(s.get("eta")) if "eta" in s else base.eta,
                alpha_pairing=s.get("alpha_pairing", "zip").strip(),
            )
        else:
            grid = default_grid(s.getint("n_alpha", 21),
                                s.getint("n_split", 21),
                                s.getint("n_eta", 21))

    power = cfg.power
    if parser.has_section("power"):
        s = parser["power"]
        n = sc.K // 2

        def seq(key, default):
            vals = _floats(s.get(key)) if key in s else (default,)
            return vals * n if len(vals) == 1 else vals

        power = PowerControl(alpha_g=seq("alpha_g", 1.0),
                             alpha_h=seq("alpha_h", 1.0),
                             gamma_g=seq("gamma_g", 0.5),
                             gamma_h=seq("gamma_h", 0.5),
                             eta=s.getfloat("eta", 1.0))

    regimes, schemes = cfg.regimes, cfg.schemes
    m_values, bg_values, k_values = cfg.m_values, cfg.beta_g_values, cfg.k_values
    sweep_regime = cfg.sweep_regime
    if parser.has_section("experiment"):
        s = parser["experiment"]
        if "regimes" in s:
            regimes = _names(s.get("regimes"))
            for r in regimes:
                if r not in REGIMES:
                    raise ConfigError(f"unknown regime {r!r}")
        if "schemes" in s:
            schemes = _names(s.get("schemes"))
            for sch in schemes:
                if sch not in SCHEMES:
                    raise ConfigError(f"unknown scheme {sch!r}")
        if "m_values" in s:
            m_values = _ints(s.get("m_values"))
        if "beta_g_values" in s:
            bg_values = _floats(s.get("beta_g_values"))
        if "k_values" in s:
            k_values = _ints(s.get("k_values"))
        if "sweep_regime" in s:
            sweep_regime = s.get("sweep_regime").strip()
            if sweep_regime not in REGIMES:
                raise ConfigError(f"unknown sweep_regime {sweep_regime!r}")

    return ExperimentConfig(
        scenario=sc, mc=mc, grid=grid, power=power,
        regimes=regimes, schemes=schemes, m_values=m_values,
        beta_g_values=bg_values, k_values=k_values,
        sweep_regime=sweep_regime,
    )
