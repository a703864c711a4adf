"""Result files: CSV with a metadata comment line, a JSON mirror carrying the
full experiment metadata, two-column plot-data text files, and rendered
figures. All writers format numbers with a fixed precision and emit no
timestamps, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__

FIGURE_DPI = 150

_SCHEME_STYLE = {
    "N": ("tab:blue", "shared-pilot NOMA (N)"),
    "O": ("tab:red", "orthogonal access (O)"),
    "baseline_K": ("tab:green", "orthogonal UL pilots (baseline_K)"),
}


def fmt(value) -> str:
    """Stable float formatting for delimited output."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def metadata_line(meta: dict) -> str:
    return "# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":"))


def write_csv(path, header, rows, meta: dict) -> str:
    """Header row with stable column order, one metadata comment line on top."""
    lines = [metadata_line(meta), ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_json(path, payload: dict) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_plotdata(path, xy, meta: dict) -> str:
    """Two-column numeric text, one curve per file."""
    lines = [metadata_line(meta)]
    for x, y in np.asarray(xy, dtype=float):
        lines.append(f"{x:.12g} {y:.12g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def base_metadata(command: str, cfg, prelog: str, extra: dict | None = None) -> dict:
    """Enough metadata to re-run the experiment exactly."""
    sc = cfg.scenario
    meta = {
        "command": command,
        "version": __version__,
        "seed": cfg.mc.base_seed,
        "trials": cfg.mc.trials,
        "chunk": cfg.mc.chunk,
        "prelog": prelog,
        "scenario": {
            "m": sc.M, "k": sc.K, "t": sc.T,
            "beta_g": list(sc.beta_g), "beta_h": list(sc.beta_h),
            "p_u": sc.p_u, "p_d": sc.p_d,
            "noise_free_ul": sc.noise_free_ul,
        },
        "grid": {
            "alpha_g": list(cfg.grid.alpha_g),
            "alpha_h": list(cfg.grid.alpha_h),
            "split": list(cfg.grid.split),
            "eta": list(cfg.grid.eta),
            "alpha_pairing": cfg.grid.alpha_pairing,
        },
    }
    if extra:
        meta.update(extra)
    return meta


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.savefig(path, dpi=FIGURE_DPI, metadata={"Software": "noma-mimo"})
    return path


def render_region_figure(path, regime, regions) -> str:
    """Point clouds and time-sharing boundaries of all schemes, one regime."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for region in regions:
        color, label = _SCHEME_STYLE.get(region.scheme,
                                         ("tab:gray", region.scheme))
        ax.plot(region.pairs[:, 0], region.pairs[:, 1], ".", color=color,
                ms=2.0, alpha=0.25)
        ax.plot(region.hull[:, 0], region.hull[:, 1], "-", color=color,
                lw=1.8, label=label)
    ax.set_xlabel("cell-edge user rate (b/s/Hz)")
    ax.set_ylabel("cell-center user rate (b/s/Hz)")
    ax.set_title(f"achievable rate region, {regime}")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def render_sweep_figure(path, x_label, title, curves, target=None) -> str:
    """Constrained sum rate vs the swept quantity, one curve per scheme."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for scheme, xs, ys in curves:
        color, label = _SCHEME_STYLE.get(scheme, ("tab:gray", scheme))
        ax.plot(xs, ys, "o-", color=color, lw=1.6, ms=4, label=label)
    if target is not None:
        xs, ys = target
        ax.plot(xs, ys, "k--", lw=1.0, label="edge-rate target")
    ax.set_xlabel(x_label)
    ax.set_ylabel("constrained sum rate (b/s/Hz)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out
