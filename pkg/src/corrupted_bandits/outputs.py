"""CSV, SVG and manifest emission for experiment results."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from . import __version__
from .harness import ExperimentConfig, Summary, TrialResult, aggregate, config_to_mapping, multilevel_covered

REGRET_COLUMNS = ["algorithm", "trial", "round", "instant_regret", "cum_regret"]
SUMMARY_COLUMNS = ["algorithm", "round", "mean_cum_regret", "std_cum_regret"]
DIAG_COLUMNS = [
    "trial", "round", "level", "corruption_level", "corruption_unnormalized",
    "level_corruption", "ell_star", "robust_covered", "multilevel_covered",
]
HARNESS_CHOICES = {
    "horizon": "T, k and delta are harness defaults; the source experiments do not print them",
    "corruption_label": "panel captions use C = 2k (unnormalized); normalized C is reported alongside",
}
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _open_for_write(path: Path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_regret_csv(results: list[TrialResult], path: Path, agents: list[str]) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGRET_COLUMNS)
        for name in agents:
            for r in results:
                inst = r.instant_regret[name]
                cum = np.cumsum(inst)
                for t in range(r.T):
                    w.writerow([name, r.trial_index, t + 1, _fmt(inst[t]), _fmt(cum[t])])


def write_summary_csv(summary: Summary | None, path: Path, agents: list[str]) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        if summary is None:
            return
        for name in agents:
            for t in range(summary.rounds):
                w.writerow([name, t + 1, _fmt(summary.mean[name][t]), _fmt(summary.std[name][t])])


def write_diagnostics_csv(results: list[TrialResult], path: Path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for r in results:
            led = r.ledger
            sup = np.asarray(led.per_round_sup)
            cum = np.cumsum(sup)
            levels = np.asarray(led.levels_played)
            ls = r.diagnostics.get("ell_star", "")
            robust = r.diagnostics.get("robust")
            ml = r.diagnostics.get("multilevel")
            rob_ok = robust["dist"] <= robust["alpha"] if robust else None
            ml_ok = multilevel_covered(ml, r.diagnostics["ell_star"]) if ml else None
            level_cum = {}
            for lv in np.unique(levels):
                level_cum[int(lv)] = led.level_trajectory(int(lv))
            for t in range(r.T):
                lv = int(levels[t])
                w.writerow([
                    r.trial_index, t + 1, lv,
                    _fmt(cum[t] / (led.R + 1.0)), _fmt(cum[t]),
                    _fmt(level_cum[lv][t]), ls,
                    "" if rob_ok is None else int(rob_ok[t]),
                    "" if ml_ok is None else int(ml_ok[t]),
                ])


def read_regret_csv(path) -> dict:
    """{algorithm: {trial: (T,) cumulative regret}} parsed back from regret.csv."""
    curves: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            per = curves.setdefault(row["algorithm"], {})
            per.setdefault(int(row["trial"]), []).append(float(row["cum_regret"]))
    return {a: {tr: np.array(v) for tr, v in per.items()} for a, per in curves.items()}


def summary_from_curves(curves: dict) -> Summary | None:
    if not curves:
        return None
    mean, std = {}, {}
    rounds, trials = 0, 0
    for name, per in curves.items():
        stack = np.stack([per[k] for k in sorted(per)])
        mean[name], std[name] = stack.mean(axis=0), stack.std(axis=0)
        rounds, trials = stack.shape[1], stack.shape[0]
    return Summary(rounds, mean, std, trials)


def regret_svg(summary: Summary | None, title: str, width: int = 480, height: int = 320) -> str:
    """One panel: mean cumulative regret per algorithm as polylines, one point per round."""
    pad_l, pad_r, pad_t, pad_b = 56, 150, 28, 36
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{pad_l + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if summary is not None and summary.rounds > 0:
        T = summary.rounds
        ymax = max(float(np.max(v)) for v in summary.mean.values()) or 1.0
        out.append(f'<text x="{pad_l - 4}" y="{pad_t + 4}" text-anchor="end" font-size="10" font-family="sans-serif">{ymax:.0f}</text>')
        out.append(f'<text x="{pad_l + pw}" y="{height - 8}" text-anchor="end" font-size="10" font-family="sans-serif">round {T}</text>')
        xs = pad_l + pw * (np.arange(1, T + 1) / T)
        for i, (name, curve) in enumerate(summary.mean.items()):
            ys = pad_t + ph * (1.0 - curve / ymax)
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
            color = PALETTE[i % len(PALETTE)]
            out.append(f'<polyline data-algorithm="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            ly = pad_t + 14 + 16 * i
            out.append(f'<text x="{pad_l + pw + 8}" y="{ly}" font-size="10" font-family="sans-serif" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def parse_svg_polylines(text: str) -> dict:
    """{algorithm: number of points} for every polyline in an emitted SVG."""
    found = {}
    for m in re.finditer(r'<polyline data-algorithm="([^"]+)"[^>]*points="([^"]*)"', text):
        found[m.group(1)] = len(m.group(2).split())
    return found


def panel_title(k: int, results: list[TrialResult]) -> str:
    if results:
        c_norm = float(np.mean([r.total_C for r in results]))
        return f"C = {2 * k} (k = {k}, normalized C = {c_norm:.1f})"
    return f"C = {2 * k} (k = {k})"


def emit_outputs(
    results_by_k: dict,
    cfg: ExperimentConfig,
    out_dir,
    extra_manifest: dict | None = None,
) -> list[Path]:
    """Write regret/summary/diagnostics CSVs and an SVG per corruption value, plus a manifest.

    Layout: ``<out>/k<k>/{regret,summary,diagnostics}.csv``, ``<out>/k<k>/regret.svg``
    and ``<out>/manifest.json``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror}") from exc
    written = []
    agents = list(cfg.agents)
    for k, results in results_by_k.items():
        sub = out_dir / f"k{k}"
        sub.mkdir(exist_ok=True)
        summary = aggregate(results) if (results and agents) else None
        write_regret_csv(results, sub / "regret.csv", agents)
        write_summary_csv(summary, sub / "summary.csv", agents)
        write_diagnostics_csv(results, sub / "diagnostics.csv")
        written += [sub / "regret.csv", sub / "summary.csv", sub / "diagnostics.csv"]
        if agents:
            svg = sub / "regret.svg"
            svg.write_text(regret_svg(summary, panel_title(k, results)))
            written.append(svg)

    manifest = {
        "version": __version__,
        "config": config_to_mapping(cfg),
        "base_seed": cfg.base_seed,
        "corruption_grid": list(results_by_k),
        "harness_choices": HARNESS_CHOICES,
        "env_hashes": {
            str(k): {str(r.trial_index): r.env_hash for r in results} for k, results in results_by_k.items()
        },
        "corruption_totals": {
            str(k): {str(r.trial_index): {"normalized": r.total_C, "unnormalized": r.ledger.total_unnormalized}
                     for r in results}
            for k, results in results_by_k.items()
        },
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    path = out_dir / "manifest.json"
    with _open_for_write(path) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def replot(in_dir) -> list[Path]:
    """Re-emit every k*/regret.svg from the regret CSVs in ``in_dir``."""
    in_dir = Path(in_dir)
    written = []
    subdirs = sorted(p for p in in_dir.glob("k*") if (p / "regret.csv").is_file())
    if not subdirs:
        raise FileNotFoundError(f"no k*/regret.csv under {in_dir}")
    for sub in subdirs:
        summary = summary_from_curves(read_regret_csv(sub / "regret.csv"))
        if summary is None:
            continue
        k = int(sub.name[1:])
        svg = sub / "regret.svg"
        svg.write_text(regret_svg(summary, f"C = {2 * k} (k = {k})"))
        written.append(svg)
    return written
