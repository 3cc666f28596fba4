"""Run outputs: delimited results, a reproducibility manifest, and metric figures.

CSV writing is fully deterministic (fixed column order and float formatting)
so identical runs produce byte-identical files regardless of the worker count.
"""

from __future__ import annotations

import csv
import json
from importlib import metadata
from pathlib import Path
from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .scenarios import MonteCarloResult, ScenarioConfig

__all__ = [
    "CSV_COLUMNS",
    "RAW_COLUMNS",
    "write_results_csv",
    "write_raw_csv",
    "write_manifest",
    "render_run_figures",
    "run_stem",
]

CSV_COLUMNS = (
    "scan",
    "true_n",
    "mean_est_n",
    "mean_ospa",
    "mean_miscls",
    "mean_jpm",
    "trials",
    "failures",
)

RAW_COLUMNS = ("trial", "scan", "true_n", "est_n", "ospa", "miscls", "jpm")

_FLOAT_COLUMNS = {"mean_est_n", "mean_ospa", "mean_miscls", "mean_jpm", "ospa", "miscls", "jpm"}


def _format(column: str, value: Any) -> str:
    if column in _FLOAT_COLUMNS:
        return f"{float(value):.6f}"
    return str(value)


def run_stem(config: ScenarioConfig) -> str:
    return f"{config.name}_{config.algorithm}"


def write_results_csv(path: Path, rows: Sequence[Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format(col, row[col]) for col in CSV_COLUMNS])
    return path


def write_raw_csv(path: Path, result: MonteCarloResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_COLUMNS)
        for trial, scores in enumerate(result.raw):
            for s in scores:
                writer.writerow(
                    [
                        trial,
                        s.k,
                        s.true_n,
                        s.est_n,
                        _format("ospa", s.ospa),
                        _format("miscls", s.miscls),
                        _format("jpm", s.jpm),
                    ]
                )
    return path


def _code_version() -> str:
    try:
        return metadata.version("jdtclab")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(path: Path, config: ScenarioConfig, extra: Mapping[str, Any] | None = None) -> Path:
    """Full resolved configuration plus seed and code version; enough to reproduce the run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: dict[str, Any] = {
        "config": config.to_dict(),
        "seed": config.master_seed,
        "version": _code_version(),
        "jpm_note": "stand-in formula: alpha*miscls + beta*ospa^2 + gamma*|card error|",
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


_CHARTS = (
    ("mean_est_n", "cardinality", "Cardinality estimate"),
    ("mean_ospa", "ospa", "OSPA distance (m)"),
    ("mean_miscls", "miscls", "Probability of incorrect classification"),
    ("mean_jpm", "jpm", "Joint performance metric"),
)


def render_run_figures(
    out_dir: Path,
    stem: str,
    rows: Sequence[Mapping[str, Any]],
    config: ScenarioConfig | None = None,
) -> list[Path]:
    """Render the four per-run metric charts next to the delimited output."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scans = [row["scan"] for row in rows]
    written = []
    for column, suffix, ylabel in _CHARTS:
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        if column == "mean_est_n":
            truth = [row["true_n"] for row in rows]
            ax.step(scans, truth, where="mid", color="k", linestyle="--", label="truth")
        ax.plot(scans, [row[column] for row in rows], marker="o", markersize=2.5, label=stem)
        ax.set_xlabel("scan")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = out_dir / f"{stem}_{suffix}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)
    return written
