"""Post-processing of a run directory: exponent fits to CSV and decay figures."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import ExperimentConfig, config_from_dict, read_ndjson  # noqa: E402
from .fitting import FitResult, fit_exponent  # noqa: E402

_LAMBDA = re.compile(r"^lambda_s1_(.+?)(_diff)?$")
CSV_FIELDS = ("quantity", "s1", "slope", "expected", "relative_error", "stderr", "intercept",
              "r_squared", "t_lo", "t_hi", "n_samples")


@dataclass
class FitRow:
    quantity: str
    s1: float | None
    fit: FitResult
    expected: float | None

    def as_dict(self) -> dict:
        f = self.fit
        rel = "" if self.expected is None else f"{f.relative_error(self.expected):.6g}"
        return {
            "quantity": self.quantity, "s1": "" if self.s1 is None else f"{self.s1:g}",
            "slope": f"{f.slope:.8g}", "expected": "" if self.expected is None else f"{self.expected:.8g}",
            "relative_error": rel, "stderr": f"{f.stderr_slope:.3g}", "intercept": f"{f.intercept:.8g}",
            "r_squared": f"{f.r_squared:.8f}", "t_lo": f"{f.window[0]:g}", "t_hi": f"{f.window[1]:g}",
            "n_samples": f.n_samples,
        }


def _quantities(records: list[dict]) -> list[tuple[str, float | None, bool]]:
    """(key, s1, is_difference) for every decaying norm present in the series."""
    keys = records[0].keys() if records else ()
    out = []
    for key in keys:
        m = _LAMBDA.match(key)
        if m:
            out.append((key, float(m.group(1)), bool(m.group(2))))
        elif key in ("l2", "l2_linear"):
            out.append((key, 0.0, False))
        elif key == "l2_diff":
            out.append((key, 0.0, True))
    return out


def fit_records(config: ExperimentConfig, records: list[dict],
                window: tuple[float, float] | None = None) -> list[FitRow]:
    window = window or config.fit_window()
    rows = []
    for key, s1, is_diff in _quantities(records):
        series = [(r["t"], r[key]) for r in records if r[key] > 0]
        try:
            fit = fit_exponent(series, window)
        except ValueError:
            continue
        expected = None if is_diff else -(1 + s1) / (2 * config.beta)
        rows.append(FitRow(key, None if key.startswith("l2") else s1, fit, expected))
    return rows


def write_fits_csv(path, rows: list[FitRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_dict())


def plot_decay(path, config: ExperimentConfig, records: list[dict], rows: list[FitRow]) -> None:
    t = np.array([r["t"] for r in records])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    fits = {row.quantity: row.fit for row in rows}
    for key, _, _ in _quantities(records):
        v = np.array([r[key] for r in records])
        keep = v > 0
        line, = ax.loglog(1 + t[keep], v[keep], label=key)
        fit = fits.get(key)
        if fit is not None:
            x = np.geomspace(1 + fit.window[0], 1 + fit.window[1], 32)
            ax.loglog(x, np.exp(fit.intercept) * x**fit.slope, "--", color=line.get_color(), lw=1,
                      label=f"slope {fit.slope:.3f}")
    if config.experiment != "linear_continuum":
        ax.axvline(1 + config.t_valid, color="0.5", lw=0.8, ls=":", label="t_valid")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("norm")
    ax.set_title(f"{config.experiment}, beta={config.beta:g}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_energy(path, records: list[dict]) -> bool:
    """E_theta and D_theta series; returns False when the run has none."""
    kinds = [k for k in ("e0", "d0", "e1", "d1") if records and k in records[0]]
    if not kinds:
        return False
    t = np.array([r["t"] for r in records])
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for k in kinds:
        v = np.array([r[k] for r in records])
        keep = v > 0
        ax.loglog(1 + t[keep], v[keep], label=k.upper())
    ax.set_xlabel("1 + t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def report(run_dir, window: tuple[float, float] | None = None) -> tuple[list[FitRow], list[Path]]:
    """Fit every norm in ``run_dir/series.ndjson``; write fits.csv and PNG figures next to it."""
    run_dir = Path(run_dir)
    header, records = read_ndjson(run_dir / "series.ndjson")
    if header is None:
        raise ValueError(f"{run_dir / 'series.ndjson'} has no header line")
    if not records:
        raise ValueError("series is empty")
    config = config_from_dict(header["config"])
    rows = fit_records(config, records, window)
    write_fits_csv(run_dir / "fits.csv", rows)
    figures = [run_dir / "decay.png"]
    plot_decay(figures[0], config, records, rows)
    if plot_energy(run_dir / "energy.png", records):
        figures.append(run_dir / "energy.png")
    return rows, figures


def format_rows(rows: list[FitRow]) -> str:
    lines = []
    for row in rows:
        exp = "" if row.expected is None else f" (expected {row.expected:.4g})"
        lines.append(f"{row.quantity}: slope {row.fit.slope:.4f}{exp} over "
                     f"[{row.fit.window[0]:g}, {row.fit.window[1]:g}], {row.fit.n_samples} samples")
    return "\n".join(lines) if lines else "no fittable series"

