"""Render analysis products as static figures with paired CSVs.

Every figure gets a CSV holding exactly the plotted numbers, so plots are
reproducible and diffable; re-running on unchanged inputs is byte-stable
for the CSVs. Heatmap cells without data render in a distinct "no data"
color, never as zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .indices import IndexSeries, date_hour_matrix, diel_profile, frame_to_series
from .stats import fit_cyclic

log = logging.getLogger(__name__)

FIGURE_KINDS = (
    "diel_profile",
    "date_hour_heatmap",
    "monthly_trend",
    "roc_curves",
    "correlation_summary",
)

CSV_FLOAT_FORMAT = "%.10g"
DAYS_PER_MONTH = 365.0 / 12.0


@dataclass
class ReportSpec:
    out_dir: str
    kinds: list[str] = field(default_factory=lambda: list(FIGURE_KINDS))
    indices_csv: str | None = None
    roc_csv: str | None = None
    correlations_csv: str | None = None
    image_format: str = "png"
    dpi: int = 150

    def __post_init__(self):
        for k in self.kinds:
            if k not in FIGURE_KINDS:
                raise ValueError(f"unknown figure kind: {k}")


def _load_series(spec: ReportSpec) -> list[IndexSeries]:
    if spec.indices_csv is None:
        raise FileNotFoundError("figure kind requires indices_csv")
    return frame_to_series(pd.read_csv(Path(spec.indices_csv)))


def _units_label(series_list: list[IndexSeries]) -> str:
    # dB axes are annotated as relative when any uncalibrated clip contributed.
    units = {s.units for s in series_list if s.is_db}
    if any("rel" in u for u in units):
        return "dB (relative)"
    return "dB re 1 uPa"


def _save(fig, df: pd.DataFrame, out_dir: Path, name: str, spec: ReportSpec) -> list[Path]:
    img = out_dir / f"{name}.{spec.image_format}"
    csv = out_dir / f"{name}.csv"
    fig.savefig(img, dpi=spec.dpi)
    plt.close(fig)
    df.to_csv(csv, index=False, float_format=CSV_FLOAT_FORMAT)
    return [img, csv]


def _render_diel_profile(spec: ReportSpec, out_dir: Path) -> list[Path]:
    series_list = _load_series(spec)
    rows = []
    fig, ax = plt.subplots(figsize=(8, 5))
    for s in series_list:
        prof = diel_profile(s, bin_minutes=60)
        hours = np.arange(24)
        ax.plot(hours, prof.means, marker="o", label=f"{s.site_id}:{s.index_kind}")
        for h in hours:
            rows.append(
                {
                    "site_id": s.site_id,
                    "index_kind": s.index_kind,
                    "hour": h,
                    "mean": prof.means[h],
                    "count": prof.counts[h],
                }
            )
    ax.set_xlabel("hour of day")
    ax.set_ylabel(f"index value ({_units_label(series_list)} for SPL)")
    ax.set_title("Diel profile")
    ax.legend(fontsize=7)
    return _save(fig, pd.DataFrame(rows), out_dir, "diel_profile", spec)


def _render_date_hour_heatmap(spec: ReportSpec, out_dir: Path) -> list[Path]:
    series_list = _load_series(spec)
    paths: list[Path] = []
    rows = []
    for s in series_list:
        if s.index_kind != "spl_low":
            continue
        mat = date_hour_matrix(s)
        fig, ax = plt.subplots(figsize=(8, 5))
        cmap = plt.get_cmap("viridis").copy()
        cmap.set_bad("lightgrey")  # no-data cells, distinct from any value
        ax.imshow(
            np.ma.masked_invalid(mat.values.astype(float)),
            aspect="auto",
            cmap=cmap,
            interpolation="nearest",
        )
        ax.set_xlabel("hour of day")
        ax.set_ylabel("date index")
        ax.set_title(f"{s.site_id}: low-band SPL by date and hour")
        paths += _save(
            fig,
            pd.DataFrame(),
            out_dir,
            f"date_hour_heatmap_{s.site_id}",
            spec,
        )[:1]
        for d, row in mat.iterrows():
            for h in range(24):
                rows.append(
                    {
                        "site_id": s.site_id,
                        "date": d.isoformat(),
                        "hour": h,
                        "mean": row[h],
                    }
                )
    csv = out_dir / "date_hour_heatmap.csv"
    pd.DataFrame(rows).to_csv(csv, index=False, float_format=CSV_FLOAT_FORMAT)
    paths.append(csv)
    return paths


def _render_monthly_trend(spec: ReportSpec, out_dir: Path) -> list[Path]:
    series_list = _load_series(spec)
    rows = []
    fig, ax = plt.subplots(figsize=(8, 5))
    for s in series_list:
        if s.index_kind != "spl_low":
            continue
        by_month: dict[int, list[float]] = {}
        by_doy: list[tuple[float, float]] = []
        for t, v in s.points:
            by_month.setdefault(t.month, []).append(v)
            by_doy.append((t.timetuple().tm_yday - 1, v))
        months = sorted(by_month)
        means = []
        for m in months:
            vals = np.array(by_month[m])
            if s.is_db:
                means.append(10.0 * np.log10(np.mean(10.0 ** (vals / 10.0))))
            else:
                means.append(float(np.mean(vals)))
        ax.plot(months, means, marker="o", label=s.site_id)
        fit_vals = [np.nan] * len(months)
        doy = np.array([d for d, _ in by_doy])
        vals = np.array([v for _, v in by_doy])
        if doy.size >= 3 and doy.max() - doy.min() >= 120:
            fit = fit_cyclic(doy, vals)
            mid_doys = np.array([(m - 0.5) * DAYS_PER_MONTH for m in months])
            fit_vals = fit.predict(mid_doys)
            ax.plot(months, fit_vals, linestyle="--", label=f"{s.site_id} annual fit")
        for m, mean, fv in zip(months, means, fit_vals):
            rows.append(
                {
                    "site_id": s.site_id,
                    "month": m,
                    "mean": mean,
                    "cyclic_fit": fv,
                }
            )
    ax.set_xlabel("month")
    ax.set_ylabel(f"monthly mean ({_units_label(series_list)})")
    ax.set_title("Monthly trend with annual cyclic fit")
    ax.legend(fontsize=7)
    return _save(fig, pd.DataFrame(rows), out_dir, "monthly_trend", spec)


def _render_roc_curves(spec: ReportSpec, out_dir: Path) -> list[Path]:
    if spec.roc_csv is None:
        raise FileNotFoundError("roc_curves requires roc_csv")
    df = pd.read_csv(spec.roc_csv)
    fig, ax = plt.subplots(figsize=(6, 6))
    for (cond, snr), grp in df.groupby(["condition", "snr_db"], dropna=False):
        grp = grp.sort_values("fpr")
        label = f"{cond} @ {snr} dB" if pd.notna(snr) else str(cond)
        ax.plot(grp["fpr"], grp["tpr"], label=label)
    ax.plot([0, 1], [0, 1], linestyle=":", color="grey")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC")
    ax.legend(fontsize=7)
    return _save(fig, df, out_dir, "roc_curves", spec)


def _render_correlation_summary(spec: ReportSpec, out_dir: Path) -> list[Path]:
    if spec.correlations_csv is None:
        raise FileNotFoundError("correlation_summary requires correlations_csv")
    df = pd.read_csv(spec.correlations_csv)
    fig, ax = plt.subplots(figsize=(8, 5))
    labels = [
        f"{row['index_kind']} vs {row['reef_parameter']}" for _, row in df.iterrows()
    ]
    rvals = df["r"].astype(float).to_numpy()
    sig = df["p_value"].astype(float).to_numpy() < 0.05
    colors = ["tab:blue" if s else "tab:red" for s in sig]
    ax.barh(np.arange(len(labels)), rvals, color=colors)
    ax.set_yticks(np.arange(len(labels)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_xlabel("Pearson r (blue = significant at p < 0.05)")
    ax.set_title("Index vs reef-parameter correlations")
    fig.tight_layout()
    return _save(fig, df, out_dir, "correlation_summary", spec)


_RENDERERS = {
    "diel_profile": _render_diel_profile,
    "date_hour_heatmap": _render_date_hour_heatmap,
    "monthly_trend": _render_monthly_trend,
    "roc_curves": _render_roc_curves,
    "correlation_summary": _render_correlation_summary,
}


def render(spec: ReportSpec) -> dict[str, list[Path]]:
    """Render every requested figure kind; a malformed input only skips its
    own figure (with a diagnostic), the rest still render."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, list[Path]] = {}
    for kind in spec.kinds:
        try:
            written[kind] = _RENDERERS[kind](spec, out_dir)
        except Exception as exc:  # per-figure diagnostic, keep rendering
            log.error("figure %s failed: %s", kind, exc)
    return written
