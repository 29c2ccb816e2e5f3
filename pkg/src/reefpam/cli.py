"""Batch orchestration: ingestion, indices, mixing, evaluation, statistics,
and reports.

Exit codes: 0 ok, 1 fatal input error, 2 partial failure (some files were
skipped; see the log). All artifacts are written atomically (temp file then
rename), and every pipeline stage is deterministic for a fixed seed and
worker count never changes numeric output, only wall time.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import denoise_eval as de
from . import indices as idx
from . import mixer, reporting, stats
from .audio_io import (
    AudioIOError,
    clip_from_manifest_row,
    read_manifest,
    scan_recordings,
    segment,
)
from .config import ConfigError, RunConfig, load_config
from .dsp import BandSpec, spectrogram

log = logging.getLogger("reefpam")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def atomic_write_csv(df: pd.DataFrame, path: Path, float_format: str = "%.10g") -> None:
    """Write a CSV via a temp file and rename, so readers never see partials."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        df.to_csv(tmp, index=False, float_format=float_format)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


# --- indices pipeline -----------------------------------------------------------


def compute_file_indices(row: pd.Series, cfg: RunConfig, base_dir: Path | None,
                         denoised: bool) -> list[dict]:
    """All index rows for one recording: per 1-minute segment, the low/high
    band SPL, low-band ACI, and snap rate."""
    clip = clip_from_manifest_row(row, base_dir=base_dir)
    if clip.start_time is None:
        raise AudioIOError("no start time (filename unparseable and manifest silent)")
    low = cfg.bands.low_band()
    # The high band means "1 kHz up to the recording's band limit"; clamp its
    # upper edge to Nyquist for recordings sampled below 96 kHz.
    nyquist = clip.sample_rate / 2.0
    high = cfg.bands.high_band()
    if high.f_hi > nyquist:
        high = BandSpec(high.f_lo, nyquist, "high")
    db_units = "dB re 1 uPa" if clip.calibrated else "dB rel"
    seg_steps = max(2, int(round(cfg.aci.segment_s / cfg.aci.step_s)))
    rows = []
    for seg in segment(clip, cfg.segment_len_s):
        ts = seg.start_time.isoformat().replace("+00:00", "Z")
        spl_lo = idx.spl(seg, low)
        spl_hi = idx.spl(seg, high)
        spec = spectrogram(seg, step_s=cfg.aci.step_s, overlap=cfg.aci.overlap,
                           window=cfg.aci.window)
        aci_lo = idx.aci(spec, low, seg_steps)
        events = idx.detect_snaps(
            seg,
            percentile=cfg.snap.percentile,
            refractory_s=cfg.snap.refractory_ms / 1000.0,
            band=high if cfg.snap.high_band_prefilter else None,
        )
        rate = idx.snap_rate(events, seg.duration_s)
        for kind, value, units in (
            ("spl_low", spl_lo, db_units),
            ("spl_high", spl_hi, db_units),
            ("aci_low", aci_lo, "dimensionless"),
            ("snap_rate", rate, "snaps/s"),
        ):
            rows.append(
                {
                    "site_id": seg.site_id,
                    "timestamp_iso8601": ts,
                    "index_kind": kind,
                    "value": "" if value is None else value,
                    "units": units,
                    "denoised_flag": denoised,
                }
            )
    return rows


def cmd_ingest(args, cfg: RunConfig) -> int:
    manifest = read_manifest(args.manifest)
    base = Path(args.manifest).parent
    missing = [str(p) for p in manifest["file_path"]
               if not (base / p if not Path(p).is_absolute() else Path(p)).exists()]
    if missing:
        for p in missing:
            log.error("missing input: %s", p)
        return EXIT_FATAL
    metas = scan_recordings(manifest, base_dir=base)
    rows = [
        {
            "site_id": m.site_id,
            "deployment_id": m.deployment_id,
            "file_path": m.file_path,
            "start_time_iso8601": ""
            if m.start_time is None
            else m.start_time.isoformat().replace("+00:00", "Z"),
            "duration_s": m.duration_s,
            "sample_rate": m.sample_rate,
        }
        for m in metas
    ]
    out = Path(args.out or Path(cfg.out_dir) / "recordings.csv")
    atomic_write_csv(pd.DataFrame(rows), out)
    log.info("ingested %d recordings -> %s", len(rows), out)
    return EXIT_OK


def cmd_indices(args, cfg: RunConfig) -> int:
    manifest = read_manifest(args.manifest)
    base = Path(args.manifest).parent
    missing = []
    for p in manifest["file_path"]:
        path = Path(p) if Path(p).is_absolute() else base / p
        if not path.exists():
            missing.append(str(path))
    if missing:
        for p in missing:
            log.error("missing input: %s", p)
        return EXIT_FATAL

    results: dict[int, list[dict]] = {}
    failures = 0

    def work(i_row):
        i, row = i_row
        try:
            return i, compute_file_indices(row, cfg, base, args.denoised)
        except Exception as exc:
            return i, exc

    items = list(manifest.iterrows())
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for i, rows_or_exc in pool.map(work, items):
            if isinstance(rows_or_exc, Exception):
                log.error("file=%s status=skipped reason=%s",
                          manifest.iloc[i]["file_path"], rows_or_exc)
                failures += 1
            else:
                log.info("file=%s status=ok rows=%d",
                         manifest.iloc[i]["file_path"], len(rows_or_exc))
                results[i] = rows_or_exc

    # Deterministic order regardless of worker scheduling.
    rows = [r for i in sorted(results) for r in results[i]]
    rows.sort(key=lambda r: (r["site_id"], r["timestamp_iso8601"], r["index_kind"]))
    out = Path(args.out or Path(cfg.out_dir) / "indices.csv")
    atomic_write_csv(pd.DataFrame(rows, columns=idx.INDEX_CSV_COLUMNS), out)
    log.info("wrote %d index rows -> %s", len(rows), out)
    if failures:
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_mix(args, cfg: RunConfig) -> int:
    signal_bank = mixer.SoundBank.from_manifest(args.signal_manifest, role="signal")
    noise_bank = mixer.SoundBank.from_manifest(args.noise_manifest, role="noise")
    recipe = mixer.MixRecipe(
        n_signals=args.max_signals,
        segment_len_s=args.segment_len,
        snr_db=args.snr,
        rng_seed=cfg.seed,
        loop_noise=args.loop_noise,
    )
    out_dir = Path(cfg.out_dir)
    manifests = mixer.build_dataset(
        signal_bank, noise_bank, recipe, args.count, args.split, out_dir
    )
    mixer.check_split_hygiene(manifests)
    log.info("built %d pairs -> %s", len(manifests), out_dir)
    return EXIT_OK


def cmd_denoise_eval(args, cfg: RunConfig) -> int:
    pairs = mixer.read_pair_manifest(args.pairs)
    if args.denoised_dir:
        denoiser = de.DirectoryDenoiser(args.denoised_dir)
    elif args.identity:
        denoiser = de.identity_denoiser
    else:
        denoiser = de.spectral_gate_denoise
    results = de.evaluate_denoiser(pairs, denoiser)
    roc_df, summary_df = de.curves_to_frames(results)
    out_dir = Path(cfg.out_dir)
    atomic_write_csv(roc_df, out_dir / "roc.csv")
    atomic_write_csv(summary_df, out_dir / "roc_summary.csv")
    log.info("evaluated %d SNR conditions -> %s", len(results), out_dir)
    return EXIT_OK


def _daily_series_by_site(df: pd.DataFrame, kind: str) -> dict[str, list]:
    """Daily-averaged points per site for one index kind, preferring denoised
    rows when both raw and denoised are present."""
    sub = df[df["index_kind"] == kind]
    if sub.empty:
        return {}
    if sub["denoised_flag"].any():
        sub = sub[sub["denoised_flag"]]
    out: dict[str, list] = {}
    for series in idx.frame_to_series(sub):
        merged = out.setdefault(series.site_id, [])
        merged.extend(idx.daily_means(series))
    for site in out:
        out[site].sort(key=lambda p: p[0])
    return out


def cmd_correlate(args, cfg: RunConfig) -> int:
    df = pd.read_csv(args.index_csv)
    records = stats.read_transect_csv(args.transect_csv)
    rows = []
    kinds = sorted(df["index_kind"].unique())
    for kind in kinds:
        by_site = _daily_series_by_site(df, kind)
        if args.mode in ("temporal", "spatial"):
            results = stats.correlate_index(by_site, records, mode=args.mode,
                                            is_db=kind.startswith("spl"))
            for param in stats.TRANSECT_PARAMETERS:
                res = results[param]
                rows.append(
                    {
                        "index_kind": kind,
                        "reef_parameter": param,
                        "mode": args.mode,
                        "r": "" if res is None else res.r,
                        "n": "" if res is None else res.n,
                        "p_value": "" if res is None else res.p_value,
                        "tier": "" if res is None else res.significance_tier,
                    }
                )
        else:  # cyclic
            results = stats.correlate_cyclic(by_site, records)
            for site, res in sorted(results.items()):
                rows.append(
                    {
                        "index_kind": kind,
                        "reef_parameter": "macroalgal_cover",
                        "mode": "per-site-cyclic",
                        "site_id": site,
                        "r": "" if res is None else res.r,
                        "n": "" if res is None else res.n,
                        "p_value": "" if res is None else res.p_value,
                        "tier": "" if res is None else res.significance_tier,
                    }
                )
    out = Path(args.out or Path(cfg.out_dir) / "correlations.csv")
    atomic_write_csv(pd.DataFrame(rows), out)
    log.info("wrote %d correlation rows -> %s", len(rows), out)
    return EXIT_OK


def cmd_composite(args, cfg: RunConfig) -> int:
    df = pd.read_csv(args.index_csv)
    records = stats.read_transect_csv(args.transect_csv)
    snap = _daily_series_by_site(df, "snap_rate")
    spl = _daily_series_by_site(df, "spl_low")
    aci_s = _daily_series_by_site(df, "aci_low")

    recs_by_site: dict[str, list[stats.TransectRecord]] = {}
    for r in records:
        recs_by_site.setdefault(r.site_id, []).append(r)

    design_rows: list[tuple[str, object, float, float, float]] = []
    for site in sorted(snap):
        if site not in spl or site not in aci_s:
            continue
        spl_map = {t.date(): v for t, v in spl[site]}
        aci_map = {t.date(): v for t, v in aci_s[site]}
        for t, v in snap[site]:
            d = t.date()
            if d in spl_map and d in aci_map:
                design_rows.append((site, d, v, spl_map[d], aci_map[d]))
    if not design_rows:
        log.error("no complete (snap, spl, aci) rows in the index CSV")
        return EXIT_FATAL

    models = []
    for param in stats.TRANSECT_PARAMETERS:
        xs, ys = [], []
        if args.mode == "temporal":
            for site, d, a, b, c in design_rows:
                if site not in recs_by_site:
                    continue
                val = stats.interpolate_transect(recs_by_site[site], [d])[param][0]
                if not np.isnan(val):
                    xs.append((a, b, c))
                    ys.append(val)
        else:  # spatial: one row per site; the SPL column averages in power
            per_site: dict[str, list[tuple[float, float, float]]] = {}
            for site, d, a, b, c in design_rows:
                per_site.setdefault(site, []).append((a, b, c))
            for site, triples in sorted(per_site.items()):
                if site not in recs_by_site:
                    continue
                arr = np.array(triples)
                xs.append(
                    (
                        float(arr[:, 0].mean()),
                        stats.site_mean(arr[:, 1], is_db=True),
                        float(arr[:, 2].mean()),
                    )
                )
                ys.append(
                    float(np.mean([r.parameter(param) for r in recs_by_site[site]]))
                )
        try:
            models.append(
                stats.fit_composite(np.array(xs), np.array(ys), reef_parameter=param)
            )
        except stats.StatsError as exc:
            log.error("parameter=%s status=skipped reason=%s", param, exc)
    if not models:
        return EXIT_FATAL
    out = Path(args.out or Path(cfg.out_dir) / f"composite_{args.mode}.csv")
    atomic_write_csv(stats.composite_models_to_frame(models), out)
    log.info("wrote %d composite models -> %s", len(models), out)
    if len(models) < len(stats.TRANSECT_PARAMETERS):
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    spec = reporting.ReportSpec(
        out_dir=cfg.out_dir,
        kinds=args.kinds.split(",") if args.kinds else list(reporting.FIGURE_KINDS),
        indices_csv=args.index_csv,
        roc_csv=args.roc_csv,
        correlations_csv=args.correlations_csv,
        image_format=args.format,
        dpi=args.dpi,
    )
    written = reporting.render(spec)
    n = sum(len(v) for v in written.values())
    log.info("rendered %d files across %d figure kinds", n, len(written))
    if len(written) < len(spec.kinds):
        return EXIT_PARTIAL
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted both before and after the subcommand; the
    # SUPPRESS defaults keep a subparser from clobbering a value parsed at
    # the top level.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="YAML run config (env REEFPAM_CONFIG)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override config seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="override worker count")
    common.add_argument("--out-dir", default=argparse.SUPPRESS,
                        help="override output directory")
    common.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="reefpam",
        description="Reef passive-acoustic-monitoring pipeline",
        parents=[common],
    )
    parser.set_defaults(config=None, seed=None, workers=None, out_dir=None,
                        verbose=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="validate recordings and emit metadata CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")

    p = sub.add_parser("indices", parents=[common],
                       help="compute per-minute acoustic indices")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--denoised", action="store_true",
                   help="mark rows as computed from denoised audio")

    p = sub.add_parser("mix", parents=[common],
                       help="synthesize noisy/clean training pairs")
    p.add_argument("--signal-manifest", required=True)
    p.add_argument("--noise-manifest", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--split", default="train",
                   choices=["train", "validation", "test"])
    p.add_argument("--segment-len", type=float, default=10.0)
    p.add_argument("--max-signals", type=int, default=5)
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--loop-noise", action="store_true")

    p = sub.add_parser("denoise-eval", parents=[common],
                       help="score a denoiser with ROC curves")
    p.add_argument("--pairs", required=True, help="pair manifest CSV")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--denoised-dir", help="directory of denoised WAVs by basename")
    group.add_argument("--identity", action="store_true",
                       help="identity denoiser (baseline sanity)")
    group.add_argument("--gate", action="store_true",
                       help="built-in spectral gate (default)")

    p = sub.add_parser("correlate", parents=[common],
                       help="correlate indices with transect surveys")
    p.add_argument("--index-csv", required=True)
    p.add_argument("--transect-csv", required=True)
    p.add_argument("--mode", default="temporal",
                   choices=["temporal", "spatial", "cyclic"])
    p.add_argument("--out")

    p = sub.add_parser("composite", parents=[common],
                       help="fit composite acoustic indices")
    p.add_argument("--index-csv", required=True)
    p.add_argument("--transect-csv", required=True)
    p.add_argument("--mode", default="temporal", choices=["temporal", "spatial"])
    p.add_argument("--out")

    p = sub.add_parser("report", parents=[common],
                       help="render figures and their paired CSVs")
    p.add_argument("--index-csv")
    p.add_argument("--roc-csv")
    p.add_argument("--correlations-csv")
    p.add_argument("--kinds", help="comma-separated figure kinds")
    p.add_argument("--format", default="png", choices=["png", "svg"])
    p.add_argument("--dpi", type=int, default=150)

    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "indices": cmd_indices,
    "mix": cmd_mix,
    "denoise-eval": cmd_denoise_eval,
    "correlate": cmd_correlate,
    "composite": cmd_composite,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_FATAL
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    try:
        return COMMANDS[args.command](args, cfg)
    except (AudioIOError, mixer.MixerError, stats.StatsError, de.DenoiseEvalError,
            FileNotFoundError, ValueError) as exc:
        log.error("fatal: %s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
