"""Statistical linkage of acoustic indices to transect survey data.

Covers Pearson correlation with t-test significance, linear interpolation of
sparse transect surveys, annual-cycle fitting of macroalgal cover, and the
composite reef-health regression (one multi-linear model per reef
parameter, built from snap rate, SPL, and ACI).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime

import numpy as np
import pandas as pd
from scipy import stats as spstats

DAYS_PER_YEAR = 365.0

TRANSECT_PARAMETERS = [
    "live_coral_richness",
    "live_coral_size",
    "live_coral_cover",
    "dead_coral_cover",
    "invertebrate_cover",
    "algal_cover",
    "macroalgal_cover",
]

TRANSECT_CSV_COLUMNS = ["site_id", "survey_date"] + TRANSECT_PARAMETERS

COMPOSITE_CSV_COLUMNS = [
    "reef_parameter",
    "a_i",
    "b_i",
    "c_i",
    "d_i",
    "p_a",
    "p_b",
    "p_c",
    "p_d",
    "R",
    "p",
]

_PERCENT_PARAMETERS = {
    "live_coral_cover",
    "dead_coral_cover",
    "invertebrate_cover",
    "algal_cover",
    "macroalgal_cover",
}


class StatsError(Exception):
    pass


@dataclass
class TransectRecord:
    """One survey's reef parameters at one site and date."""

    site_id: str
    survey_date: date
    live_coral_richness: float
    live_coral_size: float
    live_coral_cover: float
    dead_coral_cover: float
    invertebrate_cover: float
    algal_cover: float
    macroalgal_cover: float

    def __post_init__(self):
        for name in _PERCENT_PARAMETERS:
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise ValueError(f"{name}={v} outside [0, 100]")
        if self.macroalgal_cover > self.algal_cover:
            raise ValueError("macroalgal_cover cannot exceed algal_cover")

    def parameter(self, name: str) -> float:
        if name not in TRANSECT_PARAMETERS:
            raise KeyError(name)
        return float(getattr(self, name))


def significance_tier(p_value: float) -> str:
    """Tier labels at the p < 0.05 / 0.01 / 0.001 cutoffs."""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return "ns"


@dataclass
class CorrelationResult:
    r: float
    n: int
    p_value: float
    significance_tier: str


def pearson(x: np.ndarray, y: np.ndarray) -> CorrelationResult | None:
    """Product-moment correlation with a two-tailed t-test.

    t = r * sqrt((n-2) / (1-r^2)) with n-2 degrees of freedom (exact
    Student-t, not a normal approximation, since n is often ~10).
    Returns None (undefined) when either input is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise StatsError("series lengths differ")
    n = x.size
    if n < 3:
        raise StatsError("need at least 3 pairs")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd**2).sum() * (yd**2).sum())
    if denom == 0:
        return None
    r = float(np.clip((xd * yd).sum() / denom, -1.0, 1.0))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * np.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * spstats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(r=r, n=n, p_value=p, significance_tier=significance_tier(p))


def interpolate_transect(
    records: list[TransectRecord], at: list[date]
) -> dict[str, np.ndarray]:
    """Piecewise-linear interpolation of one site's surveys.

    Reef parameters change slowly between surveys, so linear interpolation
    within the surveyed period is used; queries outside [first, last] survey
    return NaN (no extrapolation). With a single survey only the exact
    survey date has a value.
    """
    if not records:
        raise StatsError("no survey records")
    recs = sorted(records, key=lambda r: r.survey_date)
    days = np.array([r.survey_date.toordinal() for r in recs], dtype=np.float64)
    q = np.array([d.toordinal() for d in at], dtype=np.float64)
    out = {}
    for name in TRANSECT_PARAMETERS:
        vals = np.array([r.parameter(name) for r in recs])
        if len(recs) == 1:
            res = np.where(q == days[0], vals[0], np.nan)
        else:
            res = np.interp(q, days, vals)
            res[(q < days[0]) | (q > days[-1])] = np.nan
        out[name] = res
    return out


@dataclass
class CyclicFit:
    """Annual cosine fit C(d) = A cos(2 pi (d - phi) / 365) + B.

    phi is in days with d = 0 at January 1, canonicalized to [0, 365) with
    A >= 0; phi is None (indeterminate) when the fitted amplitude is zero.
    """

    amplitude: float
    offset: float
    phi_days: float | None
    residual_rms: float

    def predict(self, day_of_year: np.ndarray) -> np.ndarray:
        phi = 0.0 if self.phi_days is None else self.phi_days
        return self.amplitude * np.cos(
            2.0 * np.pi * (np.asarray(day_of_year, dtype=np.float64) - phi) / DAYS_PER_YEAR
        ) + self.offset


def fit_cyclic(days: np.ndarray, cover: np.ndarray) -> CyclicFit:
    """Least-squares annual cycle via linearization.

    C = alpha cos(2 pi d/365) + beta sin(2 pi d/365) + B is linear in
    (alpha, beta, B); then A = hypot(alpha, beta) and phi = atan2(beta,
    alpha) * 365 / (2 pi). The linear problem is convex, so the recovered
    parameters are globally optimal for this model class. Requires at least
    3 observations spanning at least 120 days, else the phase is not
    identifiable.
    """
    days = np.asarray(days, dtype=np.float64)
    cover = np.asarray(cover, dtype=np.float64)
    if days.size < 3:
        raise StatsError("need at least 3 observations")
    if days.max() - days.min() < 120:
        raise StatsError("observations span less than 120 days; phase unidentifiable")
    w = 2.0 * np.pi * days / DAYS_PER_YEAR
    design = np.column_stack([np.cos(w), np.sin(w), np.ones_like(w)])
    coef, _, _, _ = np.linalg.lstsq(design, cover, rcond=None)
    alpha, beta, b = coef
    amp = float(np.hypot(alpha, beta))
    if amp < 1e-12:
        phi = None
        amp = 0.0
    else:
        phi = float((np.arctan2(beta, alpha) * DAYS_PER_YEAR / (2.0 * np.pi)) % DAYS_PER_YEAR)
    resid = cover - design @ coef
    return CyclicFit(
        amplitude=amp,
        offset=float(b),
        phi_days=phi,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


def site_mean(values: np.ndarray, is_db: bool) -> float:
    """Mean of index values; dB values are averaged in the power domain."""
    values = np.asarray(values, dtype=np.float64)
    if is_db:
        return float(10.0 * np.log10(np.mean(10.0 ** (values / 10.0))))
    return float(np.mean(values))


def correlate_index(
    series_by_site: dict[str, list[tuple[datetime, float]]],
    records: list[TransectRecord],
    mode: str = "temporal",
    is_db: bool = False,
) -> dict[str, CorrelationResult | None]:
    """Correlate one acoustic index against every reef parameter.

    temporal: daily index values paired with daily-interpolated parameters,
    pooled across sites. spatial: one (site-mean index, site-mean parameter)
    pair per site, so n equals the number of sites; pass ``is_db`` for
    level-type indices so site means happen in the power domain.
    per-site-cyclic handling lives in :func:`correlate_cyclic`. Parameters
    with fewer than 3 usable pairs are undefined (None).
    """
    if mode not in ("temporal", "spatial"):
        raise StatsError(f"unknown mode: {mode}")
    recs_by_site: dict[str, list[TransectRecord]] = {}
    for r in records:
        recs_by_site.setdefault(r.site_id, []).append(r)

    out: dict[str, CorrelationResult | None] = {}
    for name in TRANSECT_PARAMETERS:
        xs, ys = [], []
        if mode == "temporal":
            for site, points in series_by_site.items():
                if site not in recs_by_site or not points:
                    continue
                dates = [t.date() for t, _ in points]
                interp = interpolate_transect(recs_by_site[site], dates)[name]
                for (_, v), pv in zip(points, interp):
                    if not np.isnan(pv):
                        xs.append(v)
                        ys.append(pv)
        else:
            for site, points in series_by_site.items():
                if site not in recs_by_site or not points:
                    continue
                idx_mean = site_mean(np.array([v for _, v in points]), is_db)
                par_mean = float(
                    np.mean([r.parameter(name) for r in recs_by_site[site]])
                )
                xs.append(idx_mean)
                ys.append(par_mean)
        if len(xs) < 3:
            out[name] = None
        else:
            out[name] = pearson(np.array(xs), np.array(ys))
    return out


def correlate_cyclic(
    series_by_site: dict[str, list[tuple[datetime, float]]],
    records: list[TransectRecord],
    parameter: str = "macroalgal_cover",
) -> dict[str, CorrelationResult | None]:
    """Per-site correlation of an index against the fitted annual cycle.

    For each site the parameter's surveys are fitted with the annual cosine
    model and evaluated at the index timestamps; the correlation is then
    computed per site rather than pooled.
    """
    recs_by_site: dict[str, list[TransectRecord]] = {}
    for r in records:
        recs_by_site.setdefault(r.site_id, []).append(r)
    out: dict[str, CorrelationResult | None] = {}
    for site, points in series_by_site.items():
        if site not in recs_by_site or len(points) < 3:
            out[site] = None
            continue
        recs = recs_by_site[site]
        days = np.array([r.survey_date.timetuple().tm_yday - 1 for r in recs], dtype=float)
        vals = np.array([r.parameter(parameter) for r in recs])
        try:
            fit = fit_cyclic(days, vals)
        except StatsError:
            out[site] = None
            continue
        idx_vals = np.array([v for _, v in points])
        doy = np.array([t.timetuple().tm_yday - 1 for t, _ in points], dtype=float)
        out[site] = pearson(idx_vals, fit.predict(doy))
    return out


@dataclass
class CompositeModel:
    """Composite acoustic index for one reef parameter.

    prediction = a * snap_rate + b * spl + c * aci + d. Coefficient order
    in arrays is (a, b, c, d); ``insignificant`` flags coefficients with
    p > 0.05 (the red-marked convention).
    """

    reef_parameter: str
    coefficients: np.ndarray
    p_values: np.ndarray
    r_overall: float
    p_overall: float
    n: int

    @property
    def insignificant(self) -> np.ndarray:
        return self.p_values > 0.05

    def predict(self, design: np.ndarray) -> np.ndarray:
        design = np.asarray(design, dtype=np.float64)
        return design @ self.coefficients[:3] + self.coefficients[3]


def fit_composite(
    design: np.ndarray,
    target: np.ndarray,
    reef_parameter: str = "",
    condition_limit: float = 1e8,
) -> CompositeModel:
    """Ordinary least squares of one reef parameter on (snap, spl, aci).

    Per-coefficient two-tailed t-tests use the classical standard errors
    from (X'X)^-1 with n - 4 degrees of freedom; the overall fit quality is
    the Pearson correlation between fitted and observed values with its own
    p-value. A design whose scaled condition number exceeds
    ``condition_limit`` (e.g. duplicated columns) is rejected.
    """
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if design.ndim != 2 or design.shape[1] != 3:
        raise StatsError("design must be [n, 3]: snap_rate, spl, aci columns")
    n = design.shape[0]
    if n < 5 or target.size != n:
        raise StatsError("need at least 5 complete rows")
    x = np.column_stack([design, np.ones(n)])
    scale = np.linalg.norm(x, axis=0)
    scale[scale == 0] = 1.0
    cond = np.linalg.cond(x / scale)
    if cond > condition_limit:
        raise StatsError(
            f"design is rank-deficient or near-collinear (condition number {cond:.3g})"
        )
    coef, _, _, _ = np.linalg.lstsq(x, target, rcond=None)
    fitted = x @ coef
    resid = target - fitted
    dof = n - 4
    sigma2 = float(resid @ resid) / dof if dof > 0 else np.inf
    cov = sigma2 * np.linalg.inv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, coef / se, np.inf)
    pvals = 2.0 * spstats.t.sf(np.abs(tvals), df=dof)
    overall = pearson(fitted, target)
    if overall is None:
        r_overall, p_overall = float("nan"), float("nan")
    else:
        # R is the multiple correlation (Pearson of fitted vs observed); its
        # significance must account for the 3 optimized regressors, so the
        # overall p comes from the regression F-test, not a simple-r t-test.
        r_overall = overall.r
        r2 = r_overall**2
        if r2 >= 1.0:
            p_overall = 0.0
        else:
            f_stat = (r2 / 3.0) / ((1.0 - r2) / dof)
            p_overall = float(spstats.f.sf(f_stat, 3, dof))
    return CompositeModel(
        reef_parameter=reef_parameter,
        coefficients=coef,
        p_values=pvals,
        r_overall=r_overall,
        p_overall=p_overall,
        n=n,
    )


# --- CSV interfaces -------------------------------------------------------------


def read_transect_csv(path) -> list[TransectRecord]:
    df = pd.read_csv(path)
    missing = set(TRANSECT_CSV_COLUMNS) - set(df.columns)
    if missing:
        raise StatsError(f"transect CSV missing columns: {sorted(missing)}")
    records = []
    for _, row in df.iterrows():
        records.append(
            TransectRecord(
                site_id=str(row["site_id"]),
                survey_date=pd.Timestamp(row["survey_date"]).date(),
                **{p: float(row[p]) for p in TRANSECT_PARAMETERS},
            )
        )
    return records


def composite_models_to_frame(models: list[CompositeModel]) -> pd.DataFrame:
    rows = []
    for m in models:
        a, b, c, d = m.coefficients
        pa, pb, pc, pd_ = m.p_values
        rows.append(
            {
                "reef_parameter": m.reef_parameter,
                "a_i": a,
                "b_i": b,
                "c_i": c,
                "d_i": d,
                "p_a": pa,
                "p_b": pb,
                "p_c": pc,
                "p_d": pd_,
                "R": m.r_overall,
                "p": m.p_overall,
            }
        )
    return pd.DataFrame(rows, columns=COMPOSITE_CSV_COLUMNS)
