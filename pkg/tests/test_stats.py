import math
from datetime import date, datetime, timezone

import numpy as np
import pytest

from reefpam.stats import (
    COMPOSITE_CSV_COLUMNS,
    CyclicFit,
    StatsError,
    TransectRecord,
    composite_models_to_frame,
    correlate_cyclic,
    correlate_index,
    fit_composite,
    fit_cyclic,
    interpolate_transect,
    pearson,
    read_transect_csv,
    significance_tier,
)

UTC = timezone.utc


def t_cdf_oracle(t_value: float, dof: int) -> float:
    """Independent Student-t upper-tail probability via direct quadrature of
    the density (no scipy.stats on this path)."""
    from scipy.integrate import quad

    log_norm = (
        math.lgamma((dof + 1) / 2.0)
        - math.lgamma(dof / 2.0)
        - 0.5 * math.log(dof * math.pi)
    )

    def pdf(x):
        return math.exp(log_norm - (dof + 1) / 2.0 * math.log1p(x * x / dof))

    upper, _ = quad(pdf, t_value, np.inf)
    return upper


def make_record(site, d, **over):
    vals = dict(
        live_coral_richness=10.0,
        live_coral_size=20.0,
        live_coral_cover=30.0,
        dead_coral_cover=10.0,
        invertebrate_cover=5.0,
        algal_cover=40.0,
        macroalgal_cover=15.0,
    )
    vals.update(over)
    return TransectRecord(site_id=site, survey_date=d, **vals)


# --- pearson -----------------------------------------------------------------


def test_pearson_perfect_lines(rng):
    x = rng.normal(size=30)
    assert pearson(x, x).r == pytest.approx(1.0)
    assert pearson(x, -2.0 * x + 7.0).r == pytest.approx(-1.0)


def test_pearson_expected_t_and_p():
    # construct a series with r ~ 0.8 at n = 12, then check t and p against
    # the stated formula and an independent t-CDF oracle
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.normal(size=12)
        y = 0.8 * x + rng.normal(size=12) * 0.75
        res = pearson(x, y)
        t = res.r * math.sqrt((res.n - 2) / (1 - res.r**2))
        assert res.p_value == pytest.approx(2 * t_cdf_oracle(abs(t), 10), abs=1e-6)
    # the exact spec numbers: r = 0.8, n = 12
    t = 0.8 * math.sqrt(10 / (1 - 0.64))
    assert t == pytest.approx(4.216, abs=1e-3)
    p = 2 * t_cdf_oracle(t, 10)
    assert p == pytest.approx(0.0018, abs=1e-3)


def test_significance_tiers_boundaries():
    assert significance_tier(0.05) == "ns"
    assert significance_tier(0.0499) == "*"
    assert significance_tier(0.01) == "*"
    assert significance_tier(0.0099) == "**"
    assert significance_tier(0.001) == "**"
    assert significance_tier(0.0009) == "***"


def test_pearson_properties(rng):
    x = rng.normal(size=25)
    y = rng.normal(size=25)
    assert pearson(x, y).r == pytest.approx(pearson(y, x).r, rel=1e-12)
    assert pearson(3.0 * x + 2.0, y).r == pytest.approx(pearson(x, y).r, rel=1e-10)
    assert pearson(-x, y).r == pytest.approx(-pearson(x, y).r, rel=1e-10)


def test_pearson_constant_undefined():
    assert pearson(np.ones(10), np.arange(10.0)) is None


def test_pearson_input_validation():
    with pytest.raises(StatsError):
        pearson(np.arange(2.0), np.arange(2.0))
    with pytest.raises(StatsError):
        pearson(np.arange(5.0), np.arange(6.0))


# --- transect interpolation ----------------------------------------------------


def test_interpolate_midpoint():
    recs = [
        make_record("s", date(2021, 1, 1), live_coral_cover=20.0),
        make_record("s", date(2021, 4, 11), live_coral_cover=40.0),  # day 100
    ]
    out = interpolate_transect(recs, [date(2021, 2, 20)])  # day 50
    assert out["live_coral_cover"][0] == pytest.approx(30.0)


def test_interpolate_no_extrapolation():
    recs = [
        make_record("s", date(2021, 1, 1)),
        make_record("s", date(2021, 4, 11)),
    ]
    out = interpolate_transect(recs, [date(2021, 5, 31)])
    assert np.isnan(out["live_coral_cover"][0])


def test_interpolate_exact_at_surveys():
    recs = [
        make_record("s", date(2021, 1, 1), algal_cover=41.0, macroalgal_cover=10.0),
        make_record("s", date(2021, 3, 1), algal_cover=47.0, macroalgal_cover=12.0),
        make_record("s", date(2021, 6, 1), algal_cover=44.0, macroalgal_cover=11.0),
    ]
    out = interpolate_transect(recs, [r.survey_date for r in recs])
    assert np.allclose(out["algal_cover"], [41.0, 47.0, 44.0])


def test_interpolate_single_survey():
    recs = [make_record("s", date(2021, 1, 1), live_coral_cover=25.0)]
    out = interpolate_transect(recs, [date(2021, 1, 1), date(2021, 1, 2)])
    assert out["live_coral_cover"][0] == 25.0
    assert np.isnan(out["live_coral_cover"][1])


def test_transect_invariants():
    with pytest.raises(ValueError, match="exceed"):
        make_record("s", date(2021, 1, 1), algal_cover=10.0, macroalgal_cover=20.0)
    with pytest.raises(ValueError, match="outside"):
        make_record("s", date(2021, 1, 1), live_coral_cover=105.0)


# --- cyclic fit ------------------------------------------------------------------


def planted_cycle(days, amp=10.0, offset=30.0, phi=180.0):
    return amp * np.cos(2 * np.pi * (days - phi) / 365.0) + offset


def test_fit_cyclic_exact_recovery():
    days = np.linspace(0, 360, 13)
    fit = fit_cyclic(days, planted_cycle(days))
    assert fit.amplitude == pytest.approx(10.0, abs=1e-6)
    assert fit.offset == pytest.approx(30.0, abs=1e-6)
    assert fit.phi_days == pytest.approx(180.0, abs=1e-6)
    assert fit.residual_rms < 1e-9


def test_fit_cyclic_constant_indeterminate():
    days = np.linspace(0, 300, 8)
    fit = fit_cyclic(days, np.full(8, 42.0))
    assert fit.amplitude == 0.0
    assert fit.phi_days is None
    assert fit.offset == pytest.approx(42.0)


def test_fit_cyclic_noise_monte_carlo():
    hits_a = hits_b = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        days = np.sort(r.uniform(0, 365, 24))
        vals = planted_cycle(days) + r.normal(0, 1.0, 24)
        fit = fit_cyclic(days, vals)
        hits_a += abs(fit.amplitude - 10.0) <= 1.5
        hits_b += abs(fit.offset - 30.0) <= 1.5
    assert hits_a >= 95
    assert hits_b >= 95


def test_fit_cyclic_short_span_rejected():
    days = np.array([0.0, 30.0, 60.0])
    with pytest.raises(StatsError, match="span"):
        fit_cyclic(days, planted_cycle(days))


def test_fit_cyclic_global_optimality_spot_check(rng):
    days = np.sort(rng.uniform(0, 365, 18))
    vals = planted_cycle(days, amp=7.0, offset=25.0, phi=90.0) + rng.normal(0, 2.0, 18)
    fit = fit_cyclic(days, vals)

    def rss(a, b, phi):
        pred = a * np.cos(2 * np.pi * (days - phi) / 365.0) + b
        return np.sum((vals - pred) ** 2)

    best_fit_rss = rss(fit.amplitude, fit.offset, fit.phi_days)
    # 1-day x 0.5-unit lattice around plausible values
    for a in np.arange(0.0, 15.0, 0.5):
        for b in np.arange(20.0, 31.0, 0.5):
            for phi in np.arange(0.0, 365.0, 1.0):
                assert best_fit_rss <= rss(a, b, phi) + 1e-9


def test_cyclic_predict_phase_convention():
    # with phi = 0 the peak lands on day 0 (January 1 in this convention)
    fit = CyclicFit(amplitude=5.0, offset=0.0, phi_days=0.0, residual_rms=0.0)
    days = np.arange(0, 365)
    assert int(np.argmax(fit.predict(days))) == 0


# --- correlate_index ----------------------------------------------------------------


def test_correlate_index_exact_match():
    # the index series equals the interpolated parameter exactly -> r = 1
    recs = [
        make_record("s1", date(2021, 1, 1), live_coral_cover=20.0),
        make_record("s1", date(2021, 4, 11), live_coral_cover=40.0),
    ]
    pts = []
    for day in range(0, 101, 10):
        d = date(2021, 1, 1).toordinal() + day
        dt = datetime.fromordinal(d).replace(hour=12, tzinfo=UTC)
        pts.append((dt, 20.0 + 0.2 * day))
    res = correlate_index({"s1": pts}, recs, mode="temporal")
    assert res["live_coral_cover"].r == pytest.approx(1.0)


def test_correlate_index_spatial_n_equals_sites():
    rng = np.random.default_rng(3)
    recs, series = [], {}
    for i in range(10):
        site = f"s{i}"
        cover = float(10 + 5 * i)
        recs.append(make_record(site, date(2021, 1, 1), live_coral_cover=cover))
        recs.append(make_record(site, date(2021, 6, 1), live_coral_cover=cover))
        pts = [
            (datetime(2021, 3, 1, 12, tzinfo=UTC), 2.0 * cover + rng.normal(0, 0.01)),
            (datetime(2021, 3, 2, 12, tzinfo=UTC), 2.0 * cover + rng.normal(0, 0.01)),
        ]
        series[site] = pts
    res = correlate_index(series, recs, mode="spatial")
    for param, result in res.items():
        assert result is None or result.n == 10
    assert res["live_coral_cover"].n == 10
    assert res["live_coral_cover"].r == pytest.approx(1.0, abs=1e-3)
    assert res["live_coral_cover"].p_value < 0.001


def test_correlate_index_spatial_db_power_mean():
    # dB site means must happen in the power domain: parameter planted equal
    # to the power-domain mean correlates perfectly only with is_db=True
    from reefpam.stats import site_mean

    recs, series = [], {}
    level_sets = [(100.0, 106.0), (90.0, 96.0), (80.0, 86.0), (95.0, 101.0)]
    for i, (a, b) in enumerate(level_sets):
        site = f"s{i}"
        pm = site_mean(np.array([a, b]), is_db=True)
        am = (a + b) / 2.0
        recs.append(make_record(site, date(2021, 1, 1), live_coral_cover=pm - 30.0))
        series[site] = [
            (datetime(2021, 1, 1, 12, tzinfo=UTC), a),
            (datetime(2021, 1, 2, 12, tzinfo=UTC), b),
        ]
        assert pm != pytest.approx(am)  # the two conventions really differ
    res_db = correlate_index(series, recs, mode="spatial", is_db=True)
    assert res_db["live_coral_cover"].r == pytest.approx(1.0, abs=1e-9)


def test_correlate_index_too_few_pairs_undefined():
    recs = [make_record("s1", date(2021, 1, 1))]
    res = correlate_index({"s1": []}, recs, mode="temporal")
    assert all(v is None for v in res.values())


def test_correlate_cyclic_per_site():
    recs = []
    days = [15, 105, 195, 285]
    for site in ("a", "b"):
        for d in days:
            dt = date(2021, 1, 1).toordinal() + d
            cover = planted_cycle(np.array([d]))[0]
            recs.append(
                make_record(site, date.fromordinal(dt), macroalgal_cover=cover,
                            algal_cover=80.0)
            )
    series = {}
    for site in ("a", "b"):
        pts = []
        for d in range(0, 360, 15):
            dt = datetime.fromordinal(date(2021, 1, 1).toordinal() + d).replace(
                hour=12, tzinfo=UTC
            )
            pts.append((dt, -planted_cycle(np.array([float(d)]))[0]))
        series[site] = pts
    res = correlate_cyclic(series, recs)
    for site, result in res.items():
        assert result.r == pytest.approx(-1.0, abs=1e-6)


# --- composite regression ------------------------------------------------------------


def planted_design(rng, n=40):
    snap = rng.uniform(0, 500, n)
    spl = rng.uniform(80, 120, n)
    aci = rng.uniform(100, 900, n)
    return np.column_stack([snap, spl, aci])


def test_fit_composite_planted_recovery(rng):
    design = planted_design(rng)
    target = 0.2 * design[:, 0] - 0.066 * design[:, 1] + 0.038 * design[:, 2] - 53.42
    model = fit_composite(design, target, reef_parameter="live_coral_cover")
    assert np.allclose(model.coefficients, [0.2, -0.066, 0.038, -53.42], atol=1e-9)
    assert model.r_overall == pytest.approx(1.0, abs=1e-9)


def test_fit_composite_residual_orthogonality(rng):
    design = planted_design(rng, n=60)
    target = 0.1 * design[:, 0] + rng.normal(0, 5.0, 60)
    model = fit_composite(design, target)
    x = np.column_stack([design, np.ones(60)])
    resid = target - x @ model.coefficients
    for col in range(4):
        dot = abs(np.dot(resid, x[:, col]))
        scale = np.linalg.norm(resid) * np.linalg.norm(x[:, col])
        assert dot / scale < 1e-8


def test_fit_composite_null_monte_carlo():
    insignificant = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        design = planted_design(r, n=50)
        target = r.normal(0, 1.0, 50)
        model = fit_composite(design, target)
        insignificant += model.p_overall > 0.05
    assert insignificant >= 90


def test_fit_composite_duplicate_column_rejected(rng):
    snap = rng.uniform(0, 500, 30)
    spl = rng.uniform(80, 120, 30)
    design = np.column_stack([snap, spl, snap])  # ACI duplicates snap rate
    with pytest.raises(StatsError, match="condition"):
        fit_composite(design, rng.normal(size=30))


def test_fit_composite_needs_rows(rng):
    design = planted_design(rng, n=4)
    with pytest.raises(StatsError, match="rows"):
        fit_composite(design, np.zeros(4))


def test_composite_csv_schema(rng):
    design = planted_design(rng)
    target = 0.2 * design[:, 0] + 1.0
    frame = composite_models_to_frame(
        [fit_composite(design, target, reef_parameter="live_coral_cover")]
    )
    assert list(frame.columns) == COMPOSITE_CSV_COLUMNS
    assert frame.iloc[0]["reef_parameter"] == "live_coral_cover"


def test_composite_predict_matches_fitted(rng):
    design = planted_design(rng)
    target = 0.3 * design[:, 0] - 0.1 * design[:, 1] + rng.normal(0, 1, 40)
    model = fit_composite(design, target)
    x = np.column_stack([design, np.ones(40)])
    assert np.allclose(model.predict(design), x @ model.coefficients)


def test_read_transect_csv(tmp_path):
    path = tmp_path / "transects.csv"
    path.write_text(
        "site_id,survey_date,live_coral_richness,live_coral_size,live_coral_cover,"
        "dead_coral_cover,invertebrate_cover,algal_cover,macroalgal_cover\n"
        "hantu,2021-03-01,12,18.5,35.0,10.0,5.0,40.0,15.0\n"
    )
    recs = read_transect_csv(path)
    assert recs[0].site_id == "hantu"
    assert recs[0].survey_date == date(2021, 3, 1)
    assert recs[0].live_coral_cover == 35.0
