import dataclasses
import math

import numpy as np
import pandas as pd
import pytest

from firerisk import fwi
from firerisk.core import validate_record
from firerisk.synthgen import (CSV_COLUMNS, DEFAULT_PROFILES, GeneratorConfig, NoiseScales,
                               ZoneProfile, boost_days, build_dataset, generate_interventions,
                               generate_weather, ignition_intensity, read_csv, records_frame,
                               season_days, seasonal_mean, write_csv)

P61 = DEFAULT_PROFILES[0]


def test_weather_determinism():
    a = generate_weather(P61, (2021, 2021), 5)
    b = generate_weather(P61, (2021, 2021), 5)
    pd.testing.assert_frame_equal(a, b)
    c = generate_weather(P61, (2021, 2021), 6)
    assert not np.array_equal(a["temp16"], c["temp16"])


def test_zero_noise_is_pure_seasonal():
    w = generate_weather(P61, (2021, 2021), 1, NoiseScales(0, 0, 1, 1))
    doy = w["date"].dt.dayofyear.to_numpy()
    assert np.array_equal(w["temp16"].to_numpy(), seasonal_mean(P61, doy))


def test_ar_autocorrelation():
    w = generate_weather(P61, (1995, 2022), 2, ar_coefficient=0.7)
    assert len(w) > 10_000
    resid = w["temp16"].to_numpy() - seasonal_mean(P61, w["date"].dt.dayofyear.to_numpy())
    r1 = np.corrcoef(resid[:-1], resid[1:])[0, 1]
    assert abs(r1 - 0.7) <= 0.05


def test_weather_ranges():
    w = generate_weather(DEFAULT_PROFILES[2], (2020, 2021), 3)
    assert w["rh"].between(0, 100).all() and (w["precip24"] >= 0).all()
    assert (w["wind_speed"] >= 0).all() and w["wind_dir"].between(0, 359.99).all()
    assert (w["snow"] >= 0).all() and (w["snow"] > 0).any()  # alpine winter


def _winter_weather(n):
    # off-season days only, so there is no weekend/holiday boost
    days = pd.date_range("1700-01-01", periods=2 * n)
    dates = days[~days.month.isin([6, 7, 8, 9])][:n]
    return pd.DataFrame({"date": dates})


def test_zero_ignition_rate():
    p = dataclasses.replace(P61, base_ignition_rate=0.0)
    w = _winter_weather(500)
    iv = generate_interventions(p, w, 0, fwi_values=np.full(500, 40.0))
    assert (iv["n_fires"] == 0).all() and (iv["engines"] == 0).all()
    assert (iv["intervention_minutes"] == 0).all()


def test_mean_fires_matches_intensity():
    n = 50_000
    w = _winter_weather(n)
    f = np.random.default_rng(0).uniform(0, 40, n)
    lam = ignition_intensity(P61, f, np.zeros(n))
    iv = generate_interventions(P61, w, 7, fwi_values=f)
    se = math.sqrt(lam.mean() / n)
    assert abs(iv["n_fires"].mean() - lam.mean()) < 3 * se


def test_access_difficulty_doubles_duration():
    n = 20_000
    w = _winter_weather(n)
    f = np.full(n, 25.0)
    p1 = dataclasses.replace(P61, access_difficulty=1.0)
    p2 = dataclasses.replace(P61, access_difficulty=2.0)
    a = generate_interventions(p1, w, 9, fwi_values=f)
    b = generate_interventions(p2, w, 9, fwi_values=f)
    ma = a["intervention_minutes"].sum() / a["n_fires"].sum()
    mb = b["intervention_minutes"].sum() / b["n_fires"].sum()
    assert mb / ma == pytest.approx(2.0, rel=0.01)


def test_urbanization_and_tourism_raise_fire_counts():
    days = pd.date_range("1800-01-01", "2099-12-31")
    w = pd.DataFrame({"date": days[days.month.isin([7, 8])]})
    n = len(w)
    f = np.random.default_rng(1).uniform(0, 40, n)
    lo = ZoneProfile(90, 0.2, 0.5, 0.2, tourism_boost=1.0)
    hi = ZoneProfile(90, 0.8, 0.5, 0.2, tourism_boost=1.5)
    a = generate_interventions(lo, w, 3, fwi_values=f)["n_fires"].mean()
    b = generate_interventions(hi, w, 3, fwi_values=f)["n_fires"].mean()
    assert b > a


def test_boost_days():
    b = boost_days(pd.to_datetime(["2023-07-14", "2023-07-15", "2023-07-17", "2023-01-07"]))
    assert b.tolist() == [1.0, 1.0, 0.0, 0.0]


def test_profile_validation():
    with pytest.raises(ValueError):
        ZoneProfile(61, 1.5, 0.2, 0.1)
    with pytest.raises(ValueError):
        ZoneProfile(61, 0.5, 0.2, float("nan"))
    with pytest.raises(ValueError):
        GeneratorConfig(profiles=(P61, P61))
    with pytest.raises(ValueError):
        GeneratorConfig(years=(2022, 2021))


def test_two_summers_row_count_and_validity():
    data = build_dataset(GeneratorConfig(seed=1, years=(2022, 2023)))
    assert season_days(2022) == 122
    assert len(data) == 7 * 2 * 122 == 1708
    assert tuple(data.columns) == CSV_COLUMNS
    for row in records_frame(data).to_dict("records"):
        validate_record(row)
    quiet = data["n_fires"] == 0
    assert (data.loc[quiet, "engines"] == 0).all()
    assert (data.loc[quiet, "intervention_minutes"] == 0).all()


def test_dataset_determinism():
    cfg = GeneratorConfig(seed=4, years=(2021, 2022), profiles=DEFAULT_PROFILES[:2])
    pd.testing.assert_frame_equal(build_dataset(cfg), build_dataset(cfg))


def test_zero_inflation_of_low_ignition_zones():
    cfg = GeneratorConfig(seed=0)
    data = build_dataset(cfg)
    for p in cfg.profiles:
        if p.base_ignition_rate > 0.1:
            continue
        z = data[data["zone"] == p.zone].reset_index(drop=True)
        f = fwi.compute_indices(z)["fwi"].to_numpy()
        lam = ignition_intensity(p, f, boost_days(z["date"]))
        expected_zero = np.exp(-lam).mean()
        observed = (z["n_fires"] == 0).mean()
        assert expected_zero > 0.7
        assert observed > 0.7
        assert abs(observed - expected_zero) < 4 * math.sqrt(expected_zero * (1 - expected_zero) / len(z))


def test_dfe_classes_balanced_on_threshold_years():
    data = build_dataset(GeneratorConfig(seed=0))
    yrs = pd.to_datetime(data["date"]).dt.year
    counts = np.bincount(data.loc[yrs <= 2021, "dfe"], minlength=5) / (yrs <= 2021).sum()
    assert counts == pytest.approx([0.2, 0.25, 0.25, 0.2, 0.1], abs=0.01)


def test_csv_roundtrip(tmp_path):
    cfg = GeneratorConfig(seed=2, years=(2022, 2022), profiles=DEFAULT_PROFILES[:2])
    data = build_dataset(cfg)
    write_csv(data, tmp_path / "a.csv")
    write_csv(data, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(tmp_path / "a.csv")
    assert back["date"].tolist() == data["date"].tolist()
    assert np.allclose(back["temp16"], data["temp16"], atol=1e-4)
