"""Seeded synthetic zone-day dataset: weather, fire outcomes and an observed danger class.

Every random stream comes from numpy's PCG64 bit generator seeded with
``SeedSequence([seed, zone, stream])`` (stream 0 weather, 1 interventions,
2 danger noise), so zones are independent of generation order and runs agree
bitwise across platforms.
"""

from __future__ import annotations

import datetime as dt
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from . import fwi
from .core import SUMMER_MONTHS, make_calendar_features, validate_record

CSV_COLUMNS = ("zone", "date", "temp12", "temp16", "dewpoint", "rh", "wind_speed", "wind_dir",
               "precip24", "snow", "dfe", "n_fires", "intervention_minutes", "engines")

STREAM_WEATHER, STREAM_INTERVENTIONS, STREAM_DANGER = 0, 1, 2


@dataclass(frozen=True)
class ZoneProfile:
    zone: int
    urbanization: float
    forest_cover: float
    base_ignition_rate: float  # fires/day at reference weather, no weekend boost
    access_difficulty: float = 1.0
    seasonal_amplitude: float = 9.0
    tourism_boost: float = 1.0
    mean_temperature: float = 15.0

    def __post_init__(self):
        errs = []
        if not 0.0 <= self.urbanization <= 1.0:
            errs.append("urbanization outside [0, 1]")
        if not 0.0 <= self.forest_cover <= 1.0:
            errs.append("forest_cover outside [0, 1]")
        if not (math.isfinite(self.base_ignition_rate) and self.base_ignition_rate >= 0):
            errs.append("base_ignition_rate must be finite and >= 0")
        if not self.access_difficulty >= 1.0:
            errs.append("access_difficulty must be >= 1")
        if not self.tourism_boost >= 1.0:
            errs.append("tourism_boost must be >= 1")
        if not self.seasonal_amplitude >= 0.0:
            errs.append("seasonal_amplitude must be >= 0")
        if errs:
            raise ValueError(f"zone {self.zone}: " + "; ".join(errs))


# coast and Tanneron: urban, touristic; mid-country and Esteron: forested, sparse;
# upper country: alpine, cold, hard to reach
DEFAULT_PROFILES = (
    ZoneProfile(61, 0.90, 0.20, 0.30, 1.0, 8.0, 1.6, 16.5),
    ZoneProfile(62, 0.20, 0.80, 0.10, 1.5, 10.0, 1.1, 14.0),
    ZoneProfile(63, 0.05, 0.70, 0.04, 2.5, 12.0, 1.05, 9.0),
    ZoneProfile(64, 0.25, 0.80, 0.12, 1.5, 10.0, 1.15, 14.5),
    ZoneProfile(65, 0.85, 0.25, 0.35, 1.0, 8.0, 1.7, 16.5),
    ZoneProfile(66, 0.60, 0.45, 0.20, 1.2, 9.0, 1.4, 15.5),
    ZoneProfile(67, 0.10, 0.85, 0.06, 1.8, 11.0, 1.05, 12.0),
)


@dataclass(frozen=True)
class NoiseScales:
    temperature: float = 3.0   # stationary std of the AR(1) anomaly, degC
    humidity: float = 8.0      # percentage points
    wind: float = 1.0          # multiplier on the gamma wind draw
    precipitation: float = 1.0  # multiplier on wet-day amounts


@dataclass(frozen=True)
class InterventionParams:
    fwi_coefficient: float = 0.5      # log-intensity per 10 FWI units
    urbanization_coefficient: float = 0.8
    duration_median_minutes: float = 45.0
    duration_sigma: float = 1.0
    min_engines: int = 1
    extra_engines_mean: float = 0.8


@dataclass(frozen=True)
class DangerParams:
    fwi_weight: float = 0.9
    dc_weight: float = 0.35
    kbdi_weight: float = 0.35
    temperature_weight: float = 0.8
    noise: float = 0.12
    quantiles: tuple[float, ...] = (0.20, 0.45, 0.70, 0.90)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    years: tuple[int, int] = (2020, 2023)
    profiles: tuple[ZoneProfile, ...] = DEFAULT_PROFILES
    noise: NoiseScales = field(default_factory=NoiseScales)
    ar_coefficient: float = 0.7
    interventions: InterventionParams = field(default_factory=InterventionParams)
    danger: DangerParams = field(default_factory=DangerParams)
    train_years: tuple[int, int] | None = None  # danger thresholds; default first half of years
    months: tuple[int, ...] = SUMMER_MONTHS

    def __post_init__(self):
        if self.years[1] < self.years[0]:
            raise ValueError("empty year range")
        zones = [p.zone for p in self.profiles]
        if not zones or len(set(zones)) != len(zones):
            raise ValueError("need one profile per zone, zones distinct")
        if not -1.0 < self.ar_coefficient < 1.0:
            raise ValueError("ar_coefficient must lie in (-1, 1)")

    def threshold_years(self) -> tuple[int, int]:
        if self.train_years is not None:
            return self.train_years
        n = self.years[1] - self.years[0] + 1
        return (self.years[0], self.years[0] + max(1, n // 2) - 1)

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int, zone: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, zone, stream])))


def seasonal_mean(profile: ZoneProfile, day_of_year: np.ndarray) -> np.ndarray:
    """16h temperature climatology, peaking in mid-July."""
    return profile.mean_temperature + profile.seasonal_amplitude * np.sin(
        2.0 * np.pi * (np.asarray(day_of_year, float) - 105.0) / 365.25)


def _dew_point(temp: np.ndarray, rh: np.ndarray) -> np.ndarray:
    # Magnus formula
    a, b = 17.62, 243.12
    g = np.log(np.maximum(rh, 1e-3) / 100.0) + a * temp / (b + temp)
    return b * g / (a - g)


def generate_weather(profile: ZoneProfile, years: tuple[int, int], seed: int,
                     noise: NoiseScales = NoiseScales(), ar_coefficient: float = 0.7) -> pd.DataFrame:
    """Daily weather over whole calendar years for one zone.

    Columns follow the dataset schema (date, temp12, temp16, dewpoint, rh,
    wind_speed, wind_dir, precip24, snow) plus ``anomaly``, the AR(1) part of
    temp16.
    """
    if years[1] < years[0]:
        raise ValueError("empty year range")
    dates = pd.date_range(f"{years[0]}-01-01", f"{years[1]}-12-31", freq="D")
    n = len(dates)
    rng = _rng(seed, profile.zone, STREAM_WEATHER)
    doy = dates.dayofyear.to_numpy()
    season = seasonal_mean(profile, doy)
    seasonal_frac = (season - profile.mean_temperature) / max(profile.seasonal_amplitude, 1e-9)

    eps = rng.standard_normal(n)
    phi = ar_coefficient
    innov = noise.temperature * math.sqrt(1.0 - phi * phi) * eps
    anomaly = np.empty(n)
    prev = noise.temperature * rng.standard_normal()
    for i in range(n):
        prev = phi * prev + innov[i]
        anomaly[i] = prev
    temp16 = season + anomaly
    temp12 = temp16 - 2.0

    # two-state Markov rain: drier and more persistent in summer
    p_wet_after_dry = np.clip(0.22 - 0.14 * seasonal_frac, 0.02, 0.6)
    p_wet_after_wet = np.clip(0.55 - 0.15 * seasonal_frac, 0.05, 0.9)
    u = rng.random(n)
    amounts = rng.gamma(0.8, 9.0, size=n) * noise.precipitation
    wet = np.zeros(n, dtype=bool)
    was_wet = False
    for i in range(n):
        was_wet = u[i] < (p_wet_after_wet[i] if was_wet else p_wet_after_dry[i])
        wet[i] = was_wet
    precip = np.where(wet, np.round(amounts, 1), 0.0)

    rh_noise = noise.humidity * rng.standard_normal(n)
    rh = 62.0 - 2.2 * anomaly - 12.0 * seasonal_frac + rh_noise + 18.0 * wet
    rh = np.round(np.clip(rh, 5.0, 100.0), 1)
    dew = np.round(_dew_point(temp16, rh), 2)

    wind = np.round(rng.gamma(2.0, 6.0, size=n) * noise.wind, 1)
    wind_dir = np.floor(rng.random(n) * 3600.0) / 10.0

    snow = np.zeros(n)
    depth = 0.0
    for i in range(n):
        if wet[i] and temp16[i] < 2.0:
            depth += precip[i]  # cm of snow, roughly 1 cm per mm
        depth = max(0.0, depth - max(0.0, temp16[i]) * 0.5)
        snow[i] = round(depth, 1)

    return pd.DataFrame({
        "date": dates, "temp12": temp12, "temp16": temp16, "dewpoint": dew, "rh": rh,
        "wind_speed": wind, "wind_dir": wind_dir, "precip24": precip, "snow": snow,
        "anomaly": anomaly,
    })


def boost_days(dates: Sequence) -> np.ndarray:
    """1.0 on summer weekends and public holidays."""
    out = np.zeros(len(dates))
    for i, d in enumerate(pd.to_datetime(pd.Series(dates))):
        if d.month in SUMMER_MONTHS:
            cal = make_calendar_features(d.date())
            out[i] = float(cal.is_weekend or cal.is_holiday)
    return out


def ignition_intensity(profile: ZoneProfile, fwi_values: np.ndarray, boost: np.ndarray,
                       params: InterventionParams = InterventionParams()) -> np.ndarray:
    """Expected fires per day: log-affine in FWI, weekend boost and urbanization."""
    if profile.base_ignition_rate == 0:
        return np.zeros(len(fwi_values))
    log_lam = (math.log(profile.base_ignition_rate)
               + params.fwi_coefficient * (np.asarray(fwi_values, float) - 15.0) / 10.0
               + math.log(profile.tourism_boost) * np.asarray(boost, float)
               + params.urbanization_coefficient * (profile.urbanization - 0.5))
    return np.exp(log_lam)


def generate_interventions(profile: ZoneProfile, weather: pd.DataFrame, seed: int,
                           params: InterventionParams = InterventionParams(),
                           fwi_values: np.ndarray | None = None) -> pd.DataFrame:
    """Per-day n_fires, intervention_minutes and engines.

    Fires are Poisson with ``ignition_intensity``; each fire lasts a
    log-normal number of minutes scaled by access difficulty and needs
    ``min_engines`` plus a Poisson number of extra engines.
    """
    if params.min_engines < 1:
        raise ValueError("min_engines must be >= 1")
    if fwi_values is None:
        fwi_values = fwi.compute_indices(weather)["fwi"].to_numpy()
    lam = ignition_intensity(profile, fwi_values, boost_days(weather["date"]), params)
    rng = _rng(seed, profile.zone, STREAM_INTERVENTIONS)
    n_fires = rng.poisson(lam)
    minutes = np.zeros(len(lam))
    engines = np.zeros(len(lam), dtype=int)
    mu = math.log(params.duration_median_minutes * (1.0 + profile.forest_cover))
    extra = params.extra_engines_mean * (1.0 + profile.forest_cover)
    for i in np.nonzero(n_fires)[0]:
        k = int(n_fires[i])
        dur = rng.lognormal(mu, params.duration_sigma, size=k) * profile.access_difficulty
        minutes[i] = float(np.round(dur.sum(), 1))
        engines[i] = int(params.min_engines * k + rng.poisson(extra, size=k).sum())
    return pd.DataFrame({"n_fires": n_fires.astype(int), "intervention_minutes": minutes,
                         "engines": engines}, index=weather.index)


def danger_hazard(weather: pd.DataFrame, indices: pd.DataFrame, params: DangerParams,
                  rng: np.random.Generator) -> np.ndarray:
    """Smooth hazard score for each day from the previous days' conditions.

    Uses the day-before FWI, DC and KBDI and the mean 16h temperature of the
    three preceding days; the first day of a run reuses its own values.
    """
    n = len(weather)
    dates = pd.to_datetime(weather["date"]).to_numpy()
    gaps = np.concatenate([[2], np.diff(dates).astype("timedelta64[D]").astype(int)])
    run_start = np.maximum.accumulate(np.where(gaps != 1, np.arange(n), 0))

    def lagged(v: np.ndarray, k: int) -> np.ndarray:
        idx = np.maximum(np.arange(n) - k, run_start)
        return v[idx]

    t16 = weather["temp16"].to_numpy(float)
    temp3 = (lagged(t16, 1) + lagged(t16, 2) + lagged(t16, 3)) / 3.0
    f = lagged(indices["fwi"].to_numpy(float), 1)
    dc = lagged(indices["dc"].to_numpy(float), 1)
    kb = lagged(indices["kbdi"].to_numpy(float), 1)
    return (params.fwi_weight * (f - 15.0) / 10.0
            + params.dc_weight * (dc - 300.0) / 200.0
            + params.kbdi_weight * (kb - 300.0) / 200.0
            + params.temperature_weight * (temp3 - 22.0) / 4.0
            + params.noise * rng.standard_normal(n))


def build_dataset(config: GeneratorConfig = GeneratorConfig(), validate: bool = True) -> pd.DataFrame:
    """One row per (zone, summer day), columns ``CSV_COLUMNS``, sorted by zone then date.

    The danger class thresholds the hazard at fixed quantiles of its
    distribution over the threshold years.
    """
    frames, hazards = [], []
    for profile in sorted(config.profiles, key=lambda p: p.zone):
        w = generate_weather(profile, config.years, config.seed, config.noise, config.ar_coefficient)
        w = w[w["date"].dt.month.isin(config.months)].reset_index(drop=True)
        idx = fwi.compute_indices(w)
        iv = generate_interventions(profile, w, config.seed, config.interventions,
                                    fwi_values=idx["fwi"].to_numpy())
        hz = danger_hazard(w, idx, config.danger,
                           _rng(config.seed, profile.zone, STREAM_DANGER))
        df = w.drop(columns=["anomaly"]).join(iv)
        df.insert(0, "zone", profile.zone)
        frames.append(df)
        hazards.append(hz)
    data = pd.concat(frames, ignore_index=True)
    hazard = np.concatenate(hazards)
    ty = config.threshold_years()
    years = data["date"].dt.year.to_numpy()
    in_train = (years >= ty[0]) & (years <= ty[1])
    ref = hazard[in_train] if in_train.any() else hazard
    thresholds = np.quantile(ref, config.danger.quantiles)
    data["dfe"] = np.searchsorted(thresholds, hazard, side="right").astype(int)
    for col in ("temp12", "temp16"):
        data[col] = data[col].round(2)
    data["date"] = data["date"].dt.date
    data = data[list(CSV_COLUMNS)]
    if validate:
        for row in data.rename(columns=_RECORD_NAMES).to_dict("records"):
            validate_record(row, zones=[p.zone for p in config.profiles])
    return data


_RECORD_NAMES = {
    "temp12": "temperature_12h", "temp16": "temperature_16h", "dewpoint": "dew_point",
    "rh": "relative_humidity", "wind_dir": "wind_direction", "precip24": "precipitation_24h",
    "snow": "snow_height", "dfe": "observed_dfe", "intervention_minutes": "total_intervention_minutes",
    "engines": "engines_deployed",
}


def write_csv(data: pd.DataFrame, path) -> None:
    data.to_csv(path, index=False, float_format="%.6g", lineterminator="\n", encoding="utf-8")


def read_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, encoding="utf-8")
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"dataset missing columns: {missing}")
    df["date"] = pd.to_datetime(df["date"]).dt.date
    return df[list(CSV_COLUMNS)]


def records_frame(data: pd.DataFrame) -> pd.DataFrame:
    """The dataset with field names of ``DailyZoneRecord``."""
    return data.rename(columns=_RECORD_NAMES)


def season_days(year: int, months: Sequence[int] = SUMMER_MONTHS) -> int:
    return sum((dt.date(year + (m == 12), m % 12 + 1, 1) - dt.date(year, m, 1)).days for m in months)
