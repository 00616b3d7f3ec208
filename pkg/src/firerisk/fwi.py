"""Fire-weather and drought indices computed from daily weather.

Canonical definitions used here:

* Canadian Forest Fire Weather Index System, Van Wagner (1987) with the
  equation sheet of Van Wagner & Pickett (1985): FFMC, DMC, DC, ISI, BUI,
  FWI and DSR. Start-up codes FFMC=85, DMC=6, DC=15.
* Angstroem index  I = RH/20 + (27 - T)/10.
* Nesterov index, accumulating T*(T - Tdew), reset when rain > 3 mm.
* Munger drought index 0.5*n^2, n = consecutive days with rain < 1.27 mm.
* Keetch-Byram drought index on its original 0-800 scale (hundredths of an
  inch of soil-moisture deficit, temperatures in degrees F).

Day-length factors are the northern mid-latitude monthly tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

# All tunable constants live here.
CONSTANTS = {
    "ffmc_start": 85.0,
    "dmc_start": 6.0,
    "dc_start": 15.0,
    "kbdi_start": 100.0,
    "nesterov_rain_reset_mm": 3.0,
    "munger_rain_reset_mm": 1.27,
    "kbdi_rain_carryover_mm": 5.1,
    "kbdi_max": 800.0,
    "dsr_coef": 0.0272,
    "dsr_exp": 1.77,
    "mean_annual_rain_mm": 800.0,
}

# Effective day length (hours) for DMC, latitude >= 30 N.
DMC_DAY_LENGTH = (6.5, 7.5, 9.0, 12.8, 13.9, 13.9, 12.4, 10.9, 9.4, 8.0, 7.0, 6.0)
# Day-length adjustment for DC, latitude >= 30 N.
DC_DAY_LENGTH = (-1.6, -1.6, -1.6, 0.9, 3.8, 5.8, 6.4, 5.0, 2.4, 0.4, -1.6, -1.6)


@dataclass(frozen=True)
class FwiState:
    ffmc: float = CONSTANTS["ffmc_start"]
    dmc: float = CONSTANTS["dmc_start"]
    dc: float = CONSTANTS["dc_start"]
    nesterov: float = 0.0
    munger: float = 0.0
    kbdi: float = CONSTANTS["kbdi_start"]
    angstroem: float = 0.0

    def check(self) -> "FwiState":
        if not 0.0 <= self.ffmc <= 101.0:
            raise ValueError(f"FFMC out of [0, 101]: {self.ffmc}")
        if self.dmc < 0 or self.dc < 0:
            raise ValueError(f"negative DMC/DC: {self.dmc}, {self.dc}")
        if not 0.0 <= self.kbdi <= CONSTANTS["kbdi_max"]:
            raise ValueError(f"KBDI out of [0, 800]: {self.kbdi}")
        if self.nesterov < 0 or self.munger < 0:
            raise ValueError("negative Nesterov/Munger index")
        return self


@dataclass(frozen=True)
class FwiOutputs:
    isi: float
    bui: float
    fwi: float
    dsr: float


def _check_weather(temperature: float, relative_humidity: float, wind_speed: float,
                   rain_24h: float, month: int | None = None) -> None:
    if not all(math.isfinite(v) for v in (temperature, relative_humidity, wind_speed, rain_24h)):
        raise ValueError("non-finite weather input")
    if not 0.0 <= relative_humidity <= 100.0:
        raise ValueError(f"relative humidity outside [0, 100]: {relative_humidity}")
    if wind_speed < 0:
        raise ValueError(f"negative wind speed: {wind_speed}")
    if rain_24h < 0:
        raise ValueError(f"negative precipitation: {rain_24h}")
    if month is not None and not 1 <= month <= 12:
        raise ValueError(f"month outside 1..12: {month}")


def angstroem(temperature: float, relative_humidity: float) -> float:
    if not 0.0 <= relative_humidity <= 100.0:
        raise ValueError(f"relative humidity outside [0, 100]: {relative_humidity}")
    return max(0.0, relative_humidity / 20.0 + (27.0 - temperature) / 10.0)


def nesterov_step(prev: float, temperature: float, dew_point: float, rain_24h: float) -> float:
    if rain_24h > CONSTANTS["nesterov_rain_reset_mm"]:
        return 0.0
    return max(0.0, prev + temperature * (temperature - dew_point))


def munger_step(prev: float, rain_24h: float) -> float:
    """Advance the Munger index one day.

    ``prev`` must be of the form 0.5*n**2; the dry-day count n is recovered
    from it.
    """
    n = math.sqrt(2.0 * prev) if prev >= 0 else float("nan")
    n_int = round(n) if math.isfinite(n) else -1
    if n_int < 0 or abs(n - n_int) > 1e-6:
        raise ValueError(f"Munger value {prev!r} is not 0.5*n^2 for an integer n")
    if rain_24h >= CONSTANTS["munger_rain_reset_mm"]:
        return 0.0
    return 0.5 * (n_int + 1) ** 2


def kbdi_step(prev: float, temperature_max: float, rain_24h: float,
              mean_annual_rain: float = CONSTANTS["mean_annual_rain_mm"]) -> float:
    """One day of the Keetch-Byram drought index (0-800 scale).

    Daily rain beyond the 5.1 mm carryover threshold reduces the index one
    point per hundredth of an inch; the drought factor then adds
    (800 - Q)(0.968 exp(0.0486 T_F) - 8.30) / (1 + 10.88 exp(-0.0441 R_in)) * 1e-3,
    floored at zero.
    """
    kmax = CONSTANTS["kbdi_max"]
    if not 0.0 <= prev <= kmax:
        raise ValueError(f"KBDI out of [0, {kmax}]: {prev}")
    if rain_24h < 0 or mean_annual_rain < 0:
        raise ValueError("negative rainfall")
    net_rain = max(0.0, rain_24h - CONSTANTS["kbdi_rain_carryover_mm"])
    q = max(0.0, prev - net_rain / 0.254)
    t_f = temperature_max * 9.0 / 5.0 + 32.0
    r_in = mean_annual_rain / 25.4
    growth = max(0.0, 0.968 * math.exp(0.0486 * t_f) - 8.30)
    dq = (kmax - q) * growth / (1.0 + 10.88 * math.exp(-0.0441 * r_in)) * 1e-3
    return min(kmax, q + dq)


def ffmc_step(ffmc0: float, temperature: float, rh: float, wind: float, rain: float) -> float:
    mo = 147.2 * (101.0 - ffmc0) / (59.5 + ffmc0)
    if rain > 0.5:
        rf = rain - 0.5
        wet = 42.5 * rf * math.exp(-100.0 / (251.0 - mo)) * (1.0 - math.exp(-6.93 / rf))
        if mo > 150.0:
            mo = mo + wet + 0.0015 * (mo - 150.0) ** 2 * math.sqrt(rf)
        else:
            mo = mo + wet
        mo = min(mo, 250.0)
    ed = (0.942 * rh ** 0.679 + 11.0 * math.exp((rh - 100.0) / 10.0)
          + 0.18 * (21.1 - temperature) * (1.0 - math.exp(-0.115 * rh)))
    if mo > ed:
        ko = (0.424 * (1.0 - (rh / 100.0) ** 1.7)
              + 0.0694 * math.sqrt(wind) * (1.0 - (rh / 100.0) ** 8))
        kd = ko * 0.581 * math.exp(0.0365 * temperature)
        m = ed + (mo - ed) * 10.0 ** (-kd)
    else:
        ew = (0.618 * rh ** 0.753 + 10.0 * math.exp((rh - 100.0) / 10.0)
              + 0.18 * (21.1 - temperature) * (1.0 - math.exp(-0.115 * rh)))
        if mo < ew:
            dry = (100.0 - rh) / 100.0
            k1 = 0.424 * (1.0 - dry ** 1.7) + 0.0694 * math.sqrt(wind) * (1.0 - dry ** 8)
            kw = k1 * 0.581 * math.exp(0.0365 * temperature)
            m = ew - (ew - mo) * 10.0 ** (-kw)
        else:
            m = mo
    ffmc = 59.5 * (250.0 - m) / (147.2 + m)
    return min(101.0, max(0.0, ffmc))


def dmc_step(dmc0: float, temperature: float, rh: float, rain: float, month: int) -> float:
    t = max(temperature, -1.1)
    rk = 1.894 * (t + 1.1) * (100.0 - rh) * DMC_DAY_LENGTH[month - 1] * 1e-4
    pr = dmc0
    if rain > 1.5:
        re = 0.92 * rain - 1.27
        mo = 20.0 + math.exp(5.6348 - dmc0 / 43.43)
        if dmc0 <= 33.0:
            b = 100.0 / (0.5 + 0.3 * dmc0)
        elif dmc0 <= 65.0:
            b = 14.0 - 1.3 * math.log(dmc0)
        else:
            b = 6.2 * math.log(dmc0) - 17.2
        mr = mo + 1000.0 * re / (48.77 + b * re)
        pr = max(0.0, 244.72 - 43.43 * math.log(mr - 20.0))
    return max(0.0, pr + rk)


def dc_step(dc0: float, temperature: float, rain: float, month: int) -> float:
    t = max(temperature, -2.8)
    pe = max(0.0, (0.36 * (t + 2.8) + DC_DAY_LENGTH[month - 1]) / 2.0)
    dr = dc0
    if rain > 2.8:
        rd = 0.83 * rain - 1.27
        qo = 800.0 * math.exp(-dc0 / 400.0)
        qr = qo + 3.937 * rd
        dr = max(0.0, 400.0 * math.log(800.0 / qr))
    return dr + pe


def isi(ffmc: float, wind: float) -> float:
    m = 147.2 * (101.0 - ffmc) / (59.5 + ffmc)
    f_f = 91.9 * math.exp(-0.1386 * m) * (1.0 + m ** 5.31 / 4.93e7)
    return 0.208 * math.exp(0.05039 * wind) * f_f


def bui(dmc: float, dc: float) -> float:
    if dmc == 0.0 and dc == 0.0:
        return 0.0
    if dmc <= 0.4 * dc:
        u = 0.8 * dmc * dc / (dmc + 0.4 * dc)
    else:
        u = dmc - (1.0 - 0.8 * dc / (dmc + 0.4 * dc)) * (0.92 + (0.0114 * dmc) ** 1.7)
    return max(0.0, u)


def fwi(isi_value: float, bui_value: float) -> float:
    if bui_value <= 80.0:
        f_d = 0.626 * bui_value ** 0.809 + 2.0
    else:
        f_d = 1000.0 / (25.0 + 108.64 * math.exp(-0.023 * bui_value))
    b = 0.1 * isi_value * f_d
    if b > 1.0:
        return math.exp(2.72 * (0.434 * math.log(b)) ** 0.647)
    return b


def dsr(fwi_value: float) -> float:
    return CONSTANTS["dsr_coef"] * fwi_value ** CONSTANTS["dsr_exp"]


def canadian_fwi_step(prev: FwiState, temperature: float, relative_humidity: float,
                      wind_speed: float, rain_24h: float, month: int
                      ) -> tuple[FwiState, FwiOutputs]:
    """Advance the moisture codes one day and derive ISI, BUI, FWI and DSR.

    Only the FFMC/DMC/DC fields of ``prev`` are touched; the other indices
    are carried over unchanged.
    """
    _check_weather(temperature, relative_humidity, wind_speed, rain_24h, month)
    f = ffmc_step(prev.ffmc, temperature, relative_humidity, wind_speed, rain_24h)
    p = dmc_step(prev.dmc, temperature, relative_humidity, rain_24h, month)
    d = dc_step(prev.dc, temperature, rain_24h, month)
    i = isi(f, wind_speed)
    u = bui(p, d)
    w = fwi(i, u)
    state = replace(prev, ffmc=f, dmc=p, dc=d)
    return state, FwiOutputs(isi=i, bui=u, fwi=w, dsr=dsr(w))


def precipitation_features(rain: np.ndarray | list[float]) -> pd.DataFrame:
    """Windowed rain sums (3/5/9/7 days, truncated at the series start) and days since rain.

    ``days_since_rain`` is the number of days elapsed since the latest day with
    strictly positive rain, or since the series start when there is none.
    """
    r = np.asarray(rain, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative precipitation in series")
    idx = np.arange(len(r))

    def window(k: int) -> np.ndarray:
        # oldest day first, so sums are bitwise equal to a running loop
        acc = np.zeros(len(r))
        for lag in range(min(k, len(r)) - 1, -1, -1):
            acc[lag:] += r[:len(r) - lag]
        return acc

    last_wet = np.where(r > 0, idx, 0)
    last_wet = np.maximum.accumulate(last_wet) if len(r) else last_wet
    return pd.DataFrame({
        "precip_index_3": window(3),
        "precip_index_5": window(5),
        "precip_index_9": window(9),
        "rain_sum_7d": window(7),
        "days_since_rain": (idx - last_wet).astype(float),
    })


INDEX_COLUMNS = ("ffmc", "dmc", "dc", "isi", "bui", "fwi", "dsr", "nesterov", "munger",
                 "kbdi", "angstroem", "precip_index_3", "precip_index_5", "precip_index_9",
                 "rain_sum_7d", "days_since_rain")


def compute_indices(weather: pd.DataFrame, temperature_column: str = "temp16") -> pd.DataFrame:
    """Run every index over one zone's daily weather.

    ``weather`` needs columns date, temp12, temp16, dewpoint, rh, wind_speed and
    precip24, sorted by date. The recurrences restart from start-up values at
    every gap in the dates (e.g. between summer seasons).
    """
    dates = pd.to_datetime(weather["date"]).to_numpy()
    n = len(weather)
    out = {name: np.zeros(n) for name in INDEX_COLUMNS}
    if n == 0:
        return pd.DataFrame(out, index=weather.index)
    gaps = np.diff(dates).astype("timedelta64[D]").astype(int)
    if np.any(gaps <= 0):
        raise ValueError("weather dates must be strictly increasing")
    starts = np.concatenate([[0], np.nonzero(gaps != 1)[0] + 1, [n]])

    temp = weather[temperature_column].to_numpy(float)
    tmax = np.maximum(weather["temp12"].to_numpy(float), weather["temp16"].to_numpy(float))
    dew = weather["dewpoint"].to_numpy(float)
    rh = weather["rh"].to_numpy(float)
    wind = weather["wind_speed"].to_numpy(float)
    rain = weather["precip24"].to_numpy(float)
    months = pd.DatetimeIndex(dates).month.to_numpy()

    for a, b in zip(starts[:-1], starts[1:]):
        state = FwiState()
        for k in range(a, b):
            state, res = canadian_fwi_step(state, temp[k], rh[k], wind[k], rain[k], int(months[k]))
            state = replace(
                state,
                nesterov=nesterov_step(state.nesterov, temp[k], dew[k], rain[k]),
                munger=munger_step(state.munger, rain[k]),
                kbdi=kbdi_step(state.kbdi, tmax[k], rain[k]),
                angstroem=angstroem(temp[k], rh[k]),
            )
            for name in ("ffmc", "dmc", "dc", "nesterov", "munger", "kbdi", "angstroem"):
                out[name][k] = getattr(state, name)
            out["isi"][k], out["bui"][k], out["fwi"][k], out["dsr"][k] = (
                res.isi, res.bui, res.fwi, res.dsr)
        pf = precipitation_features(rain[a:b])
        for col in pf.columns:
            out[col][a:b] = pf[col].to_numpy()
    return pd.DataFrame(out, index=weather.index)
