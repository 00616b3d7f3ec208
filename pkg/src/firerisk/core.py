"""Shared vocabulary: zones, targets, risk classes, calendar features and daily records."""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any

DEFAULT_ZONES: tuple[int, ...] = (61, 62, 63, 64, 65, 66, 67)
N_CLASSES = 5
MAX_CLASS = N_CLASSES - 1

SUMMER_MONTHS = (6, 7, 8, 9)


class TargetKind(str, enum.Enum):
    DFE = "dfe"
    NUM_FIRES = "num_fires"
    INTERVENTION_TIME = "intervention_time"
    RESOURCES = "resources"

    @classmethod
    def parse(cls, name: str) -> "TargetKind":
        key = name.strip().lower().replace("-", "_")
        aliases = {"nfires": "num_fires", "fires": "num_fires", "time": "intervention_time",
                   "engines": "resources"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown target {name!r}; expected one of "
                             f"{[t.value for t in cls]}") from None


OPERATIONAL_TARGETS = (TargetKind.NUM_FIRES, TargetKind.INTERVENTION_TIME, TargetKind.RESOURCES)

# dataset column holding the raw quantity behind each target
TARGET_SOURCE_COLUMN = {
    TargetKind.DFE: "dfe",
    TargetKind.NUM_FIRES: "n_fires",
    TargetKind.INTERVENTION_TIME: "intervention_minutes",
    TargetKind.RESOURCES: "engines",
}


def check_zone(code: int, zones: Iterable[int] = DEFAULT_ZONES) -> int:
    zones = tuple(zones)
    if not zones:
        raise ValueError("zone set is empty")
    if int(code) != code or int(code) not in zones:
        raise ValueError(f"zone {code!r} not in configured zone set {zones}")
    return int(code)


def check_risk_class(level: Any) -> int:
    """Return ``level`` as an int after checking it lies on the 0..4 ordinal scale."""
    if isinstance(level, bool) or int(level) != level or not 0 <= int(level) <= MAX_CLASS:
        raise ValueError(f"risk class must be an integer in [0, {MAX_CLASS}], got {level!r}")
    return int(level)


# French national holidays 2015-2023. Easter-based dates are listed explicitly.
_FIXED_HOLIDAYS = ((1, 1), (5, 1), (5, 8), (7, 14), (8, 15), (11, 1), (11, 11), (12, 25))
_EASTER_SUNDAYS = {
    2015: dt.date(2015, 4, 5),
    2016: dt.date(2016, 3, 27),
    2017: dt.date(2017, 4, 16),
    2018: dt.date(2018, 4, 1),
    2019: dt.date(2019, 4, 21),
    2020: dt.date(2020, 4, 12),
    2021: dt.date(2021, 4, 4),
    2022: dt.date(2022, 4, 17),
    2023: dt.date(2023, 4, 9),
}


def _build_holiday_table() -> frozenset[dt.date]:
    days = set()
    for year, easter in _EASTER_SUNDAYS.items():
        days.update(dt.date(year, m, d) for m, d in _FIXED_HOLIDAYS)
        # Easter Monday, Ascension Thursday, Whit Monday
        days.update(easter + dt.timedelta(days=k) for k in (1, 39, 50))
    return frozenset(days)


FRENCH_HOLIDAYS: frozenset[dt.date] = _build_holiday_table()


@dataclass(frozen=True)
class CalendarFeatures:
    day_of_week: int  # ISO: Monday=1 .. Sunday=7
    iso_week: int
    is_weekend: bool
    is_holiday: bool


def make_calendar_features(date: dt.date | str,
                           extra_holidays: Iterable[dt.date] = ()) -> CalendarFeatures:
    """Calendar flags for one day; ``extra_holidays`` extends the built-in French table."""
    date = parse_date(date)
    iso = date.isocalendar()
    holidays = FRENCH_HOLIDAYS.union(extra_holidays) if extra_holidays else FRENCH_HOLIDAYS
    return CalendarFeatures(
        day_of_week=iso[2],
        iso_week=iso[1],
        is_weekend=iso[2] >= 6,
        is_holiday=date in holidays,
    )


def parse_date(value: dt.date | str) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value.strip())
        except ValueError as exc:
            raise ValueError(f"invalid date {value!r}: {exc}") from None
    raise TypeError(f"expected a date or ISO string, got {type(value).__name__}")


class RecordValidationError(ValueError):
    """A raw record violates one or more field bounds.

    ``errors`` holds ``(field, message)`` pairs, one per violation.
    """

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{field}: {msg}" for field, msg in self.errors))


class InconsistentOutcomeError(RecordValidationError):
    """A zero-fire day reports intervention minutes or engines."""


@dataclass(frozen=True)
class DailyZoneRecord:
    zone: int
    date: dt.date
    temperature_12h: float
    temperature_16h: float
    dew_point: float
    relative_humidity: float
    wind_speed: float
    wind_direction: float
    precipitation_24h: float
    snow_height: float
    observed_dfe: int
    n_fires: int
    total_intervention_minutes: float
    engines_deployed: int

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FLOAT_FIELDS = ("temperature_12h", "temperature_16h", "dew_point", "relative_humidity",
                 "wind_speed", "wind_direction", "precipitation_24h", "snow_height",
                 "total_intervention_minutes")
_INT_FIELDS = ("observed_dfe", "n_fires", "engines_deployed")


def validate_record(raw: Mapping[str, Any] | DailyZoneRecord,
                    zones: Iterable[int] = DEFAULT_ZONES) -> DailyZoneRecord:
    """Check every field bound of one zone-day and return the typed record.

    Raises:
        RecordValidationError: listing each violated bound by field name.
        InconsistentOutcomeError: n_fires is 0 but minutes or engines are not.
    """
    if isinstance(raw, DailyZoneRecord):
        raw = raw.as_dict()
    errors: list[tuple[str, str]] = []
    values: dict[str, Any] = {}

    missing = [f.name for f in dataclasses.fields(DailyZoneRecord) if f.name not in raw]
    if missing:
        raise RecordValidationError([(name, "missing field") for name in missing])

    try:
        values["zone"] = check_zone(raw["zone"], zones)
    except (ValueError, TypeError) as exc:
        errors.append(("zone", str(exc)))
    try:
        values["date"] = parse_date(raw["date"])
    except (ValueError, TypeError) as exc:
        errors.append(("date", str(exc)))

    for name in _FLOAT_FIELDS:
        try:
            v = float(raw[name])
        except (TypeError, ValueError):
            errors.append((name, f"not a number: {raw[name]!r}"))
            continue
        if not math.isfinite(v):
            errors.append((name, "not finite"))
        values[name] = v
    for name in _INT_FIELDS:
        try:
            v = float(raw[name])
        except (TypeError, ValueError):
            errors.append((name, f"not a number: {raw[name]!r}"))
            continue
        if not math.isfinite(v) or v != int(v):
            errors.append((name, f"not an integer: {raw[name]!r}"))
            continue
        values[name] = int(v)

    def bound(name: str, ok: bool, msg: str) -> None:
        if name in values and not ok:
            errors.append((name, msg))

    g = values.get
    bound("relative_humidity", 0.0 <= g("relative_humidity", 0.0) <= 100.0,
          "relative humidity outside [0, 100]")
    bound("wind_speed", g("wind_speed", 0.0) >= 0.0, "negative wind speed")
    bound("wind_direction", 0.0 <= g("wind_direction", 0.0) < 360.0,
          "wind direction outside [0, 360)")
    bound("precipitation_24h", g("precipitation_24h", 0.0) >= 0.0, "negative precipitation")
    bound("snow_height", g("snow_height", 0.0) >= 0.0, "negative snow height")
    bound("observed_dfe", 0 <= g("observed_dfe", 0) <= MAX_CLASS,
          f"DFE class outside [0, {MAX_CLASS}]")
    bound("n_fires", g("n_fires", 0) >= 0, "negative fire count")
    bound("total_intervention_minutes", g("total_intervention_minutes", 0.0) >= 0.0,
          "negative intervention time")
    bound("engines_deployed", g("engines_deployed", 0) >= 0, "negative engine count")
    if errors:
        raise RecordValidationError(errors)

    if values["n_fires"] == 0 and (values["total_intervention_minutes"] != 0
                                   or values["engines_deployed"] != 0):
        raise InconsistentOutcomeError([
            ("n_fires", "zero fires but non-zero intervention minutes or engines"),
        ])
    return DailyZoneRecord(**values)


def in_summer(date: dt.date, months: Iterable[int] = SUMMER_MONTHS) -> bool:
    return date.month in tuple(months)
