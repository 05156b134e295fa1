"""Calendar arithmetic, clock-change normalization and deterministic regressors.

Hourly market data for CET/CEST carries one 23-hour day per spring and one
25-hour day per autumn.  Everything downstream assumes a strict 24-hour day,
so raw series are normalized first.  The module also builds the calendar
dummy blocks (hour of day, hour of week, day of year, smooth annual
harmonics, their interactions and public holidays) that every regression in
the package shares.
"""

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from dateutil.easter import easter

from .errors import DataError

HOURS_PER_DAY = 24

# smooth annual harmonic periods, in days
ANNUAL_PERIOD = 365.24

FAMILY_ORDER = (
    "daily",
    "weekly",
    "annual",
    "smooth_annual",
    "interaction",
    "fixed_holiday",
    "varying_holiday",
)

# weather-driven processes get no week or holiday structure
METEO_FAMILIES = ("daily", "smooth_annual", "interaction")


@dataclass(frozen=True)
class HourStamp:
    """One hour on the normalized 24-hour clock."""

    day: int            # day index from the dataset origin
    hour: int           # 0..23
    weekday: int        # 0=Monday .. 6=Sunday
    day_of_year: int    # 1..365, Feb 29 folded onto day 59
    date: dt.date


def fold_day_of_year(d: dt.date) -> int:
    """Day of year on a 365-day scale; Feb 29 shares slot 59 with Feb 28."""
    doy = d.timetuple().tm_yday
    if d.year % 4 == 0 and (d.year % 100 != 0 or d.year % 400 == 0) and doy >= 60:
        return doy - 1
    return doy


def hourly_stamps(origin: dt.date, n_days: int, first_day: int = 0) -> list[HourStamp]:
    """Stamps for ``n_days`` consecutive days starting ``first_day`` days after origin."""
    out = []
    for d in range(first_day, first_day + n_days):
        date = origin + dt.timedelta(days=d)
        wd = date.weekday()
        doy = fold_day_of_year(date)
        for h in range(HOURS_PER_DAY):
            out.append(HourStamp(day=d, hour=h, weekday=wd, day_of_year=doy, date=date))
    return out


@dataclass
class HourlySeries:
    """DST-normalized hourly observations for one named process."""

    name: str
    origin: dt.datetime
    values: np.ndarray
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size % HOURS_PER_DAY != 0:
            raise DataError(
                f"series {self.name!r}: length {self.values.size} not divisible by 24"
            )

    @property
    def n_days(self) -> int:
        return self.values.size // HOURS_PER_DAY

    def stamps(self) -> list[HourStamp]:
        return hourly_stamps(self.origin.date(), self.n_days)

    def daily(self) -> np.ndarray:
        """Values reshaped to (n_days, 24)."""
        return self.values.reshape(self.n_days, HOURS_PER_DAY)


@dataclass(frozen=True)
class HolidayCalendar:
    """Fixed-date holidays as (month, day, name); varying ones as dated occurrences."""

    fixed: tuple = field(default_factory=tuple)      # (month, day, name)
    varying: tuple = field(default_factory=tuple)    # (date, name)

    def __post_init__(self):
        fixed_md = {(m, d) for m, d, _ in self.fixed}
        for date, name in self.varying:
            if (date.month, date.day) in fixed_md:
                raise DataError(
                    f"holiday {name!r} on {date}: date occurs in both fixed and varying lists"
                )

    def varying_names(self) -> list[str]:
        seen = []
        for _, name in self.varying:
            if name not in seen:
                seen.append(name)
        return seen


GERMAN_FIXED = (
    (1, 1, "new_year"),
    (1, 6, "epiphany"),
    (5, 1, "labour_day"),
    (10, 3, "german_unity"),
    (11, 1, "all_saints"),
    (12, 24, "christmas_eve"),
    (12, 25, "christmas_day"),
    (12, 26, "boxing_day"),
    (12, 31, "new_years_eve"),
)

# offsets from Easter Sunday; weekday is the same every year
GERMAN_EASTER_OFFSETS = (
    (-2, "good_friday"),
    (1, "easter_monday"),
    (39, "ascension"),
    (50, "whit_monday"),
    (60, "corpus_christi"),
)


def german_calendar(years) -> HolidayCalendar:
    """German national plus regional holidays for the given years."""
    varying = []
    for year in sorted(set(years)):
        e = easter(year)
        for off, name in GERMAN_EASTER_OFFSETS:
            varying.append((e + dt.timedelta(days=off), name))
    return HolidayCalendar(fixed=GERMAN_FIXED, varying=tuple(varying))


def load_calendar(path) -> HolidayCalendar:
    """Read a holiday calendar CSV with columns date,name,kind(fixed|varying)."""
    fixed, varying = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            try:
                date = dt.date.fromisoformat(row["date"])
                name = row["name"]
                kind = row["kind"]
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}: bad holiday row {i + 2}: {exc}") from exc
            if kind == "fixed":
                fixed.append((date.month, date.day, name))
            elif kind == "varying":
                varying.append((date, name))
            else:
                raise DataError(f"{path}: row {i + 2}: kind must be fixed|varying, got {kind!r}")
    # fixed entries may repeat across years in the file
    fixed = list(dict.fromkeys(fixed))
    return HolidayCalendar(fixed=tuple(fixed), varying=tuple(varying))


def save_calendar(cal: HolidayCalendar, path, year: int = 2000):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "name", "kind"])
        for m, d, name in cal.fixed:
            w.writerow([dt.date(year, m, d).isoformat(), name, "fixed"])
        for date, name in cal.varying:
            w.writerow([date.isoformat(), name, "varying"])


@dataclass
class RegressorMatrix:
    """Named indicator/basis columns, one row per hour (or per day)."""

    names: list[str]
    values: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def normalize_dst(timestamps, values, name: str = "", units: str = "") -> HourlySeries:
    """Collapse 23/25-hour clock-change days onto a strict 24-hour grid.

    ``timestamps`` are timezone-aware datetimes (ISO-8601 with explicit UTC
    offset); the wall-clock reading is the printed local time.  The missing
    spring hour is filled by linear interpolation of its neighbours, the
    doubled autumn hour is replaced by the arithmetic mean of the pair.

    Raises :class:`DataError` for non-monotone timestamps or for gaps that
    are not clock-change artifacts.
    """
    ts = list(timestamps)
    vals = np.asarray(values, dtype=np.float64)
    if len(ts) != vals.size:
        raise DataError(f"series {name!r}: {len(ts)} timestamps vs {vals.size} values")
    if not ts:
        raise DataError(f"series {name!r}: empty input")
    for t in ts:
        if t.tzinfo is None:
            raise DataError(f"series {name!r}: timestamp {t} has no UTC offset")

    utc = [t.astimezone(dt.timezone.utc) for t in ts]
    step = dt.timedelta(hours=1)
    for i in range(1, len(utc)):
        delta = utc[i] - utc[i - 1]
        if delta <= dt.timedelta(0):
            raise DataError(f"series {name!r}: non-monotone timestamps at {ts[i]}")
        if delta != step:
            raise DataError(
                f"series {name!r}: gap between {ts[i - 1]} and {ts[i]} is not a clock change"
            )

    # wall clock as printed, offset stripped
    wall = [t.replace(tzinfo=None) for t in ts]
    if wall[0].hour != 0:
        raise DataError(f"series {name!r}: first timestamp {ts[0]} is not a midnight hour")
    if wall[-1].hour != 23:
        raise DataError(f"series {name!r}: last timestamp {ts[-1]} is not a 23:00 hour")

    days: dict[dt.date, list] = {}
    for w, v in zip(wall, vals):
        days.setdefault(w.date(), []).append((w.hour, float(v)))

    out = []
    for date in sorted(days):
        entries = days[date]
        hours = [h for h, _ in entries]
        if len(entries) == 24 and hours == list(range(24)):
            out.extend(v for _, v in entries)
            continue
        if len(entries) == 23:
            missing = sorted(set(range(24)) - set(hours))
            if len(missing) != 1 or not 1 <= missing[0] <= 22:
                raise DataError(f"series {name!r}: {date}: gap is not a single interior hour")
            m = missing[0]
            by_hour = dict(entries)
            filled = [by_hour[h] for h in range(24) if h != m]
            day_vals = filled[:m] + [(by_hour[m - 1] + by_hour[m + 1]) / 2.0] + filled[m:]
            out.extend(day_vals)
            continue
        if len(entries) == 25:
            dup = [h for h in set(hours) if hours.count(h) == 2]
            if len(dup) != 1:
                raise DataError(f"series {name!r}: {date}: 25 hours without a single doubled hour")
            d = dup[0]
            pair = [v for h, v in entries if h == d]
            by_hour = {h: v for h, v in entries if h != d}
            by_hour[d] = (pair[0] + pair[1]) / 2.0
            out.extend(by_hour[h] for h in range(24))
            continue
        raise DataError(f"series {name!r}: {date}: {len(entries)} hours cannot be normalized")

    origin = dt.datetime.combine(sorted(days)[0], dt.time(0))
    return HourlySeries(name=name, origin=origin, values=np.array(out), units=units)


def _stamp_arrays(stamps):
    day = np.array([s.day for s in stamps], dtype=np.int64)
    hour = np.array([s.hour for s in stamps], dtype=np.int64)
    weekday = np.array([s.weekday for s in stamps], dtype=np.int64)
    doy = np.array([s.day_of_year for s in stamps], dtype=np.int64)
    month = np.array([s.date.month for s in stamps], dtype=np.int64)
    mday = np.array([s.date.day for s in stamps], dtype=np.int64)
    dates = np.array([s.date.toordinal() for s in stamps], dtype=np.int64)
    return day, hour, weekday, doy, month, mday, dates


def _resolve_families(families):
    if families is None or families == "human":
        return FAMILY_ORDER
    if families in ("meteorological", "meteo"):
        return METEO_FAMILIES
    chosen = tuple(f for f in FAMILY_ORDER if f in set(families))
    unknown = set(families) - set(FAMILY_ORDER)
    if unknown:
        raise ValueError(f"unknown regressor families: {sorted(unknown)}")
    return chosen


def build_hourly_regressors(stamps, cal: HolidayCalendar, families=None) -> RegressorMatrix:
    """Hourly dummy/basis matrix in the fixed family order.

    ``families`` is 'human' (all seven blocks), 'meteorological' (daily,
    smooth annual and their interaction only) or an explicit iterable of
    family names.
    """
    stamps = list(stamps)
    if not stamps:
        raise DataError("no stamps given")
    chosen = _resolve_families(families)
    _, hour, weekday, doy, month, mday, dates = _stamp_arrays(stamps)
    n = len(stamps)

    names: list[str] = []
    cols: list[np.ndarray] = []

    def one_hot(idx, size, prefix, offset=0):
        block = np.zeros((n, size))
        block[np.arange(n), idx - offset] = 1.0
        names.extend(f"{prefix}{k + offset:03d}" for k in range(size))
        cols.append(block)

    # phase anchored to the calendar year
    u = (doy - 1) + hour / 24.0
    sa = np.column_stack([
        np.sin(2 * np.pi * u / ANNUAL_PERIOD),
        np.cos(2 * np.pi * u / ANNUAL_PERIOD),
        np.sin(2 * np.pi * u / (ANNUAL_PERIOD / 2)),
        np.cos(2 * np.pi * u / (ANNUAL_PERIOD / 2)),
    ])
    sa_names = ["sa_sin1", "sa_cos1", "sa_sin2", "sa_cos2"]

    for fam in chosen:
        if fam == "daily":
            one_hot(hour, 24, "daily_")
        elif fam == "weekly":
            one_hot(weekday * 24 + hour, 168, "weekly_")
        elif fam == "annual":
            one_hot(doy, 365, "annual_", offset=1)
        elif fam == "smooth_annual":
            names.extend(sa_names)
            cols.append(sa)
        elif fam == "interaction":
            block = np.zeros((n, 24 * 4))
            rows = np.arange(n)
            for k in range(4):
                block[rows, hour * 4 + k] = sa[:, k]
            names.extend(f"daily_{h:02d}x{s}" for h in range(24) for s in sa_names)
            cols.append(block)
        elif fam == "fixed_holiday":
            for m, d, hname in cal.fixed:
                names.append(f"hfix_{m:02d}{d:02d}_{hname}")
                cols.append(((month == m) & (mday == d)).astype(float)[:, None])
        elif fam == "varying_holiday":
            occurrences: dict[str, set] = {}
            for date, hname in cal.varying:
                occurrences.setdefault(hname, set()).add(date.toordinal())
            for hname in cal.varying_names():
                hits = np.isin(dates, sorted(occurrences[hname]))
                names.append(f"hvar_{hname}")
                cols.append(hits.astype(float)[:, None])

    return RegressorMatrix(names=names, values=np.hstack(cols))


def build_daily_regressors(days) -> RegressorMatrix:
    """Weekday indicator columns, one row per day; accepts dates or weekday ints."""
    days = list(days)
    if not days:
        raise DataError("no days given")
    wd = np.array([d if isinstance(d, (int, np.integer)) else d.weekday() for d in days])
    block = np.zeros((len(days), 7))
    block[np.arange(len(days)), wd] = 1.0
    return RegressorMatrix(names=[f"wd_{k}" for k in range(7)], values=block)
