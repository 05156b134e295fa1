"""Dataset ingestion and the synthetic ground-truth market generator.

The generator simulates a declared truth system forward: an hourly linear
physical block, planned processes formed from the (future) truth values,
bid-side volume components spread over the price grid by log-normal
densities, and clearing prices computed with the curves module.  Everything
is deterministic given the seed.  Generated datasets round-trip exactly
through the CSV file formats.
"""

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import curves as curves_mod
from . import physical as physical_mod
from . import timebase
from .errors import DataError
from .expectations import DayHourPanel
from .timebase import HourlySeries

BURN_DAYS = 90


@dataclass
class CurveSet:
    """Historical auction curves in sparse columnar form."""

    origin: dt.date
    n_days: int
    day: np.ndarray
    hour: np.ndarray
    side: np.ndarray     # 0 = supply, 1 = demand
    tick: np.ndarray
    volume: np.ndarray

    SIDE_CODE = {"supply": 0, "demand": 1}

    def mass_at(self, day: int, hour: int, side: str) -> np.ndarray:
        code = self.SIDE_CODE[side]
        sel = (self.day == day) & (self.hour == hour) & (self.side == code)
        mass = np.zeros(curves_mod.N_TICKS)
        np.add.at(mass, self.tick[sel], self.volume[sel])
        return mass

    def curve_at(self, day: int, hour: int, side: str) -> curves_mod.StepCurve:
        return curves_mod.curve_from_mass(self.mass_at(day, hour, side), side)

    def iter_curves(self, side: str):
        """Yield StepCurve objects auction by auction, day-major."""
        code = self.SIDE_CODE[side]
        sel = self.side == code
        order = np.lexsort((self.tick[sel], self.hour[sel], self.day[sel]))
        day, hour = self.day[sel][order], self.hour[sel][order]
        tick, volume = self.tick[sel][order], self.volume[sel][order]
        bounds = np.flatnonzero(np.diff(day * 24 + hour)) + 1
        for chunk in np.split(np.arange(day.size), bounds):
            mass = np.zeros(curves_mod.N_TICKS)
            np.add.at(mass, tick[chunk], volume[chunk])
            yield curves_mod.curve_from_mass(mass, side)

    def mean_mass(self, side: str) -> np.ndarray:
        """Mean bid volume per tick over all auctions of one side."""
        code = self.SIDE_CODE[side]
        sel = self.side == code
        mass = np.zeros(curves_mod.N_TICKS)
        np.add.at(mass, self.tick[sel], self.volume[sel])
        return mass / (self.n_days * 24)

    def group_volume_panels(self, scheme: curves_mod.GroupScheme, prefix: str) -> dict:
        """Aggregate bid mass per price group into DayHourPanel objects."""
        code = self.SIDE_CODE[scheme.side]
        sel = self.side == code
        to_group = scheme.tick_to_group()
        g = to_group[self.tick[sel]]
        flat = (self.day[sel] * 24 + self.hour[sel]) * scheme.n_groups + g
        sums = np.bincount(flat, weights=self.volume[sel],
                           minlength=self.n_days * 24 * scheme.n_groups)
        panels = sums.reshape(self.n_days, 24, scheme.n_groups)
        return {
            f"{prefix}{k:02d}": DayHourPanel(
                name=f"{prefix}{k:02d}", origin=self.origin, values=panels[:, :, k].copy()
            )
            for k in range(scheme.n_groups)
        }


@dataclass
class Dataset:
    """Everything one estimation run consumes, on a common daily window."""

    origin: dt.date
    n_days: int
    physical: dict                  # name -> HourlySeries (absolute units)
    planned: dict                   # name -> DayHourPanel
    curves: CurveSet
    capacity: physical_mod.CapacitySchedule
    calendar: timebase.HolidayCalendar
    prices: HourlySeries | None = None
    seed: int | None = None
    units: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# synthetic truth system


@dataclass(frozen=True)
class TruthProcess:
    name: str
    klass: str = physical_mod.HUMAN
    nonnegative: bool = True
    capacity_source: str | None = None
    intercept: float = 0.0
    lag_terms: tuple = ()           # (source name, lag hours, coefficient)
    sigma: float = 1.0
    hour_shape: tuple = ()          # optional 24 deterministic hourly offsets
    weekday_shape: tuple = ()       # optional 7 offsets, human class only
    annual_amp: float = 0.0         # amplitude on sin(2 pi doy / 365.24)


@dataclass(frozen=True)
class TruthPlanned:
    name: str
    source: str
    coef_now: float = 0.9
    coef_prev: float = 0.0
    intercept: float = 0.0
    sigma: float = 1.0


@dataclass(frozen=True)
class TruthComponent:
    """A bid-volume component with a fixed log-normal price density."""

    name: str
    side: str
    price_lo: float                 # lower anchor of the density, EUR/MWh
    price_center: float             # density median, EUR/MWh
    price_spread: float             # log-space sigma
    intercept: float = 0.0
    drivers: tuple = ()             # (planned name, coefficient), applied at day lag 0
    ar: float = 0.0                 # own previous-day coefficient, same hour
    sigma: float = 1.0
    from_top: bool = False          # anchor the density below price_lo instead


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    origin: dt.date
    processes: tuple
    planned: tuple
    components: tuple
    capacity_start: dict            # source -> GW at origin minus burn
    capacity_growth: dict           # source -> GW per year
    group_target: float = 1000.0
    edges: tuple = ()               # modeling-graph edges ((i, j, kind), ...)

    def graph(self) -> physical_mod.ProcessGraph:
        procs = [
            physical_mod.ProcessSpec(
                p.name, p.klass, nonnegative=p.nonnegative,
                capacity_source=p.capacity_source,
            )
            for p in self.processes
        ]
        edges = {(i, j): kind for i, j, kind in self.edges}
        return physical_mod.ProcessGraph(processes=procs, edges=edges)

    def capacity_schedule(self, n_days: int, margin_days: int = 30) -> physical_mod.CapacitySchedule:
        start = self.origin - dt.timedelta(days=BURN_DAYS)
        end = self.origin + dt.timedelta(days=int(n_days) + margin_days)
        span_years = (end - start).days / physical_mod.DAYS_PER_YEAR
        knots = {}
        for source, gw in self.capacity_start.items():
            growth = self.capacity_growth.get(source, 0.0)
            knots[source] = ([start, end], np.array([gw, gw + growth * span_years]))
        return physical_mod.CapacitySchedule(knots=knots)


def density_support(comp: TruthComponent, n_points: int = 41) -> tuple:
    """Quantized log-normal price density: (ticks, weights summing to 1)."""
    z = np.linspace(-3.0, 3.0, n_points)
    offsets = np.exp(np.log(comp.price_center - comp.price_lo if not comp.from_top
                            else comp.price_lo - comp.price_center) + comp.price_spread * z)
    prices = comp.price_lo - offsets if comp.from_top else comp.price_lo + offsets
    weights = np.exp(-0.5 * z * z)
    ok = (prices >= curves_mod.PRICE_MIN) & (prices <= curves_mod.PRICE_MAX)
    ticks = np.array([curves_mod.price_to_tick(p) for p in prices[ok]])
    weights = weights[ok]
    # merge duplicated ticks after snapping
    uniq, inv = np.unique(ticks, return_inverse=True)
    w = np.bincount(inv, weights=weights)
    return uniq.astype(np.int64), w / w.sum()


def _truth_physical(spec: SyntheticSpec, n_days: int, rng) -> dict:
    """Simulate the physical truth for burn plus n_days; returns full arrays."""
    names = [p.name for p in spec.processes]
    idx = {n: k for k, n in enumerate(names)}
    total_h = (BURN_DAYS + n_days) * 24
    max_lag = max((k for p in spec.processes for _, k, _ in p.lag_terms), default=1)
    vals = np.zeros((len(names), max_lag + total_h))

    det = np.empty((len(names), total_h))
    start = spec.origin - dt.timedelta(days=BURN_DAYS)
    stamps = timebase.hourly_stamps(start, BURN_DAYS + n_days)
    hour = np.array([s.hour for s in stamps])
    wd = np.array([s.weekday for s in stamps])
    doy = np.array([s.day_of_year for s in stamps])
    for p in spec.processes:
        base = np.full(total_h, p.intercept)
        if p.hour_shape:
            base += np.asarray(p.hour_shape)[hour]
        if p.weekday_shape:
            base += np.asarray(p.weekday_shape)[wd]
        if p.annual_amp:
            base += p.annual_amp * np.sin(2 * np.pi * (doy - 1 + hour / 24.0) / timebase.ANNUAL_PERIOD)
        det[idx[p.name]] = base
        # lag window warm start at the deterministic level
        vals[idx[p.name], :max_lag] = p.intercept

    noise = np.stack([p.sigma * rng.standard_normal(total_h) for p in spec.processes])
    for t in range(total_h):
        for p in spec.processes:
            i = idx[p.name]
            acc = det[i, t]
            for src, k, coef in p.lag_terms:
                acc += coef * vals[idx[src], max_lag + t - k]
            acc += noise[i, t]
            if p.nonnegative and acc < 0.0:
                acc = 0.0
            vals[i, max_lag + t] = acc
    return {n: vals[idx[n], max_lag:] for n in names}


def generate_synthetic(spec: SyntheticSpec, n_days: int) -> Dataset:
    """Simulate the full declared truth system and package it as a Dataset."""
    rng = np.random.default_rng(spec.seed)
    capacity = spec.capacity_schedule(n_days)
    raw = _truth_physical(spec, n_days, rng)

    burn_start = spec.origin - dt.timedelta(days=BURN_DAYS)
    # absolute series: capacity back-transformation where declared
    absolute = {}
    for p in spec.processes:
        series = raw[p.name]
        if p.capacity_source:
            cap = capacity.at(p.capacity_source, burn_start, BURN_DAYS + n_days).ravel()
            absolute[p.name] = series * (cap * 1000.0)
        else:
            absolute[p.name] = series

    # planned processes conditioned on the realized truth
    n_hours = 24
    planned_full = {}
    for pl in spec.planned:
        y = absolute[pl.source].reshape(-1, n_hours)
        z = np.empty_like(y)
        z[0] = pl.intercept + pl.coef_now * y[0] + pl.coef_prev * y[0]
        z[1:] = pl.intercept + pl.coef_now * y[1:] + pl.coef_prev * y[:-1]
        z += pl.sigma * rng.standard_normal(z.shape)
        planned_full[pl.name] = z

    # bid-volume components, then sparse curves and clearing prices
    comp_vals = {}
    for comp in spec.components:
        mean0 = comp.intercept / (1.0 - comp.ar) if comp.ar < 1.0 else comp.intercept
        c = np.empty((BURN_DAYS + n_days, n_hours))
        prev = np.full(n_hours, max(mean0, 0.0))
        eps = comp.sigma * rng.standard_normal(c.shape)
        for d in range(BURN_DAYS + n_days):
            acc = comp.intercept + comp.ar * prev + eps[d]
            for pname, coef in comp.drivers:
                acc = acc + coef * planned_full[pname][d]
            acc = np.maximum(acc, 0.0)
            c[d] = acc
            prev = acc
        comp_vals[comp.name] = c[BURN_DAYS:]

    supports = {comp.name: density_support(comp) for comp in spec.components}
    day_col, hour_col, side_col, tick_col, vol_col = [], [], [], [], []
    for comp in spec.components:
        ticks, weights = supports[comp.name]
        vols = comp_vals[comp.name]            # (n_days, 24)
        dd, hh = np.meshgrid(np.arange(n_days), np.arange(n_hours), indexing="ij")
        day_col.append(np.repeat(dd.ravel(), ticks.size))
        hour_col.append(np.repeat(hh.ravel(), ticks.size))
        side_col.append(np.full(n_days * n_hours * ticks.size,
                                CurveSet.SIDE_CODE[comp.side], dtype=np.int8))
        tick_col.append(np.tile(ticks, n_days * n_hours))
        vol_col.append((vols.ravel()[:, None] * weights[None, :]).ravel())
    curveset = CurveSet(
        origin=spec.origin, n_days=n_days,
        day=np.concatenate(day_col), hour=np.concatenate(hour_col),
        side=np.concatenate(side_col), tick=np.concatenate(tick_col),
        volume=np.concatenate(vol_col),
    )

    # clearing prices through the market module
    prices = np.empty(n_days * n_hours)
    sup_names = [c.name for c in spec.components if c.side == "supply"]
    dem_names = [c.name for c in spec.components if c.side == "demand"]
    smass_base = {n: np.zeros(curves_mod.N_TICKS) for n in sup_names + dem_names}
    for n in sup_names + dem_names:
        t, w = supports[n]
        smass_base[n][t] = w
    for d in range(n_days):
        for h in range(n_hours):
            smass = np.zeros(curves_mod.N_TICKS)
            for n in sup_names:
                smass += comp_vals[n][d, h] * smass_base[n]
            dmass = np.zeros(curves_mod.N_TICKS)
            for n in dem_names:
                dmass += comp_vals[n][d, h] * smass_base[n]
            res = curves_mod.clear(
                curves_mod.curve_from_mass(smass, "supply"),
                curves_mod.curve_from_mass(dmass, "demand"),
            )
            prices[d * 24 + h] = res.price

    origin_dt = dt.datetime.combine(spec.origin, dt.time(0))
    keep = slice(BURN_DAYS * 24, None)
    years = range(burn_start.year, spec.origin.year + (n_days // 365) + 6)
    ds = Dataset(
        origin=spec.origin, n_days=n_days,
        physical={
            p.name: HourlySeries(p.name, origin_dt, absolute[p.name][keep],
                                 units="MWh" if p.capacity_source else "unit")
            for p in spec.processes
        },
        planned={
            pl.name: DayHourPanel(pl.name, spec.origin, planned_full[pl.name][BURN_DAYS:])
            for pl in spec.planned
        },
        curves=curveset,
        capacity=capacity,
        calendar=timebase.german_calendar(years),
        prices=HourlySeries("price", origin_dt, prices, units="EUR/MWh"),
        seed=spec.seed,
        units={p.name: "MWh" if p.capacity_source else "unit" for p in spec.processes},
    )
    return ds


# ---------------------------------------------------------------------------
# preset truth systems


def linear_physical_spec(seed: int, origin: dt.date = dt.date(2013, 1, 7)) -> SyntheticSpec:
    """Pure sparse linear 4-process system; the coefficient-recovery oracle."""
    a, c = physical_mod.AUTOREGRESSIVE, physical_mod.CAUSAL
    processes = (
        TruthProcess("weather", physical_mod.METEOROLOGICAL, nonnegative=False,
                     intercept=1.5, lag_terms=(("weather", 1, 0.70),), sigma=1.2),
        TruthProcess("breeze", physical_mod.METEOROLOGICAL, nonnegative=False,
                     intercept=0.8, lag_terms=(("breeze", 1, 0.55), ("weather", 2, 0.20)),
                     sigma=1.0),
        TruthProcess("load", physical_mod.HUMAN, nonnegative=False,
                     intercept=10.0,
                     lag_terms=(("load", 24, 0.55), ("load", 1, 0.25), ("weather", 0, -0.30)),
                     sigma=1.0),
        TruthProcess("gen", physical_mod.HUMAN, nonnegative=False,
                     intercept=4.0,
                     lag_terms=(("gen", 1, 0.50), ("load", 0, 0.40), ("breeze", 0, -0.60)),
                     sigma=1.0),
    )
    edges = []
    for i in ("weather", "breeze"):
        for j in ("weather", "breeze"):
            edges.append((i, j, a))
    for i in ("load", "gen"):
        for j in ("load", "gen"):
            edges.append((i, j, a))
        for j in ("weather", "breeze"):
            edges.append((i, j, c))
    edges.remove(("load", "gen", a))
    edges.append(("gen", "load", c))
    edges.remove(("gen", "load", a))
    return SyntheticSpec(
        seed=seed, origin=origin, processes=processes, planned=(), components=(),
        capacity_start={}, capacity_growth={}, edges=tuple(edges),
    )


def market_spec(seed: int, origin: dt.date = dt.date(2013, 1, 7),
                group_target: float = 1000.0) -> SyntheticSpec:
    """Full synthetic market: 4 physical processes, 2 planned, 4 bid components."""
    a, c = physical_mod.AUTOREGRESSIVE, physical_mod.CAUSAL
    night_dip = tuple(-1.2 if h < 6 else (1.0 if 8 <= h <= 19 else 0.0) for h in range(24))
    weekend = (0.0, 0.0, 0.0, 0.0, 0.0, -2.5, -3.5)
    processes = (
        TruthProcess("weather", physical_mod.METEOROLOGICAL, nonnegative=False,
                     intercept=2.4, lag_terms=(("weather", 1, 0.70),), sigma=1.1,
                     annual_amp=-1.0),
        TruthProcess("wind_ca", physical_mod.METEOROLOGICAL, capacity_source="wind",
                     intercept=0.045,
                     lag_terms=(("wind_ca", 1, 0.62), ("wind_ca", 2, 0.20)),
                     sigma=0.016, annual_amp=0.004),
        TruthProcess("load", physical_mod.HUMAN,
                     intercept=9.0,
                     lag_terms=(("load", 24, 0.50), ("load", 1, 0.26), ("weather", 0, -0.22)),
                     sigma=0.7, hour_shape=night_dip, weekday_shape=weekend),
        TruthProcess("gen", physical_mod.HUMAN,
                     intercept=6.0,
                     lag_terms=(("gen", 1, 0.45), ("load", 0, 0.55), ("wind_ca", 0, -18.0)),
                     sigma=0.7),
    )
    planned = (
        TruthPlanned("exp_wind", "wind_ca", coef_now=0.82, coef_prev=0.10,
                     intercept=400.0, sigma=260.0),
        TruthPlanned("exp_gen", "gen", coef_now=0.88, coef_prev=0.0,
                     intercept=2.5, sigma=0.9),
    )
    components = (
        TruthComponent("renewable_sale", "supply", price_lo=-500.0, price_center=-440.0,
                       price_spread=0.75, intercept=380.0,
                       drivers=(("exp_wind", 0.41),), ar=0.10, sigma=160.0),
        TruthComponent("conventional_sale", "supply", price_lo=0.0, price_center=42.0,
                       price_spread=0.60, intercept=540.0,
                       drivers=(("exp_gen", 52.0),), ar=0.18, sigma=170.0),
        TruthComponent("inelastic_purchase", "demand", price_lo=3000.0, price_center=2400.0,
                       price_spread=0.35, intercept=2700.0,
                       drivers=(("exp_gen", 28.0),), ar=0.22, sigma=180.0, from_top=True),
        TruthComponent("flexible_purchase", "demand", price_lo=0.0, price_center=38.0,
                       price_spread=0.55, intercept=700.0,
                       drivers=(), ar=0.25, sigma=120.0),
    )
    edges = []
    for i in ("weather", "wind_ca"):
        for j in ("weather", "wind_ca"):
            edges.append((i, j, a))
    for i in ("load", "gen"):
        for j in ("weather", "wind_ca"):
            edges.append((i, j, c))
    edges += [("load", "load", a), ("gen", "gen", a), ("gen", "load", c), ("load", "gen", a)]
    return SyntheticSpec(
        seed=seed, origin=origin, processes=processes, planned=planned,
        components=components,
        capacity_start={"wind": 38.0}, capacity_growth={"wind": 3.25},
        group_target=group_target, edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# file formats

CET = dt.timezone(dt.timedelta(hours=1))


def _hourly_timestamps(origin: dt.date, n_days: int) -> list:
    base = dt.datetime.combine(origin, dt.time(0), tzinfo=CET)
    return [(base + dt.timedelta(hours=h)).isoformat() for h in range(n_days * 24)]


def save_dataset(ds: Dataset, out_dir) -> Path:
    """Write all CSV files plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"physical": {}}

    stamps = _hourly_timestamps(ds.origin, ds.n_days)
    for name, series in ds.physical.items():
        fname = f"physical_{name}.csv"
        pd.DataFrame({"timestamp": stamps, "value": series.values}).to_csv(
            out / fname, index=False
        )
        files["physical"][name] = fname

    dates = [(ds.origin + dt.timedelta(days=d)).isoformat() for d in range(ds.n_days)]
    rows = []
    for name, panel in ds.planned.items():
        frame = pd.DataFrame({
            "date": np.repeat(dates, 24),
            "hour": np.tile(np.arange(24), ds.n_days),
            "series": name,
            "value": panel.values.ravel(),
        })
        rows.append(frame)
    pd.concat(rows, ignore_index=True).to_csv(out / "planned.csv", index=False)
    files["planned"] = "planned.csv"

    cs = ds.curves
    date_arr = np.asarray(dates)[cs.day]
    pd.DataFrame({
        "auction_date": date_arr,
        "hour": cs.hour,
        "side": np.where(cs.side == 0, "supply", "demand"),
        "price": [f"{p:.1f}" for p in np.asarray(curves_mod.tick_to_price(cs.tick))],
        "volume": cs.volume,
    }).to_csv(out / "curves.csv", index=False)
    files["curves"] = "curves.csv"

    cap_rows = []
    for source, (kdates, kvals) in ds.capacity.knots.items():
        for kd, kv in zip(kdates, kvals):
            cap_rows.append({"date": kd.isoformat(), "source": source,
                             "installed_capacity_gw": kv})
    pd.DataFrame(cap_rows).to_csv(out / "capacity.csv", index=False)
    files["capacity"] = "capacity.csv"

    if ds.prices is not None:
        pd.DataFrame({
            "date": np.repeat(dates, 24),
            "hour": np.tile(np.arange(24), ds.n_days),
            "price": [f"{p:.1f}" for p in ds.prices.values],
        }).to_csv(out / "prices.csv", index=False)
        files["prices"] = "prices.csv"

    timebase.save_calendar(ds.calendar, out / "holidays.csv")
    files["holidays"] = "holidays.csv"

    manifest = {
        "origin": ds.origin.isoformat(),
        "n_days": ds.n_days,
        "seed": ds.seed,
        "units": ds.units,
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _read_hourly_csv(path, name, units, origin, n_days) -> HourlySeries:
    frame = pd.read_csv(path)
    for col in ("timestamp", "value"):
        if col not in frame.columns:
            raise DataError(f"{path}: missing column {col!r}")
    stamps = [dt.datetime.fromisoformat(t) for t in frame["timestamp"]]
    series = timebase.normalize_dst(stamps, frame["value"].to_numpy(), name=name, units=units)
    if series.origin.date() != origin or series.n_days != n_days:
        raise DataError(
            f"{path}: covers {series.origin.date()} + {series.n_days} days, "
            f"manifest declares {origin} + {n_days}"
        )
    return series


def ingest(manifest_path) -> Dataset:
    """Load a dataset from its manifest, normalizing and validating all files."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    base = manifest_path.parent
    origin = dt.date.fromisoformat(manifest["origin"])
    n_days = int(manifest["n_days"])
    units = manifest.get("units", {})
    files = manifest["files"]

    physical = {}
    for name, fname in files["physical"].items():
        physical[name] = _read_hourly_csv(
            base / fname, name, units.get(name, ""), origin, n_days
        )

    frame = pd.read_csv(base / files["planned"])
    planned = {}
    for series_name, grp in frame.groupby("series", sort=False):
        dup = grp.duplicated(subset=["date", "hour"])
        if dup.any():
            row = grp[dup].iloc[0]
            raise DataError(
                f"{files['planned']}: duplicate entry for {series_name} "
                f"at {row['date']} hour {row['hour']}"
            )
        day = np.array([
            (dt.date.fromisoformat(s) - origin).days for s in grp["date"]
        ])
        hour = grp["hour"].to_numpy()
        if day.min() < 0 or day.max() >= n_days or len(grp) != n_days * 24:
            raise DataError(
                f"{files['planned']}: series {series_name} does not cover the "
                f"declared {n_days}-day window"
            )
        values = np.full((n_days, 24), np.nan)
        values[day, hour] = grp["value"].to_numpy()
        if np.isnan(values).any():
            d, h = np.argwhere(np.isnan(values))[0]
            raise DataError(
                f"{files['planned']}: series {series_name} missing day {d} hour {h}"
            )
        planned[series_name] = DayHourPanel(series_name, origin, values)

    frame = pd.read_csv(base / files["curves"])
    day = np.array([(dt.date.fromisoformat(s) - origin).days for s in frame["auction_date"]])
    if day.min() < 0 or day.max() >= n_days:
        raise DataError(f"{files['curves']}: auction dates outside the declared window")
    side_map = frame["side"].map(CurveSet.SIDE_CODE)
    if side_map.isna().any():
        bad = frame["side"][side_map.isna()].iloc[0]
        raise DataError(f"{files['curves']}: unknown side {bad!r}")
    prices = frame["price"].to_numpy(dtype=np.float64)
    if prices.min() < curves_mod.PRICE_MIN or prices.max() > curves_mod.PRICE_MAX:
        raise DataError(f"{files['curves']}: price outside the market grid")
    curveset = CurveSet(
        origin=origin, n_days=n_days,
        day=day, hour=frame["hour"].to_numpy(),
        side=side_map.to_numpy(dtype=np.int8),
        tick=np.round((prices - curves_mod.PRICE_MIN) / curves_mod.TICK).astype(np.int64),
        volume=frame["volume"].to_numpy(dtype=np.float64),
    )

    frame = pd.read_csv(base / files["capacity"])
    knots = {}
    for source, grp in frame.groupby("source", sort=False):
        kdates = [dt.date.fromisoformat(s) for s in grp["date"]]
        knots[source] = (kdates, grp["installed_capacity_gw"].to_numpy(dtype=np.float64))
    capacity = physical_mod.CapacitySchedule(knots=knots)

    prices_series = None
    if "prices" in files:
        frame = pd.read_csv(base / files["prices"])
        if len(frame) != n_days * 24:
            raise DataError(f"{files['prices']}: expected {n_days * 24} rows")
        values = np.full((n_days, 24), np.nan)
        pday = np.array([(dt.date.fromisoformat(s) - origin).days for s in frame["date"]])
        values[pday, frame["hour"].to_numpy()] = frame["price"].to_numpy(dtype=np.float64)
        if np.isnan(values).any():
            raise DataError(f"{files['prices']}: missing hours in the declared window")
        prices_series = HourlySeries(
            "price", dt.datetime.combine(origin, dt.time(0)), values.ravel(), units="EUR/MWh"
        )

    calendar = timebase.load_calendar(base / files["holidays"]) if "holidays" in files \
        else timebase.german_calendar(range(origin.year, origin.year + 6))

    return Dataset(
        origin=origin, n_days=n_days, physical=physical, planned=planned,
        curves=curveset, capacity=capacity, calendar=calendar,
        prices=prices_series, seed=manifest.get("seed"), units=units,
    )


def read_price_csv(path) -> pd.DataFrame:
    """Observed prices: columns date,hour,price."""
    frame = pd.read_csv(path)
    for col in ("date", "hour", "price"):
        if col not in frame.columns:
            raise DataError(f"{path}: missing column {col!r}")
    if not len(frame):
        raise DataError(f"{path}: empty price file")
    return frame
