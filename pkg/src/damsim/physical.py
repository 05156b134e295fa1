"""The hourly physical-market system: estimation and one-step recursion.

Each process (temperature, capacity-adjusted wind/solar, load, per-fuel
generation, aggregate conventional generation) follows a sparse linear
equation on calendar dummies plus up to 360 hourly lags of itself and its
graph neighbours.  Dependencies are either autoregressive (lags 1..360) or
causal autoregressive (lags 0..360, contemporaneous value included); the
declared process order is the contemporaneous evaluation order.
"""

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import lasso, timebase
from ._util import exact_residual
from .errors import DataError, ModelError

MAX_LAG_HOURS = 360
MIN_FIT_DAYS = 375
DAYS_PER_YEAR = 365.0

AUTOREGRESSIVE = "autoregressive"
CAUSAL = "causal-autoregressive"
NO_EDGE = "none"
EDGE_KINDS = (NO_EDGE, AUTOREGRESSIVE, CAUSAL)

METEOROLOGICAL = "meteorological"
HUMAN = "human"


@dataclass(frozen=True)
class ProcessSpec:
    name: str
    klass: str = HUMAN
    nonnegative: bool = True
    capacity_source: str | None = None  # multiply by installed capacity for MWh


@dataclass
class ProcessGraph:
    """Processes in contemporaneous evaluation order plus dependency kinds.

    ``edges[(i, j)]`` gives the kind of the dependency of process i on
    process j.  Causal edges must point from earlier-listed processes to
    later ones, which makes the declared order a valid evaluation order.
    """

    processes: list[ProcessSpec]
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [p.name for p in self.processes]
        if len(set(names)) != len(names):
            raise DataError("duplicate process names")
        idx = {n: k for k, n in enumerate(names)}
        for (i, j), kind in self.edges.items():
            if kind not in EDGE_KINDS:
                raise DataError(f"edge ({i}, {j}): unknown kind {kind!r}")
            if i not in idx or j not in idx:
                raise DataError(f"edge ({i}, {j}) references unknown process")
            if kind == NO_EDGE:
                continue
            if i == j and kind == CAUSAL:
                raise DataError(f"{i}: a process cannot depend on its own current value")
            if self.spec(i).klass == METEOROLOGICAL and self.spec(j).klass == HUMAN:
                raise DataError(
                    f"{i}: meteorological process cannot depend on human-driven {j}"
                )
            if kind == CAUSAL and idx[j] >= idx[i]:
                raise DataError(
                    f"causal edge {j} -> {i} runs against the declared process order"
                )

    def names(self) -> list[str]:
        return [p.name for p in self.processes]

    def spec(self, name: str) -> ProcessSpec:
        for p in self.processes:
            if p.name == name:
                return p
        raise KeyError(name)

    def kind(self, i: str, j: str) -> str:
        return self.edges.get((i, j), NO_EDGE)

    def lag_set(self, i: str, j: str) -> range:
        kind = self.kind(i, j)
        if kind == AUTOREGRESSIVE:
            return range(1, MAX_LAG_HOURS + 1)
        if kind == CAUSAL:
            return range(0, MAX_LAG_HOURS + 1)
        return range(0)

    def families(self, name: str) -> str:
        return "meteorological" if self.spec(name).klass == METEOROLOGICAL else "human"


def default_german_graph(
    fuels=("nuclear", "lignite", "coal", "natural_gas", "pump_storage"),
) -> ProcessGraph:
    """The German/Austrian market structure: weather block, load, fuels, total."""
    meteo = [
        ProcessSpec("temperature", METEOROLOGICAL, nonnegative=False),
        ProcessSpec("wind_ca", METEOROLOGICAL, capacity_source="wind"),
        ProcessSpec("solar_ca", METEOROLOGICAL, capacity_source="solar"),
    ]
    human = [ProcessSpec("load", HUMAN)]
    human += [ProcessSpec(f, HUMAN) for f in fuels]
    human += [ProcessSpec("conv_gen", HUMAN)]
    procs = meteo + human

    edges = {}
    meteo_names = [p.name for p in meteo]
    human_names = [p.name for p in human]
    for i in meteo_names:
        for j in meteo_names:
            edges[(i, j)] = AUTOREGRESSIVE
    for i in human_names:
        for j in human_names:
            edges[(i, j)] = AUTOREGRESSIVE
        for j in meteo_names:
            edges[(i, j)] = CAUSAL
    for f in fuels:
        edges[(f, "load")] = CAUSAL
        edges[("conv_gen", f)] = CAUSAL
    edges[("conv_gen", "load")] = CAUSAL
    return ProcessGraph(processes=procs, edges=edges)


@dataclass
class CapacitySchedule:
    """Piecewise-linear installed capacity per source, GW over calendar time."""

    knots: dict  # source -> (list of dates, list of GW values)

    def __post_init__(self):
        for source, (dates, values) in self.knots.items():
            values = np.asarray(values, dtype=np.float64)
            if (values <= 0).any():
                raise DataError(f"capacity for {source} must be strictly positive")
            if list(dates) != sorted(dates):
                raise DataError(f"capacity knots for {source} are not date-ordered")
            self.knots[source] = (list(dates), values)

    def sources(self):
        return list(self.knots)

    def at(self, source: str, origin: dt.date, n_days: int, first_day: int = 0) -> np.ndarray:
        """Hourly capacity (n_days, 24) for days [first_day, first_day+n_days)."""
        if source not in self.knots:
            raise DataError(f"no capacity schedule for source {source!r}")
        dates, values = self.knots[source]
        xk = np.array([d.toordinal() for d in dates], dtype=np.float64)
        t0 = origin.toordinal() + first_day
        t = t0 + np.arange(n_days)[:, None] + np.arange(24)[None, :] / 24.0
        if t.min() < xk[0] or t.max() > xk[-1]:
            lo = dt.date.fromordinal(int(t0))
            hi = dt.date.fromordinal(int(t0 + n_days - 1))
            raise DataError(
                f"capacity schedule for {source} does not cover {lo}..{hi}"
            )
        return np.interp(t, xk, values)


def capacity_adjust(feed_in: timebase.HourlySeries, schedule: CapacitySchedule,
                    source: str | None = None) -> timebase.HourlySeries:
    """Feed-in divided by installed capacity: MWh per hour over MW installed."""
    source = source or feed_in.name
    cap = schedule.at(source, feed_in.origin.date(), feed_in.n_days).ravel()
    return timebase.HourlySeries(
        name=f"{feed_in.name}_ca", origin=feed_in.origin,
        values=feed_in.values / (cap * 1000.0), units="ratio",
    )


def capacity_restore(adjusted: timebase.HourlySeries, schedule: CapacitySchedule,
                     source: str, name: str | None = None) -> timebase.HourlySeries:
    """Inverse of :func:`capacity_adjust`."""
    cap = schedule.at(source, adjusted.origin.date(), adjusted.n_days).ravel()
    return timebase.HourlySeries(
        name=name or source, origin=adjusted.origin,
        values=adjusted.values * (cap * 1000.0), units="MWh",
    )


def extend_capacity(schedule: CapacitySchedule, horizon_days: int, growth: dict) -> CapacitySchedule:
    """Extend each source linearly by its annual growth over the horizon."""
    knots = {}
    for source, (dates, values) in schedule.knots.items():
        g = float(growth.get(source, 0.0))
        if g < 0:
            raise ValueError(f"growth for {source} must be >= 0")
        end = dates[-1] + dt.timedelta(days=int(horizon_days))
        new_val = values[-1] + g * horizon_days / DAYS_PER_YEAR
        knots[source] = (list(dates) + [end], np.append(values, new_val))
    return CapacitySchedule(knots=knots)


@dataclass
class FittedEquation:
    """One estimated process equation in sparse form."""

    name: str
    intercept: float
    dummy_names: list
    dummy_coefs: np.ndarray            # aligned with dummy_names, zeros kept
    lag_terms: list                    # (driver name, lag hours, coefficient), nonzero only
    lam: float
    bic: float

    def n_active(self) -> int:
        return int(np.count_nonzero(self.dummy_coefs)) + len(self.lag_terms)


@dataclass
class PhysicalModel:
    graph: ProcessGraph
    calendar: timebase.HolidayCalendar
    origin: dt.datetime
    n_days: int
    equations: dict                    # name -> FittedEquation
    residual_archive: np.ndarray       # (archive days, n processes, 24), day 0 = archive_day0
    archive_day0: int
    failed: dict = field(default_factory=dict)


def _lag_block(values: np.ndarray, lags, t0: int, n_rows: int) -> np.ndarray:
    """Columns values[t0 - k + t] for t in [0, n_rows), one column per lag k."""
    win = np.lib.stride_tricks.sliding_window_view(values, MAX_LAG_HOURS + 1)
    rows = win[t0 - MAX_LAG_HOURS : t0 - MAX_LAG_HOURS + n_rows]
    return rows[:, MAX_LAG_HOURS - np.asarray(list(lags))]


def physical_design(data: dict, graph: ProcessGraph, cal, target: str) -> lasso.DesignProblem:
    """Assemble the estimation problem for one process equation.

    Rows cover hours [360, T); columns are the class-appropriate dummy
    families followed by the lag columns allowed by the graph, in declared
    process order.
    """
    series = data[target]
    t_total = series.values.size
    n_rows = t_total - MAX_LAG_HOURS
    stamps = timebase.hourly_stamps(
        series.origin.date(), n_rows // 24, first_day=MAX_LAG_HOURS // 24
    )
    dummies = timebase.build_hourly_regressors(stamps, cal, graph.families(target))

    blocks = [dummies.values]
    names = list(dummies.names)
    for proc in graph.names():
        lags = graph.lag_set(target, proc)
        if not len(lags):
            continue
        blocks.append(_lag_block(data[proc].values, lags, MAX_LAG_HOURS, n_rows))
        names.extend(f"lag:{proc}:{k:03d}" for k in lags)
    design = np.hstack(blocks)
    return lasso.DesignProblem(
        response=series.values[MAX_LAG_HOURS:].copy(), design=design, column_names=names
    )


def _equation_from_fit(name, fit, names, graph: ProcessGraph) -> FittedEquation:
    lag_terms = []
    dummy_names, dummy_coefs = [], []
    order = {n: k for k, n in enumerate(graph.names())}
    for col, coef in zip(names, fit.coefficients):
        if col.startswith("lag:"):
            if coef != 0.0:
                _, proc, k = col.split(":")
                lag_terms.append((proc, int(k), float(coef)))
        else:
            dummy_names.append(col)
            dummy_coefs.append(float(coef))
    lag_terms.sort(key=lambda t: (order[t[0]], t[1]))
    return FittedEquation(
        name=name, intercept=float(fit.intercept), dummy_names=dummy_names,
        dummy_coefs=np.array(dummy_coefs), lag_terms=lag_terms,
        lam=float(fit.lam), bic=float(fit.bic),
    )


def equation_deterministic(eq: FittedEquation, cal, origin: dt.date,
                           first_day: int, n_days: int,
                           dummy_matrix: np.ndarray | None = None) -> np.ndarray:
    """Intercept plus dummy contribution per hour of the window.

    Accumulated column by column over the nonzero coefficients so the float
    result does not depend on the window length (replay exactness).
    """
    if dummy_matrix is None:
        stamps = timebase.hourly_stamps(origin, n_days, first_day=first_day)
        fams = _families_from_names(eq.dummy_names)
        dummy_matrix = timebase.build_hourly_regressors(stamps, cal, fams).values
    if dummy_matrix.shape[1] != eq.dummy_coefs.size:
        raise ModelError(
            f"{eq.name}: dummy matrix has {dummy_matrix.shape[1]} columns, "
            f"equation stores {eq.dummy_coefs.size}"
        )
    det = np.full(dummy_matrix.shape[0], eq.intercept)
    for j in np.flatnonzero(eq.dummy_coefs):
        det += eq.dummy_coefs[j] * dummy_matrix[:, j]
    return det


def _families_from_names(names) -> tuple:
    fams = []
    for fam, prefix in (
        ("daily", "daily_0"), ("weekly", "weekly_"), ("annual", "annual_"),
        ("smooth_annual", "sa_"), ("interaction", "daily_00x"),
        ("fixed_holiday", "hfix_"), ("varying_holiday", "hvar_"),
    ):
        if any(n.startswith(prefix) for n in names):
            fams.append(fam)
    # the daily block prefix also matches interaction names; fix the order
    out = [f for f in timebase.FAMILY_ORDER if f in fams]
    return tuple(out)


def equation_lag_contribution(eq: FittedEquation, data: dict, t0: int, n_rows: int,
                              base: np.ndarray) -> np.ndarray:
    """base plus all lag terms, accumulated in stored term order.

    The accumulation order matches the simulation kernel exactly, so
    residuals computed against this reproduce the series on replay.
    """
    acc = base.copy()
    for proc, k, coef in eq.lag_terms:
        acc += coef * data[proc].values[t0 - k : t0 - k + n_rows]
    return acc


def fit_physical(data, graph: ProcessGraph, cal: timebase.HolidayCalendar,
                 grid=None, bic_patience: int | None = 15,
                 continue_on_error: bool = False) -> PhysicalModel:
    """Estimate every process equation by the BIC-tuned lasso path.

    ``data`` maps process names to HourlySeries on a common span
    (capacity-adjusted where applicable).  Residuals are archived as daily
    24-vectors starting at day 15 (the first day with a full 360-hour lag
    window).
    """
    data = dict(data)
    missing = [n for n in graph.names() if n not in data]
    if missing:
        raise DataError(f"no series for processes: {missing}")
    spans = {(data[n].origin, data[n].n_days) for n in graph.names()}
    if len(spans) != 1:
        raise DataError("all series must share origin and length")
    origin, n_days = spans.pop()
    if n_days < MIN_FIT_DAYS:
        raise DataError(
            f"{n_days} days of data; need at least {MIN_FIT_DAYS} "
            f"(360-hour memory plus margin), short by {MIN_FIT_DAYS - n_days}"
        )

    names = graph.names()
    n_rows = n_days * 24 - MAX_LAG_HOURS
    archive = np.empty((n_days - MAX_LAG_HOURS // 24, len(names), 24))
    equations, failed = {}, {}

    # dummy matrices are shared within a class
    stamps = timebase.hourly_stamps(origin.date(), n_rows // 24, first_day=MAX_LAG_HOURS // 24)
    dummy_cache = {}
    for fams in {graph.families(n) for n in names}:
        dummy_cache[fams] = timebase.build_hourly_regressors(stamps, cal, fams)

    for pi, name in enumerate(names):
        problem = physical_design(data, graph, cal, name)
        try:
            fit = lasso.fit_path(problem, grid=grid, bic_patience=bic_patience, own_design=True)
        except ModelError as exc:
            if not continue_on_error:
                raise
            failed[name] = str(exc)
            archive[:, pi, :] = 0.0
            continue
        eq = _equation_from_fit(name, fit, problem.column_names, graph)
        equations[name] = eq
        det = equation_deterministic(
            eq, cal, origin.date(), 15, n_rows // 24,
            dummy_matrix=dummy_cache[graph.families(name)].values,
        )
        fitted = equation_lag_contribution(eq, data, MAX_LAG_HOURS, n_rows, det)
        resid = exact_residual(data[name].values[MAX_LAG_HOURS:], fitted)
        archive[:, pi, :] = resid.reshape(-1, 24)

    if failed and not continue_on_error:
        raise ModelError(f"estimation failed for {sorted(failed)}")
    return PhysicalModel(
        graph=graph, calendar=cal, origin=origin, n_days=n_days,
        equations=equations, residual_archive=archive,
        archive_day0=MAX_LAG_HOURS // 24, failed=failed,
    )


def compile_physical(model: PhysicalModel, first_day: int, n_days: int):
    """Flatten the model into the kernel's array layout for a simulation window.

    Returns (det (D, n_days*24), ptr, proc, lag, coef, nonneg) with processes
    in declared graph order.
    """
    names = model.graph.names()
    index = {n: k for k, n in enumerate(names)}
    det = np.empty((len(names), n_days * 24))
    ptr = np.zeros(len(names) + 1, dtype=np.int64)
    procs, lags, coefs = [], [], []

    stamps = timebase.hourly_stamps(model.origin.date(), n_days, first_day=first_day)
    dummy_cache = {
        fams: timebase.build_hourly_regressors(stamps, model.calendar, fams)
        for fams in {model.graph.families(n) for n in names}
    }
    for pi, name in enumerate(names):
        eq = model.equations[name]
        det[pi] = equation_deterministic(
            eq, model.calendar, model.origin.date(), first_day, n_days,
            dummy_matrix=dummy_cache[model.graph.families(name)].values,
        )
        for proc, k, coef in eq.lag_terms:
            procs.append(index[proc])
            lags.append(k)
            coefs.append(coef)
        ptr[pi + 1] = len(procs)

    nonneg = np.array([model.graph.spec(n).nonnegative for n in names])
    return (
        det,
        ptr,
        np.array(procs, dtype=np.int64),
        np.array(lags, dtype=np.int64),
        np.array(coefs, dtype=np.float64),
        nonneg,
    )


def step_physical(model: PhysicalModel, history: dict, shock, day_stamps,
                  n_days: int = 1, draw_idx=None, shock_scale: float = 1.0) -> dict:
    """Advance the system ``n_days`` days from a rolling history.

    ``history`` maps process names to trailing hourly values (at least 360
    hours).  ``shock`` maps names to 24-vector residual draws for a single
    day; for multi-day stepping pass a full (A, D, 24) archive plus
    ``draw_idx`` selecting the day vector to apply at each step.  Returns
    per-process simulated values, shape (n_days * 24,).
    """
    from . import kernels

    names = model.graph.names()
    hist_len = min(len(history[n]) for n in names)
    if hist_len < MAX_LAG_HOURS:
        raise ModelError(f"history covers {hist_len} hours; need {MAX_LAG_HOURS}")
    first_day = day_stamps[0].day
    det, ptr, procs, lags, coefs, nonneg = compile_physical(model, first_day, n_days)

    hist = np.stack([np.asarray(history[n], dtype=np.float64)[-hist_len:] for n in names])
    if isinstance(shock, dict):
        arch = np.stack([np.asarray(shock[n], dtype=np.float64) for n in names])[None]
    else:
        arch = np.asarray(shock, dtype=np.float64)
        if arch.ndim == 2:
            arch = arch[None]
    if draw_idx is None:
        draw_idx = np.zeros(n_days, dtype=np.int64)

    i0 = np.zeros(0, dtype=np.int64)
    empty_eq = (
        np.zeros((0, 24, 7)), np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int8),
        i0, i0, i0, np.zeros(0), np.zeros((0, 36, 24)), np.zeros((arch.shape[0], 0, 24)),
    )
    price_out = np.zeros((n_days, 24), dtype=np.uint16)
    phys_out = np.empty((len(names), n_days, 24))
    z_out = np.zeros((0, n_days, 24))
    weekdays = np.array([s.weekday for s in day_stamps[::24]], dtype=np.int64)
    status, _ = kernels.simulate_path(
        det, ptr, procs, lags, coefs, nonneg, hist, arch,
        i0, np.zeros((0, 36, 24)), np.zeros((0, n_days, 24)),
        *empty_eq, *empty_eq,
        i0, i0, np.zeros((0, 1)), np.zeros((0, 1)),
        np.asarray(draw_idx, dtype=np.int64), weekdays,
        float(shock_scale), price_out,
        1, phys_out, z_out, z_out,
    )
    if status >= 0:
        raise ModelError(f"non-finite value while stepping the physical system at day {status}")
    return {n: phys_out[k].ravel() for k, n in enumerate(names)}
