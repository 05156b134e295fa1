"""Residual-bootstrap ensemble engine and fitted-system plumbing.

Per simulated day, one archive day index is drawn and every residual archive
(physical processes, expectations, bid groups) replays that day's 24-vector,
so cross-process and intraday dependence survive the bootstrap.  Paths are
keyed to (seed, path) through a counter-based Philox stream, making the
ensemble reproducible under any parallel schedule.
"""

import datetime as dt
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import curves as curves_mod
from . import expectations as exp_mod
from . import kernels
from . import physical as phys_mod
from . import timebase
from .errors import DataError, ModelError

HIST_HOURS = exp_mod.LAG_DAYS * 24  # 864: the 36-day panel memory dominates


@dataclass
class SimulationConfig:
    n_paths: int = 10000
    horizon_days: int = 1095
    seed: int = 0
    growth: dict = field(default_factory=dict)      # capacity source -> GW per year
    failure_policy: str = "drop"                    # 'drop' or 'median'
    retain_panels: bool = False
    zero_shocks: bool = False
    parallel: bool = False
    extend_capacity: bool = True

    def __post_init__(self):
        if self.n_paths < 1 or self.horizon_days < 1:
            raise DataError("n_paths and horizon_days must be >= 1")
        if self.failure_policy not in ("drop", "median"):
            raise DataError(f"unknown failure policy {self.failure_policy!r}")


@dataclass
class PathEnsemble:
    """Simulated clearing prices as grid ticks, plus per-path status."""

    price_ticks: np.ndarray          # (n_paths, horizon, 24) uint16
    status: np.ndarray               # (n_paths,) int64; -1 ok, else failing day
    seed: int
    horizon_days: int
    origin: dt.date                  # calendar date of forecast day 0
    clamp_counts: np.ndarray = None  # negative bid volumes clamped per path
    substituted: np.ndarray = None   # paths median-filled under the median policy
    phys_panels: np.ndarray | None = None   # (n_paths, D, horizon, 24) if retained
    z_panels: np.ndarray | None = None
    b_panels: np.ndarray | None = None
    panel_names: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.price_ticks.shape[0]

    @property
    def ok(self) -> np.ndarray:
        return self.status == -1

    def prices(self, only_ok: bool = True) -> np.ndarray:
        """Clearing prices in EUR/MWh, ok paths only by default."""
        ticks = self.price_ticks[self.ok] if only_ok else self.price_ticks
        return ticks.astype(np.float64) / 10.0 + curves_mod.PRICE_MIN


def quantile_panel(ens: PathEnsemble, probs) -> np.ndarray:
    """Nearest-rank empirical quantiles across ok paths, per (day, hour).

    Returns (len(probs), horizon, 24) prices in EUR/MWh.
    """
    probs = np.asarray(list(probs), dtype=np.float64)
    if probs.size == 0 or (probs <= 0).any() or (probs >= 1).any():
        raise DataError("quantile probabilities must lie strictly inside (0, 1)")
    ticks = ens.price_ticks[ens.ok]
    n = ticks.shape[0]
    if n == 0:
        raise DataError("no intact paths in the ensemble")
    ranks = np.ceil(probs * n).astype(np.int64) - 1
    ordered = np.sort(ticks, axis=0)
    return ordered[ranks].astype(np.float64) / 10.0 + curves_mod.PRICE_MIN


@dataclass
class FittedSystem:
    """Everything the engine needs: fitted models, grouping, initial state."""

    physical: phys_mod.PhysicalModel
    planned: exp_mod.ExpectationModel
    bids: exp_mod.ExpectationModel
    schemes: dict                     # side -> GroupScheme
    profiles: dict                    # side -> GroupProfiles
    capacity: phys_mod.CapacitySchedule
    origin: dt.date
    n_days: int
    planned_sources: dict             # planned name -> physical process name
    phys_tail: np.ndarray             # (D, 864) model-scale history
    y_tail: np.ndarray                # (DY, 36, 24) absolute truth panels
    z_tail: np.ndarray                # (DZ, 36, 24)
    b_tail: np.ndarray                # (GB, 36, 24)

    @property
    def bid_names(self) -> list:
        return list(self.bids.targets)


def _model_series(dataset, graph: phys_mod.ProcessGraph) -> dict:
    """Per-process modeling series: capacity-adjusted where declared."""
    out = {}
    for p in graph.processes:
        raw = dataset.physical[p.name]
        if p.capacity_source:
            out[p.name] = phys_mod.capacity_adjust(raw, dataset.capacity, p.capacity_source)
        else:
            out[p.name] = raw
    return out


def _truth_panels(graph, capacity, origin, n_days, model_series, sources) -> dict:
    """Absolute truth panels exactly as the engine rebuilds them.

    For capacity-adjusted processes this is the adjusted series multiplied
    back by installed capacity, the same product the simulation kernel
    evaluates, so archived residuals replay bit for bit.
    """
    out = {}
    for src in sources:
        spec_p = graph.spec(src)
        if spec_p.capacity_source:
            capfac = capacity.at(spec_p.capacity_source, origin, n_days) * 1000.0
            vals = model_series[src].daily() * capfac
        else:
            vals = model_series[src].daily()
        out[src] = exp_mod.DayHourPanel(src, origin, vals)
    return out


def estimate_system(dataset, graph: phys_mod.ProcessGraph, planned_sources: dict,
                    group_target: float | None = None, grid=None,
                    bic_patience: int | None = 15,
                    continue_on_error: bool = False) -> FittedSystem:
    """Fit the physical system, the expectation models and the bid grouping.

    ``planned_sources`` maps each planned panel in the dataset to the
    physical process it anticipates.
    """
    cal = dataset.calendar
    target = group_target if group_target is not None else 1000.0

    model_series = _model_series(dataset, graph)
    physical = phys_mod.fit_physical(
        model_series, graph, cal, grid=grid, bic_patience=bic_patience,
        continue_on_error=continue_on_error,
    )

    # day-ahead expectation equations on absolute truth panels
    true_panels = _truth_panels(
        graph, dataset.capacity, dataset.origin, dataset.n_days, model_series,
        dict.fromkeys(planned_sources.values()),
    )
    planned = exp_mod.fit_expectations(
        true_panels, dataset.planned, pairs=dict(planned_sources),
        grid=grid, bic_patience=bic_patience, continue_on_error=continue_on_error,
    )

    # bid grouping and bid-volume equations
    schemes, profiles, bid_panels = {}, {}, {}
    for side, prefix in (("supply", "s"), ("demand", "d")):
        mean_mass = dataset.curves.mean_mass(side)
        schemes[side] = curves_mod.scheme_from_mean_mass(mean_mass, side, target)
        profiles[side] = curves_mod.profiles_from_mean_mass(mean_mass, schemes[side])
        bid_panels.update(dataset.curves.group_volume_panels(schemes[side], prefix))
    bids = exp_mod.fit_bid_groups(
        dataset.planned, bid_panels, grid=grid, bic_patience=bic_patience,
        continue_on_error=continue_on_error,
    )

    names = graph.names()
    phys_tail = np.stack([model_series[n].values[-HIST_HOURS:] for n in names])
    y_sources = list(dict.fromkeys(planned_sources.values()))
    y_tail = np.stack([true_panels[s].values[-exp_mod.LAG_DAYS:] for s in y_sources])
    z_tail = np.stack(
        [dataset.planned[n].values[-exp_mod.LAG_DAYS:] for n in planned.targets]
    )
    b_tail = np.stack([bid_panels[n].values[-exp_mod.LAG_DAYS:] for n in bids.targets])

    return FittedSystem(
        physical=physical, planned=planned, bids=bids,
        schemes=schemes, profiles=profiles, capacity=dataset.capacity,
        origin=dataset.origin, n_days=dataset.n_days,
        planned_sources=dict(planned_sources),
        phys_tail=phys_tail, y_tail=y_tail, z_tail=z_tail, b_tail=b_tail,
    )


def _aligned_archives(system: FittedSystem):
    """Slice all residual archives onto the common day axis (day >= 36)."""
    p0 = system.physical.archive_day0
    z0 = system.planned.archive_day0
    b0 = system.bids.archive_day0
    day0 = max(p0, z0, b0)
    n = system.n_days - day0
    parch = system.physical.residual_archive[day0 - p0 : day0 - p0 + n]
    zarch = system.planned.residual_archive[day0 - z0 : day0 - z0 + n]
    barch = system.bids.residual_archive[day0 - b0 : day0 - b0 + n]
    return np.ascontiguousarray(parch), np.ascontiguousarray(zarch), np.ascontiguousarray(barch)


def _compiled_blocks(system: FittedSystem, first_day: int, horizon: int,
                     capacity: phys_mod.CapacitySchedule):
    """All kernel arrays for a window of ``horizon`` days starting first_day."""
    graph = system.physical.graph
    names = graph.names()
    det, ptr, procs, lags, coefs, nonneg = phys_mod.compile_physical(
        system.physical, first_day, horizon
    )

    y_sources = list(dict.fromkeys(system.planned_sources.values()))
    proc_index = {n: k for k, n in enumerate(names)}
    ypan_src = np.array([proc_index[s] for s in y_sources], dtype=np.int64)
    capfac = np.ones((len(y_sources), horizon, 24))
    for k, s in enumerate(y_sources):
        cap_src = graph.spec(s).capacity_source
        if cap_src:
            capfac[k] = capacity.at(cap_src, system.origin, horizon, first_day=first_day) * 1000.0

    y_index = {n: k for k, n in enumerate(y_sources)}
    z_index = {n: k for k, n in enumerate(system.planned.targets)}
    b_index = {n: k for k, n in enumerate(system.bids.targets)}
    z_block = exp_mod.compile_expectations(system.planned, y_index, z_index)
    b_block = exp_mod.compile_expectations(system.bids, z_index, b_index)

    sup_names = [f"s{k:02d}" for k in range(system.schemes["supply"].n_groups)]
    dem_names = [f"d{k:02d}" for k in range(system.schemes["demand"].n_groups)]
    sup_idx = np.array([b_index[n] for n in sup_names], dtype=np.int64)
    dem_idx = np.array([b_index[n] for n in dem_names], dtype=np.int64)

    stamps = timebase.hourly_stamps(system.origin, horizon, first_day=first_day)
    weekdays = np.array([s.weekday for s in stamps[::24]], dtype=np.int64)

    return {
        "phys": (det, ptr, procs, lags, coefs, nonneg),
        "ypan_src": ypan_src,
        "capfac": capfac,
        "z_block": z_block,
        "b_block": b_block,
        "sup_idx": sup_idx,
        "dem_idx": dem_idx,
        "sup_prof": np.ascontiguousarray(system.profiles["supply"].cum),
        "dem_prof": np.ascontiguousarray(system.profiles["demand"].cum),
        "weekdays": weekdays,
    }


def draw_day_indices(seed: int, n_paths: int, horizon: int, n_archive: int) -> np.ndarray:
    """One archive day index per (path, day), from per-path Philox streams."""
    out = np.empty((n_paths, horizon), dtype=np.int64)
    root = np.random.Philox(key=seed)
    for p in range(n_paths):
        gen = np.random.Generator(root.jumped(p))
        out[p] = gen.integers(0, n_archive, size=horizon, dtype=np.int64)
    return out


def _median_ticks(ticks: np.ndarray) -> np.ndarray:
    """Lower median over paths, per (day, hour); stays on the tick grid."""
    n = ticks.shape[0]
    return np.partition(ticks, (n - 1) // 2, axis=0)[(n - 1) // 2]


def run_ensemble(system: FittedSystem, cfg: SimulationConfig) -> PathEnsemble:
    """Simulate cfg.n_paths bootstrap paths over cfg.horizon_days days."""
    horizon = cfg.horizon_days
    capacity = system.capacity
    if cfg.extend_capacity:
        capacity = phys_mod.extend_capacity(capacity, horizon + 1, cfg.growth)
    try:
        blocks = _compiled_blocks(system, system.n_days, horizon, capacity)
    except DataError as exc:
        raise DataError(f"horizon of {horizon} days not covered: {exc}") from exc

    parch, zarch, barch = _aligned_archives(system)
    n_archive = parch.shape[0]
    draw_idx = draw_day_indices(cfg.seed, cfg.n_paths, horizon, n_archive)

    price = np.zeros((cfg.n_paths, horizon, 24), dtype=np.uint16)
    status = np.empty(cfg.n_paths, dtype=np.int64)
    clamps = np.zeros(cfg.n_paths, dtype=np.int64)
    retain = 1 if cfg.retain_panels else 0
    n_proc = len(system.physical.graph.names())
    if retain:
        phys_out = np.zeros((cfg.n_paths, n_proc, horizon, 24))
        z_out = np.zeros((cfg.n_paths, len(system.planned.targets), horizon, 24))
        b_out = np.zeros((cfg.n_paths, len(system.bids.targets), horizon, 24))
    else:
        phys_out = np.zeros((1, 1, 1, 1))
        z_out = np.zeros((1, 1, 1, 1))
        b_out = np.zeros((1, 1, 1, 1))

    runner = kernels.simulate_many_parallel if cfg.parallel else kernels.simulate_many_serial
    runner(
        *blocks["phys"], system.phys_tail, parch,
        blocks["ypan_src"], system.y_tail, blocks["capfac"],
        *blocks["z_block"], system.z_tail, zarch,
        *blocks["b_block"], system.b_tail, barch,
        blocks["sup_idx"], blocks["dem_idx"], blocks["sup_prof"], blocks["dem_prof"],
        draw_idx, blocks["weekdays"], 0.0 if cfg.zero_shocks else 1.0,
        price, status, clamps,
        retain, phys_out, z_out, b_out,
    )

    substituted = np.zeros(cfg.n_paths, dtype=bool)
    if cfg.failure_policy == "median" and (status != -1).any():
        ok = status == -1
        if not ok.any():
            raise ModelError("every path failed; nothing to substitute from")
        med = _median_ticks(price[ok])
        for p in np.flatnonzero(~ok):
            price[p, status[p]:] = med[status[p]:]
            substituted[p] = True
        status = np.where(ok, status, -1)

    return PathEnsemble(
        price_ticks=price, status=status, seed=cfg.seed, horizon_days=horizon,
        origin=system.origin + dt.timedelta(days=system.n_days),
        clamp_counts=clamps, substituted=substituted,
        phys_panels=phys_out if retain else None,
        z_panels=z_out if retain else None,
        b_panels=b_out if retain else None,
        panel_names={
            "physical": system.physical.graph.names(),
            "planned": list(system.planned.targets),
            "bids": list(system.bids.targets),
        } if retain else {},
    )


def replay_insample(system: FittedSystem, dataset) -> dict:
    """Re-run the estimation window with archived residuals in original order.

    Returns the replayed physical series (model scale), planned panels, bid
    panels and clearing ticks from day 36 on.  Exactness against the
    originals is the wiring check for the whole engine.
    """
    day0 = exp_mod.LAG_DAYS
    horizon = system.n_days - day0
    parch, zarch, barch = _aligned_archives(system)
    blocks = _compiled_blocks(system, day0, horizon, system.capacity)

    graph = system.physical.graph
    model_series = _model_series(dataset, graph)
    names = graph.names()
    phys_hist = np.stack([model_series[n].values[: day0 * 24] for n in names])

    y_sources = list(dict.fromkeys(system.planned_sources.values()))
    true_panels = _truth_panels(
        graph, system.capacity, system.origin, system.n_days, model_series, y_sources
    )
    y_hist = np.stack([true_panels[s].values[:day0] for s in y_sources])
    z_hist = np.stack([dataset.planned[n].values[:day0] for n in system.planned.targets])
    b_panels = {}
    for side, prefix in (("supply", "s"), ("demand", "d")):
        b_panels.update(dataset.curves.group_volume_panels(system.schemes[side], prefix))
    b_hist = np.stack([b_panels[n].values[:day0] for n in system.bids.targets])

    draw_idx = np.arange(horizon, dtype=np.int64)[None]
    price = np.zeros((1, horizon, 24), dtype=np.uint16)
    status = np.empty(1, dtype=np.int64)
    clamps = np.zeros(1, dtype=np.int64)
    phys_out = np.zeros((1, len(names), horizon, 24))
    z_out = np.zeros((1, len(system.planned.targets), horizon, 24))
    b_out = np.zeros((1, len(system.bids.targets), horizon, 24))

    kernels.simulate_many_serial(
        *blocks["phys"], phys_hist, parch,
        blocks["ypan_src"], y_hist, blocks["capfac"],
        *blocks["z_block"], z_hist, zarch,
        *blocks["b_block"], b_hist, barch,
        blocks["sup_idx"], blocks["dem_idx"], blocks["sup_prof"], blocks["dem_prof"],
        draw_idx, blocks["weekdays"], 1.0,
        price, status, clamps,
        1, phys_out, z_out, b_out,
    )
    if status[0] != -1:
        raise ModelError(f"replay failed at day {status[0]}")
    return {
        "physical": {n: phys_out[0, k] for k, n in enumerate(names)},
        "planned": {n: z_out[0, k] for k, n in enumerate(system.planned.targets)},
        "bids": {n: b_out[0, k] for k, n in enumerate(system.bids.targets)},
        "price_ticks": price[0],
        "first_day": day0,
    }
