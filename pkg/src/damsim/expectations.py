"""Day-by-hour models for day-ahead expectations and bid-group volumes.

Each target panel Z (a planned generation series or one bid group) gets 24
separate equations, one per delivery hour, regressing on weekday dummies
plus day-lagged panel values.  Day-lag sets follow fixed case formulas:

* causal dependencies (the driver's value for the target day is known at
  auction time): lags {0..36} on the own series at the same hour, {0..8}
  when exactly one of series/hour differs, {0,1} when both differ;
* autoregressive dependencies: {1..36}, {1..8} and {1} for the same cases.

Planned-process equations condition causally on their own true counterpart
only, as if the simulated future were the realized one, plus their own
autoregressive history.  Bid-group equations condition causally on all
expectation panels and autoregressively on every bid group of both sides.
"""

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import lasso
from ._util import exact_residual
from .errors import DataError, ModelError

LAG_DAYS = 36
CROSS_LAG_DAYS = 8
MIN_FIT_DAYS = LAG_DAYS + 8


@dataclass
class DayHourPanel:
    """Matrix of one process indexed (day, hour)."""

    name: str
    origin: dt.date
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"panel {self.name!r} must be 2-d (days, hours)")

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def n_hours(self) -> int:
        return self.values.shape[1]


def day_lag_set(same_series: bool, same_hour: bool, causal: bool,
                own_lag: int = LAG_DAYS, cross_lag: int = CROSS_LAG_DAYS) -> range:
    """Admissible day lags for one (target, driver) pair of panel hours."""
    lo = 0 if causal else 1
    if same_series and same_hour:
        return range(lo, own_lag + 1)
    if same_series or same_hour:
        return range(lo, cross_lag + 1)
    return range(lo, 2)


def planned_terms(h: int, n_hours: int = 24) -> list:
    """Term layout (kind, source index, source hour, day lag) for one planned
    equation at hour h: kind 0 is the own true counterpart (causal), kind 1
    the own planned history (autoregressive)."""
    terms = []
    for l in range(n_hours):
        for k in day_lag_set(True, l == h, causal=True):
            terms.append((0, 0, l, k))
    for l in range(n_hours):
        for k in day_lag_set(True, l == h, causal=False):
            terms.append((1, 0, l, k))
    return terms


def bid_terms(i: int, h: int, n_groups: int, n_expectations: int, n_hours: int = 24) -> list:
    """Term layout for bid group i at hour h: kind 0 are causal edges into the
    expectation panels, kind 1 autoregressive edges into all bid groups."""
    terms = []
    for j in range(n_expectations):
        for l in range(n_hours):
            for k in day_lag_set(False, l == h, causal=True):
                terms.append((0, j, l, k))
    for j in range(n_groups):
        for l in range(n_hours):
            for k in day_lag_set(j == i, l == h, causal=False):
                terms.append((1, j, l, k))
    return terms


@dataclass
class DayHourEquation:
    """One fitted (target, hour) equation in sparse form."""

    target: str
    hour: int
    intercept: float
    wd_coefs: np.ndarray   # 7 weekday coefficients, zeros kept
    terms: list            # (kind, source name, source hour, day lag, coef), nonzero
    lam: float
    bic: float


@dataclass
class ExpectationModel:
    """24 equations per target plus the daily residual archive."""

    kind: str                       # 'planned' or 'bids'
    targets: list                   # target panel names, fixed order
    causal_sources: list            # names of the kind-0 panels, fixed order
    equations: dict                 # (target name, hour) -> DayHourEquation
    residual_archive: np.ndarray    # (days, n_targets, n_hours), day 0 = archive_day0
    archive_day0: int
    origin: dt.date
    n_hours: int = 24
    clamp_negative: bool = False
    failed: dict = field(default_factory=dict)


def _equation_design(y_panels, z_panels, terms, z_target, h, weekday_block):
    """Design rows for days [LAG_DAYS, n_days) of one equation."""
    n_days = z_target.shape[0]
    n_rows = n_days - LAG_DAYS
    if n_rows < 8:
        raise DataError(
            f"{n_days} days of panels; need at least {MIN_FIT_DAYS} for the 36-day memory"
        )
    cols = np.empty((n_rows, len(terms)))
    for c, (kind, j, l, k) in enumerate(terms):
        panel = y_panels[j] if kind == 0 else z_panels[j]
        cols[:, c] = panel[LAG_DAYS - k : n_days - k, l]
    design = np.hstack([weekday_block, cols])
    return lasso.DesignProblem(
        response=z_target[LAG_DAYS:, h].copy(), design=design,
        column_names=[f"wd_{w}" for w in range(7)]
        + [f"{'Y' if kind == 0 else 'Z'}:{j}:{l}:{k}" for kind, j, l, k in terms],
    )


def _weekday_block(origin: dt.date, n_days: int) -> np.ndarray:
    wd = np.array([(origin + dt.timedelta(days=int(d))).weekday()
                   for d in range(LAG_DAYS, n_days)])
    block = np.zeros((wd.size, 7))
    block[np.arange(wd.size), wd] = 1.0
    return block


def _fit_panel_model(kind, target_names, target_values, y_names, y_values,
                     terms_for, origin, grid, bic_patience, clamp_negative,
                     continue_on_error):
    n_days, n_hours = target_values[0].shape
    archive = np.empty((n_days - LAG_DAYS, len(target_names), n_hours))
    weekday_block = _weekday_block(origin, n_days)
    wd_seq = np.array([(origin + dt.timedelta(days=int(d))).weekday()
                       for d in range(LAG_DAYS, n_days)])
    equations, failed = {}, {}

    for ti, tname in enumerate(target_names):
        for h in range(n_hours):
            terms = terms_for(ti, h)
            problem = _equation_design(
                y_values, target_values, terms, target_values[ti], h, weekday_block
            )
            try:
                fit = lasso.fit_path(problem, grid=grid, bic_patience=bic_patience,
                                     own_design=True)
            except ModelError as exc:
                if not continue_on_error:
                    raise
                failed[(tname, h)] = str(exc)
                archive[:, ti, h] = 0.0
                continue
            wd_coefs = fit.coefficients[:7].copy()
            kept = []
            for c, (tkind, j, l, k) in enumerate(terms):
                coef = fit.coefficients[7 + c]
                if coef != 0.0:
                    src = y_names[j] if tkind == 0 else target_names[j]
                    kept.append((tkind, src, l, k, float(coef)))
            eq = DayHourEquation(
                target=tname, hour=h, intercept=float(fit.intercept),
                wd_coefs=wd_coefs, terms=kept, lam=float(fit.lam), bic=float(fit.bic),
            )
            equations[(tname, h)] = eq
            # residuals recomputed in kernel accumulation order
            acc = eq.intercept + wd_coefs[wd_seq]
            y_index = {n: i for i, n in enumerate(y_names)}
            t_index = {n: i for i, n in enumerate(target_names)}
            for tkind, src, l, k, coef in kept:
                panel = y_values[y_index[src]] if tkind == 0 else target_values[t_index[src]]
                acc = acc + coef * panel[LAG_DAYS - k : n_days - k, l]
            archive[:, ti, h] = exact_residual(target_values[ti][LAG_DAYS:, h], acc)

    return ExpectationModel(
        kind=kind, targets=list(target_names), causal_sources=list(y_names),
        equations=equations, residual_archive=archive, archive_day0=LAG_DAYS,
        origin=origin, n_hours=n_hours, clamp_negative=clamp_negative, failed=failed,
    )


def fit_expectations(true_panels, planned_panels, pairs=None, grid=None,
                     bic_patience: int | None = 15,
                     continue_on_error: bool = False) -> ExpectationModel:
    """Fit the planned-process equations, 24 per series.

    ``true_panels`` and ``planned_panels`` map names to DayHourPanel;
    ``pairs`` maps each planned name to its true counterpart (defaults to
    positional pairing).  Panels must be aligned day for day.
    """
    planned_names = list(planned_panels)
    if not planned_names:
        raise DataError("no planned panels given")
    if pairs is None:
        true_names = list(true_panels)
        if len(true_names) != len(planned_names):
            raise DataError("cannot pair planned and true panels of different counts")
        pairs = dict(zip(planned_names, true_names))
    shapes = {p.values.shape for p in planned_panels.values()}
    shapes |= {true_panels[pairs[n]].values.shape for n in planned_names}
    origins = {p.origin for p in planned_panels.values()}
    origins |= {true_panels[pairs[n]].origin for n in planned_names}
    if len(shapes) != 1 or len(origins) != 1:
        raise DataError("planned and true panels are not aligned")
    origin = origins.pop()

    models = []
    for name in planned_names:
        z = planned_panels[name]
        y = true_panels[pairs[name]]
        m = _fit_panel_model(
            kind="planned", target_names=[name], target_values=[z.values],
            y_names=[pairs[name]], y_values=[y.values],
            terms_for=lambda ti, h, nh=z.n_hours: planned_terms(h, nh),
            origin=origin, grid=grid, bic_patience=bic_patience,
            clamp_negative=False, continue_on_error=continue_on_error,
        )
        models.append(m)

    # merge the per-series single-target models into one
    merged = ExpectationModel(
        kind="planned", targets=planned_names,
        causal_sources=[pairs[n] for n in planned_names],
        equations={k: v for m in models for k, v in m.equations.items()},
        residual_archive=np.concatenate([m.residual_archive for m in models], axis=1),
        archive_day0=LAG_DAYS, origin=origin,
        n_hours=models[0].n_hours if models else 24,
        clamp_negative=False,
        failed={k: v for m in models for k, v in m.failed.items()},
    )
    return merged


def fit_bid_groups(expectation_panels, bid_panels, grid=None,
                   bic_patience: int | None = 15,
                   continue_on_error: bool = False) -> ExpectationModel:
    """Fit one equation per bid group and hour.

    Causal edges run from every expectation panel, autoregressive edges from
    every bid-group panel (both market sides).  Negative simulated volumes
    are clamped to zero later, at evaluation time.
    """
    bid_names = list(bid_panels)
    exp_names = list(expectation_panels)
    shapes = {p.values.shape for p in bid_panels.values()}
    shapes |= {p.values.shape for p in expectation_panels.values()}
    origins = {p.origin for p in bid_panels.values()}
    origins |= {p.origin for p in expectation_panels.values()}
    if len(shapes) != 1 or len(origins) != 1:
        raise DataError("bid and expectation panels are not aligned")
    n_hours = next(iter(bid_panels.values())).n_hours
    return _fit_panel_model(
        kind="bids", target_names=bid_names,
        target_values=[bid_panels[n].values for n in bid_names],
        y_names=exp_names,
        y_values=[expectation_panels[n].values for n in exp_names],
        terms_for=lambda ti, h: bid_terms(ti, h, len(bid_names), len(exp_names), n_hours),
        origin=origins.pop(), grid=grid, bic_patience=bic_patience,
        clamp_negative=True, continue_on_error=continue_on_error,
    )


def evaluate_day(model: ExpectationModel, y_panels: dict, z_panels: dict,
                 d: int, weekday: int, shock=None):
    """Deterministic part plus shock for all targets at day index d.

    ``y_panels``/``z_panels`` map names to (days, hours) arrays holding at
    least days [d - 36, d] (and [d - 36, d - 1] for autoregressive terms).
    Returns ((n_targets, n_hours) values, clamp count).
    """
    n_hours = model.n_hours
    out = np.empty((len(model.targets), n_hours))
    clamped = 0
    for ti, tname in enumerate(model.targets):
        for h in range(n_hours):
            eq = model.equations[(tname, h)]
            acc = eq.intercept + eq.wd_coefs[weekday]
            for kind, src, l, k, coef in eq.terms:
                panel = y_panels[src] if kind == 0 else z_panels[src]
                acc += coef * panel[d - k, l]
            if shock is not None:
                acc += shock[ti, h]
            if model.clamp_negative and acc < 0.0:
                acc = 0.0
                clamped += 1
            out[ti, h] = acc
    return out, clamped


def derive_expectation(model: ExpectationModel, simulated_truth: dict,
                       planned_history: dict, shock, d: int, weekday: int):
    """Day-ahead expectations for day d given simulated truth through day d.

    The simulated future is used as if it were the realized series; the
    drawn residual vector is added without bias correction.
    """
    if model.kind != "planned":
        raise ModelError("model does not hold planned-process equations")
    for name in model.causal_sources:
        if simulated_truth[name].shape[0] <= d:
            raise DataError(f"simulated truth for {name} does not cover day {d}")
    values, _ = evaluate_day(model, simulated_truth, planned_history, d, weekday, shock)
    return values


def step_bid_groups(model: ExpectationModel, expectation_panels: dict,
                    bid_histories: dict, shock, d: int, weekday: int):
    """Bid-group volumes for day d; negative predictions clamp to zero."""
    if model.kind != "bids":
        raise ModelError("model does not hold bid-group equations")
    for name in model.targets:
        if bid_histories[name].shape[0] < d:
            raise DataError(f"bid history for {name} does not cover day {d - 1}")
    return evaluate_day(model, expectation_panels, bid_histories, d, weekday, shock)


def compile_expectations(model: ExpectationModel, y_index: dict, z_index: dict):
    """Flatten the equations into the kernel layout.

    ``y_index`` maps causal-source names to kernel panel indices, ``z_index``
    the target-family names.  Returns (wd_det, ptr, kind, src, hour, lag,
    coef) with equations ordered (target, hour).
    """
    n_t, n_h = len(model.targets), model.n_hours
    wd_det = np.empty((n_t, n_h, 7))
    ptr = np.zeros(n_t * n_h + 1, dtype=np.int64)
    kinds, srcs, hours, lags, coefs = [], [], [], [], []
    for ti, tname in enumerate(model.targets):
        for h in range(n_h):
            eq = model.equations[(tname, h)]
            for w in range(7):
                wd_det[ti, h, w] = eq.intercept + eq.wd_coefs[w]
            for kind, src, l, k, coef in eq.terms:
                kinds.append(kind)
                srcs.append(y_index[src] if kind == 0 else z_index[src])
                hours.append(l)
                lags.append(k)
                coefs.append(coef)
            ptr[ti * n_h + h + 1] = len(kinds)
    return (
        wd_det, ptr,
        np.array(kinds, dtype=np.int8), np.array(srcs, dtype=np.int64),
        np.array(hours, dtype=np.int64), np.array(lags, dtype=np.int64),
        np.array(coefs, dtype=np.float64),
    )
