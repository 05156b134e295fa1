"""Event probabilities and probabilistic-forecast diagnostics.

A run event of length c at hour t means the clearing price was negative for
hours t-c+1 .. t.  Forecast probabilities are relative frequencies over the
ensemble paths; diagnostics cover forecast-vs-observed frequency tables, a
reliability regression (weighted by bin counts) and the percentile coverage
histogram against realized prices.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import curves as curves_mod
from . import simulate as sim_mod
from .errors import DataError

ZERO_TICK = 5000  # grid tick of price 0.0


@dataclass
class EventReport:
    """Per-(day, hour) forecast probabilities for one run length."""

    c: int
    probabilities: np.ndarray          # (days, 24) in [0, 1]
    realized: np.ndarray | None = None  # (days, 24) of {0, 1}, None without observations
    inclusive: bool = False            # True: price <= 0 counts as negative

    @property
    def mean_forecast(self) -> float:
        return float(self.probabilities.mean())

    @property
    def observed_frequency(self) -> float | None:
        if self.realized is None:
            return None
        return float(self.realized.mean())


@dataclass
class ReliabilityTable:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean_forecast: np.ndarray
    observed_freq: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    @property
    def defined(self) -> bool:
        return np.isfinite(self.slope)


@dataclass
class CoverageHistogram:
    """Observed fall-in frequency per percentile cell over nominal 1%."""

    counts: np.ndarray                 # (100,) observations per cell
    ratios: np.ndarray                 # counts / (n * 0.01)
    n_obs: int


def run_indicators(neg: np.ndarray, c: int, init_run: int = 0) -> np.ndarray:
    """Indicators over a 2-d (sequences, time) boolean array of negativity."""
    neg = np.atleast_2d(neg)
    n, t_len = neg.shape
    run = np.full(n, init_run, dtype=np.int64)
    out = np.zeros((n, t_len), dtype=np.uint8)
    for t in range(t_len):
        run = np.where(neg[:, t], run + 1, 0)
        out[:, t] = run >= c
    return out


def detect_runs(prices, c: int, history=None, inclusive: bool = False) -> np.ndarray:
    """Run-event indicator per hour of one price sequence.

    ``history`` supplies the hours immediately before the sequence (only the
    trailing c-1 matter); without it the first c-1 hours can only trigger on
    in-sequence data.
    """
    if c < 1:
        raise DataError("run length c must be >= 1")
    prices = np.asarray(prices, dtype=np.float64)
    neg = prices <= 0.0 if inclusive else prices < 0.0
    init = 0
    if history is not None:
        hist = np.asarray(history, dtype=np.float64)
        hneg = hist <= 0.0 if inclusive else hist < 0.0
        for flag in hneg[::-1]:
            if not flag:
                break
            init += 1
    from . import kernels
    return kernels.run_indicator_1d(neg, init, c)


def event_probabilities(ens: sim_mod.PathEnsemble, c: int, observed=None,
                        history=None, inclusive: bool = False) -> EventReport:
    """Fraction of intact paths showing the c-hour negative run, per (day, hour)."""
    if c < 1:
        raise DataError("run length c must be >= 1")
    ticks = ens.price_ticks[ens.ok]
    if ticks.shape[0] == 0:
        raise DataError("no intact paths in the ensemble")
    n, days, _ = ticks.shape
    neg = ticks <= ZERO_TICK if inclusive else ticks < ZERO_TICK
    init = _initial_run(history, inclusive)
    ind = run_indicators(neg.reshape(n, days * 24), c, init_run=init)
    probs = ind.mean(axis=0).reshape(days, 24)

    realized = None
    if observed is not None:
        obs = np.asarray(observed, dtype=np.float64).reshape(-1)
        realized = detect_runs(obs, c, history=history, inclusive=inclusive)
        realized = realized.astype(np.float64).reshape(-1, 24)
    return EventReport(c=c, probabilities=probs, realized=realized, inclusive=inclusive)


def _initial_run(history, inclusive):
    if history is None:
        return 0
    hist = np.asarray(history, dtype=np.float64)
    hneg = hist <= 0.0 if inclusive else hist < 0.0
    run = 0
    for flag in hneg[::-1]:
        if not flag:
            break
        run += 1
    return run


def default_bins(probabilities: np.ndarray, n_bins: int = 10) -> np.ndarray:
    """Equal-count bin edges over the nonzero forecast probabilities."""
    nz = probabilities[probabilities > 0]
    if nz.size == 0:
        return np.array([0.0, 1.0])
    edges = np.quantile(nz, np.linspace(0.0, 1.0, n_bins + 1))
    edges[0] = 0.0
    edges[-1] = max(float(edges[-1]), 1.0)
    return np.unique(edges)


def reliability(report: EventReport, bins=None) -> ReliabilityTable:
    """Observed event frequency per forecast-probability bin, with weighted fit.

    The fit regresses observed frequency on bin-mean forecast probability by
    least squares weighted with bin counts; R squared is reported for the
    weighted fit.  With fewer than two occupied bins the fit is undefined
    and reported as NaN.
    """
    if report.realized is None:
        raise DataError("reliability needs realized indicators; pass observed prices")
    probs = report.probabilities.reshape(-1)
    realized = np.asarray(report.realized, dtype=np.float64).reshape(-1)
    n = min(probs.size, realized.size)
    probs, realized = probs[:n], realized[:n]

    edges = default_bins(probs) if bins is None else np.asarray(bins, dtype=np.float64)
    if probs.min() < edges[0] or probs.max() > edges[-1]:
        raise DataError("bin edges do not cover all forecast probabilities")
    idx = np.clip(np.searchsorted(edges, probs, side="right") - 1, 0, edges.size - 2)

    n_bins = edges.size - 1
    counts = np.bincount(idx, minlength=n_bins).astype(np.float64)
    with np.errstate(invalid="ignore"):
        mean_fc = np.bincount(idx, weights=probs, minlength=n_bins) / counts
        obs_freq = np.bincount(idx, weights=realized, minlength=n_bins) / counts

    occupied = counts > 0
    x, y, w = mean_fc[occupied], obs_freq[occupied], counts[occupied]
    if occupied.sum() < 2 or np.ptp(x) == 0.0:
        slope = intercept = r2 = float("nan")
    else:
        wsum = w.sum()
        xm = (w * x).sum() / wsum
        ym = (w * y).sum() / wsum
        sxx = (w * (x - xm) ** 2).sum()
        sxy = (w * (x - xm) * (y - ym)).sum()
        slope = sxy / sxx
        intercept = ym - slope * xm
        fitted = intercept + slope * x
        sse = (w * (y - fitted) ** 2).sum()
        sst = (w * (y - ym) ** 2).sum()
        r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    return ReliabilityTable(
        bin_edges=edges, counts=counts, mean_forecast=mean_fc,
        observed_freq=obs_freq, slope=float(slope), intercept=float(intercept),
        r_squared=float(r2),
    )


def coverage(ens_or_quantiles, observed) -> CoverageHistogram:
    """Percentile-cell histogram of the observations against the ensemble.

    Accepts a PathEnsemble or a precomputed (99, days, 24) quantile panel.
    Each observation lands in one of 100 cells (0-1% .. 99-100%); values
    outside [q1, q99] land in the boundary cells.  Ratios are frequencies
    over the nominal 1% per cell.
    """
    if isinstance(ens_or_quantiles, sim_mod.PathEnsemble):
        q = sim_mod.quantile_panel(ens_or_quantiles, np.arange(1, 100) / 100.0)
    else:
        q = np.asarray(ens_or_quantiles, dtype=np.float64)
        if q.shape[0] != 99:
            raise DataError("quantile panel must hold the 99 percentiles")
    obs = np.asarray(observed, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs.reshape(-1, 24)
    days = min(q.shape[1], obs.shape[0])
    if days == 0:
        raise DataError("observed panel does not overlap the ensemble span")
    q = q[:, :days, :]
    obs = obs[:days]

    cells = (obs[None] > q).sum(axis=0).reshape(-1)   # 0..99
    counts = np.bincount(cells, minlength=100).astype(np.int64)
    n = int(counts.sum())
    ratios = counts / (n * 0.01)
    return CoverageHistogram(counts=counts, ratios=ratios, n_obs=n)


def coverage_band(n_obs: int, level: float = 0.99, p_cell: float = 0.01):
    """Binomial band for per-cell coverage ratios under perfect calibration."""
    alpha = (1.0 - level) / 2.0
    lo = stats.binom.ppf(alpha, n_obs, p_cell) / (n_obs * p_cell)
    hi = stats.binom.ppf(1.0 - alpha, n_obs, p_cell) / (n_obs * p_cell)
    return float(lo), float(hi)


def event_summary(reports) -> dict:
    """Long-form rows (c, forecast_pct, observed_pct) for the c=1..6 table."""
    rows = []
    for rep in sorted(reports, key=lambda r: r.c):
        obs = rep.observed_frequency
        rows.append({
            "c": rep.c,
            "forecast_pct": 100.0 * rep.mean_forecast,
            "observed_pct": 100.0 * obs if obs is not None else float("nan"),
        })
    return rows


def format_event_table(rows) -> str:
    """The two-row layout: run lengths as columns, forecast and observed rows."""
    cs = [str(r["c"]) for r in rows]
    fc = [f"{r['forecast_pct']:.3f}" for r in rows]
    ob = [f"{r['observed_pct']:.3f}" for r in rows]
    width = max(10, *(len(v) for v in fc + ob)) + 2
    head = "c".ljust(12) + "".join(c.rjust(width) for c in cs)
    line1 = "forecasted".ljust(12) + "".join(v.rjust(width) for v in fc)
    line2 = "observed".ljust(12) + "".join(v.rjust(width) for v in ob)
    return "\n".join([head, line1, line2])
