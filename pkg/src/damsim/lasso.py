"""Sparse linear estimation: coordinate descent over a lambda path, tuned by BIC.

The solver minimizes ``||y - X b||^2 + lam * ||b||_1`` (L2 norm squared, no
1/n factor).  Columns are standardized to unit variance internally and
coefficients are mapped back to the original scale; the intercept is never
penalized.  The path solver keeps a growing active set with a Gram matrix
restricted to columns that ever became active, plus full KKT scans against
the residual, so wide design matrices stay cheap as long as solutions are
sparse.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ModelError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 1000
OBJ_SLACK = 1e-8  # relative slack for the per-sweep monotonicity guard


@dataclass
class DesignProblem:
    """Response vector plus design matrix for one equation."""

    response: np.ndarray
    design: np.ndarray
    column_names: list | None = None
    column_scales: np.ndarray | None = None

    def __post_init__(self):
        self.response = np.asarray(self.response, dtype=np.float64)
        self.design = np.asarray(self.design, dtype=np.float64)
        if self.design.ndim != 2 or self.response.ndim != 1:
            raise ModelError("design must be 2-d and response 1-d")
        if self.design.shape[0] != self.response.shape[0]:
            raise ModelError(
                f"{self.design.shape[0]} design rows vs {self.response.shape[0]} responses"
            )


@dataclass
class LassoFit:
    """Selected fit on the original column scale."""

    coefficients: np.ndarray
    intercept: float
    lam: float
    bic: float
    residuals: np.ndarray
    n_active: int = 0
    path: list = field(default_factory=list)        # (lam, rss, n_active, bic) per grid point
    obj_traces: list = field(default_factory=list)  # per-lambda objective-by-sweep arrays

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass(frozen=True)
class LambdaGrid:
    """Log-spaced grid from lam_max down to lam_max * min_ratio."""

    n_points: int = 100
    min_ratio: float = 1e-4
    include_zero: bool = False

    def values(self, lam_max: float) -> np.ndarray:
        if lam_max <= 0:
            grid = np.array([0.0])
        else:
            grid = np.geomspace(lam_max, lam_max * self.min_ratio, self.n_points)
        if self.include_zero and (grid.size == 0 or grid[-1] > 0):
            grid = np.append(grid, 0.0)
        return grid


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if not math.isfinite(gamma):
        raise ValueError("gamma must be finite")
    return float(kernels.soft_threshold_scalar(float(z), float(gamma)))


def bic(rss: float, n: int, k: int) -> float:
    """n*ln(rss/n) + k*ln(n); -inf marks a perfect fit (rss == 0)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if rss <= 0.0:
        return float("-inf")
    return n * math.log(rss / n) + k * math.log(n)


def coordinate_descent(x, y, lam, beta0=None, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Plain cyclic coordinate descent, no standardization and no intercept.

    Returns (beta, obj_trace) where obj_trace holds the objective after each
    sweep.  Zero-norm columns keep coefficient 0.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    p = x.shape[1]
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    col_sq = np.einsum("ij,ij->j", x, x)
    resid = y - x @ beta
    trace = np.empty(max_sweeps)
    n_sweeps = kernels.cd_residual_sweeps(
        x, col_sq, beta, resid, float(lam), float(tol), int(max_sweeps), trace
    )
    trace = trace[:n_sweeps].copy()
    _check_monotone(trace, lam)
    return beta, trace


def _check_monotone(trace, lam):
    if trace.size < 2:
        return
    scale = OBJ_SLACK * (1.0 + np.abs(trace).max())
    worst = float(np.max(np.diff(trace)))
    if worst > scale:
        raise ModelError(
            f"coordinate descent objective increased by {worst:.3e} at lam={lam:.6g}"
        )


class _ActiveSetSolver:
    """Path state: ever-active columns, their Gram block, warm-started betas."""

    def __init__(self, xs, yc, tol, max_sweeps):
        self.xs = xs
        self.yc = yc
        self.xty = xs.T @ yc
        self.yty = float(yc @ yc)
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.n, self.p = xs.shape
        cap = 64
        self.gram = np.zeros((cap, cap))
        self.beta = np.zeros(cap)
        self.s = np.zeros(cap)
        self.xty_e = np.zeros(cap)
        self.ever = np.empty(0, dtype=np.int64)
        self.in_ever = np.zeros(self.p, dtype=bool)

    @property
    def m(self):
        return self.ever.size

    def _grow(self, need):
        cap = self.gram.shape[0]
        if need <= cap:
            return
        new_cap = cap
        while new_cap < need:
            new_cap *= 2
        gram = np.zeros((new_cap, new_cap))
        gram[: self.m, : self.m] = self.gram[: self.m, : self.m]
        self.gram = gram
        for name in ("beta", "s", "xty_e"):
            buf = np.zeros(new_cap)
            buf[: self.m] = getattr(self, name)[: self.m]
            setattr(self, name, buf)

    def add_columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        m0, m1 = self.m, self.m + cols.size
        self._grow(m1)
        ever_new = np.concatenate([self.ever, cols])
        block = self.xs[:, ever_new].T @ self.xs[:, cols]  # (m1, |cols|)
        self.gram[:m1, m0:m1] = block
        self.gram[m0:m1, :m0] = block[:m0].T
        self.xty_e[m0:m1] = self.xty[cols]
        # new coefficients start at zero, so s for old rows is unchanged
        self.s[m0:m1] = self.gram[m0:m1, :m0] @ self.beta[:m0]
        self.ever = ever_new
        self.in_ever[cols] = True

    def solve(self, lam, kkt_slack, max_outer=100):
        """Converge at one lambda; returns (residual, obj_trace_list, sweeps)."""
        traces = []
        sweeps = 0
        for _ in range(max_outer):
            if self.m:
                trace = np.empty(self.max_sweeps)
                ns = kernels.cd_gram_sweeps(
                    self.gram, self.m, self.xty_e, self.beta, self.s,
                    float(lam), self.yty, self.tol, self.max_sweeps, trace,
                )
                trace = trace[:ns].copy()
                _check_monotone(trace, lam)
                traces.append(trace)
                sweeps += ns
            resid = self._residual()
            corr = self.xs.T @ resid
            viol = np.abs(2.0 * corr) > lam + kkt_slack
            viol[self.in_ever] = False
            if not viol.any():
                return resid, traces, sweeps
            self.add_columns(np.flatnonzero(viol))
        raise ModelError(f"active-set loop did not settle at lam={lam:.6g}")

    def _residual(self):
        if self.m == 0:
            return self.yc.copy()
        return self.yc - self.xs[:, self.ever] @ self.beta[: self.m]


def _solve_path(xs, yc, grid, tol, max_sweeps, keep_traces, bic_patience):
    """Run the decreasing-lambda path and return best-BIC state plus records."""
    n, p = xs.shape
    solver = _ActiveSetSolver(xs, yc, tol, max_sweeps)

    lam_scale = float(np.max(np.abs(2.0 * solver.xty))) if p else 0.0
    kkt_slack = 1e-9 * max(lam_scale, 1.0)

    best = None
    records = []
    traces = []
    since_best = 0
    for lam in grid:
        resid, tr, sweeps = solver.solve(float(lam), kkt_slack)
        if keep_traces:
            traces.extend(tr)
        rss = float(resid @ resid)
        k = int(np.count_nonzero(solver.beta[: solver.m]))
        crit = bic(rss, n, k)
        records.append((float(lam), rss, k, crit))
        if best is None or crit < best[0]:
            beta_full = np.zeros(p)
            beta_full[solver.ever] = solver.beta[: solver.m]
            best = (crit, float(lam), beta_full, resid.copy())
            since_best = 0
        else:
            since_best += 1
            if bic_patience is not None and since_best >= bic_patience:
                break
    return best, records, traces


def fit_path(
    problem: DesignProblem,
    grid: LambdaGrid | np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    keep_traces: bool = False,
    bic_patience: int | None = None,
    own_design: bool = False,
) -> LassoFit:
    """Fit the whole lambda path with warm starts and return the BIC minimizer.

    ``grid`` is a :class:`LambdaGrid` spec or an explicit decreasing array of
    lambda values.  With ``own_design=True`` the problem's design matrix is
    standardized in place to avoid a copy (the caller gives up the original).
    """
    y = problem.response
    x = problem.design
    if not np.isfinite(y).all() or not np.isfinite(x).all():
        raise ModelError("non-finite entries in response or design")
    n, p = x.shape
    if n < 2:
        raise ModelError("need at least 2 observations")

    ymean = float(y.mean())
    yc = y - ymean
    if p == 0 or not np.any(yc != 0.0):
        # zero-variance response or empty design: intercept-only fit
        problem.column_scales = np.ones(p)
        return LassoFit(
            coefficients=np.zeros(p), intercept=ymean, lam=0.0,
            bic=bic(float(yc @ yc), n, 0), residuals=yc.copy(),
        )

    means = x.mean(axis=0)
    scales = x.std(axis=0)
    keep = scales > 0.0
    problem.column_scales = np.where(keep, scales, 1.0)

    xs = x if own_design else x.copy()
    xs -= means
    # screened-out columns are zeroed rather than sliced; coefficient stays 0
    xs[:, ~keep] = 0.0
    xs[:, keep] /= scales[keep]

    if grid is None:
        grid = LambdaGrid()
    if isinstance(grid, LambdaGrid):
        lam_max = float(np.max(np.abs(2.0 * (xs.T @ yc)))) if keep.any() else 0.0
        grid_values = grid.values(lam_max)
    else:
        grid_values = np.asarray(grid, dtype=np.float64)

    best, records, traces = _solve_path(
        xs, yc, grid_values, tol, max_sweeps, keep_traces, bic_patience
    )
    crit, lam_sel, beta_std, resid = best

    coef = np.zeros(p)
    coef[keep] = beta_std[keep] / scales[keep]
    intercept = ymean - float(coef @ means)
    fit = LassoFit(
        coefficients=coef, intercept=intercept, lam=lam_sel, bic=crit,
        residuals=resid, n_active=int(np.count_nonzero(coef)),
        path=records, obj_traces=traces if keep_traces else [],
    )
    return fit


def fit_at(problem: DesignProblem, lam: float, **kwargs) -> LassoFit:
    """Fit at a single penalty value through the same standardization path."""
    return fit_path(problem, grid=np.array([float(lam)]), **kwargs)


def kkt_violation(x, y, beta, lam, intercept=0.0):
    """Largest KKT violation of ``beta`` for the unstandardized objective.

    For zero coefficients the stationarity bound is |2 x_j'r| <= lam; for
    active ones 2 x_j'r must equal lam * sign(beta_j).  Returns the max
    excess over both conditions (0 means the KKT system holds exactly).
    """
    r = y - intercept - x @ beta
    g = 2.0 * (x.T @ r)
    zero = beta == 0.0
    worst = 0.0
    if zero.any():
        worst = max(worst, float(np.max(np.abs(g[zero])) - lam))
    if (~zero).any():
        worst = max(worst, float(np.max(np.abs(g[~zero] - lam * np.sign(beta[~zero])))))
    return worst
