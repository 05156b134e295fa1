"""Bid curves on the 0.1 EUR/MWh grid: grouping, reconstruction, clearing.

The price grid spans -500.0 to 3000.0 EUR/MWh in 0.1 steps (35001 ticks).
Supply curves are cumulative sale volume from the lowest price up, demand
curves cumulative purchase volume from the highest price down.  Grouping
partitions the grid into contiguous price intervals holding roughly a target
volume on average; reconstruction spreads simulated group volumes over each
interval using the historical mean density.

Reconstruction accumulates group contributions in a fixed order.  Because
float multiplication and addition preserve weak ordering, the rebuilt curves
are monotone arrays, which is what makes bisection clearing in the
simulation kernel agree exactly with the exhaustive scan done here.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError

PRICE_MIN = -500.0
PRICE_MAX = 3000.0
TICK = 0.1
N_TICKS = 35001

SIDES = ("supply", "demand")


def price_to_tick(price: float) -> int:
    """Snap a price to the nearest grid tick index (0..35000)."""
    return int(round((price - PRICE_MIN) / TICK))


def tick_to_price(tick) -> np.ndarray | float:
    """Grid tick index to EUR/MWh; exact at whole-EUR boundaries."""
    return np.asarray(tick) / 10.0 + PRICE_MIN if np.ndim(tick) else tick / 10.0 + PRICE_MIN


def price_grid() -> np.ndarray:
    return np.arange(N_TICKS) / 10.0 + PRICE_MIN


@dataclass
class StepCurve:
    """Cumulative volume per grid tick for one side of one delivery hour."""

    side: str
    cumulative: np.ndarray

    def __post_init__(self):
        if self.side not in SIDES:
            raise DataError(f"side must be one of {SIDES}, got {self.side!r}")
        self.cumulative = np.asarray(self.cumulative, dtype=np.float64)
        if self.cumulative.shape != (N_TICKS,):
            raise DataError(f"curve must have {N_TICKS} grid points")

    def validate(self):
        c = self.cumulative
        if c.min() < 0:
            raise DataError(f"{self.side} curve has negative volume")
        d = np.diff(c)
        if self.side == "supply" and (d < 0).any():
            raise DataError("supply curve is not non-decreasing")
        if self.side == "demand" and (d > 0).any():
            raise DataError("demand curve is not non-increasing")

    def mass(self) -> np.ndarray:
        """Incremental bid volume at each tick."""
        c = self.cumulative
        if self.side == "supply":
            return np.diff(c, prepend=0.0)
        return c - np.append(c[1:], 0.0)


@dataclass
class GroupScheme:
    """Contiguous price-interval partition of the grid for one side."""

    side: str
    starts: np.ndarray  # first tick of each group
    ends: np.ndarray    # last tick, inclusive
    target: float

    def __post_init__(self):
        self.starts = np.asarray(self.starts, dtype=np.int64)
        self.ends = np.asarray(self.ends, dtype=np.int64)

    @property
    def n_groups(self) -> int:
        return self.starts.size

    def boundaries(self) -> np.ndarray:
        """Price breakpoints: group g covers [boundaries[g], boundaries[g+1])."""
        edges = np.append(self.starts, self.ends[-1] + 1)
        return np.asarray(tick_to_price(edges))

    def tick_to_group(self) -> np.ndarray:
        out = np.empty(N_TICKS, dtype=np.int32)
        for g, (a, b) in enumerate(zip(self.starts, self.ends)):
            out[a : b + 1] = g
        return out


@dataclass
class GroupProfiles:
    """Per-group cumulative within-group volume shares on the full grid.

    For supply each row rises 0 -> 1 across the group's span; for demand it
    falls 1 -> 0 (cumulative from the top).  Row g scaled by a group volume
    gives that group's contribution to the side's cumulative curve.
    """

    side: str
    cum: np.ndarray  # (n_groups, N_TICKS)


@dataclass
class ClearingResult:
    price: float
    volume: float
    degenerate: bool
    tick: int


def discretize_curve(bids, side: str) -> StepCurve:
    """Aggregate (price, volume) simple orders into a cumulative step curve."""
    mass = np.zeros(N_TICKS)
    for price, volume in bids:
        if volume < 0:
            raise DataError(f"bid ({price}, {volume}): negative volume")
        if not PRICE_MIN - TICK / 2 <= price <= PRICE_MAX + TICK / 2:
            raise DataError(f"bid ({price}, {volume}): price outside the grid")
        mass[price_to_tick(price)] += volume
    return curve_from_mass(mass, side)


def curve_from_mass(mass: np.ndarray, side: str) -> StepCurve:
    if side == "supply":
        return StepCurve(side, np.cumsum(mass))
    return StepCurve(side, np.cumsum(mass[::-1])[::-1])


def _mean_mass(curves, side: str | None = None) -> np.ndarray:
    mean_mass = np.zeros(N_TICKS)
    count = 0
    for curve in curves:
        if side is not None and curve.side != side:
            raise DataError(f"expected {side} curve, got {curve.side}")
        mean_mass += curve.mass()
        count += 1
    if count == 0:
        raise DataError("no historical curves given")
    return mean_mass / count


def scheme_from_mean_mass(mean_mass: np.ndarray, side: str, target: float) -> GroupScheme:
    """Greedy left-to-right partition of the grid given the mean bid density."""
    groups = []
    acc = 0.0
    start = 0
    for q in range(N_TICKS):
        acc += mean_mass[q]
        if acc >= target:
            groups.append((start, q))
            start = q + 1
            acc = 0.0
    if not groups:
        groups = [(0, N_TICKS - 1)]
    elif start <= N_TICKS - 1:
        if acc > 0.0:
            groups.append((start, N_TICKS - 1))
        else:
            # trailing zero-density ticks join the final group
            groups[-1] = (groups[-1][0], N_TICKS - 1)
    starts = np.array([a for a, _ in groups])
    ends = np.array([b for _, b in groups])
    return GroupScheme(side=side, starts=starts, ends=ends, target=target)


def calibrate_groups(curves, side: str, target: float = 1000.0) -> GroupScheme:
    """Greedy partition: extend each group until its mean volume reaches target.

    ``curves`` is an iterable of StepCurve (historical auctions for one
    side).  Groups are cut left to right on the price axis; the remainder of
    the grid becomes the final group, and trailing zero-density ticks are
    merged into it.
    """
    return scheme_from_mean_mass(_mean_mass(curves, side), side, target)


def profiles_from_mean_mass(mean_mass: np.ndarray, scheme: GroupScheme) -> GroupProfiles:
    cum = np.zeros((scheme.n_groups, N_TICKS))
    for g, (a, b) in enumerate(zip(scheme.starts, scheme.ends)):
        prof = np.zeros(N_TICKS)
        total = mean_mass[a : b + 1].sum()
        if total > 0:
            prof[a : b + 1] = mean_mass[a : b + 1] / total
        else:
            prof[a : b + 1] = 1.0 / (b - a + 1)
        if scheme.side == "supply":
            cum[g] = np.cumsum(prof)
        else:
            cum[g] = np.cumsum(prof[::-1])[::-1]
    return GroupProfiles(side=scheme.side, cum=cum)


def group_profiles(curves, scheme: GroupScheme) -> GroupProfiles:
    """Mean within-group density over the calibration window, as cumulative rows."""
    return profiles_from_mean_mass(_mean_mass(curves), scheme)


def group_volumes(curve: StepCurve, scheme: GroupScheme) -> np.ndarray:
    """Total bid volume per price group for one curve."""
    if curve.side != scheme.side:
        raise DataError(f"curve side {curve.side} does not match scheme {scheme.side}")
    return np.add.reduceat(curve.mass(), scheme.starts)


def reconstruct_curve(volumes, scheme: GroupScheme, profiles: GroupProfiles) -> StepCurve:
    """Spread group volumes over their price spans by the stored mean profile.

    Group contributions are accumulated in index order; the simulation
    kernel evaluates single ticks with the same ordering so both views of
    the curve agree bit for bit.
    """
    volumes = np.asarray(volumes, dtype=np.float64)
    if volumes.shape != (scheme.n_groups,):
        raise DataError(
            f"{volumes.size} group volumes for a {scheme.n_groups}-group scheme"
        )
    if (volumes < 0).any():
        raise DataError("group volumes must be non-negative")
    cum = np.zeros(N_TICKS)
    for g in range(scheme.n_groups):
        cum += volumes[g] * profiles.cum[g]
    return StepCurve(side=scheme.side, cumulative=cum)


def clear(supply: StepCurve, demand: StepCurve) -> ClearingResult:
    """Clearing price: the lowest grid price where supply covers demand.

    Degenerate outcomes (flagged): no crossing inside the grid (price capped
    at 3000 or floored at -500) and exact supply==demand over an interval,
    where the lowest such price is reported.
    """
    if supply.side != "supply" or demand.side != "demand":
        raise DataError("clear() needs a supply curve and a demand curve")
    supply.validate()
    demand.validate()
    s = supply.cumulative
    d = demand.cumulative
    mask = s >= d
    if not mask.any():
        q = N_TICKS - 1
        return ClearingResult(
            price=float(tick_to_price(q)), volume=float(min(s[q], d[q])),
            degenerate=True, tick=q,
        )
    q = int(np.argmax(mask))
    degenerate = q == 0
    if not degenerate and s[q] == d[q] and q + 1 < N_TICKS and s[q + 1] == d[q + 1]:
        degenerate = True
    return ClearingResult(
        price=float(tick_to_price(q)), volume=float(min(s[q], d[q])),
        degenerate=degenerate, tick=q,
    )
