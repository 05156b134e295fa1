"""Small numeric helpers shared across modules."""

import numpy as np


def exact_residual(y: np.ndarray, acc: np.ndarray) -> np.ndarray:
    """Residuals r with acc + r == y under float addition, element for element.

    Plain subtraction leaves acc + (y - acc) one ulp away from y for some
    elements; replaying archived residuals then drifts off the recorded
    series.  Nudging the affected residuals by single ulps restores bitwise
    equality (a handful of rounds always suffices when residuals are not
    astronomically larger than the values themselves).
    """
    y = np.asarray(y, dtype=np.float64)
    r = y - acc
    out = acc + r
    for _ in range(8):
        bad = out != y
        if not bad.any():
            return r
        r = np.where(bad, np.nextafter(r, np.where(out < y, np.inf, -np.inf)), r)
        out = acc + r
    return r
