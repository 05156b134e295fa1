"""damsim: probabilistic long-horizon simulation of hourly day-ahead power prices.

Pipeline: estimate sparse autoregressive models for the physical market,
map simulated futures into day-ahead expectations and bid-group volumes,
reconstruct supply and demand curves, clear each hourly auction by curve
intersection, and evaluate the resulting predictive distributions.
"""

__version__ = "0.1.0"

from ._accel import backend
from .errors import DataError, ModelError

__all__ = ["backend", "DataError", "ModelError", "__version__"]
