"""Scalar capacity measures derived from Lambda_1..Lambda_4."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateError, DomainError
from .fading import ChannelModel
from .hos import hos_exact, hos_oracle
from .series import SeriesControl

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CapacityMetrics:
    """Capacity statistics of one channel configuration.

    Attributes
    ----------
    ergodic : float
        Ergodic capacity Lambda_1 (bits/s/Hz).
    variance : float
        Lambda_2 - Lambda_1^2 (bits^2).
    aof : float
        Amount of fading, Lambda_2 / Lambda_1^2 - 1.
    aod : float
        Amount of dispersion, variance / Lambda_1 (bits).
    reliability : float
        100 (1 - aod), in percent; not clamped, so it can be negative.
    skewness : float
        (Lambda_3 - Lambda_1^3) / variance^(3/2).
    kurtosis : float
        (Lambda_4 - Lambda_1^4) / variance^2.

    Notes
    -----
    Skewness and kurtosis subtract Lambda_1^3 and Lambda_1^4 rather than
    forming central moments; they are not the textbook quantities.
    """

    ergodic: float
    variance: float
    aof: float
    aod: float
    reliability: float
    skewness: float
    kurtosis: float


def metrics_from_moments(lam: Sequence[float]) -> CapacityMetrics:
    """Build :class:`CapacityMetrics` from (Lambda_1, Lambda_2, Lambda_3, Lambda_4).

    Raises
    ------
    DegenerateError
        The variance is below 1e-12 (skewness and kurtosis undefined).
    """
    l1, l2, l3, l4 = (float(v) for v in lam)
    var = l2 - l1 * l1
    if not var >= VARIANCE_FLOOR:
        raise DegenerateError(f"capacity variance {var:.3g} below {VARIANCE_FLOOR}")
    aod = var / l1
    return CapacityMetrics(
        ergodic=l1,
        variance=var,
        aof=l2 / (l1 * l1) - 1.0,
        aod=aod,
        reliability=100.0 * (1.0 - aod),
        skewness=(l3 - l1**3) / var**1.5,
        kurtosis=(l4 - l1**4) / var**2,
    )


def metrics(model: ChannelModel, ctrl: SeriesControl | None = None, method: str = "exact") -> CapacityMetrics:
    """Capacity metrics of ``model`` from Lambda_1..Lambda_4.

    Parameters
    ----------
    method : {"exact", "oracle"}
        Series evaluation or direct quadrature.
    """
    if method == "exact":
        lam = [hos_exact(model, n, ctrl).value for n in range(1, 5)]
    elif method == "oracle":
        lam = [hos_oracle(model, n).value for n in range(1, 5)]
    else:
        raise DomainError(f"unknown method {method!r}")
    return metrics_from_moments(lam)


def _vertex(x: np.ndarray, y: np.ndarray) -> float:
    """Abscissa of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(min(max(-b / (2 * a), x0), x2))


def aod_peak(
    model_family: Callable[[float], ChannelModel],
    snr_grid_db: Sequence[float],
    ctrl: SeriesControl | None = None,
) -> tuple[float, float, float]:
    """Locate the SNR of maximum amount of dispersion.

    Parameters
    ----------
    model_family : callable
        Maps an SNR in dB to a channel model.
    snr_grid_db : sequence of float
        Increasing grid expected to bracket the peak.

    Returns
    -------
    snr_at_peak_db, aod_max, reliability_at_peak

    Notes
    -----
    The discrete maximum is refined by the vertex of the parabola through it
    and its two neighbours, where the AoD is then evaluated.  A maximum at
    a grid endpoint triggers a RuntimeWarning and is returned unrefined.
    """
    grid = np.asarray(snr_grid_db, dtype=float)
    if grid.size == 0:
        raise DomainError("empty SNR grid")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("SNR grid must be strictly increasing")
    aod = np.array([metrics(model_family(s), ctrl).aod for s in grid])
    i = int(np.argmax(aod))
    if i == 0 or i == grid.size - 1:
        warnings.warn("AoD maximum lies at a grid endpoint; the grid may not bracket the peak", RuntimeWarning, stacklevel=2)
        return float(grid[i]), float(aod[i]), 100.0 * (1.0 - float(aod[i]))
    s = _vertex(grid[i - 1 : i + 2], aod[i - 1 : i + 2])
    m = metrics(model_family(s), ctrl)
    if m.aod < aod[i]:
        s, m = float(grid[i]), metrics(model_family(float(grid[i])), ctrl)
    return s, m.aod, m.reliability
