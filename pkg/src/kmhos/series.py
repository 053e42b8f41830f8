"""Truncation control shared by the PDF evaluators and the HOS engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DivergenceError, DomainError


@dataclass(frozen=True)
class SeriesControl:
    """Truncation settings for infinite series.

    Parameters
    ----------
    tol : float
        Truncation accuracy P_e.  The reported term count is the smallest
        truncation index whose partial sum is within ``tol * max(1, |S|)``
        of the converged sum.
    max_terms : int
        Hard cap on the number of outer terms evaluated.
    consecutive_small : int
        Length of the run of negligible terms required before stopping.
    guard : float
        Summation is carried on until terms fall below ``guard * tol``
        relative to the partial sum, so the value is accurate well beyond
        ``tol`` and the reported count is stable.
    """

    tol: float = 1e-5
    max_terms: int = 500
    consecutive_small: int = 3
    guard: float = 1e-2

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")
        if self.consecutive_small < 1:
            raise DomainError("consecutive_small must be >= 1")
        if not 0 < self.guard <= 1:
            raise DomainError("guard must lie in (0, 1]")


@dataclass
class SeriesAccumulator:
    """Running sum of an outer series with the stopping rule and diagnostics.

    A term is negligible when both |t_k| and the geometric tail bound
    |t_k| r / (1 - r), with r the largest of the last two term ratios,
    are below ``guard * tol * |S_k|``.
    """

    ctrl: SeriesControl
    asymptotic: bool = False
    terms: list = field(default_factory=list)
    total: float = 0.0
    _small: int = 0
    _growth: int = 0

    def _ratio(self) -> float:
        t = self.terms
        if len(t) < 3:
            return math.inf
        rs = []
        for a, b in ((t[-1], t[-2]), (t[-2], t[-3])):
            if b == 0.0:
                rs.append(0.0 if a == 0.0 else math.inf)
            else:
                rs.append(abs(a / b))
        return max(rs)

    def add(self, term: float) -> bool:
        """Add a term; return True once the series has converged."""
        if not math.isfinite(term):
            raise ConvergenceError(f"non-finite series term at index {len(self.terms)}")
        self.terms.append(term)
        self.total += term
        r = self._ratio()
        if self.asymptotic and len(self.terms) >= 2:
            prev = self.terms[-2]
            self._growth = self._growth + 1 if prev != 0 and abs(term / prev) > 1 else 0
            if self._growth >= 5:
                raise DivergenceError(
                    f"asymptotic series terms grew for 5 consecutive steps at index {len(self.terms) - 1}"
                )
        thresh = self.ctrl.guard * self.ctrl.tol * abs(self.total)
        tail = abs(term) * r / (1.0 - r) if r < 1.0 else math.inf
        if abs(term) <= thresh and (tail <= thresh or term == 0.0 and r == 0.0):
            self._small += 1
        else:
            self._small = 0
        return self._small >= self.ctrl.consecutive_small

    def run(self, term_iter, start: int = 0) -> "SeriesAccumulator":
        """Consume terms from ``term_iter`` until convergence or the term cap."""
        for k, t in enumerate(term_iter, start):
            if len(self.terms) >= self.ctrl.max_terms:
                raise ConvergenceError(
                    f"series not converged within max_terms={self.ctrl.max_terms}"
                    f" (partial sum {self.total:.6g}, last term {self.terms[-1]:.3g})"
                )
            if self.add(t):
                return self
        return self  # finite series exhausted

    @property
    def tail_estimate(self) -> float:
        r = self._ratio()
        if not self.terms:
            return 0.0
        if r >= 1.0:
            return math.inf
        return abs(self.terms[-1]) * r / (1.0 - r)

    @property
    def terms_used(self) -> int:
        """Smallest K with |S - sum_{k<=K} t_k| <= tol * max(1, |S|)."""
        if not self.terms:
            return 0
        partial = np.cumsum(self.terms)
        err = np.abs(self.total - partial)
        ok = np.nonzero(err <= self.ctrl.tol * max(1.0, abs(self.total)))[0]
        return int(ok[0]) if ok.size else len(self.terms) - 1


def sum_pointwise(term_fn, shape, ctrl: SeriesControl, start: int = 0, min_terms: int = 1) -> np.ndarray:
    """Sum a series elementwise over an array of evaluation points.

    ``term_fn(k)`` returns the k-th term for every point.  Each point stops
    contributing once it has seen ``consecutive_small`` terms below
    ``tol * |partial|``; iteration ends when all points are done.
    """
    total = np.zeros(shape)
    streak = np.zeros(shape, dtype=int)
    for count in range(ctrl.max_terms):
        k = start + count
        t = term_fn(k)
        total = total + t
        small = np.abs(t) <= ctrl.tol * np.abs(total)
        streak = np.where(small, streak + 1, 0)
        if count + 1 >= min_terms and np.all(streak >= ctrl.consecutive_small):
            return total
    raise ConvergenceError(f"pointwise series not converged within {ctrl.max_terms} terms")
