"""Special functions consumed by the capacity-moment formulas.

Everything here is real-argument only.  Functions that appear as
truncated series in the closed forms (Bessel, 1F1, 2F1, Laguerre,
Stirling numbers) are evaluated by their defining series; gamma-type
integrals use scipy/mpmath quadrature.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class AccuracySpec:
    """Relative tolerance and iteration cap for series and quadratures."""

    rel_tol: float = 1e-12
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")


DEFAULT_ACCURACY = AccuracySpec()


def _sum_terms(terms: Iterable[float], acc: AccuracySpec, streak: int = 3) -> float:
    """Sum until |term| < rel_tol*|partial| holds for `streak` consecutive terms."""
    total = 0.0
    small = 0
    for count, t in enumerate(terms):
        if count >= acc.max_iterations:
            raise ConvergenceError(f"series not converged after {acc.max_iterations} terms")
        total += t
        if abs(t) <= acc.rel_tol * abs(total):
            small += 1
            if small >= streak:
                return total
        else:
            small = 0
    return total  # finite (terminating) series


# ---------------------------------------------------------------- gamma family


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def upper_inc_gamma(alpha: float, b: float, *, dps: int | None = None):
    """Upper incomplete gamma Gamma(alpha, b) = int_b^inf t^(alpha-1) e^-t dt.

    With ``dps`` set, an mpmath value at that many decimal digits is returned.
    """
    if not (alpha > 0 and b > 0):
        raise DomainError("upper_inc_gamma requires alpha > 0 and b > 0")
    if dps is not None:
        with mpmath.workdps(dps):
            return mpmath.gammainc(mpmath.mpf(alpha), mpmath.mpf(b))
    q = special.gammaincc(alpha, b)
    if q == 0.0:
        # deep tail: fall back to the asymptotic-safe mpmath evaluation
        return float(mpmath.gammainc(alpha, b))
    return math.exp(math.lgamma(alpha) + math.log(q))


def _gamma_breakpoints(alpha: float, lo: float) -> list[float]:
    pts = [lo]
    for p in (1.0, alpha - 1.0):
        if p > pts[-1] and p not in pts:
            pts.append(p)
    return sorted(set(pts))


def log_power_upper_gamma(
    alpha: float,
    b: float,
    n: int,
    acc: AccuracySpec = DEFAULT_ACCURACY,
    *,
    dps: int | None = None,
):
    """int_b^inf ln^n(t) t^(alpha-1) e^-t dt, the n-th alpha-derivative of Gamma(alpha, b).

    The range is split at t = 1 (where ln t changes sign) and at the mode.
    ``dps`` switches to mpmath tanh-sinh quadrature at that precision.
    """
    if not (alpha > 0 and b > 0):
        raise DomainError("log_power_upper_gamma requires alpha > 0 and b > 0")
    if n < 0 or int(n) != n:
        raise DomainError("n must be a nonnegative integer")
    n = int(n)
    # shift t = b + s so the quadrature always starts at 0 and e^-b factors out
    pts = [0.0] + [p - b for p in (1.0, alpha - 1.0) if p > b]
    pts = sorted(set(pts + [max(1.0, alpha - 1.0 - b) if alpha - 1.0 > b else 1.0]))
    if dps is not None:
        with mpmath.workdps(dps):
            a = mpmath.mpf(alpha)
            bb = mpmath.mpf(b)

            def g(s):
                t = bb + s
                return mpmath.log(t) ** n * t ** (a - 1) * mpmath.exp(-s)

            return mpmath.exp(-bb) * mpmath.quad(g, [mpmath.mpf(p) for p in pts] + [mpmath.inf])
    if n == 0:
        return upper_inc_gamma(alpha, b)

    def f(s):
        t = b + s
        return math.log(t) ** n * math.exp((alpha - 1) * math.log(t) - s)

    return math.exp(-b) * _quad_pieces(f, pts + [math.inf], acc)


def _quad_pieces(f, pts, acc: AccuracySpec) -> float:
    total = 0.0
    l1 = 0.0
    err = 0.0
    limit = min(acc.max_iterations, 2000)
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=max(acc.rel_tol, 1e-14), limit=limit)
        total += val
        l1 += abs(val)
        err += e
    if not err <= max(100 * acc.rel_tol * l1, 1e-300):
        raise ConvergenceError(f"quadrature error estimate {err:.3g} exceeds tolerance")
    return total


def _bell_complete(x: list) -> list:
    """Complete Bell polynomials Y_0..Y_len(x) of the sequence x_1, x_2, ..."""
    y = [x[0] * 0 + 1]
    for k in range(len(x)):
        y.append(sum(math.comb(k, j) * y[k - j] * x[j] for j in range(k + 1)))
    return y


def log_power_gamma_ratio(alpha: float, n: int) -> float:
    """Gamma^(n)(alpha)/Gamma(alpha) via the polygamma/Bell-polynomial chain."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    psis = [float(special.polygamma(j, alpha)) if j else float(special.digamma(alpha)) for j in range(n)]
    return _bell_complete(psis)[n]


def log_power_gamma_ratio_mp(alpha, n: int, dps: int):
    """Extended-precision Gamma^(n)(alpha)/Gamma(alpha)."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        psis = [mpmath.psi(j, a) for j in range(n)]
        return _bell_complete(psis)[n]


def log_power_gamma(alpha: float, n: int, acc: AccuracySpec = DEFAULT_ACCURACY, method: str = "auto") -> float:
    """int_0^inf ln^n(t) t^(alpha-1) e^-t dt = d^n Gamma(alpha)/d alpha^n.

    Parameters
    ----------
    method : {"auto", "polygamma", "quad"}
        ``polygamma`` uses Gamma' = Gamma psi and the complete Bell
        polynomial chain; ``quad`` integrates the definition.  ``auto``
        picks the chain for n <= 4.
    """
    if not alpha > 0:
        raise DomainError("log_power_gamma requires alpha > 0")
    if n < 0 or int(n) != n:
        raise DomainError("n must be a nonnegative integer")
    n = int(n)
    if method == "auto":
        method = "polygamma" if n <= 4 else "quad"
    if method == "polygamma":
        return math.gamma(alpha) * log_power_gamma_ratio(alpha, n) if n else math.gamma(alpha)
    if method != "quad":
        raise ValueError(f"unknown method {method!r}")
    lg = math.lgamma(alpha)

    def f(t):
        return math.log(t) ** n * math.exp((alpha - 1) * math.log(t) - t - lg)

    def f_head(s):
        # t = e^-s maps (0, 1] to [0, inf) and removes the endpoint singularity
        return (-s) ** n * math.exp(-alpha * s - math.exp(-s) - lg)

    pts = _gamma_breakpoints(alpha, 1.0) + [math.inf]
    head = _quad_pieces(f_head, [0.0, 1.0 / alpha, math.inf], acc)
    return math.exp(lg) * (head + _quad_pieces(f, pts, acc))


# ---------------------------------------------------------------- Bessel


def _bessel_i_log_terms(nu: float, x: float):
    lx = math.log(x / 2.0)
    k = 0
    while True:
        s = k + nu + 1.0
        if s <= 0 and s == int(s):
            yield None  # 1/Gamma pole: zero term
        else:
            yield (2 * k + nu) * lx - math.lgamma(k + 1.0) - math.lgamma(s), special.gammasgn(s)
        k += 1


def bessel_i_scaled(nu: float, x: float, acc: AccuracySpec = DEFAULT_ACCURACY) -> float:
    """exp(-x) I_nu(x) from the ascending series, accumulated in log space."""
    if nu < -1:
        raise DomainError("bessel_i supports nu >= -1")
    if x < 0:
        raise DomainError("bessel_i requires x >= 0")
    if x == 0:
        if nu == 0:
            return 1.0
        if nu > 0 or nu == int(nu):
            return 0.0
        return math.inf

    terms = (0.0 if item is None else item[1] * math.exp(item[0] - x) for item in _bessel_i_log_terms(nu, x))
    if nu == -1:
        next(terms)  # 1/Gamma(0) pole: the leading term vanishes identically
    return _sum_terms(terms, acc)


def bessel_i(nu: float, x: float, acc: AccuracySpec = DEFAULT_ACCURACY) -> float:
    """Modified Bessel function of the first kind I_nu(x), nu >= -1, x >= 0."""
    if x > 700.0:
        raise OverflowError("I_nu(x) overflows double precision; use bessel_i_scaled")
    return math.exp(x) * bessel_i_scaled(nu, x, acc)


# ---------------------------------------------------------------- Pochhammer, Stirling, Laguerre


def pochhammer(a: float, q: int) -> float:
    """Rising factorial (a)_q = a(a+1)...(a+q-1)."""
    if q < 0 or int(q) != q:
        raise DomainError("q must be a nonnegative integer")
    q = int(q)
    if q == 0:
        return 1.0
    if a <= 0 and a == int(a) and -a < q:
        return 0.0
    if a > 0 and math.lgamma(a + q) - math.lgamma(a) > 709.0:
        return math.inf
    p = 1.0
    for j in range(q):
        p *= a + j
    return p


def log_pochhammer(a: float, q):
    """ln (a)_q for a > 0 (vectorized over q)."""
    return special.gammaln(a + np.asarray(q, dtype=float)) - math.lgamma(a)


_STIRLING_ROWS: list[list[int]] = [[1]]
_STIRLING_LOCK = threading.Lock()


def _stirling_row(N: int) -> list[int]:
    with _STIRLING_LOCK:
        while len(_STIRLING_ROWS) <= N:
            prev = _STIRLING_ROWS[-1]
            n = len(_STIRLING_ROWS) - 1
            row = [0] * (n + 2)
            for k in range(n + 2):
                left = prev[k - 1] if 1 <= k <= n + 1 else 0
                here = prev[k] if k <= n else 0
                row[k] = left - n * here
            _STIRLING_ROWS.append(row)
        return _STIRLING_ROWS[N]


def stirling_first_signed(N: int, k: int) -> int:
    """Signed Stirling number of the first kind s(N, k)."""
    if N < 0 or k < 0:
        raise DomainError("Stirling indices must be nonnegative")
    if k > N:
        return 0
    return _stirling_row(N)[k]


def laguerre_generalized(k: int, v: float, y: float) -> float:
    """Generalized Laguerre polynomial from its finite hypergeometric sum."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    total = 0.0
    for q in range(k + 1):
        # (-k)_q / q! = (-1)^q C(k, q)
        total += (-1) ** q * math.comb(k, q) * y**q / special.poch(v + 1, q)
    return total * special.poch(v + 1, k) / math.factorial(k)


# ---------------------------------------------------------------- hypergeometric


def _gauss_terms(a: float, b: float | None, c: float, x: float):
    t = 1.0
    q = 0
    while True:
        yield t
        num = (a + q) * (b + q if b is not None else 1.0)
        if num == 0.0:
            return
        t *= num * x / ((c + q) * (q + 1))
        q += 1


def _sign_definite(params, x) -> bool:
    if any(p <= 0 and p == int(p) for p in params):
        return False
    return x >= 0 and all(p >= 0 for p in params)


def hyp1f1(a: float, b: float, x: float, acc: AccuracySpec = DEFAULT_ACCURACY, kummer: bool | None = None) -> float:
    """Confluent hypergeometric 1F1(a; b; x) by its power series.

    ``kummer=None`` chooses between the direct series and
    e^x 1F1(b-a; b; -x), preferring the form whose terms keep one sign.
    """
    if b <= 0 and b == int(b):
        raise DomainError("b must not be a nonpositive integer")
    if kummer is None:
        terminating = a <= 0 and a == int(a)
        if terminating or _sign_definite([a], x):
            kummer = False
        elif _sign_definite([b - a], -x):
            kummer = True
        else:
            kummer = x < 0
    if kummer:
        return math.exp(x) * _sum_terms(_gauss_terms(b - a, None, b, -x), acc)
    return _sum_terms(_gauss_terms(a, None, b, x), acc)


def hyp2f1(a: float, b: float, c: float, x: float, acc: AccuracySpec = DEFAULT_ACCURACY, euler: bool | None = None) -> float:
    """Gauss hypergeometric 2F1(a, b; c; x) for 0 <= x < 1.

    Above x = 0.7 the Euler transform (1-x)^(c-a-b) 2F1(c-a, c-b; c; x)
    is used unless it would turn a one-signed series into an alternating one.
    """
    if not 0 <= x < 1:
        raise DomainError("hyp2f1 supports 0 <= x < 1")
    if c <= 0 and c == int(c):
        raise DomainError("c must not be a nonpositive integer")
    if euler is None:
        direct_ok = _sign_definite([a, b], x) or any(p <= 0 and p == int(p) for p in (a, b))
        euler_ok = _sign_definite([c - a, c - b], x) or any(p <= 0 and p == int(p) for p in (c - a, c - b))
        euler = x > 0.7 and (euler_ok or not direct_ok)
    if euler:
        return (1 - x) ** (c - a - b) * _sum_terms(_gauss_terms(c - a, c - b, c, x), acc)
    return _sum_terms(_gauss_terms(a, b, c, x), acc)


def log_hyp2f1_positive(a: float, b: float, c: float, x: float, acc: AccuracySpec = DEFAULT_ACCURACY) -> float:
    """ln 2F1(a, b; c; x) for a, b, c > 0 and 0 <= x < 1, overflow-safe.

    Terms are all positive here, so the series is summed in log space.
    """
    if not (a > 0 and b > 0 and c > 0 and 0 <= x < 1):
        raise DomainError("log_hyp2f1_positive needs positive parameters and 0 <= x < 1")
    if x == 0:
        return 0.0
    lx = math.log(x)
    lt = 0.0
    lsum = 0.0
    small = 0
    for q in range(acc.max_iterations):
        lt += math.log((a + q) * (b + q) / ((c + q) * (q + 1))) + lx
        lsum = np.logaddexp(lsum, lt)
        if lt - lsum < math.log(acc.rel_tol):
            small += 1
            # only trust the streak once terms are decreasing
            if small >= 3 and (a + q) * (b + q) * x < (c + q) * (q + 1):
                return float(lsum)
        else:
            small = 0
    raise ConvergenceError("2F1 series not converged")
