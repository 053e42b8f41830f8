"""Auxiliary integral kernels Theta, J, Q and the real-shape quadrature kernel K.

    Theta_delta(a, b) = int_0^inf (1+x)^delta x^(a-1) e^(-bx) dx
    J(a, b, n)        = int_0^inf ln^n(1+x) x^(a-1) e^(-bx) dx
    Q(a, b, n)        = d^n/da^n [Gamma(a+1) / b^(a+1)]
    K(nu, mu, a)      = int_0^inf ln^nu(1+x) x^mu e^(-ax) dx

Integer-shape J values are produced in bulk by :class:`JTable` (two
coupled integration-by-parts recursions in the shape, normalized by
b^a / Gamma(a)); real shapes go through the half-range Gauss rule K.
Q is the Leibniz sum of polygamma/Bell-polynomial derivatives of Gamma.
The Meijer-G forms of these integrals are never evaluated as such.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, linalg, special

from . import specfun
from .errors import ConvergenceError, DomainError

INTEGER_TOL = 1e-9
K_START_NODES = 15
K_MAX_NODES = 960


@dataclass(frozen=True)
class KernelRequest:
    """Arguments of a kernel evaluation: shape ``a``, rate ``b``, log order ``n``, offset ``delta``."""

    a: float
    b: float
    n: int = 0
    delta: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"kernel shape must be positive, got a={self.a}")
        if not self.b > 0:
            raise DomainError(f"kernel rate must be positive, got b={self.b}")
        if self.n < 0 or int(self.n) != self.n:
            raise DomainError(f"log order must be a nonnegative integer, got n={self.n}")


def as_integer(a: float) -> int | None:
    """Nearest integer if ``a`` is within INTEGER_TOL of a positive integer."""
    r = round(a)
    if r >= 1 and abs(a - r) <= INTEGER_TOL:
        return int(r)
    return None


# ---------------------------------------------------------------- Theta


def theta(delta: float, a: int, b: float, dps: int = 40) -> float:
    """Theta_delta(a, b) by the finite incomplete-gamma sum (integer ``a`` only)."""
    ai = as_integer(a)
    if ai is None:
        raise DomainError("theta needs a positive integer a; use kernel_K for real shapes")
    KernelRequest(a=ai, b=b, delta=delta)
    with mpmath.workdps(dps + int(ai * math.log10(2.0 + b)) + 10):
        bb = mpmath.mpf(b)
        d = mpmath.mpf(delta)
        total = mpmath.mpf(0)
        for k in range(ai):
            s = d + k + 1
            total += (
                math.comb(ai - 1, k)
                * (-1) ** (ai - 1 - k)
                * bb ** (-s)
                * mpmath.gammainc(s, bb)
            )
        return float(mpmath.e**bb * total)


# ---------------------------------------------------------------- J, integer path


def _gamma_expectation(g, shape: float, rate: float) -> float:
    """E[g(X)] for X ~ Gamma(shape, rate) by adaptive quadrature in t = rate X."""
    ls = math.lgamma(shape)
    sd = math.sqrt(shape)
    mode = max(shape - 1.0, 0.0)

    def f(t):
        if t <= 0.0:
            return 0.0 if shape > 1 else (g(0.0) if shape == 1 else 0.0)
        return g(t / rate) * math.exp((shape - 1) * math.log(t) - t - ls)

    pts = sorted({0.0, max(mode - 8 * sd, 0.0), mode, mode + sd, mode + 8 * sd, mode + 40 * sd + 60})
    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings fire at the 1e-14 level only
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi > lo:
                total += integrate.quad(f, lo, hi, epsabs=0.0, epsrel=2e-14, limit=400)[0]
        total += integrate.quad(f, pts[-1], math.inf, epsabs=0.0, epsrel=2e-14, limit=400)[0]
    return total


class JTable:
    """Integer-shape normalized J for a fixed rate ``b`` and every order p <= ``n``.

    Works with E_J(a, p) = J(a, b, p) b^a / Gamma(a) = E[ln^p(1+X)], X ~ Gamma(a, b),
    and the companion E_H(a, p) = E[ln^p(1+X)/(1+X)], X ~ Gamma(a+1, b).
    Integration by parts in x gives

        E_J(a+1, p) = E_J(a, p) + (p/b) E_H(a, p-1)
        E_H(a, p)   = (b/a) (E_J(a, p) - E_H(a-1, p))

    The first is a sum of positive terms.  The second is well conditioned
    forward for a > b and backward, E_H(a-1) = E_J(a) - (a/b) E_H(a), for
    a < b, so it is seeded by quadrature at a = min(ceil(b), a_max) and run
    in both directions.  Accuracy is about 1e-13 relative for all a, b.
    Thread-safe.
    """

    def __init__(self, b: float, n: int):
        KernelRequest(a=1, b=b, n=n)
        self.b = float(b)
        self.n = int(n)
        self._lock = threading.Lock()
        self._j1 = [1.0] + [
            _gamma_expectation(lambda x, p=p: math.log1p(x) ** p, 1.0, self.b) for p in range(1, self.n + 1)
        ]
        self._EJ = np.ones((self.n + 1, 2))
        self._EH = np.zeros((max(self.n, 1), 1))
        self._size = 0
        self._compute(16)

    def _compute(self, a_max: int) -> None:
        b, n = self.b, self.n
        A = int(a_max)
        a_s = min(int(math.ceil(b)), A)
        EJ = np.empty((n + 1, A + 1))
        EH = np.empty((max(n, 1), A + 1))
        EJ[:, 0] = np.nan
        EJ[0, 1:] = 1.0
        for p in range(n + 1):
            if p:
                # E_J(a, p) = E_J(1, p) + (p/b) sum_{k=1}^{a-1} E_H(k, p-1)
                EJ[p, 1] = self._j1[p]
                EJ[p, 2:] = self._j1[p] + (p / b) * np.cumsum(EH[p - 1, 1:A])
            if p == n:
                break
            h = EH[p]
            h[a_s] = _gamma_expectation(lambda x, p=p: math.log1p(x) ** p / (1 + x), a_s + 1.0, b)
            for a in range(a_s, 0, -1):
                h[a - 1] = EJ[p, a] - (a / b) * h[a]
            for a in range(a_s + 1, A + 1):
                h[a] = (b / a) * (EJ[p, a] - h[a - 1])
        self._EJ, self._EH, self._size = EJ, EH, A

    def _ensure(self, a_max: int) -> None:
        if a_max > self._size:
            self._compute(max(int(a_max), 2 * self._size))

    def normalized_array(self, a_max: int, p: int | None = None) -> np.ndarray:
        """E[ln^p(1+G_a)] for a = 0..a_max, G_a ~ Gamma(shape a, rate b); index 0 is NaN."""
        p = self.n if p is None else p
        if not 0 <= p <= self.n:
            raise DomainError("order exceeds table order")
        with self._lock:
            self._ensure(int(a_max))
            return self._EJ[p, : int(a_max) + 1].copy()

    def normalized(self, a: int, p: int | None = None) -> float:
        if a < 1:
            raise DomainError("shape must be a positive integer")
        return float(self.normalized_array(int(a), p)[int(a)])

    def log_value(self, a: int, p: int | None = None) -> float:
        """ln J(a, b, p)."""
        return math.log(self.normalized(a, p)) + math.lgamma(a) - a * math.log(self.b)


def j_normalized_mp(a: float, b: float, n: int, dps: int):
    """E[ln^n(1+G)], G ~ Gamma(a, b), as an mpmath number by quadrature at ``dps`` digits."""
    with mpmath.workdps(dps):
        a, b = mpmath.mpf(a), mpmath.mpf(b)
        lg = mpmath.loggamma(a)
        mode = (a - 1) / b if a > 1 else mpmath.mpf(0)
        sd = mpmath.sqrt(a) / b
        pts = sorted({mpmath.mpf(0), max(mode - 10 * sd, mpmath.mpf(0)), mode, mode + 10 * sd})
        pts = [p for i, p in enumerate(pts) if i == 0 or p > pts[i - 1]] + [mpmath.inf]

        def f(x):
            if x == 0:
                return mpmath.mpf(0)
            return mpmath.log1p(x) ** n * mpmath.exp(a * mpmath.log(b) + (a - 1) * mpmath.log(x) - b * x - lg)

        return mpmath.quad(f, pts)


@lru_cache(maxsize=64)
def _shared_table(b: float, n: int) -> JTable:
    return JTable(b, n)


def j_table(b: float, n: int) -> JTable:
    """Process-wide cached :class:`JTable` covering orders up to ``max(n, 4)``."""
    return _shared_table(float(b), max(int(n), 4))


# ---------------------------------------------------------------- half-range Hermite rule


@lru_cache(maxsize=1)
def _half_range_recurrence(nmax: int = K_MAX_NODES):
    """Recurrence coefficients of polynomials orthonormal for exp(-y^2) on [0, inf).

    Discretized Stieltjes procedure on a composite Gauss-Legendre grid.
    The grid carries sqrt(weight) inside the recurrence so nothing overflows.
    """
    width, per_panel, upper = 0.1, 40, 80.0
    gx, gw = np.polynomial.legendre.leggauss(per_panel)
    # zeros crowd the hard edge at y = 0 (spacing ~ 1/N^2): grade panels geometrically there
    graded = width * 2.0 ** -np.arange(30, 0, -1)
    edges = np.concatenate([[0.0], graded, np.arange(width, upper + width / 2, width)])
    h = np.diff(edges)[:, None]
    x = (edges[:-1][:, None] + (gx[None, :] + 1.0) * h / 2).ravel()
    w = (gw[None, :] * h / 2).ravel()
    # orthonormal functions are stored as mantissa * exp(shift) per grid point;
    # exp(-x^2/2) alone would underflow long before the largest zeros
    shift = -0.5 * x * x
    alpha = np.zeros(nmax)
    beta = np.zeros(nmax)
    beta[0] = math.sqrt(math.pi) / 2
    prev = np.zeros_like(x)
    cur = np.full_like(x, 1.0 / math.sqrt(beta[0]))
    big = math.log(1e100)
    for k in range(nmax):
        ww = w * np.exp(2.0 * shift)
        alpha[k] = np.dot(ww * x * cur, cur)
        nxt = (x - alpha[k]) * cur - (math.sqrt(beta[k]) * prev if k else 0.0)
        if k + 1 == nmax:
            break
        beta[k + 1] = np.dot(ww * nxt, nxt)
        prev, cur = cur, nxt / math.sqrt(beta[k + 1])
        grow = np.abs(cur) > 1e100
        if grow.any():
            cur[grow] *= 1e-100
            prev[grow] *= 1e-100
            shift[grow] += big
    return alpha, beta


@lru_cache(maxsize=16)
def half_range_hermite(N: int):
    """Nodes and log-weights of the N-point Gauss rule for exp(-y^2) on [0, inf).

    Returns
    -------
    nodes : ndarray
    log_weights : ndarray
        Natural logs of the weights (small weights keep full relative accuracy).
    """
    if not 1 <= N <= K_MAX_NODES:
        raise DomainError(f"N must be in [1, {K_MAX_NODES}]")
    alpha, beta = _half_range_recurrence()
    nodes = linalg.eigh_tridiagonal(alpha[:N], np.sqrt(beta[1:N]), eigvals_only=True)
    # Christoffel function with running rescale: w_k = 1 / sum_j p_j(t_k)^2
    log_scale = np.zeros(N)
    p_prev = np.zeros(N)
    p = np.full(N, 1.0 / math.sqrt(beta[0]))
    acc = p * p
    for j in range(1, N):
        p_new = ((nodes - alpha[j - 1]) * p - (math.sqrt(beta[j - 1]) * p_prev if j > 1 else 0.0)) / math.sqrt(beta[j])
        p_prev, p = p, p_new
        acc += p * p
        big = np.abs(p) > 1e100
        if big.any():
            p[big] *= 1e-100
            p_prev[big] *= 1e-100
            acc[big] *= 1e-200
            log_scale[big] += 200 * math.log(10.0)
    return nodes, -(np.log(acc) + log_scale)


def _k_rule(nu: int, mu_exp: float, a: float, N: int) -> float:
    """ln of the N-point rule value times Gamma-normalization: ln[K a^(mu+1)/Gamma(mu+1)]."""
    t, lw = half_range_hermite(N)
    x = t * t / a
    with np.errstate(divide="ignore"):
        lf = lw + (2 * mu_exp + 1) * np.log(t) + (nu * np.log(np.log1p(x)) if nu else 0.0)
    return math.log(2.0) + float(special.logsumexp(lf)) - math.lgamma(mu_exp + 1)


def kernel_K_normalized(nu: int, mu_exp: float, a: float, N: int = K_START_NODES, rel_tol: float = 1e-9) -> float:
    """K(nu, mu, a) * a^(mu+1) / Gamma(mu+1), i.e. E[ln^nu(1+G)] with G ~ Gamma(mu+1, rate a)."""
    if not mu_exp > -1:
        raise DomainError("mu_exp must exceed -1")
    KernelRequest(a=mu_exp + 1, b=a, n=nu)
    prev = math.exp(_k_rule(nu, mu_exp, a, N))
    while N < K_MAX_NODES:
        N = min(2 * N, K_MAX_NODES)
        cur = math.exp(_k_rule(nu, mu_exp, a, N))
        if abs(cur - prev) <= rel_tol * abs(cur):
            return cur
        prev = cur
    raise ConvergenceError(f"K({nu}, {mu_exp}, {a}) not stable at N={K_MAX_NODES}")


def kernel_K(nu: int, mu_exp: float, a: float, N: int = K_START_NODES, rel_tol: float = 1e-9) -> float:
    """int_0^inf ln^nu(1+x) e^(-ax) x^mu dx by the half-range Gauss rule after a x = y^2.

    Starts with ``N`` nodes and doubles until two successive rules agree to
    ``rel_tol`` (at most 960 nodes).
    """
    e = kernel_K_normalized(nu, mu_exp, a, N, rel_tol)
    return e * math.exp(math.lgamma(mu_exp + 1) - (mu_exp + 1) * math.log(a))


# ---------------------------------------------------------------- J dispatch


def kernel_J_normalized(a: float, b: float, n: int) -> float:
    """E[ln^n(1+G)], G ~ Gamma(shape a, rate b): J(a, b, n) b^a / Gamma(a)."""
    KernelRequest(a=a, b=b, n=n)
    if n == 0:
        return 1.0
    ai = as_integer(a)
    if ai is not None:
        return j_table(b, n).normalized(ai, n)
    return kernel_K_normalized(n, a - 1, b)


def kernel_J(a: float, b: float, n: int) -> float:
    """J(a, b, n) = int_0^inf ln^n(1+x) x^(a-1) e^(-bx) dx."""
    e = kernel_J_normalized(a, b, n)
    return e * math.exp(math.lgamma(a) - a * math.log(b))


# ---------------------------------------------------------------- Q


def kernel_Q_normalized(a: float, b: float, n: int) -> float:
    """E[ln^n G] for G ~ Gamma(shape a+1, rate b), i.e. Q(a, b, n) b^(a+1) / Gamma(a+1)."""
    if not a > -1:
        raise DomainError("kernel_Q requires a > -1")
    KernelRequest(a=a + 1, b=b, n=n)
    lnb = math.log(b)
    return sum(
        math.comb(n, k) * (-lnb) ** (n - k) * (specfun.log_power_gamma_ratio(a + 1, k) if k else 1.0)
        for k in range(n + 1)
    )


def kernel_Q_normalized_mp(a: float, b: float, n: int, dps: int):
    """Extended-precision :func:`kernel_Q_normalized`."""
    with mpmath.workdps(dps):
        lnb = mpmath.log(mpmath.mpf(b))
        return mpmath.fsum(
            math.comb(n, k) * (-lnb) ** (n - k) * (specfun.log_power_gamma_ratio_mp(a + 1, k, dps) if k else 1)
            for k in range(n + 1)
        )


def kernel_Q(a: float, b: float, n: int) -> float:
    """Q(a, b, n) by the Leibniz sum over log_power_gamma(a+1, k)."""
    if not a > -1:
        raise DomainError("kernel_Q requires a > -1")
    KernelRequest(a=a + 1, b=b, n=n)
    lnb = math.log(b)
    scale = b ** -(a + 1)
    return sum(
        math.comb(n, k) * (-lnb) ** (n - k) * scale * specfun.log_power_gamma(a + 1, k)
        for k in range(n + 1)
    )
