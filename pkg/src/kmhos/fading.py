"""Channel models for the aggregated SNR gamma = sum_i gamma_i and their PDFs.

Four models are supported:

* :class:`IidKappaMu` - M i.i.d. squared kappa-mu variables, per-band mean ``omega``.
* :class:`InidKappaMu` - independent, non-identical squared kappa-mu variables
  (Laguerre-series PDF with coefficients c_k).
* :class:`IidKappaMuShadowed` - M i.i.d. squared kappa-mu shadowed variables.
* :class:`CorrelatedKappaMuShadowed` - squared kappa-mu shadowed variables whose
  dominant components share correlated shadowing (eigenvalue series, delta_k).

For the shadowed models ``gamma_bar`` is the mean of the *sum*.  All SNRs
are linear.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import mpmath
import numpy as np
from scipy import special

from .errors import ConvergenceError, DivergenceError, DomainError
from .series import SeriesControl, sum_pointwise

PDF_CONTROL = SeriesControl(tol=1e-12, max_terms=20000)


# ---------------------------------------------------------------- parameter types


@dataclass(frozen=True)
class BandParams:
    """Per-band kappa-mu parameters; ``omega`` is the band's mean SNR (kappa-mu models only)."""

    kappa: float
    mu: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if not self.omega > 0:
            raise DomainError(f"omega must be > 0, got {self.omega}")


@dataclass(frozen=True)
class ShadowParams:
    """Nakagami-m shadowing shape of the dominant components."""

    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"m must be > 0, got {self.m}")


@dataclass(frozen=True)
class CorrelationSpec:
    """Correlation of the dominant components: explicit matrix or exponential rho^|p-q|."""

    rho_matrix: tuple | None = None
    exponential: float | None = None

    def __post_init__(self):
        if (self.rho_matrix is None) == (self.exponential is None):
            raise DomainError("give exactly one of rho_matrix or exponential")
        if self.exponential is not None and not 0 <= self.exponential <= 1:
            raise DomainError("exponential rho must lie in [0, 1]")
        if self.rho_matrix is not None:
            r = np.asarray(self.rho_matrix, dtype=float)
            object.__setattr__(self, "rho_matrix", tuple(map(tuple, r)))
            if r.ndim != 2 or r.shape[0] != r.shape[1]:
                raise DomainError("rho_matrix must be square")
            if not np.allclose(r, r.T, atol=0, rtol=0):
                raise DomainError("rho_matrix must be symmetric")
            if not np.all(np.diag(r) == 1):
                raise DomainError("rho_matrix must have a unit diagonal")
            if np.any(r < 0) or np.any(r > 1):
                raise DomainError("rho entries must lie in [0, 1]")

    def rho(self, M: int) -> np.ndarray:
        if self.rho_matrix is not None:
            r = np.asarray(self.rho_matrix)
            if r.shape != (M, M):
                raise DomainError(f"rho_matrix is {r.shape}, expected ({M}, {M})")
            return r
        idx = np.arange(M)
        return self.exponential ** np.abs(idx[:, None] - idx[None, :])

    def C(self, M: int) -> np.ndarray:
        """Matrix with unit diagonal and sqrt(rho_pq) off the diagonal."""
        return np.sqrt(self.rho(M))


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class IidKappaMu:
    band: BandParams
    M: int

    def __post_init__(self):
        _check_M(self.M)

    @property
    def mean(self) -> float:
        return self.M * self.band.omega


@dataclass(frozen=True)
class InidKappaMu:
    bands: tuple
    xi: float | None = None
    beta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        _check_M(len(self.bands))
        for v in (self.xi, self.beta):
            if v is not None and not v > 0:
                raise DomainError("xi and beta must be positive")

    @property
    def M(self) -> int:
        return len(self.bands)

    @property
    def mean(self) -> float:
        return sum(b.omega for b in self.bands)


@dataclass(frozen=True)
class IidKappaMuShadowed:
    band: BandParams
    shadow: ShadowParams
    M: int
    gamma_bar: float

    def __post_init__(self):
        _check_M(self.M)
        if not self.gamma_bar > 0:
            raise DomainError("gamma_bar must be positive")

    @property
    def mean(self) -> float:
        return self.gamma_bar


@dataclass(frozen=True)
class CorrelatedKappaMuShadowed:
    bands: tuple
    shadow: ShadowParams
    correlation: CorrelationSpec
    gamma_bar: float

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        _check_M(len(self.bands))
        if not self.gamma_bar > 0:
            raise DomainError("gamma_bar must be positive")
        self.correlation.rho(len(self.bands))  # shape check

    @property
    def M(self) -> int:
        return len(self.bands)

    @property
    def mean(self) -> float:
        return self.gamma_bar


ChannelModel = Union[IidKappaMu, InidKappaMu, IidKappaMuShadowed, CorrelatedKappaMuShadowed]


def _check_M(M) -> None:
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")


# ---------------------------------------------------------------- eigenvalues


def jacobi_eigvalsh(a: np.ndarray, rel_tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by the cyclic Jacobi method (ascending)."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T):
        raise DomainError("matrix must be square and symmetric")
    scale = np.abs(a).max() or 1.0
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= rel_tol * 1e-3 * scale:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    raise ConvergenceError("Jacobi iteration did not converge")


# ---------------------------------------------------------------- i.i.d. kappa-mu


def _log_gamma_pdf(g, shape, rate):
    """ln of the gamma density with the given shape and rate (vectorized)."""
    g = np.asarray(g, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.log(g)
        out = shape * math.log(rate) + (shape - 1) * lg - rate * g - special.gammaln(shape)
    if np.ndim(shape) == 0 and shape == 1:
        out = np.where(g == 0, math.log(rate), out)
    return out


def pdf_iid_km(gamma, band: BandParams, M: int, ctrl: SeriesControl = PDF_CONTROL):
    """PDF of the sum of M i.i.d. squared kappa-mu variables (elementary series form).

    Each term is exp(-mu M kappa) (mu kappa M)^i / i! times a gamma density with
    shape mu M + i and rate mu (1 + kappa) / omega.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("gamma must be nonnegative")
    mu, kap = band.mu, band.kappa
    rate = mu * (1 + kap) / band.omega
    lam = mu * kap * M
    if lam == 0:
        return np.exp(_log_gamma_pdf(g, mu * M, rate))

    def term(i):
        lw = -lam + i * math.log(lam) - math.lgamma(i + 1)
        return np.exp(lw + _log_gamma_pdf(g, mu * M + i, rate))

    return sum_pointwise(term, g.shape, ctrl, min_terms=int(lam) + 1)


# ---------------------------------------------------------------- i.n.i.d. kappa-mu


@dataclass
class InidCoeffs:
    """Laguerre-series coefficients of the i.n.i.d. kappa-mu sum.

    ``c`` is extended lazily (extended precision, then cached as floats).
    """

    xi: float
    beta: float
    U: float
    chi: tuple
    a_seq: tuple
    mu_seq: tuple
    _c: list = field(default_factory=list, repr=False)
    _d: list = field(default_factory=list, repr=False)
    _w: list = field(default_factory=list, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    dps: int = 50

    def _d_mp(self, j: int):
        beta, xi, U = (mpmath.mpf(v) for v in (self.beta, self.xi, self.U))
        s1 = mpmath.fsum(
            mpmath.mpf(ch) * a * (beta - a) ** (j - 1) * (xi / (beta * xi + a * (U - xi))) ** (j + 1)
            for ch, a in ((mpmath.mpf(c), mpmath.mpf(a)) for c, a in zip(self.chi, self.a_seq))
        )
        s2 = mpmath.fsum(
            mpmath.mpf(m) * ((1 - a / beta) / (1 + (a / beta) * (U / xi - 1))) ** j
            for m, a in ((mpmath.mpf(m), mpmath.mpf(a)) for m, a in zip(self.mu_seq, self.a_seq))
        )
        return -j * beta * U / (2 * xi) * s1 + s2

    def _c0_mp(self):
        beta, xi, U = (mpmath.mpf(v) for v in (self.beta, self.xi, self.U))
        expo = mpmath.fsum(
            mpmath.mpf(ch) * a * (U - xi) / (beta * xi + a * (U - xi))
            for ch, a in ((mpmath.mpf(c), mpmath.mpf(a)) for c, a in zip(self.chi, self.a_seq))
        )
        prod = mpmath.fprod((1 + a / beta * (U / xi - 1)) ** (-mpmath.mpf(m)) for m, a in ((m, mpmath.mpf(a)) for m, a in zip(self.mu_seq, self.a_seq)))
        return (U / xi) ** U * mpmath.exp(-expo / 2) * prod

    def extend(self, k_max: int) -> None:
        with self._lock, mpmath.workdps(self.dps):
            if not self._c:
                self._c.append(self._c0_mp())
                self._d.append(mpmath.mpf(0))
            growth = 0
            for k in range(len(self._c), k_max + 1):
                self._d.append(self._d_mp(k))
                ck = mpmath.fsum(self._c[j] * self._d[k - j] for j in range(k)) / k
                self._c.append(ck)
                growth = growth + 1 if abs(ck) > abs(self._c[k - 1]) else 0
                if growth == 10:
                    warnings.warn(
                        f"|c_k| grew for 10 consecutive k (k={k}); xi/beta may give a divergent expansion",
                        RuntimeWarning,
                        stacklevel=3,
                    )

    def c_mp(self, k: int):
        if k >= len(self._c):
            self.extend(k)
        return self._c[k]

    def c(self, k: int) -> float:
        return float(self.c_mp(k))

    def d(self, j: int) -> float:
        if j >= len(self._d):
            self.extend(j)
        return float(self._d[j])

    @property
    def ratios(self) -> np.ndarray:
        """Geometric ratios (1 - a_i/beta)/(1 + (a_i/beta)(U/xi - 1)) of the Laguerre form."""
        a = np.asarray(self.a_seq)
        return (1 - a / self.beta) / (1 + a / self.beta * (self.U / self.xi - 1))

    @property
    def mixture_ratios(self) -> np.ndarray:
        """Ratios 1 - beta/a_i governing decay of the gamma-mixture weights."""
        return 1 - self.beta / np.asarray(self.a_seq)

    def weights(self, q_max: int) -> np.ndarray:
        """Gamma-mixture weights w_0..w_q_max.

        w_q = sum_{k>=q} c_k (-k)_q/q! (U/xi)^q, i.e. the Taylor coefficients of
        C(1 - (U/xi) z) where C is the generating function of c_k.  The
        density is then sum_q w_q Gamma(U+q, scale 2 beta).  Obtained from
        the log-derivative of C in closed form, so no c_k are needed and the
        result is valid whenever all |1 - beta/a_i| < 1, even where the
        k-series itself diverges.
        """
        with self._lock:
            w = self._w
            if len(w) > q_max:
                return np.asarray(w[: q_max + 1]) * math.exp(self._w_log0)
            a = np.asarray(self.a_seq)
            chi = np.asarray(self.chi)
            mu = np.asarray(self.mu_seq)
            beta, t = self.beta, self.U / self.xi
            sig = 1 - beta / a
            if np.any(np.abs(sig) >= 1):
                raise DivergenceError("gamma-mixture weights diverge: need beta < 2 min a_i")
            if not w:
                den = beta + a * (t - 1)
                self._g = -0.5 * beta * chi / den
                rho = (beta - a) / den
                self._w_log0 = (
                    float(mpmath.log(self._c0_mp()))
                    - float(np.sum(mu * np.log1p(-rho)))
                    + float(np.sum(self._g))
                )
                self._e = [0.0]
                w.append(1.0)
            g = self._g
            for q in range(len(w), q_max + 1):
                self._e.append(float(np.sum(mu * sig**q) + q * np.sum(g * (sig - t) * sig ** (q - 1))))
                e = np.asarray(self._e[1 : q + 1])
                wq = float(np.dot(e, np.asarray(w[q - 1 :: -1]))) / q
                w.append(wq)
                if abs(wq) > 1e250:
                    w[:] = [v * 1e-250 for v in w]
                    self._w_log0 += 250 * math.log(10)
            return np.asarray(w[: q_max + 1]) * math.exp(self._w_log0)


def default_beta(bands: Sequence[BandParams]) -> float:
    """Smallest a_i: makes every gamma-mixture weight nonnegative."""
    return min(b.omega / (2 * b.mu * (1 + b.kappa)) for b in bands)


def inid_coeffs(bands: Sequence[BandParams], xi: float | None = None, beta: float | None = None, k_max: int = 0) -> InidCoeffs:
    """Build the c_k / d_j machinery for independent non-identical kappa-mu bands."""
    bands = tuple(bands)
    if not bands:
        raise DomainError("need at least one band")
    U = sum(b.mu for b in bands)
    xi = U if xi is None else xi
    beta = default_beta(bands) if beta is None else beta
    if not (xi > 0 and beta > 0):
        raise DomainError("xi and beta must be positive")
    co = InidCoeffs(
        xi=float(xi),
        beta=float(beta),
        U=float(U),
        chi=tuple(2 * b.mu * b.kappa for b in bands),
        a_seq=tuple(b.omega / (2 * b.mu * (1 + b.kappa)) for b in bands),
        mu_seq=tuple(b.mu for b in bands),
    )
    if np.max(np.abs(co.ratios)) >= 1 and np.max(np.abs(co.mixture_ratios)) >= 1:
        warnings.warn(
            "neither the Laguerre nor the gamma-mixture form converges for this xi/beta",
            RuntimeWarning,
            stacklevel=2,
        )
    co.extend(k_max)
    return co


def coeffs_for(model: InidKappaMu) -> InidCoeffs:
    return _inid_cached(model)


_INID_CACHE: dict = {}
_INID_LOCK = threading.Lock()


def _inid_cached(model: InidKappaMu) -> InidCoeffs:
    with _INID_LOCK:
        co = _INID_CACHE.get(model)
        if co is None:
            co = inid_coeffs(model.bands, model.xi, model.beta)
            if len(_INID_CACHE) > 256:
                _INID_CACHE.clear()
            _INID_CACHE[model] = co
        return co


def pdf_inid_km(gamma, coeffs: InidCoeffs, ctrl: SeriesControl = PDF_CONTROL, form: str = "auto"):
    """PDF of the sum of i.n.i.d. squared kappa-mu variables.

    Parameters
    ----------
    form : {"auto", "mixture", "laguerre"}
        ``"mixture"`` sums the gamma mixture sum_q w_q Gamma(U+q, 2 beta)
        (the Laguerre series with its two sums exchanged); ``"laguerre"``
        sums over k with L_k evaluated by its three-term recurrence (the
        expanded finite (-k)_q sums cancel catastrophically in double
        precision).  ``"auto"`` picks the mixture whenever it converges.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("gamma must be nonnegative")
    U, beta, xi = coeffs.U, coeffs.beta, coeffs.xi
    if form == "auto":
        form = "mixture" if np.max(np.abs(coeffs.mixture_ratios)) < 1 else "laguerre"
    if form == "mixture":
        rate = 1 / (2 * beta)
        cache = {"w": coeffs.weights(64)}

        def mix_term(q):
            if q >= len(cache["w"]):
                cache["w"] = coeffs.weights(2 * q)
            return cache["w"][q] * np.exp(_log_gamma_pdf(g, U + q, rate))

        return sum_pointwise(mix_term, g.shape, ctrl)
    if form != "laguerre":
        raise DomainError(f"unknown form {form!r}")
    alpha = U - 1
    y = U * g / (2 * beta * xi)
    state = {"prev": np.zeros_like(y), "cur": np.ones_like(y), "fac": 1.0, "peak": np.zeros_like(y)}

    def term(k):
        # L_k^(U-1)(y) by recurrence; fac = k!/(U)_k
        if k == 1:
            state["prev"], state["cur"] = state["cur"], 1 + alpha - y
        elif k > 1:
            nxt = ((2 * k - 1 + alpha - y) * state["cur"] - (k - 1 + alpha) * state["prev"]) / k
            state["prev"], state["cur"] = state["cur"], nxt
        if k >= 1:
            state["fac"] *= k / (U + k - 1)
        t = coeffs.c(k) * state["fac"] * state["cur"]
        state["peak"] = np.maximum(state["peak"], np.abs(t))
        return t

    series = sum_pointwise(term, g.shape, ctrl)
    if np.any(state["peak"] > 1e10 * np.abs(series)):
        raise ConvergenceError("Laguerre series lost more than 10 digits to cancellation; choose beta <= min a_i")
    base = np.exp(_log_gamma_pdf(g, U, 1 / (2 * beta)))
    return base * series


# ---------------------------------------------------------------- i.i.d. kappa-mu shadowed


def _kms_iid_params(band: BandParams, shadow: ShadowParams, M: int, gamma_bar: float):
    mu, kap, m = band.mu, band.kappa, shadow.m
    rate = mu * M * (1 + kap) / gamma_bar
    p = mu * kap / (mu * kap + m)  # negative-binomial success ratio
    return mu * M, m * M, rate, p


def pdf_iid_kms(gamma, band: BandParams, shadow: ShadowParams, M: int, gamma_bar: float, ctrl: SeriesControl = PDF_CONTROL):
    """PDF of the sum of M i.i.d. squared kappa-mu shadowed variables (elementary series).

    Term q is a negative-binomial weight (mM)_q/q! p^q (1-p)^(mM) times a gamma
    density with shape mu M + q and rate mu M (1 + kappa) / gamma_bar.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("gamma must be nonnegative")
    shape0, r, rate, p = _kms_iid_params(band, shadow, M, gamma_bar)
    if p == 0:
        return np.exp(_log_gamma_pdf(g, shape0, rate))
    lp, l1p = math.log(p), math.log1p(-p)

    def term(q):
        lw = math.lgamma(r + q) - math.lgamma(r) - math.lgamma(q + 1) + q * lp + r * l1p
        return np.exp(lw + _log_gamma_pdf(g, shape0 + q, rate))

    mode = int(r * p / (1 - p)) + 1
    return sum_pointwise(term, g.shape, ctrl, min_terms=mode)


# ---------------------------------------------------------------- correlated kappa-mu shadowed


@dataclass
class CorrCoeffs:
    """Eigenvalue-series coefficients of the correlated kappa-mu shadowed sum."""

    lambdas: np.ndarray
    lambda_min: float
    A: float
    eta: float
    U: float
    m: float
    M: int
    _delta: list = field(default_factory=list, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _mix: tuple | None = field(default=None, repr=False)

    @property
    def ratios(self) -> np.ndarray:
        return 1.0 - self.lambda_min / self.lambdas

    def extend(self, k_max: int) -> None:
        with self._lock:
            if not self._delta:
                self._delta.append(1.0)
            have = len(self._delta)
            if k_max < have:
                return
            g = np.array([np.sum(self.ratios**q) for q in range(k_max + 1)])
            d = np.zeros(k_max + 1)
            d[:have] = self._delta
            for k in range(have - 1, k_max):
                # delta_{k+1} = m/(k+1) sum_{q=1}^{k+1} g_q delta_{k+1-q}
                d[k + 1] = self.m / (k + 1) * np.dot(g[1 : k + 2], d[k::-1])
            self._delta[:] = list(d)

    def delta(self, k: int) -> float:
        if k >= len(self._delta):
            self.extend(max(k, 2 * len(self._delta)))
        return self._delta[k]

    def log_D(self, k: int) -> float:
        """ln D_k = ln delta_k - (mM + k) ln(1 + lambda) - ln Gamma(U)."""
        d = self.delta(k)
        if d <= 0:
            return -math.inf
        return math.log(d) - (self.m * self.M + k) * math.log1p(self.lambda_min) - math.lgamma(self.U)

    def mixture(self, tol: float = 1e-13):
        """Weights w_q with f(gamma) = sum_q w_q Gamma(U + q, rate).pdf(gamma).

        Same double series, outer and inner sums exchanged (all terms are
        positive).  The k-series is cut once the neglected probability mass,
        1 - A sum delta_k, is below ``tol``.
        """
        with self._lock:
            if self._mix is not None and self._mix[0] <= tol:
                return self._mix[1]
        p = self.lambda_min / (1 + self.lambda_min)
        mass = 0.0
        k = 0
        rows = []
        while True:
            wk = self.A * self.delta(k)
            mass += wk
            rows.append(wk)
            if 1.0 - mass <= tol or k > 200000:
                break
            k += 1
        if 1.0 - mass > tol:
            raise ConvergenceError("correlated mixture mass did not converge")
        kk = len(rows)
        a_max = self.m * self.M + kk
        qmax = int(a_max * p / (1 - p) + 12 * math.sqrt(a_max * p) / (1 - p) + 50)
        q = np.arange(qmax + 1)
        w = np.zeros(qmax + 1)
        for k, wk in enumerate(rows):
            # negative-binomial(mM + k, p) over q
            n = self.m * self.M + k
            lpmf = special.gammaln(n + q) - special.gammaln(n) - special.gammaln(q + 1) + q * math.log(p) + n * math.log1p(-p)
            w += wk * np.exp(lpmf)
        with self._lock:
            self._mix = (tol, w)
        return w


def corr_coeffs(bands: Sequence[BandParams], shadow: ShadowParams, correlation: CorrelationSpec) -> CorrCoeffs:
    """Eigenvalues of DC, A, eta, U and the delta_k recursion."""
    bands = tuple(bands)
    M = len(bands)
    if any(b.kappa <= 0 for b in bands):
        raise DomainError("correlated model needs kappa_i > 0 (D would be singular); use kappa >= 1e-6")
    C = correlation.C(M)
    if jacobi_eigvalsh(C)[0] <= 0:
        raise DomainError("correlation matrix C is not positive definite")
    dvec = np.array([b.mu * b.kappa / shadow.m for b in bands])
    sd = np.sqrt(dvec)
    lam = jacobi_eigvalsh(sd[:, None] * C * sd[None, :])
    if lam[0] <= 0:
        raise DomainError("DC has a nonpositive eigenvalue")
    lmin = float(lam[0])
    A = float(np.prod((lmin / lam) ** shadow.m))
    co = CorrCoeffs(
        lambdas=lam,
        lambda_min=lmin,
        A=A,
        eta=float(sum(b.mu * (1 + b.kappa) for b in bands)),
        U=float(sum(b.mu for b in bands)),
        m=float(shadow.m),
        M=M,
    )
    co.extend(64)
    return co


_CORR_CACHE: dict = {}


def corr_coeffs_for(model: CorrelatedKappaMuShadowed) -> CorrCoeffs:
    key = (model.bands, model.shadow, model.correlation)
    with _INID_LOCK:
        co = _CORR_CACHE.get(key)
        if co is None:
            co = corr_coeffs(model.bands, model.shadow, model.correlation)
            if len(_CORR_CACHE) > 256:
                _CORR_CACHE.clear()
            _CORR_CACHE[key] = co
        return co


def pdf_corr_kms(gamma, coeffs: CorrCoeffs, gamma_bar: float, ctrl: SeriesControl = PDF_CONTROL):
    """PDF of the sum of correlated squared kappa-mu shadowed variables.

    Evaluates the double series as a gamma mixture: for outer index k the
    inner q-series is a negative-binomial(mM + k, lambda/(1 + lambda))
    weighted sum of gamma densities with shape U + q and rate eta/gamma_bar.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise DomainError("gamma must be nonnegative")
    w = coeffs.mixture(min(ctrl.tol, 1e-10))
    rate = coeffs.eta / gamma_bar
    keep = np.nonzero(w > 0)[0]
    out = np.zeros(g.shape)
    for q in keep:
        out = out + w[q] * np.exp(_log_gamma_pdf(g, coeffs.U + q, rate))
    return out


# ---------------------------------------------------------------- dispatch


def model_pdf(model: ChannelModel, ctrl: SeriesControl = PDF_CONTROL):
    """Return a vectorized PDF callable for any channel model."""
    if isinstance(model, IidKappaMu):
        return lambda g: pdf_iid_km(g, model.band, model.M, ctrl)
    if isinstance(model, InidKappaMu):
        co = coeffs_for(model)
        return lambda g: pdf_inid_km(g, co, ctrl)
    if isinstance(model, IidKappaMuShadowed):
        return lambda g: pdf_iid_kms(g, model.band, model.shadow, model.M, model.gamma_bar, ctrl)
    if isinstance(model, CorrelatedKappaMuShadowed):
        co = corr_coeffs_for(model)
        return lambda g: pdf_corr_kms(g, co, model.gamma_bar, ctrl)
    raise TypeError(f"unknown model {type(model).__name__}")


# ---------------------------------------------------------------- SNR sweeps


def at_snr(model: ChannelModel, snr_db: float, inid_mode: str = "all") -> ChannelModel:
    """Copy of ``model`` with its average SNR set to ``snr_db``.

    For the i.i.d. kappa-mu model this is the per-band Omega; for the shadowed
    models it is gamma_bar.  For i.n.i.d. bands ``inid_mode="first"`` sets
    Omega_1 and leaves the other bands alone, while ``"all"`` sets Omega_1
    and rescales every band by the same factor.
    """
    lin = 10.0 ** (snr_db / 10.0)
    if isinstance(model, IidKappaMu):
        return replace(model, band=replace(model.band, omega=lin))
    if isinstance(model, InidKappaMu):
        first = model.bands[0]
        if inid_mode == "first":
            bands = (replace(first, omega=lin),) + model.bands[1:]
        elif inid_mode == "all":
            f = lin / first.omega
            bands = tuple(replace(b, omega=b.omega * f) for b in model.bands)
        else:
            raise DomainError(f"unknown inid_mode {inid_mode!r}")
        return replace(model, bands=bands)
    if isinstance(model, (IidKappaMuShadowed, CorrelatedKappaMuShadowed)):
        return replace(model, gamma_bar=lin)
    raise TypeError(f"unknown model {type(model).__name__}")
