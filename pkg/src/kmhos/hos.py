"""Higher-order statistics of the aggregated capacity.

Lambda_n = E[log2^n(1 + gamma)] for the four channel models, by

* exact series (one gamma-mixture series per model, each term a J kernel),
* high-SNR series (ln(1+g) replaced by ln g, Q kernel),
* low-SNR series (Stirling expansion of ln^n(1+z) against the moments),
* direct quadrature of the defining integral (the oracle).

All four models share one structure: the density is a mixture of gamma
densities with a common rate, Gamma(shape0 + j, rate), so every exact or
high-SNR term is a mixture weight times E[ln^n(1+G_j)] (or E[ln^n G_j]).
Internal sums run in nats^n and are converted with the exact factor
1/ln^n 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import mpmath
import numpy as np
from scipy import special

from . import kernels, specfun
from .errors import ConvergenceError, DivergenceError, DomainError
from .fading import (
    PDF_CONTROL,
    ChannelModel,
    CorrelatedKappaMuShadowed,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    at_snr,
    coeffs_for,
    corr_coeffs_for,
    model_pdf,
)
from .series import SeriesAccumulator, SeriesControl

LN2 = math.log(2.0)
REGIMES = ("exact", "high_snr", "low_snr", "oracle")


@dataclass(frozen=True)
class HosResult:
    """One higher-order capacity statistic.

    Attributes
    ----------
    value : float
        Lambda_n in bits^n.
    n : int
        Order of the statistic.
    terms_used : int
        Outer-series terms needed to reach the requested tolerance.
    tail_estimate : float
        Geometric bound on the neglected tail (bits^n); for the oracle, the
        bound on the integral beyond the truncation point.
    regime : str
        One of ``exact``, ``high_snr``, ``low_snr``, ``oracle``.
    """

    value: float
    n: int
    terms_used: int
    tail_estimate: float
    regime: str


def _check_order(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    return int(n)


# ---------------------------------------------------------------- per-shape log moments


class _LogMoments:
    """E[ln^n(1+G_j)] ("J") or E[ln^n G_j] ("Q") for G_j ~ Gamma(shape0 + j, rate)."""

    def __init__(self, shape0: float, rate: float, n: int, kind: str):
        self.shape0, self.rate, self.n, self.kind = float(shape0), float(rate), n, kind
        self._int = kernels.as_integer(shape0) if kind == "J" else None
        self._vals = np.empty(0)

    def _one(self, a: float) -> float:
        if self.kind == "J":
            return kernels.kernel_J_normalized(a, self.rate, self.n)
        return kernels.kernel_Q_normalized(a - 1, self.rate, self.n)

    def upto(self, jmax: int) -> np.ndarray:
        if len(self._vals) <= jmax:
            size = max(jmax + 1, 2 * len(self._vals), 16)
            if self._int is not None:
                table = kernels.j_table(self.rate, self.n)
                self._vals = table.normalized_array(self._int + size - 1, self.n)[self._int :].copy()
            else:
                ext = [self._one(self.shape0 + j) for j in range(len(self._vals), size)]
                self._vals = np.concatenate([self._vals, ext])
        return self._vals[: jmax + 1]

    def __getitem__(self, j: int) -> float:
        return float(self.upto(j)[j])


def _nb_log_pmf(r: float, p: float, q: np.ndarray) -> np.ndarray:
    """Negative-binomial log pmf: (r)_q / q! p^q (1-p)^r."""
    return special.gammaln(r + q) - special.gammaln(r) - special.gammaln(q + 1) + q * math.log(p) + r * math.log1p(-p)


def _nb_upper(r: float, p: float) -> int:
    mean = r * p / (1 - p)
    sd = math.sqrt(r * p) / (1 - p)
    return int(mean + 15 * sd + 40)


# ---------------------------------------------------------------- outer series per model


def _terms_iid_km(model: IidKappaMu, E: _LogMoments) -> Iterator[float]:
    lam = model.band.mu * model.band.kappa * model.M
    if lam == 0:
        yield E[0]
        return
    llam = math.log(lam)
    i = 0
    while True:
        yield math.exp(-lam + i * llam - math.lgamma(i + 1)) * E[i]
        i += 1


def _terms_iid_kms(model: IidKappaMuShadowed, E: _LogMoments) -> Iterator[float]:
    _, r, _, p = _kms_params(model)
    if p == 0:
        yield E[0]
        return
    q = 0
    while True:
        yield math.exp(float(_nb_log_pmf(r, p, np.array(q)))) * E[q]
        q += 1


def _terms_inid_mixture(model: InidKappaMu, E: _LogMoments) -> Iterator[float]:
    co = coeffs_for(model)
    w = co.weights(64)
    q = 0
    while True:
        if q >= len(w):
            w = co.weights(2 * q)
        yield float(w[q]) * E[q]
        q += 1


def _terms_inid_laguerre(model: InidKappaMu, n: int, kind: str) -> Iterator[float]:
    """k-ordered series with its finite alternating inner sums, in extended precision.

    Used only when the gamma-mixture weights diverge (beta >= 2 min a_i).
    """
    co = coeffs_for(model)
    U = co.U
    ui = kernels.as_integer(U)
    if ui is None:
        raise DomainError("Laguerre-ordered evaluation needs an integer U; choose beta < 2 min a_i")
    t = mpmath.mpf(co.U) / mpmath.mpf(co.xi)
    rate = 1 / (2 * co.beta)
    k = 0
    while True:
        ck = co.c_mp(k)
        digits = 25 + int(k * math.log10(1 + float(t))) + max(0, int(mpmath.log10(abs(ck) + 1)))
        with mpmath.workdps(digits):
            acc = mpmath.mpf(0)
            for q in range(k + 1):
                a = ui + q
                if kind == "J":
                    e = kernels.j_normalized_mp(a, rate, n, digits)
                else:
                    e = kernels.kernel_Q_normalized_mp(a - 1, rate, n, digits)
                acc += (-1) ** q * mpmath.binomial(k, q) * t**q * e
            yield float(ck * acc)
        k += 1


def _terms_corr(model: CorrelatedKappaMuShadowed, E: _LogMoments) -> Iterator[float]:
    co = corr_coeffs_for(model)
    x = co.lambda_min / (1 + co.lambda_min)
    k = 0
    while True:
        r = co.m * co.M + k
        qhi = _nb_upper(r, x)
        pmf = np.exp(_nb_log_pmf(r, x, np.arange(qhi + 1)))
        inner = float(np.dot(pmf, E.upto(qhi)))
        yield co.A * co.delta(k) * inner
        k += 1


def _kms_params(model: IidKappaMuShadowed):
    b, m, M = model.band, model.shadow.m, model.M
    rate = b.mu * M * (1 + b.kappa) / model.gamma_bar
    p = b.mu * b.kappa / (b.mu * b.kappa + m)
    return b.mu * M, m * M, rate, p


def _mixture_base(model: ChannelModel) -> tuple[float, float]:
    """(shape0, rate) of the gamma components."""
    if isinstance(model, IidKappaMu):
        b = model.band
        return b.mu * model.M, b.mu * (1 + b.kappa) / b.omega
    if isinstance(model, InidKappaMu):
        co = coeffs_for(model)
        return co.U, 1 / (2 * co.beta)
    if isinstance(model, IidKappaMuShadowed):
        shape0, _, rate, _ = _kms_params(model)
        return shape0, rate
    if isinstance(model, CorrelatedKappaMuShadowed):
        co = corr_coeffs_for(model)
        return co.U, co.eta / model.gamma_bar
    raise TypeError(f"unknown model {type(model).__name__}")


def _outer_terms(model: ChannelModel, n: int, kind: str) -> Iterator[float]:
    shape0, rate = _mixture_base(model)
    E = _LogMoments(shape0, rate, n, kind)
    if isinstance(model, IidKappaMu):
        return _terms_iid_km(model, E)
    if isinstance(model, InidKappaMu):
        co = coeffs_for(model)
        if np.max(np.abs(co.mixture_ratios)) < 1:
            return _terms_inid_mixture(model, E)
        if np.max(np.abs(co.ratios)) < 1:
            return _terms_inid_laguerre(model, n, kind)
        raise DivergenceError("neither series ordering converges for this xi/beta")
    if isinstance(model, IidKappaMuShadowed):
        return _terms_iid_kms(model, E)
    return _terms_corr(model, E)


def _run(terms: Iterator[float], n: int, ctrl: SeriesControl, regime: str, asymptotic: bool = False) -> HosResult:
    scale = LN2**-n
    acc = SeriesAccumulator(ctrl, asymptotic=asymptotic)
    acc.run(t * scale for t in terms)
    return HosResult(
        value=acc.total,
        n=n,
        terms_used=acc.terms_used,
        tail_estimate=acc.tail_estimate,
        regime=regime,
    )


# ---------------------------------------------------------------- public operations


def hos_exact(model: ChannelModel, n: int, ctrl: SeriesControl | None = None) -> HosResult:
    """Exact Lambda_n from the model's series representation.

    Parameters
    ----------
    model : ChannelModel
    n : int
        Order, n >= 0.  n = 0 returns exactly 1.
    ctrl : SeriesControl, optional
        Truncation settings for the outer series.

    Raises
    ------
    ConvergenceError
        The outer series did not converge within ``ctrl.max_terms``.
    """
    n = _check_order(n)
    ctrl = ctrl or SeriesControl()
    if n == 0:
        return HosResult(1.0, 0, 0, 0.0, "exact")
    return _run(_outer_terms(model, n, "J"), n, ctrl, "exact")


def ergodic_capacity(model: ChannelModel, ctrl: SeriesControl | None = None) -> HosResult:
    """Ergodic capacity in bits/s/Hz (Lambda_1)."""
    return hos_exact(model, 1, ctrl)


def ergodic_capacity_meijer(model: IidKappaMu, ctrl: SeriesControl | None = None, dps: int = 30) -> float:
    """Ergodic capacity of the i.i.d. kappa-mu sum through Meijer G-functions.

    Each J(a, b, 1) with integer a is written as a binomial sum of
    G^{3,0}_{2,3}(b | 1, 1; 0, 0, 1+k) functions.  Independent of the
    recursions behind :func:`hos_exact`; intended for cross-checks.
    """
    ctrl = ctrl or SeriesControl()
    if not isinstance(model, IidKappaMu):
        raise TypeError("Meijer-G form exists for the i.i.d. kappa-mu model only")
    b = model.band
    a0 = kernels.as_integer(b.mu * model.M)
    if a0 is None:
        raise DomainError("mu M must be an integer")
    rate = b.mu * (1 + b.kappa) / b.omega
    lam = b.mu * b.kappa * model.M

    def terms():
        i = 0
        with mpmath.workdps(dps):
            r = mpmath.mpf(rate)
            while True:
                a = a0 + i
                s = mpmath.fsum(
                    (-r) ** (a - k - 1) * mpmath.binomial(a - 1, k) * mpmath.meijerg([[], [1, 1]], [[0, 0, 1 + k], []], r)
                    for k in range(a)
                )
                # J(a, b, 1) = e^b s / b^a, weighted by Poisson(i) b^a / Gamma(a)
                lw = -lam + (i * math.log(lam) if lam else 0.0) - math.lgamma(i + 1)
                yield float(mpmath.exp(r + lw - mpmath.loggamma(a)) * s)
                if lam == 0:
                    return
                i += 1

    acc = SeriesAccumulator(ctrl)
    acc.run(t / LN2 for t in terms())
    return acc.total


def hos_high_snr(model: ChannelModel, n: int, ctrl: SeriesControl | None = None) -> HosResult:
    """High-SNR approximation: ln(1 + gamma) replaced by ln gamma.

    Same outer series as :func:`hos_exact` with Q kernels; valid for any
    positive real shape.  The value can be negative at low SNR.
    """
    n = _check_order(n)
    ctrl = ctrl or SeriesControl()
    if n == 0:
        return HosResult(1.0, 0, 0, 0.0, "high_snr")
    return _run(_outer_terms(model, n, "Q"), n, ctrl, "high_snr")


# ---------------------------------------------------------------- low SNR


def _stirling_log_coef(j: int, n: int) -> tuple[int, float]:
    """sign and ln|n! s(j, n) / j!|."""
    s = specfun.stirling_first_signed(j, n)
    if s == 0:
        return 0, -math.inf
    return (1 if s > 0 else -1), math.log(abs(s)) + math.lgamma(n + 1) - math.lgamma(j + 1)


def _stirling_series(log_moment, n: int) -> Iterator[float]:
    """Terms n! s(k+n, n)/(k+n)! E[gamma^(k+n)], k = 0, 1, ..."""
    k = 0
    while True:
        j = k + n
        sign, lc = _stirling_log_coef(j, n)
        yield 0.0 if sign == 0 else sign * math.exp(lc + log_moment(j))
        k += 1


def _inid_log_moment(model: InidKappaMu):
    co = coeffs_for(model)
    if np.max(np.abs(co.mixture_ratios)) >= 1:
        raise DivergenceError("low-SNR series needs beta < 2 min a_i")
    U, two_beta = co.U, 2 * co.beta
    state = {"w": co.weights(256)}

    def log_moment(j: int) -> float:
        # E[gamma^j] = sum_q w_q (U + q)_j (2 beta)^j, extended until the tail is negligible
        while True:
            w = state["w"]
            q = np.arange(len(w))
            with np.errstate(divide="ignore"):
                lt = np.log(np.abs(w)) + special.gammaln(U + q + j) - special.gammaln(U + q)
            lt = np.where(w == 0, -np.inf, lt)
            top = lt.max()
            if lt[-1] < top - 40 and np.all(np.diff(lt[-8:]) < 0):
                s = float(np.sum(np.sign(w) * np.exp(lt - top)))
                return top + math.log(s) + j * math.log(two_beta)
            state["w"] = co.weights(2 * len(w))

    return log_moment


def hos_low_snr(model: ChannelModel, n: int, ctrl: SeriesControl | None = None) -> HosResult:
    """Low-SNR approximation from the Stirling expansion of ln^n(1 + z).

    The expansion is asymptotic: the moments grow factorially, so the
    series is summed only while its terms decay.

    Raises
    ------
    DivergenceError
        Terms grew for 5 consecutive indices (SNR too high for the expansion).
    """
    n = _check_order(n)
    ctrl = ctrl or SeriesControl()
    if n == 0:
        return HosResult(1.0, 0, 0, 0.0, "low_snr")
    if isinstance(model, IidKappaMu):
        b = model.band
        a0 = b.mu * model.M
        lam = b.mu * b.kappa * model.M
        lth = math.log(b.omega / (b.mu * (1 + b.kappa)))

        def log_moment(j):
            f = specfun.hyp1f1(j + a0, a0, lam) if lam else 1.0
            return -lam + math.lgamma(j + a0) - math.lgamma(a0) + j * lth + math.log(f)

        return _run(_stirling_series(log_moment, n), n, ctrl, "low_snr", asymptotic=True)
    if isinstance(model, InidKappaMu):
        return _run(_stirling_series(_inid_log_moment(model), n), n, ctrl, "low_snr", asymptotic=True)
    if isinstance(model, IidKappaMuShadowed):
        a0, r, rate, p = _kms_params(model)
        lr = math.log(rate)

        def log_moment(j):
            lf = specfun.log_hyp2f1_positive(r, j + a0, a0, p) if p else 0.0
            return (r * math.log1p(-p) if p else 0.0) + math.lgamma(j + a0) - math.lgamma(a0) - j * lr + lf

        return _run(_stirling_series(log_moment, n), n, ctrl, "low_snr", asymptotic=True)
    if isinstance(model, CorrelatedKappaMuShadowed):
        co = corr_coeffs_for(model)
        x = co.lambda_min / (1 + co.lambda_min)
        U = co.U
        lr = math.log(co.eta / model.gamma_bar)
        inner_ctrl = SeriesControl(tol=ctrl.tol * ctrl.guard, max_terms=ctrl.max_terms, guard=ctrl.guard)

        def outer():
            k = 0
            while True:
                r = co.m * co.M + k

                def log_moment(j, r=r):
                    return r * math.log1p(-x) + math.lgamma(U + j) - math.lgamma(U) - j * lr + specfun.log_hyp2f1_positive(r, U + j, U, x)

                inner = SeriesAccumulator(inner_ctrl, asymptotic=True).run(_stirling_series(log_moment, n))
                yield co.A * co.delta(k) * inner.total
                k += 1

        return _run(outer(), n, ctrl, "low_snr")
    raise TypeError(f"unknown model {type(model).__name__}")


# ---------------------------------------------------------------- oracle


_GL_LO = np.polynomial.legendre.leggauss(16)
_GL_HI = np.polynomial.legendre.leggauss(24)


def _envelope_rate(model: ChannelModel) -> float:
    """Conservative exponential decay rate of the PDF tail."""
    if isinstance(model, IidKappaMu):
        b = model.band
        return 0.5 * b.mu * (1 + b.kappa) / b.omega
    if isinstance(model, InidKappaMu):
        co = coeffs_for(model)
        return 0.5 / (2 * max(co.a_seq))
    if isinstance(model, IidKappaMuShadowed):
        _, _, rate, p = _kms_params(model)
        return 0.5 * rate * (1 - p)
    if isinstance(model, CorrelatedKappaMuShadowed):
        co = corr_coeffs_for(model)
        return 0.5 * co.eta / model.gamma_bar / (1 + float(np.max(co.lambdas)))
    raise TypeError(f"unknown model {type(model).__name__}")


def _panel_quad(f, edges: np.ndarray, rule) -> float:
    x0, w0 = rule
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    x = (lo + half)[:, None] + half[:, None] * x0[None, :]
    vals = f(x.ravel()).reshape(x.shape)
    return math.fsum((vals * w0[None, :] * half[:, None]).ravel())


def hos_oracle(model: ChannelModel, n: int, quad_tol: float = 1e-10) -> HosResult:
    """Lambda_n by direct quadrature of E[log2^n(1 + gamma)] against the PDF.

    Composite Gauss-Legendre on [0, gamma_hi] (geometric panels near the
    origin, uniform beyond), refined globally until 16- and 24-point rules
    agree.  gamma_hi is raised until the exponential-envelope bound on the
    neglected tail falls below ``quad_tol`` relative to the value.

    Raises
    ------
    ConvergenceError
        Tail bound or panel refinement failed.
    """
    n = _check_order(n)
    if not quad_tol > 0:
        raise DomainError("quad_tol must be positive")
    pdf = model_pdf(model, PDF_CONTROL)
    renv = _envelope_rate(model)

    def integrand(g):
        return np.log1p(g) ** n / LN2**n * pdf(g)

    g_hi = model.mean + 20.0 / renv
    panels = 64
    for _ in range(12):
        geo = np.geomspace(g_hi * 1e-30, g_hi * 1e-2, 60)
        edges = np.concatenate([[0.0], geo, np.linspace(g_hi * 1e-2, g_hi, panels + 1)[1:]])
        lo = _panel_quad(integrand, edges, _GL_LO)
        hi = _panel_quad(integrand, edges, _GL_HI)
        tail = float(integrand(np.array([g_hi]))[0]) / renv
        if abs(hi - lo) > 0.1 * quad_tol * abs(hi):
            panels *= 2
            continue
        if tail > quad_tol * abs(hi):
            g_hi *= 1.5
            continue
        return HosResult(value=hi, n=n, terms_used=0, tail_estimate=tail, regime="oracle")
    raise ConvergenceError("oracle quadrature did not meet quad_tol")


# ---------------------------------------------------------------- convergence report


def convergence_report(
    model: ChannelModel,
    n: int,
    snr_grid_db: Sequence[float],
    ctrl: SeriesControl | None = None,
    inid_mode: str = "all",
) -> list[dict]:
    """Term counts of :func:`hos_exact` across an SNR grid.

    Returns one dict per grid point with keys ``snr_db``, ``terms_used``,
    ``value``, ``tail_estimate`` and ``error`` (None unless that point failed).
    """
    rows = []
    for snr in snr_grid_db:
        row = {"snr_db": float(snr), "terms_used": None, "value": None, "tail_estimate": None, "error": None}
        try:
            res = hos_exact(at_snr(model, snr, inid_mode), n, ctrl)
            row.update(terms_used=res.terms_used, value=res.value, tail_estimate=res.tail_estimate)
        except (ConvergenceError, DomainError, ArithmeticError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
