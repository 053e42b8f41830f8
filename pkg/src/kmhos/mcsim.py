"""Monte-Carlo estimation of Lambda_n from direct variate generation.

Squared kappa-mu variates use the Poisson-gamma form of the noncentral
chi-square; shadowed variates first draw the unit-mean gamma shadowing of
the dominant component.  Correlated shadowing (integer m) is built from
m complex Gaussian vectors with cross-correlation sqrt(rho).

Random streams come from ``SeedSequence(seed).spawn(streams)`` feeding
Philox generators.  Stream s always produces the same fixed chunk of
samples and partial results are reduced in stream order with exact
(``math.fsum``) summation, so estimates are bit-identical for any worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .fading import (
    BandParams,
    ChannelModel,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
    jacobi_eigvalsh,
)

LN2 = math.log(2.0)
BLOCK = 1 << 17

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo settings.

    Parameters
    ----------
    samples : int
        Total number of realizations (default 10^6).
    seed : int
        Root seed (64-bit).
    streams : int
        Number of independent substreams; fixes how samples are chunked.
    workers : int
        Threads used to run the streams; does not affect results.
    """

    samples: int = 1_000_000
    seed: int = 20240601
    streams: int = 8
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise DomainError("samples must be >= 1")
        if self.streams < 1:
            raise DomainError("streams must be >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EstimateResult:
    mean: float
    std_error: float
    samples_used: int


# ---------------------------------------------------------------- variate generators


def _ncx2_poisson_gamma(mu: float, lam, rng: np.random.Generator, size: int) -> np.ndarray:
    """Noncentral chi-square, 2 mu dof and noncentrality 2 lam, as Gamma(mu + Poisson(lam), 2)."""
    p = rng.poisson(lam, size=size)
    return rng.gamma(mu + p, 2.0)


def sample_km_sq(band: BandParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Squared kappa-mu SNR samples with mean ``band.omega``."""
    x = _ncx2_poisson_gamma(band.mu, band.mu * band.kappa, rng, size)
    return band.omega / (2 * band.mu * (1 + band.kappa)) * x


def sample_kms_sq(band: BandParams, shadow: ShadowParams, gamma_bar: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Squared kappa-mu shadowed SNR samples with mean ``gamma_bar``."""
    xi = rng.gamma(shadow.m, 1.0 / shadow.m, size=size)
    x = _ncx2_poisson_gamma(band.mu, band.mu * band.kappa * xi, rng, size)
    return gamma_bar / (2 * band.mu * (1 + band.kappa)) * x


def correlated_shadowing(m: int, correlation: CorrelationSpec, M: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Unit-mean Gamma(m) shadowing with power correlation rho, shape (size, M).

    xi_i = (1/m) sum_l |Z_li|^2 with Z_l i.i.d. complex Gaussian vectors whose
    cross-correlation is sqrt(rho); then corr(xi_i, xi_j) = rho_ij.
    """
    if int(m) != m or m < 1:
        raise DomainError("correlated sampler needs an integer m >= 1; use the quadrature oracle for real m")
    C = correlation.C(M)
    if jacobi_eigvalsh(C)[0] <= 0:
        raise DomainError("correlation matrix C is not positive definite")
    L = np.linalg.cholesky(C)
    acc = np.zeros((size, M))
    for _ in range(int(m)):
        z = (rng.standard_normal((size, M)) + 1j * rng.standard_normal((size, M))) / math.sqrt(2.0)
        acc += np.abs(z @ L.T) ** 2
    return acc / m


def sample_corr_kms_sum(
    bands: Sequence[BandParams],
    shadow: ShadowParams,
    correlation: CorrelationSpec,
    gamma_bar: float,
    rng: np.random.Generator,
    size: int,
) -> np.ndarray:
    """Samples of the correlated kappa-mu shadowed sum with total mean ``gamma_bar``."""
    bands = tuple(bands)
    M = len(bands)
    xi = correlated_shadowing(shadow.m, correlation, M, rng, size)
    eta = sum(b.mu * (1 + b.kappa) for b in bands)
    total = np.zeros(size)
    for i, b in enumerate(bands):
        x = _ncx2_poisson_gamma(b.mu, b.mu * b.kappa * xi[:, i], rng, size)
        total += gamma_bar / (2 * eta) * x
    return total


def model_sampler(model: ChannelModel) -> Sampler:
    """Sampler ``(rng, size) -> samples of the summed SNR`` for a channel model."""
    if isinstance(model, IidKappaMu):
        return lambda rng, size: sum(sample_km_sq(model.band, rng, size) for _ in range(model.M))
    if isinstance(model, InidKappaMu):
        return lambda rng, size: sum(sample_km_sq(b, rng, size) for b in model.bands)
    if isinstance(model, IidKappaMuShadowed):
        per_band = model.gamma_bar / model.M
        return lambda rng, size: sum(
            sample_kms_sq(model.band, model.shadow, per_band, rng, size) for _ in range(model.M)
        )
    if isinstance(model, CorrelatedKappaMuShadowed):
        if int(model.shadow.m) != model.shadow.m:
            raise DomainError("correlated sampler needs an integer m; use the quadrature oracle for real m")
        return lambda rng, size: sample_corr_kms_sum(
            model.bands, model.shadow, model.correlation, model.gamma_bar, rng, size
        )
    raise TypeError(f"unknown model {type(model).__name__}")


# ---------------------------------------------------------------- estimation


def _chunks(cfg: SimConfig) -> list[int]:
    base, extra = divmod(cfg.samples, cfg.streams)
    return [base + (1 if s < extra else 0) for s in range(cfg.streams)]


def _run_stream(sampler: Sampler, seq: np.random.SeedSequence, count: int, orders: Sequence[int]) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    out = {n: [] for n in orders}
    done = 0
    while done < count:
        size = min(BLOCK, count - done)
        g = sampler(rng, size)
        lg = np.log1p(g) / LN2
        for n in orders:
            out[n].append(lg**n)
        done += size
    return {n: (np.concatenate(v) if v else np.empty(0)) for n, v in out.items()}


def estimate_hos_orders(sampler: Sampler, orders: Sequence[int], cfg: SimConfig | None = None) -> dict[int, EstimateResult]:
    """Estimate Lambda_n for several orders from one shared set of samples."""
    cfg = cfg or SimConfig()
    orders = [int(n) for n in orders]
    if any(n < 0 for n in orders):
        raise DomainError("orders must be nonnegative")
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.streams)
    counts = _chunks(cfg)
    work = [n for n in orders if n > 0]
    if cfg.workers == 1:
        parts = [_run_stream(sampler, s, c, work) for s, c in zip(seqs, counts)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda sc: _run_stream(sampler, sc[0], sc[1], work), zip(seqs, counts)))
    res = {}
    N = cfg.samples
    for n in orders:
        if n == 0:
            res[n] = EstimateResult(1.0, 0.0, N)
            continue
        y = np.concatenate([p[n] for p in parts])
        mean = math.fsum(y) / N
        if N > 1:
            var = math.fsum((y - mean) ** 2) / (N - 1)
            se = math.sqrt(var / N)
        else:
            se = math.inf
        res[n] = EstimateResult(mean, se, N)
    return res


def estimate_hos(sampler: Sampler | ChannelModel, n: int, cfg: SimConfig | None = None) -> EstimateResult:
    """Monte-Carlo estimate of Lambda_n = E[log2^n(1 + gamma)].

    ``sampler`` is either a channel model or a callable ``(rng, size) -> samples``.
    """
    if not callable(sampler):
        sampler = model_sampler(sampler)
    return estimate_hos_orders(sampler, [n], cfg)[int(n)]
