"""Acceptance criteria 1-10, one PASS/FAIL line each.

Lines are printed as each test runs (visible with ``-s``) and repeated in
the terminal summary by ``conftest.py``.
"""

import math
import time

import mpmath
import numpy as np
import pytest
from scipy.optimize import brentq

from kmhos import kernels, specfun
from kmhos.fading import (
    BandParams,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
    at_snr,
    model_pdf,
    pdf_corr_kms,
    pdf_iid_km,
    pdf_iid_kms,
    corr_coeffs,
)
from kmhos.hos import ergodic_capacity, hos_exact, hos_high_snr, hos_low_snr, hos_oracle
from kmhos.mcsim import SimConfig, estimate_hos_orders, model_sampler
from kmhos.metrics import aod_peak, metrics
from kmhos.series import SeriesControl

from conftest import MODELS, WIDE, fig2_model, fig3_model

RESULTS: list[str] = []
SNRS = (-10.0, 0.0, 10.0)


def report(k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_table1():
    paper = {
        (1, 1, 1): (11, 12, 13), (1, 1, 2): (18, 19, 19), (1, 2, 1): (17, 18, 18),
        (4, 1, 1): (11, 15, 16), (4, 1, 2): (20, 21, 23), (4, 2, 1): (16, 20, 21),
    }
    ctrl = SeriesControl(tol=1e-5)
    t0 = time.perf_counter()
    worst, got = 0, {}
    for (n, kappa, mu), ref in paper.items():
        counts = tuple(
            hos_exact(IidKappaMu(BandParams(kappa, mu, 10 ** (s / 10)), 3), n, ctrl).terms_used for s in SNRS
        )
        got[(n, kappa, mu)] = counts
        worst = max(worst, max(abs(a - b) for a, b in zip(counts, ref)))
    el = time.perf_counter() - t0
    report(1, worst <= 3 and el < 60, f"Table I counts {got}; worst deviation {worst} (limit 3); {el:.1f} s")


def test_criterion_02_table2():
    paper = {
        (1, 0.9): (35, 30, 26), (1, 0.5): (20, 16, 13), (1, 0.1): (18, 15, 12),
        (2, 0.9): (38, 33, 29), (2, 0.5): (36, 32, 27), (2, 0.1): (30, 24, 20),
    }
    ctrl = SeriesControl(tol=1e-3, max_terms=50000)
    bands = (BandParams(1, 1), BandParams(5, 2))
    t0 = time.perf_counter()
    got = {}
    for (n, rho) in paper:
        m = CorrelatedKappaMuShadowed(bands, ShadowParams(1), CorrelationSpec(exponential=rho), 1.0)
        got[(n, rho)] = tuple(hos_exact(at_snr(m, s), n, ctrl).terms_used for s in SNRS)
    el = time.perf_counter() - t0
    worst = max(abs(a - b) for key in paper for a, b in zip(got[key], paper[key]))
    monotone = all(
        got[(n, 0.1)][i] <= got[(n, 0.5)][i] <= got[(n, 0.9)][i] for n in (1, 2) for i in range(3)
    )
    report(
        2, worst <= 5 and monotone and el < 120,
        f"Table II counts {got}; worst deviation {worst} (limit 5); monotone in rho: {monotone}; {el:.1f} s",
    )


def test_criterion_03_fig3_peak():
    fam3 = lambda s: at_snr(fig3_model(), s, "first")
    s3, aod3, rel3 = aod_peak(fam3, np.arange(4.0, 22.5, 1.0), WIDE)
    fam1 = lambda s: IidKappaMu(BandParams(2.5, 1, 10 ** (s / 10)), 1)
    s1, aod1, _ = aod_peak(fam1, np.arange(0.0, 20.5, 1.0), WIDE)
    ok = abs(aod3 - 0.1919) <= 0.005 and abs(s3 - 9) <= 1 and abs(rel3 - 90.81) <= 0.5 and abs(s1 - 6) <= 1
    report(
        3, ok,
        f"M=3 peak AoD {aod3:.4f} at {s3:.2f} dB, R {rel3:.2f}% (target 0.1919 at 9 dB, 90.81%); "
        f"M=1 peak AoD {aod1:.4f} at {s1:.2f} dB (target 6 dB)",
    )


def test_criterion_04_fig4_aof():
    aof = {
        M: metrics(IidKappaMuShadowed(BandParams(2, 2), ShadowParams(1), M, 0.1)).aof for M in (1, 3)
    }
    ok = abs(aof[1] - 0.665) <= 0.01 and abs(aof[3] - 0.148) <= 0.01
    report(4, ok, f"AoF M=1 {aof[1]:.4f} (target 0.665), M=3 {aof[3]:.4f} (target 0.148)")


def test_criterion_05_fig5_aof():
    aof = {
        m: metrics(IidKappaMuShadowed(BandParams(1, 2), ShadowParams(m), 2, 0.1)).aof for m in (1, 2)
    }
    ok = abs(aof[1] - 0.275) <= 0.01 and abs(aof[2] - 0.228) <= 0.01
    report(5, ok, f"AoF m=1 {aof[1]:.4f} (target 0.275), m=2 {aof[2]:.4f} (target 0.228)")


def test_criterion_06_fig2_crossing():
    s = brentq(lambda s: ergodic_capacity(fig2_model(10 ** (s / 10))).value - 1.0, -20, 10, xtol=1e-8)
    report(6, -8 <= s <= -4, f"Lambda_1 = 1 bit at {s:.3f} dB (window [-8, -4])")


def test_criterion_07_oracle_equivalence():
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for name, make in sorted(MODELS.items()):
        for s in SNRS:
            m = at_snr(make(), s, "first")
            for n in (1, 2, 3, 4):
                rel = abs(hos_exact(m, n, WIDE).value / hos_oracle(m, n).value - 1)
                if rel > worst:
                    worst, where = rel, (name, s, n)
    el = time.perf_counter() - t0
    report(7, worst < 1e-4 and el < 300, f"worst |exact/oracle - 1| = {worst:.2e} at {where} (limit 1e-4); {el:.1f} s")


def test_criterion_08_monte_carlo():
    t0 = time.perf_counter()
    total, inside, worst = 0, 0, 0.0
    cfg = SimConfig(samples=10**6, seed=20240601, streams=8, workers=4)
    for name, make in sorted(MODELS.items()):
        for s in SNRS:
            m = at_snr(make(), s, "first")
            est = estimate_hos_orders(model_sampler(m), (1, 2, 3, 4), cfg)
            for n in (1, 2, 3, 4):
                z = abs(hos_exact(m, n, WIDE).value - est[n].mean) / est[n].std_error
                worst = max(worst, z)
                total += 1
                inside += z < 3
    el = time.perf_counter() - t0
    frac = inside / total
    report(8, frac >= 0.95 and el < 600, f"{inside}/{total} points within 3 sigma ({frac:.1%}); max |z| {worst:.2f}; {el:.1f} s")


def test_criterion_09_asymptotes():
    hi, lo = fig2_model(1e3), fig2_model(1e-3)
    gap_hi = abs(hos_high_snr(hi, 1).value / hos_exact(hi, 1).value - 1)
    gap_lo = abs(hos_low_snr(lo, 1).value / hos_exact(lo, 1).value - 1)
    gaps = [abs(hos_high_snr(hi, n).value / hos_exact(hi, n).value - 1) for n in (1, 2, 3, 4)]
    mono = all(b > a for a, b in zip(gaps, gaps[1:]))
    ok = gap_hi < 1e-2 and gap_lo < 1e-2 and mono
    report(
        9, ok,
        f"high-SNR gap {gap_hi:.2e} at +30 dB, low-SNR gap {gap_lo:.2e} at -30 dB; "
        f"high-SNR gaps n=1..4 {[f'{g:.2e}' for g in gaps]} increasing: {mono}",
    )


def _pdf_mass(pdf, scale):
    x, w = np.polynomial.legendre.leggauss(40)
    edges = np.concatenate([[0.0], scale * np.geomspace(1e-8, 1, 25), scale * np.linspace(1.5, 120, 80)])
    lo, hi = edges[:-1, None], edges[1:, None]
    g = (lo + (x + 1) * (hi - lo) / 2).ravel()
    return float(np.sum((w * (hi - lo) / 2).ravel() * pdf(g)))


def test_criterion_10_kernel_properties():
    t0 = time.perf_counter()
    checks = {}
    checks["J vs K"] = max(
        abs(kernels.kernel_J(a, b, n) / kernels.kernel_K(n, a - 1, b) - 1)
        for a in (1, 2, 3) for b in (0.1, 1, 10) for n in (1, 2, 3, 4)
    ) < 1e-6

    def q_fd(a, b, n, h=1e-4):
        # n-th central difference of Gamma(s+1)/b^(s+1) in s at 40 digits, Richardson-extrapolated
        with mpmath.workdps(40):
            g = lambda s: mpmath.gamma(s + 1) / mpmath.mpf(b) ** (s + 1)
            d = lambda h: mpmath.fsum(
                (-1) ** k * math.comb(n, k) * g(mpmath.mpf(a) + (mpmath.mpf(n) / 2 - k) * h) for k in range(n + 1)
            ) / h**n
            hh = mpmath.mpf(h)
            return float((4 * d(hh / 2) - d(hh)) / 3)

    checks["Q vs finite differences"] = max(
        abs(kernels.kernel_Q(a, b, n) / q_fd(a, b, n) - 1) for a in (0.5, 1.5, 3.0) for b in (0.5, 2.0) for n in (1, 2, 3, 4)
    ) < 1e-5
    checks["Stirling log series"] = max(
        abs(
            math.fsum(math.factorial(n) * specfun.stirling_first_signed(k, n) * z**k / math.factorial(k) for k in range(n, 31))
            / math.log1p(z) ** n - 1
        )
        for n in (1, 2, 3, 4) for z in (0.01, 0.1)
    ) < 1e-10
    checks["PDF normalization"] = max(
        abs(_pdf_mass(model_pdf(m), m.mean) - 1) for m in (make() for make in MODELS.values())
    ) < 1e-6
    grid = np.linspace(0.05, 6, 40)
    band, shadow = BandParams(2.0, 1.0), ShadowParams(1.5)
    co = corr_coeffs((band,) * 3, shadow, CorrelationSpec(exponential=0.0))
    checks["rho -> 0 reduction"] = np.allclose(pdf_corr_kms(grid, co, 2.0), pdf_iid_kms(grid, band, shadow, 3, 2.0), rtol=1e-4, atol=0)
    checks["m -> inf reduction"] = np.allclose(
        pdf_iid_kms(grid, BandParams(2.0, 1.5), ShadowParams(1e4), 2, 3.0),
        pdf_iid_km(grid, BandParams(2.0, 1.5, 1.5), 2),
        rtol=1e-3, atol=0,
    )
    el = time.perf_counter() - t0
    ok = all(checks.values()) and el < 120
    report(10, ok, "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()) + f"; {el:.1f} s")
