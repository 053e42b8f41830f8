import math
import warnings

import numpy as np
import pytest
from scipy import special
from scipy.stats import gamma as gamma_dist

from kmhos.errors import ConvergenceError, DomainError
from kmhos.fading import (
    BandParams,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
    at_snr,
    coeffs_for,
    corr_coeffs,
    inid_coeffs,
    jacobi_eigvalsh,
    model_pdf,
    pdf_corr_kms,
    pdf_iid_km,
    pdf_iid_kms,
    pdf_inid_km,
)

from conftest import fig3_model, kms_model, table2_model


def integrate_pdf(pdf, scale, weight=lambda g: 1.0):
    """Composite 40-point Gauss-Legendre with one vectorized PDF call."""
    x, w = np.polynomial.legendre.leggauss(40)
    edges = np.concatenate([[0.0], scale * np.geomspace(1e-8, 1, 25), scale * np.linspace(1.5, 120, 80)])
    lo, hi = edges[:-1, None], edges[1:, None]
    g = (lo + (x + 1) * (hi - lo) / 2).ravel()
    wt = (w * (hi - lo) / 2).ravel()
    return float(np.sum(wt * pdf(g) * weight(g)))


def squared_km_pdf(g, kappa, mu, omega):
    """Closed-form single-band squared kappa-mu density."""
    c = mu * (1 + kappa) / omega
    x = 2 * mu * np.sqrt(kappa * (1 + kappa) * g / omega)
    log_pre = (
        math.log(mu) + (mu + 1) / 2 * math.log(1 + kappa) - (mu - 1) / 2 * math.log(kappa)
        - mu * kappa - (mu + 1) / 2 * math.log(omega)
    )
    return np.exp(log_pre + (mu - 1) / 2 * np.log(g) - c * g + x) * special.ive(mu - 1, x)


GRID = np.linspace(0.05, 12, 40)


def test_param_validation():
    with pytest.raises(DomainError):
        BandParams(-1, 1)
    with pytest.raises(DomainError):
        BandParams(1, 0)
    with pytest.raises(DomainError):
        ShadowParams(0)
    with pytest.raises(DomainError):
        IidKappaMu(BandParams(1, 1), 0)
    with pytest.raises(DomainError):
        IidKappaMuShadowed(BandParams(1, 1), ShadowParams(1), 2, 0.0)
    with pytest.raises(DomainError):
        CorrelationSpec()
    with pytest.raises(DomainError):
        CorrelationSpec(rho_matrix=[[1, 0.2], [0.3, 1]])
    with pytest.raises(DomainError):
        CorrelationSpec(rho_matrix=[[0.9, 0.2], [0.2, 1]])
    with pytest.raises(DomainError):
        CorrelationSpec(exponential=1.5)
    with pytest.raises(DomainError):
        CorrelatedKappaMuShadowed((BandParams(1, 1),) * 3, ShadowParams(1), CorrelationSpec(rho_matrix=np.eye(2)), 1.0)


@pytest.mark.parametrize(
    "model",
    [
        IidKappaMu(BandParams(1, 1, 1.0), 3),
        IidKappaMu(BandParams(2, 1.5, 0.3), 2),
        fig3_model(),
        kms_model(),
        IidKappaMuShadowed(BandParams(1, 2), ShadowParams(2.5), 3, 4.0),
        table2_model(0.9),
        table2_model(0.1, 10.0),
    ],
    ids=lambda m: type(m).__name__,
)
def test_pdf_normalized_and_mean(model):
    pdf = model_pdf(model)
    scale = model.mean
    assert integrate_pdf(pdf, scale) == pytest.approx(1.0, abs=1e-6)
    assert integrate_pdf(pdf, scale, lambda g: g) == pytest.approx(model.mean, rel=1e-6)
    grid = np.linspace(0, 50 * model.M * scale, 400)
    assert np.all(pdf(grid) >= 0)


def test_iid_km_kappa_zero_is_gamma():
    band = BandParams(0.0, 1.7, 2.0)
    got = pdf_iid_km(GRID, band, 3)
    np.testing.assert_allclose(got, gamma_dist.pdf(GRID, 1.7 * 3, scale=2.0 / 1.7), rtol=1e-12)


def test_iid_km_single_band_closed_form():
    for kappa, mu, om in [(1.0, 1.0, 1.0), (2.5, 0.7, 3.0), (6.0, 2.0, 0.5)]:
        got = pdf_iid_km(GRID, BandParams(kappa, mu, om), 1)
        np.testing.assert_allclose(got, squared_km_pdf(GRID, kappa, mu, om), rtol=1e-10)


def test_inid_single_band_matches_km():
    band = BandParams(2.0, 1.0, 1.5)
    co = inid_coeffs([band])
    np.testing.assert_allclose(pdf_inid_km(GRID, co), squared_km_pdf(GRID, 2.0, 1.0, 1.5), rtol=1e-8)


def test_inid_identical_bands_match_iid():
    band = BandParams(1.0, 2.0, 1.0)
    co = inid_coeffs([band] * 3)
    np.testing.assert_allclose(pdf_inid_km(GRID, co), pdf_iid_km(GRID, band, 3), rtol=1e-8)


def test_inid_forms_agree_where_both_converge():
    # beta inside (max a_i / 2, 2 min a_i), where both expansions converge
    co = coeffs_for(InidKappaMu(fig3_model().bands, beta=0.1))
    assert np.max(np.abs(co.ratios)) < 1 and np.max(np.abs(co.mixture_ratios)) < 1
    g = np.linspace(0.5, 10, 25)
    lag = pdf_inid_km(g, co, form="laguerre")
    # the alternating Laguerre sum is accurate in absolute terms only
    np.testing.assert_allclose(lag, pdf_inid_km(g, co, form="mixture"), rtol=1e-8, atol=1e-10)


def test_inid_laguerre_cancellation_is_reported():
    co = coeffs_for(InidKappaMu(fig3_model().bands, beta=0.075))
    with pytest.raises(ConvergenceError):
        pdf_inid_km(np.array([0.1, 1.0]), co, form="laguerre")


def test_inid_c0_matches_definition():
    bands = fig3_model().bands
    co = inid_coeffs(bands)
    U, xi, beta = co.U, co.xi, co.beta
    expo = sum(ch * a * (U - xi) / (beta * xi + a * (U - xi)) for ch, a in zip(co.chi, co.a_seq))
    prod = np.prod([(1 + a / beta * (U / xi - 1)) ** (-m) for m, a in zip(co.mu_seq, co.a_seq)])
    assert co.c(0) == pytest.approx((U / xi) ** U * math.exp(-expo / 2) * prod, rel=1e-13)
    # recursion c_k = (1/k) sum c_j d_{k-j}
    for k in (1, 2, 5):
        assert co.c(k) == pytest.approx(sum(co.c(j) * co.d(k - j) for j in range(k)) / k, rel=1e-10, abs=1e-300)


def test_inid_bad_parameters_warn():
    with pytest.warns(RuntimeWarning):
        inid_coeffs([BandParams(1, 1, 1.0), BandParams(1, 1, 30.0)], beta=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inid_coeffs(fig3_model().bands)


def test_kms_large_m_reduces_to_km():
    band = BandParams(2.0, 1.5)
    M, gbar = 2, 3.0
    g = np.linspace(0.05, 2 * gbar, 40)
    got = pdf_iid_kms(g, band, ShadowParams(1e4), M, gbar)
    ref = pdf_iid_km(g, BandParams(2.0, 1.5, gbar / M), M)
    np.testing.assert_allclose(got, ref, rtol=1e-3)


def test_corr_rho_zero_identical_bands_reduce_to_iid_kms():
    band, shadow, M, gbar = BandParams(2.0, 1.0), ShadowParams(1.5), 3, 2.0
    co = corr_coeffs((band,) * M, shadow, CorrelationSpec(exponential=0.0))
    assert all(abs(co.delta(k)) < 1e-14 for k in range(1, 6))
    np.testing.assert_allclose(pdf_corr_kms(GRID, co, gbar), pdf_iid_kms(GRID, band, shadow, M, gbar), rtol=1e-4)


def test_corr_eigenvalues_closed_form():
    co = corr_coeffs((BandParams(1, 1), BandParams(5, 2)), ShadowParams(1), CorrelationSpec(exponential=0.5))
    tr, det = 1 + 10, 10 * (1 - 0.5)
    disc = math.sqrt(tr * tr - 4 * det)
    np.testing.assert_allclose(co.lambdas, [(tr - disc) / 2, (tr + disc) / 2], rtol=1e-12)
    assert co.lambda_min == pytest.approx((tr - disc) / 2, rel=1e-12)
    assert np.prod(co.lambdas) == pytest.approx(10 * np.linalg.det(CorrelationSpec(exponential=0.5).C(2)), rel=1e-10)
    assert 0 < co.A <= 1
    assert co.delta(0) == 1


def test_corr_weights_sum_to_one():
    co = corr_coeffs((BandParams(1, 1), BandParams(5, 2)), ShadowParams(1), CorrelationSpec(exponential=0.9))
    assert co.A * math.fsum(co.delta(k) for k in range(6000)) == pytest.approx(1.0, abs=1e-10)


def test_corr_rejects_zero_kappa_and_non_pd():
    with pytest.raises(DomainError):
        corr_coeffs((BandParams(0, 1), BandParams(1, 1)), ShadowParams(1), CorrelationSpec(exponential=0.5))
    bad = CorrelationSpec(rho_matrix=[[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    with pytest.raises(DomainError):
        corr_coeffs((BandParams(1, 1),) * 3, ShadowParams(1), bad)


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(3)
    for n in (2, 3, 6):
        a = rng.standard_normal((n, n))
        a = a + a.T
        np.testing.assert_allclose(jacobi_eigvalsh(a), np.linalg.eigvalsh(a), rtol=1e-12, atol=1e-12)


def test_at_snr():
    m = at_snr(IidKappaMu(BandParams(1, 1), 3), 10.0)
    assert m.band.omega == pytest.approx(10.0)
    inid = fig3_model()
    first = at_snr(inid, 10.0, "first")
    assert first.bands[0].omega == pytest.approx(10.0) and first.bands[1] == inid.bands[1]
    scaled = at_snr(inid, 10.0, "all")
    assert scaled.bands[1].omega == pytest.approx(10 * inid.bands[1].omega)
    assert at_snr(kms_model(), -10.0).gamma_bar == pytest.approx(0.1)
    with pytest.raises(DomainError):
        at_snr(inid, 0.0, "bogus")
