import pytest

from kmhos.fading import (
    BandParams,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
)
from kmhos.series import SeriesControl

# i.n.i.d. at high SNR and strongly correlated shadowing need long series
WIDE = SeriesControl(max_terms=50000)


def fig2_model(omega: float = 1.0) -> IidKappaMu:
    return IidKappaMu(BandParams(1.0, 1.0, omega), 3)


def fig3_model(omega1: float = 1.0) -> InidKappaMu:
    return InidKappaMu(
        (BandParams(2.5, 1, omega1), BandParams(3.5, 1, 10**0.1), BandParams(4.75, 2, 10**0.1))
    )


def kms_model(gamma_bar: float = 1.0) -> IidKappaMuShadowed:
    return IidKappaMuShadowed(BandParams(2, 2), ShadowParams(1), 2, gamma_bar)


def table2_model(rho: float = 0.9, gamma_bar: float = 1.0) -> CorrelatedKappaMuShadowed:
    return CorrelatedKappaMuShadowed(
        (BandParams(1, 1), BandParams(5, 2)), ShadowParams(1), CorrelationSpec(exponential=rho), gamma_bar
    )


MODELS = {
    "iid_km": fig2_model,
    "inid_km": fig3_model,
    "iid_kms": kms_model,
    "corr_kms": table2_model,
}


@pytest.fixture
def wide():
    return WIDE


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
