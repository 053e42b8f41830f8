"""Higher-order capacity statistics over sums of kappa-mu and kappa-mu shadowed fading."""

from .errors import ConvergenceError, DegenerateError, DivergenceError, DomainError
from .fading import (
    BandParams,
    CorrelatedKappaMuShadowed,
    CorrelationSpec,
    IidKappaMu,
    IidKappaMuShadowed,
    InidKappaMu,
    ShadowParams,
    at_snr,
    model_pdf,
)
from .hos import (
    HosResult,
    convergence_report,
    ergodic_capacity,
    hos_exact,
    hos_high_snr,
    hos_low_snr,
    hos_oracle,
)
from .mcsim import EstimateResult, SimConfig, estimate_hos, model_sampler
from .metrics import CapacityMetrics, aod_peak, metrics
from .series import SeriesControl

__version__ = "0.1.0"

__all__ = [
    "BandParams",
    "CapacityMetrics",
    "ConvergenceError",
    "CorrelatedKappaMuShadowed",
    "CorrelationSpec",
    "DegenerateError",
    "DivergenceError",
    "DomainError",
    "EstimateResult",
    "HosResult",
    "IidKappaMu",
    "IidKappaMuShadowed",
    "InidKappaMu",
    "SeriesControl",
    "ShadowParams",
    "SimConfig",
    "aod_peak",
    "at_snr",
    "convergence_report",
    "ergodic_capacity",
    "estimate_hos",
    "hos_exact",
    "hos_high_snr",
    "hos_low_snr",
    "hos_oracle",
    "metrics",
    "model_pdf",
    "model_sampler",
]
