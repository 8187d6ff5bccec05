"""Measurement-analysis pipeline: correlation, antibunching, lifetime
deconvolution, saturation, propagation length, and branching extraction."""

from .branching import (
    BranchingResult,
    NfLossEstimate,
    XiEstimate,
    estimate_nfloss,
    extract_branching,
    total_efficiency,
)
from .correlation import (
    CwAntibunchingFit,
    G2Curve,
    PulsedG2Result,
    background_fraction,
    correlate,
    fit_g2_cw,
    g2_pulsed,
)
from .curves import PropagationFit, SaturationFit, fit_propagation, fit_saturation
from .lifetime import (
    Histogram,
    LifetimeFit,
    LifetimeSummary,
    ShorteningResult,
    fit_lifetime,
    gaussian_irf_histogram,
    lifetime_shortening,
    pulse_phase_histogram,
    summarize_lifetimes,
)

__all__ = [
    "BranchingResult",
    "CwAntibunchingFit",
    "G2Curve",
    "Histogram",
    "LifetimeFit",
    "LifetimeSummary",
    "NfLossEstimate",
    "PropagationFit",
    "PulsedG2Result",
    "SaturationFit",
    "ShorteningResult",
    "XiEstimate",
    "background_fraction",
    "correlate",
    "estimate_nfloss",
    "extract_branching",
    "fit_g2_cw",
    "fit_lifetime",
    "fit_propagation",
    "fit_saturation",
    "g2_pulsed",
    "gaussian_irf_histogram",
    "lifetime_shortening",
    "pulse_phase_histogram",
    "summarize_lifetimes",
    "total_efficiency",
]
