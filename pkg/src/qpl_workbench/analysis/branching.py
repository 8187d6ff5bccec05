"""Branching-ratio extraction from spot/ring intensities.

The guided fraction xi compares the two measured count rates after
normalizing each by its collection path: the ring signal by the ring
collection efficiency, the trench outcoupling efficiency, and the
propagation attenuation e^(-r/L); the spot signal by its collection
efficiency.  beta_SPP then folds in the near-field loss share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..design import SetupConstants
from ..errors import DataError


@dataclass
class XiEstimate:
    """Guided-mode branching ratio with Poisson uncertainty."""

    xi: float
    xi_std: float
    dipole_term: float
    ring_term: float


def extract_branching(
    dipole_counts: float,
    dipole_exposure_s: float,
    ring_counts: float,
    ring_exposure_s: float,
    constants: SetupConstants,
) -> XiEstimate:
    """xi from background-free spot and ring counts with their exposures.

    Counts are converted to rates first (the two images are recorded with
    different exposures), then combined as
    xi = B / (A + B) with A = rate_spot/eta_spot and
    B = rate_ring/(eta_ring eta_out e^(-r/L)).
    """
    if dipole_exposure_s <= 0 or ring_exposure_s <= 0:
        raise DataError("exposures must be positive")
    if dipole_counts < 0 or ring_counts < 0:
        raise DataError("counts must be nonnegative")
    if dipole_counts == 0 and ring_counts == 0:
        raise DataError("zero total signal")

    rate_d = dipole_counts / dipole_exposure_s
    rate_r = ring_counts / ring_exposure_s
    sd = math.sqrt(dipole_counts) / dipole_exposure_s
    sr = math.sqrt(ring_counts) / ring_exposure_s

    ring_denom = constants.eta_col_ring * constants.eta_spp_ff * constants.ring_attenuation
    a = rate_d / constants.eta_col_dipole
    b = rate_r / ring_denom
    sa = sd / constants.eta_col_dipole
    sb = sr / ring_denom

    total = a + b
    xi = b / total
    var = (b * sa) ** 2 + (a * sb) ** 2
    xi_std = math.sqrt(var) / total ** 2
    return XiEstimate(xi=xi, xi_std=xi_std, dipole_term=a, ring_term=b)


def total_efficiency(xi: float, beta_nfloss: float) -> float:
    """Plasmon generation efficiency beta_SPP = xi (1 - beta_NFloss)."""
    if not 0.0 <= xi <= 1.0:
        raise DataError(f"xi must lie in [0, 1], got {xi}")
    if not 0.0 <= beta_nfloss <= 1.0:
        raise DataError(f"beta_NFloss must lie in [0, 1], got {beta_nfloss}")
    return xi * (1.0 - beta_nfloss)


@dataclass
class NfLossEstimate:
    """Near-field loss share inferred from the saturated detection rate."""

    beta_nfloss: float
    clamped: bool


def estimate_nfloss(
    saturated_rate_cps: float,
    setup_efficiency: float,
    collection: float,
    intrinsic_rate_cps: float,
) -> NfLossEstimate:
    """beta_NFloss = 1 - detected/(setup * collection * intrinsic).

    The intrinsic rate is the photon budget per second the emitter would
    deliver without local loss (e.g. the inverse fitted fast lifetime at
    unit quantum yield); the result is clamped to [0, 1] with a flag.
    """
    if intrinsic_rate_cps == 0:
        raise DataError("intrinsic rate must be nonzero")
    if saturated_rate_cps < 0 or intrinsic_rate_cps < 0:
        raise DataError("rates must be nonnegative")
    for name, v in (("setup_efficiency", setup_efficiency), ("collection", collection)):
        if not 0.0 < v <= 1.0:
            raise DataError(f"{name} must lie in (0, 1], got {v}")
    raw = 1.0 - saturated_rate_cps / (setup_efficiency * collection * intrinsic_rate_cps)
    clamped = not 0.0 <= raw <= 1.0
    return NfLossEstimate(beta_nfloss=min(max(raw, 0.0), 1.0), clamped=clamped)


@dataclass
class BranchingResult:
    """xi, beta_NFloss, and the derived beta_SPP with uncertainties."""

    xi: float
    xi_std: float
    beta_nfloss: float
    beta_nfloss_std: float
    beta_spp: float
    beta_spp_std: float

    @classmethod
    def from_estimates(
        cls, xi: XiEstimate, beta_nfloss: float, beta_nfloss_std: float = 0.0
    ) -> "BranchingResult":
        beta_spp = total_efficiency(xi.xi, beta_nfloss)
        var = ((1.0 - beta_nfloss) * xi.xi_std) ** 2 + (xi.xi * beta_nfloss_std) ** 2
        return cls(
            xi=xi.xi,
            xi_std=xi.xi_std,
            beta_nfloss=beta_nfloss,
            beta_nfloss_std=beta_nfloss_std,
            beta_spp=beta_spp,
            beta_spp_std=math.sqrt(var),
        )
