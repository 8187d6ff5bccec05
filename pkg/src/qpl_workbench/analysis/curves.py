"""Saturation-curve and propagation-length fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from ..errors import DataError, FitConvergenceError
from .correlation import background_fraction


@dataclass
class SaturationFit:
    """I(P) = I_inf P / (P + P_sat) after linear-background removal."""

    saturated_rate_cps: float
    saturated_rate_std_cps: float
    p_sat_mw: float
    p_sat_std_mw: float
    background_slope_cps_per_mw: float
    flags: tuple[str, ...] = ()

    def model(self, power_mw):
        p = np.asarray(power_mw, dtype=float)
        return self.saturated_rate_cps * p / (p + self.p_sat_mw)


def fit_saturation(powers_mw, rates_cps, g2_zero: float = 0.0) -> SaturationFit:
    """Fit the saturating emitter rate with the g2-derived background removed.

    The linear background fraction r_bg = 1 - sqrt(1 - g2(0)) is
    apportioned as a straight line through the dataset (slope chosen so
    the background share of the total recorded counts equals r_bg), then
    the remainder is fit with I_inf P/(P + P_sat).
    """
    p = np.asarray(powers_mw, dtype=float)
    y = np.asarray(rates_cps, dtype=float)
    if p.shape != y.shape:
        raise DataError("powers and rates must have equal length")
    if np.unique(p).size < 4:
        raise DataError("need at least 4 distinct powers")
    if np.any(p <= 0):
        raise DataError("powers must be positive")

    r_bg = background_fraction(g2_zero)
    slope = r_bg * float(np.sum(y)) / float(np.sum(p)) if r_bg > 0 else 0.0
    corrected = y - slope * p

    i0 = max(2.0 * float(np.max(corrected)), 1.0)
    p0 = float(np.median(p))
    sigma = np.maximum(np.abs(y), np.max(np.abs(y)) * 1e-3)
    try:
        popt, pcov = scipy.optimize.curve_fit(
            lambda pp, i_inf, p_sat: i_inf * pp / (pp + p_sat),
            p, corrected, p0=[i0, p0], sigma=sigma, absolute_sigma=False,
            bounds=([0.0, 0.0], [np.inf, np.inf]), maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitConvergenceError(f"saturation fit failed: {exc}") from exc
    perr = np.sqrt(np.abs(np.diag(pcov)))

    flags = []
    if popt[1] > 5.0 * float(np.max(p)) or (
        np.isfinite(perr[1]) and perr[1] > popt[1]
    ):
        flags.append("saturation-unconstrained: all powers in the linear regime")
    return SaturationFit(
        saturated_rate_cps=float(popt[0]),
        saturated_rate_std_cps=float(perr[0]),
        p_sat_mw=float(popt[1]),
        p_sat_std_mw=float(perr[1]),
        background_slope_cps_per_mw=slope,
        flags=tuple(flags),
    )


@dataclass
class PropagationFit:
    """I(x) = I0 e^(-x/L) with multiplicative-noise weighting."""

    length_um: float
    length_std_um: float
    intensity_0: float
    intensity_0_std: float
    flags: tuple[str, ...] = ()

    def model(self, x_um):
        x = np.asarray(x_um, dtype=float)
        return self.intensity_0 * np.exp(-x / self.length_um)


def fit_propagation(distances_um, intensities) -> PropagationFit:
    """Exponential-decay fit of ring intensities versus distances.

    Nonlinear least squares on linear intensities with relative
    (multiplicative-noise) weighting; a log-linear fit only seeds the
    optimizer since the log transform biases L under symmetric noise.
    Constant data yields L = inf with an 'unbounded' flag.
    """
    x = np.asarray(distances_um, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if x.shape != y.shape:
        raise DataError("distances and intensities must have equal length")
    if np.unique(x).size < 3:
        raise DataError("need at least 3 distinct distances")
    if np.any(y <= 0):
        raise DataError("intensities must be positive")

    slope, intercept = np.polyfit(x, np.log(y), 1)
    if slope >= -1e-12:
        return PropagationFit(
            length_um=math.inf,
            length_std_um=math.inf,
            intensity_0=float(np.mean(y)),
            intensity_0_std=float(np.std(y)),
            flags=("unbounded-propagation: intensities do not decay",),
        )
    l0 = -1.0 / slope
    i0 = math.exp(intercept)

    def residuals(theta):
        i_0, length = theta
        model = i_0 * np.exp(-x / length)
        return (y - model) / model

    res = scipy.optimize.least_squares(
        residuals, [i0, l0], bounds=([0.0, 1e-12], [np.inf, np.inf]),
        x_scale=[i0, l0], ftol=1e-14, xtol=1e-14, max_nfev=2000,
    )
    if not res.success and res.status <= 0:
        raise FitConvergenceError("propagation fit did not converge")
    dof = max(x.size - 2, 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = s2 * np.linalg.inv(res.jac.T @ res.jac)
        stds = np.sqrt(np.abs(np.diag(cov)))
    except np.linalg.LinAlgError:
        stds = np.array([math.nan, math.nan])
    return PropagationFit(
        length_um=float(res.x[1]),
        length_std_um=float(stds[1]),
        intensity_0=float(res.x[0]),
        intensity_0_std=float(stds[0]),
    )
