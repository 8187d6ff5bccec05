"""Cross-correlation of two-detector streams and antibunching fits.

The correlator histograms every channel-0/channel-1 pair delay inside
the window (full pairwise correlation, not start-stop, which is biased
at high rates) and normalizes by the Poissonian expectation
rate0 * rate1 * binwidth * duration * (1 - |tau|/duration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from ..errors import (
    DataError,
    EmptyChannelError,
    FitConvergenceError,
    FlatCurveError,
)
from ..timetags import TimeTagStream


@dataclass
class G2Curve:
    """Normalized coincidence histogram g2(tau)."""

    delays_ps: np.ndarray
    values: np.ndarray
    bin_width_ps: float
    normalization: np.ndarray  # expected Poissonian counts per bin
    counts: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def raw_counts(self) -> np.ndarray:
        return self.counts


def _pair_delays(t0, t1, half_window, chunk=500_000):
    """All t1 - t0 delays with |delay| <= half_window, chunked over t0."""
    out = []
    for s in range(0, t0.size, chunk):
        block = t0[s:s + chunk]
        lo = np.searchsorted(t1, block - half_window, side="left")
        hi = np.searchsorted(t1, block + half_window, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        ends = np.cumsum(counts)
        offsets = np.arange(total) - np.repeat(ends - counts, counts)
        gather = np.repeat(lo, counts) + offsets
        out.append(t1[gather] - np.repeat(block, counts))
    if not out:
        return np.empty(0)
    return np.concatenate(out)


def correlate(stream: TimeTagStream, bin_width_ps: float, window_ps: float) -> G2Curve:
    """Normalized cross-correlation of the two channels within +-window."""
    if window_ps < bin_width_ps:
        raise DataError("window must be at least one bin wide")
    t0 = stream.channel_times(0)
    t1 = stream.channel_times(1)
    if t0.size == 0 or t1.size == 0:
        raise EmptyChannelError("correlation needs events on both channels")

    n_half = int(window_ps / bin_width_ps)
    centers = np.arange(-n_half, n_half + 1) * bin_width_ps
    edges = np.concatenate([centers - bin_width_ps / 2, [centers[-1] + bin_width_ps / 2]])
    delays = _pair_delays(t0, t1, edges[-1])
    counts, _ = np.histogram(delays, bins=edges)

    duration = stream.duration_ps
    rate0 = t0.size / duration
    rate1 = t1.size / duration
    expected = rate0 * rate1 * bin_width_ps * duration * (1.0 - np.abs(centers) / duration)
    expected = np.maximum(expected, 1e-300)
    values = counts / expected

    center_idx = n_half
    median = float(np.median(values)) if values.size else 0.0
    diagnostics = {
        "zero_bin_value": float(values[center_idx]),
        "bunched_zero_peak": bool(
            values[center_idx] > 5.0 and values[center_idx] > 5.0 * max(median, 1e-12)
        ),
    }
    return G2Curve(
        delays_ps=centers,
        values=values,
        bin_width_ps=bin_width_ps,
        normalization=expected,
        counts=counts.astype(float),
        diagnostics=diagnostics,
    )


THREE_LEVEL = "three-level"
TWO_LEVEL = "two-level"


def _g2_model(tau, purity, a, tau_a, tau_b):
    x = np.abs(tau)
    return 1.0 - purity * ((1.0 + a) * np.exp(-x / tau_a) - a * np.exp(-x / tau_b))


@dataclass
class CwAntibunchingFit:
    """Continuous-excitation antibunching fit result."""

    g2_zero: float
    g2_zero_std: float
    tau_a_ps: float
    tau_a_std_ps: float
    tau_b_ps: float | None
    shelf_amplitude: float
    purity: float
    model: str
    flags: tuple[str, ...] = ()

    @property
    def g2_zero_ci(self) -> tuple[float, float]:
        return (self.g2_zero - 2 * self.g2_zero_std, self.g2_zero + 2 * self.g2_zero_std)


def fit_g2_cw(curve: G2Curve, model: str = THREE_LEVEL) -> CwAntibunchingFit:
    """Fit the antibunching dip of a CW g2 curve.

    Model: g2(tau) = 1 - purity * [(1+a) e^(-|tau|/tau_a) - a e^(-|tau|/tau_b)];
    the two-level variant pins a = 0.  g2(0) = 1 - purity.
    """
    tau = curve.delays_ps
    y = curve.values
    sigma = np.sqrt(np.maximum(curve.counts, 1.0)) / curve.normalization

    span = tau[-1] - tau[0]
    depth0 = max(1.0 - float(np.min(y)), 0.05)
    tau_a0 = max(span / 20.0, curve.bin_width_ps)

    if model == TWO_LEVEL:
        def f(t, purity, tau_a):
            return _g2_model(t, purity, 0.0, tau_a, 1.0)
        p0 = [min(depth0, 1.0), tau_a0]
        bounds = ([0.0, curve.bin_width_ps * 0.1], [1.2, span * 10])
    elif model == THREE_LEVEL:
        def f(t, purity, a, tau_a, tau_b):
            return _g2_model(t, purity, a, tau_a, tau_b)
        p0 = [min(depth0, 1.0), 0.05, tau_a0, tau_a0 * 10]
        bounds = ([0.0, 0.0, curve.bin_width_ps * 0.1, curve.bin_width_ps * 0.1],
                  [1.2, 10.0, span * 10, span * 100])
    else:
        raise ValueError(f"unknown g2 model {model!r}")

    try:
        popt, pcov = scipy.optimize.curve_fit(
            f, tau, y, p0=p0, sigma=sigma, absolute_sigma=True,
            bounds=bounds, maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitConvergenceError(f"g2 fit failed: {exc}") from exc
    perr = np.sqrt(np.abs(np.diag(pcov)))

    purity, purity_std = popt[0], perr[0]
    if purity < max(3.0 * purity_std, 0.02):
        raise FlatCurveError(
            "curve consistent with flat g2 = 1: no emitter signature "
            f"(dip {purity:.3g} +- {purity_std:.3g})"
        )
    if model == TWO_LEVEL:
        a, tau_a, tau_b = 0.0, popt[1], None
        tau_a_std = perr[1]
    else:
        a, tau_a, tau_b = popt[1], popt[2], popt[3]
        tau_a_std = perr[2]
    return CwAntibunchingFit(
        g2_zero=1.0 - purity,
        g2_zero_std=purity_std,
        tau_a_ps=tau_a,
        tau_a_std_ps=tau_a_std,
        tau_b_ps=tau_b,
        shelf_amplitude=a,
        purity=purity,
        model=model,
    )


@dataclass
class PulsedG2Result:
    """Zero-peak to side-peak area ratio of a pulsed g2 histogram."""

    g2_zero: float
    g2_zero_std: float
    zero_counts: float
    side_counts_mean: float
    n_side_peaks: int


def g2_pulsed(curve: G2Curve, rep_period_ps: float) -> PulsedG2Result:
    """g2(0) from peak-area ratios of a pulsed-excitation correlation.

    Integrates +-T/2 windows around every full repetition-period peak and
    divides the zero-delay area by the mean side area, with Poisson
    uncertainty propagation.
    """
    if rep_period_ps <= 0:
        raise DataError("repetition period must be positive")
    tau = curve.delays_ps
    span = tau[-1] - tau[0]
    if span < 5.0 * rep_period_ps:
        raise DataError("curve must span at least 5 repetition periods")

    k_max = int((tau[-1] - rep_period_ps / 2) / rep_period_ps)
    side_counts = []
    offsets = []
    for k in range(-k_max, k_max + 1):
        center = k * rep_period_ps
        mask = np.abs(tau - center) <= rep_period_ps / 2 * (1 - 1e-12)
        window_counts = float(np.sum(curve.counts[mask]))
        if k == 0:
            zero_counts = window_counts
            continue
        side_counts.append(window_counts)
        if window_counts > 0:
            peak_at = tau[mask][np.argmax(curve.counts[mask])]
            offsets.append(abs(peak_at - center))
    if len(side_counts) < 4:
        raise DataError("too few complete side peaks in the window")
    if np.median(offsets) > rep_period_ps / 6.0:
        raise DataError(
            "repetition period inconsistent with the peak spacing in the curve"
        )

    side_total = float(np.sum(side_counts))
    side_mean = side_total / len(side_counts)
    if side_mean <= 0:
        raise DataError("empty side peaks")
    g2 = zero_counts / side_mean
    g2_std = max(g2, 1.0 / side_mean) * math.sqrt(
        1.0 / max(zero_counts, 1.0) + 1.0 / side_total
    )
    return PulsedG2Result(
        g2_zero=g2,
        g2_zero_std=g2_std,
        zero_counts=zero_counts,
        side_counts_mean=side_mean,
        n_side_peaks=len(side_counts),
    )


def background_fraction(g2_zero: float) -> float:
    """Linear background fraction r = 1 - sqrt(1 - g2(0)).

    Exact inverse of g2(0) = 1 - (1 - r)^2 on [0, 1]; g2(0) > 1 signals
    bunched light and is rejected.
    """
    if not 0.0 <= g2_zero <= 1.0:
        raise DataError(f"g2(0) must lie in [0, 1], got {g2_zero}")
    return 1.0 - math.sqrt(1.0 - g2_zero)
