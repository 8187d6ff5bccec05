"""Monte Carlo generator of two-detector time-tag streams from a
parametric single emitter, used as the ground-truth oracle for the
correlation, lifetime, and saturation fitters.

Randomness comes from a counter-based Philox generator keyed by the
mandatory seed, so a (config, seed) pair fully determines the stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .timetags import CW, PULSED, TimeTagStream

TWO_LEVEL = "two-level"
TWO_LEVEL_SHELVING = "two-level-plus-shelving"


@dataclass(frozen=True)
class EmitterModel:
    """Level scheme and excitation of the simulated emitter.

    ``lifetimes_ps``/``weights`` define the excited-state decay as an
    exponential mixture; the weights are photon (intensity) fractions.
    CW mode uses ``pump_rate_hz``; pulsed mode uses the per-pulse
    excitation probability.
    """

    scheme: str = TWO_LEVEL
    lifetimes_ps: tuple[float, ...] = (20_000.0,)
    weights: tuple[float, ...] = (1.0,)
    pump_rate_hz: float | None = None
    excitation_probability: float | None = None
    shelf_probability: float = 0.0
    shelf_lifetime_ps: float | None = None

    def __post_init__(self):
        if self.scheme not in (TWO_LEVEL, TWO_LEVEL_SHELVING):
            raise ValueError(f"unknown level scheme {self.scheme!r}")
        if len(self.lifetimes_ps) != len(self.weights) or not self.lifetimes_ps:
            raise ValueError("lifetimes and weights must be nonempty and aligned")
        if any(t <= 0 for t in self.lifetimes_ps):
            raise ValueError("lifetimes must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.excitation_probability is not None and not 0.0 <= self.excitation_probability <= 1.0:
            raise ValueError("excitation probability must be in [0, 1]")
        if self.scheme == TWO_LEVEL_SHELVING:
            if not 0.0 <= self.shelf_probability <= 1.0:
                raise ValueError("shelf probability must be in [0, 1]")
            if self.shelf_probability > 0 and not self.shelf_lifetime_ps:
                raise ValueError("shelving needs a shelf lifetime")

    @property
    def mean_lifetime_ps(self) -> float:
        return sum(w * t for w, t in zip(self.weights, self.lifetimes_ps))


@dataclass(frozen=True)
class DetectorModel:
    """Detection chain: efficiency, Gaussian jitter, beamsplitter, dead time."""

    quantum_efficiency: float = 0.35
    jitter_sigma_ps: float = 30.0
    splitter_ratio: float = 0.5
    dead_time_ps: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError("quantum efficiency must be in [0, 1]")
        if not 0.0 <= self.splitter_ratio <= 1.0:
            raise ValueError("splitter ratio must be in [0, 1]")
        if self.jitter_sigma_ps < 0 or self.dead_time_ps < 0:
            raise ValueError("jitter and dead time must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    """Run length, excitation timing, background, and the mandatory seed."""

    duration_s: float
    seed: int
    rep_period_ps: float | None = None
    background_cps: float = 0.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.seed is None:
            raise ValueError("seed is mandatory")
        if self.background_cps < 0:
            raise ValueError("background rate must be nonnegative")

    @property
    def duration_ps(self) -> float:
        return self.duration_s * 1e12


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _mixture_delays(rng, emitter: EmitterModel, n: int) -> np.ndarray:
    taus = np.asarray(emitter.lifetimes_ps)
    if taus.size == 1:
        return rng.exponential(taus[0], size=n)
    comp = rng.choice(taus.size, size=n, p=np.asarray(emitter.weights))
    return rng.exponential(1.0, size=n) * taus[comp]


def _detect(rng, emission_ps, detector: DetectorModel, duration_ps):
    """Thin by efficiency, split onto channels, add (unwrapped) jitter.

    Jitter must not be folded into the pulse period: folding would pair
    photons of neighboring pulses at zero delay.  The folded phase
    histogram is unaffected either way since pulse times are multiples
    of the period.
    """
    keep = rng.random(emission_ps.size) < detector.quantum_efficiency
    t = emission_ps[keep]
    ch = (rng.random(t.size) >= detector.splitter_ratio).astype(np.uint8)
    if detector.jitter_sigma_ps > 0:
        t = t + rng.normal(0.0, detector.jitter_sigma_ps, size=t.size)
    inside = (t >= 0.0) & (t <= duration_ps)
    return t[inside], ch[inside]


def _background(rng, config: SimConfig, detector: DetectorModel):
    rate_ps = config.background_cps * 1e-12
    n = rng.poisson(rate_ps * config.duration_ps)
    t = rng.random(n) * config.duration_ps
    ch = (rng.random(n) >= detector.splitter_ratio).astype(np.uint8)
    return t, ch


def _apply_dead_time(t, ch, dead_ps):
    if dead_ps <= 0 or t.size == 0:
        return t, ch
    keep = np.zeros(t.size, dtype=bool)
    for c in (0, 1):
        idx = np.nonzero(ch == c)[0]
        last = -math.inf
        for i in idx:
            if t[i] - last >= dead_ps:
                keep[i] = True
                last = t[i]
    return t[keep], ch[keep]


def _assemble(sig_t, sig_ch, bg_t, bg_ch, config, detector, mode, rep_period, flags):
    t = np.concatenate([sig_t, bg_t])
    ch = np.concatenate([sig_ch, bg_ch])
    order = np.argsort(t, kind="stable")
    t, ch = t[order], ch[order]
    t, ch = _apply_dead_time(t, ch, detector.dead_time_ps)
    return TimeTagStream(
        channels=ch,
        timestamps_ps=t,
        duration_ps=config.duration_ps,
        mode=mode,
        rep_period_ps=rep_period,
        flags=tuple(flags),
    )


def simulate_cw(emitter: EmitterModel, detector: DetectorModel, config: SimConfig) -> TimeTagStream:
    """Continuous-pumping simulation of the level scheme.

    Each pump/decay cycle draws exponential waits; the decay emits one
    photon unless the shelving branch is taken.  Deterministic per seed.
    """
    if emitter.pump_rate_hz is None or emitter.pump_rate_hz <= 0:
        raise ValueError("CW simulation needs a positive pump rate")
    rng = _rng(config.seed)
    pump_ps = 1e12 / emitter.pump_rate_hz
    cycle_ps = pump_ps + emitter.mean_lifetime_ps
    if emitter.scheme == TWO_LEVEL_SHELVING and emitter.shelf_probability > 0:
        cycle_ps += emitter.shelf_probability * emitter.shelf_lifetime_ps

    emission = []
    photon_mask = []
    t_now = 0.0
    while t_now < config.duration_ps:
        n = max(int((config.duration_ps - t_now) / cycle_ps * 1.2) + 16, 16)
        waits = rng.exponential(pump_ps, size=n) + _mixture_delays(rng, emitter, n)
        if emitter.scheme == TWO_LEVEL_SHELVING and emitter.shelf_probability > 0:
            shelved = rng.random(n) < emitter.shelf_probability
            shelf_wait = np.where(
                shelved, rng.exponential(emitter.shelf_lifetime_ps, size=n), 0.0
            )
        else:
            shelved = np.zeros(n, dtype=bool)
            shelf_wait = np.zeros(n)
        # photon is emitted at the end of pump+decay, before any shelf dwell
        ends = t_now + np.cumsum(waits + shelf_wait)
        emits = ends - shelf_wait
        emission.append(emits)
        photon_mask.append(~shelved)
        t_now = ends[-1]
    emits = np.concatenate(emission)
    mask = np.concatenate(photon_mask)
    emits = emits[mask & (emits <= config.duration_ps)]

    sig_t, sig_ch = _detect(rng, emits, detector, config.duration_ps)
    bg_t, bg_ch = _background(rng, config, detector)
    return _assemble(sig_t, sig_ch, bg_t, bg_ch, config, detector, CW, None, ())


def simulate_pulsed(emitter: EmitterModel, detector: DetectorModel, config: SimConfig) -> TimeTagStream:
    """Pulsed-excitation simulation: at most one signal photon per pulse.

    Delays are drawn from the exponential mixture and wrapped into the
    repetition period (flagged when the period is shorter than ten slow
    lifetimes); detector jitter is applied inside the same cyclic phase.
    """
    if emitter.excitation_probability is None:
        raise ValueError("pulsed simulation needs an excitation probability")
    if not config.rep_period_ps or config.rep_period_ps <= 0:
        raise ValueError("pulsed simulation needs a repetition period")
    rng = _rng(config.seed)
    period = config.rep_period_ps
    flags = []
    if period < 10.0 * max(emitter.lifetimes_ps):
        flags.append("wraparound: rep period < 10x slowest lifetime")

    n_pulses = int(config.duration_ps // period)
    excited = rng.random(n_pulses) < emitter.excitation_probability
    pulse_idx = np.nonzero(excited)[0]
    delays = _mixture_delays(rng, emitter, pulse_idx.size) % period
    emits = pulse_idx * period + delays

    sig_t, sig_ch = _detect(rng, emits, detector, config.duration_ps)
    bg_t, bg_ch = _background(rng, config, detector)
    return _assemble(sig_t, sig_ch, bg_t, bg_ch, config, detector, PULSED, period, flags)


def expected_cw_detected_rate(emitter: EmitterModel, detector: DetectorModel) -> float:
    """Analytic steady-state detected count rate (both channels, 1/s)."""
    if emitter.pump_rate_hz is None:
        raise ValueError("CW rate needs a pump rate")
    cycle_s = 1.0 / emitter.pump_rate_hz + emitter.mean_lifetime_ps * 1e-12
    photon_fraction = 1.0
    if emitter.scheme == TWO_LEVEL_SHELVING and emitter.shelf_probability > 0:
        cycle_s += emitter.shelf_probability * emitter.shelf_lifetime_ps * 1e-12
        photon_fraction = 1.0 - emitter.shelf_probability
    return detector.quantum_efficiency * photon_fraction / cycle_s
