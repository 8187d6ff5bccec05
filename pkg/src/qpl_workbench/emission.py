"""Dissipated-power spectrum of a dipole in a layer stack and its
partition into far-field, guided-SPP, and near-field-loss channels.

The density p(u) is the emitted power per unit normalized in-plane
wavenumber u = k_par/k0, normalized to the rate of the same dipole in
vacuum.  It is assembled from the emitter layer's generalized up/down
reflections with the multiple-reflection cavity denominator; for a
vertical dipole only TM waves contribute, a horizontal dipole carries
the standard TE+TM split.  The emitter layer must be (numerically)
lossless so that the normalization is well defined.

Guided-mode peaks are integrable Lorentzians for lossy stacks; for
(near-)lossless stacks the poles pinch the integration axis and are
handled by symmetric excision plus analytic residue terms, which keeps
energy bookkeeping exact in the vanishing-loss limit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePositionError,
    PartitionError,
    QuadratureConvergenceError,
    StackError,
)
from .materials import DEFAULT_WAVELENGTH_NM, MaterialModel
from .quadrature import adaptive_integral, contour_residue, principal_window_integral
from .stratified import (
    TE,
    TM,
    LayerStack,
    SearchWindow,
    find_tm_poles,
    interior_coefficients,
    kz_normalized,
)

VERTICAL = "vertical"
HORIZONTAL = "horizontal"

# Poles closer to the real axis than this are integrated by excision +
# residue instead of brute-force quadrature.
_EXCISE_IM = 1e-6
_EXCISE_HALF_WIDTH = 2e-4


@dataclass(frozen=True)
class EmitterConfig:
    """Dipole placement: orientation, host layer, height, wavelength.

    ``z_nm`` is measured from the emitter layer's lower boundary.
    """

    orientation: str = VERTICAL
    layer_index: int = 0
    z_nm: float = 0.0
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM

    def __post_init__(self):
        if self.orientation not in (VERTICAL, HORIZONTAL):
            raise ValueError(f"orientation must be vertical|horizontal, got {self.orientation!r}")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength must be positive")


def _check_emitter(stack: LayerStack, emitter: EmitterConfig):
    if not 0 <= emitter.layer_index < len(stack.layers):
        raise StackError(f"emitter layer index {emitter.layer_index} outside stack")
    thickness = stack.layers[emitter.layer_index].thickness_nm
    if emitter.z_nm <= 0.0 or emitter.z_nm >= thickness:
        raise DegeneratePositionError(
            f"emitter height {emitter.z_nm} nm not strictly inside layer of "
            f"{thickness} nm"
        )


class SpectralModel:
    """Closures for the power density and flux spectra of one geometry."""

    def __init__(self, stack: LayerStack, emitter: EmitterConfig):
        _check_emitter(stack, emitter)
        self.stack = stack
        self.emitter = emitter
        lam = emitter.wavelength_nm
        eps_lo, eps_layers, eps_up = stack.permittivities(lam)
        eps1 = eps_layers[emitter.layer_index]
        if abs(eps1.imag) > 1e-9 * abs(eps1):
            raise StackError(
                "emitter layer must be lossless for rate normalization "
                f"(Im eps = {eps1.imag:g})"
            )
        self.eps1 = eps1.real
        self.n1 = math.sqrt(self.eps1)
        self.eps_lo = eps_lo
        self.eps_up = eps_up
        self.k0 = 2.0 * math.pi / lam
        self.thickness = stack.layers[emitter.layer_index].thickness_nm
        self.z = emitter.z_nm

    # -- half-space helpers -------------------------------------------------
    def _lossless_index(self, eps: complex):
        if abs(eps.imag) <= 1e-12 * max(1.0, abs(eps)) and eps.real > 0:
            return math.sqrt(eps.real)
        return None

    @property
    def n_upper(self):
        return self._lossless_index(self.eps_up)

    @property
    def n_lower(self):
        return self._lossless_index(self.eps_lo)

    # -- cavity amplitudes --------------------------------------------------
    def _cavity(self, u, pol):
        r_dn, t_dn, r_up, t_up = interior_coefficients(
            self.stack, self.emitter.layer_index, u, pol, self.emitter.wavelength_nm
        )
        kz1 = kz_normalized(self.eps1, u)
        a_dn = r_dn * np.exp(2j * self.k0 * kz1 * self.z)
        a_up = r_up * np.exp(2j * self.k0 * kz1 * (self.thickness - self.z))
        return a_dn, a_up, 1.0 - a_up * a_dn, t_dn, t_up, kz1

    # -- dissipated power density -------------------------------------------
    def density_complex(self, u):
        """Analytic function g(u) with p(u) = Re g(u) on the real axis."""
        u = np.asarray(u, dtype=complex)
        n1 = self.n1
        if self.emitter.orientation == VERTICAL:
            a_dn, a_up, den, _, _, kz1 = self._cavity(u, TM)
            s3_over_sz = u ** 3 / (n1 * n1 * kz1)
            return 1.5 * s3_over_sz * (1.0 + a_up) * (1.0 + a_dn) / den
        a_dn_e, a_up_e, den_e, _, _, kz1 = self._cavity(u, TE)
        a_dn_m, a_up_m, den_m, _, _, _ = self._cavity(u, TM)
        s_over_sz = u / kz1
        s_sz = u * kz1 / (n1 * n1)
        g_te = 0.75 * s_over_sz * (1.0 + a_up_e) * (1.0 + a_dn_e) / den_e
        g_tm = 0.75 * s_sz * (1.0 - a_up_m) * (1.0 - a_dn_m) / den_m
        return g_te + g_tm

    def density(self, u):
        return np.real(self.density_complex(np.asarray(u, dtype=float)))

    # -- far-field flux densities -------------------------------------------
    def _flux_T(self, u, pol, side):
        """One-pass power transmittance of a half-stack, emitter layer -> half-space."""
        eps_hs = self.eps_lo if side == "down" else self.eps_up
        a_dn, a_up, den, t_dn, t_up, kz1 = self._cavity(u, pol)
        t = t_dn if side == "down" else t_up
        kz_hs = kz_normalized(eps_hs, u)
        kz1r = np.real(kz1)
        with np.errstate(divide="ignore", invalid="ignore"):
            if pol == TE:
                T = np.real(kz_hs) / kz1r * np.abs(t) ** 2
            else:
                T = np.real(kz_hs / eps_hs) / (kz1r / self.eps1) * np.abs(t) ** 2
        ok = (kz1r > 0) & (np.real(kz_hs) > 0)
        return np.where(ok, T, 0.0), a_dn, a_up, den, kz1

    def far_field_density(self, u, side):
        """Flux density into one lossless half-space ('up' or 'down')."""
        u = np.asarray(u, dtype=float)
        n1 = self.n1
        if self.emitter.orientation == VERTICAL:
            T, a_dn, a_up, den, kz1 = self._flux_T(u, TM, side)
            a_opp = a_dn if side == "up" else a_up
            kz1r = np.real(kz1)
            with np.errstate(divide="ignore", invalid="ignore"):
                pref = np.where(kz1r > 0, 0.75 * u ** 3 / (n1 * n1 * np.maximum(kz1r, 1e-300)), 0.0)
            return pref * np.abs(1.0 + a_opp) ** 2 / np.abs(den) ** 2 * T
        T_e, a_dn_e, a_up_e, den_e, kz1 = self._flux_T(u, TE, side)
        T_m, a_dn_m, a_up_m, den_m, _ = self._flux_T(u, TM, side)
        a_opp_e = a_dn_e if side == "up" else a_up_e
        a_opp_m = a_dn_m if side == "up" else a_up_m
        kz1r = np.real(kz1)
        with np.errstate(divide="ignore", invalid="ignore"):
            pref_te = np.where(kz1r > 0, 0.375 * u / kz1r, 0.0)
        pref_tm = 0.375 * u * kz1r / (n1 * n1)
        return (
            pref_te * np.abs(1.0 + a_opp_e) ** 2 / np.abs(den_e) ** 2 * T_e
            + pref_tm * np.abs(1.0 - a_opp_m) ** 2 / np.abs(den_m) ** 2 * T_m
        )


@dataclass
class PowerSpectrum:
    """Sampled dissipated-power density plus its integral bookkeeping."""

    u: np.ndarray
    density: np.ndarray
    wavelength_nm: float
    u_max: float
    total: float
    tail_estimate: float
    quad_error: float
    stack_token: str
    emitter: EmitterConfig
    pole_contributions: tuple = ()  # (n_eff, excised contribution, residue)
    warnings: tuple = ()

    def validate(self):
        floor = -1e-9 * max(1.0, float(np.max(self.density, initial=0.0)))
        if np.min(self.density, initial=0.0) < floor:
            raise PartitionError("negative power density beyond round-off floor")


def stack_fingerprint(stack: LayerStack, emitter: EmitterConfig) -> str:
    token = stack.cache_token(emitter.wavelength_nm) + "//" + repr(emitter)
    return hashlib.sha256(token.encode()).hexdigest()[:16]


def _pole_breakpoints(modes, u_max):
    pts = []
    for m in modes:
        u0 = m.n_eff.real
        width = max(m.n_eff.imag, 1e-6)
        for k in (-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0):
            p = u0 + k * width
            if 0.0 < p < u_max:
                pts.append(p)
    return pts


def dissipated_power_spectrum(
    stack: LayerStack,
    emitter: EmitterConfig,
    u_max: float = 20.0,
    *,
    modes=None,
    rel_tol: float = 1e-6,
    pole_window: SearchWindow | None = None,
) -> PowerSpectrum:
    """Adaptive evaluation of p(u) on [0, u_max] with an analytic tail.

    Sampling is refined near cavity-denominator minima (guided-mode
    poles) and at half-space branch points.  Near-lossless poles are
    excised and integrated analytically from their residues.
    """
    if u_max < 2.0:
        raise ValueError("u_max must be at least 2")
    model = SpectralModel(stack, emitter)
    if modes is None:
        modes = find_tm_poles(
            stack,
            pole_window or default_pole_window(model.n1),
            emitter.wavelength_nm,
        )
    mode_list = list(modes)
    warnings = list(getattr(modes, "warnings", ()))

    sharp = [m for m in mode_list if 0.0 <= m.n_eff.imag < _EXCISE_IM
             and 0.0 < m.n_eff.real < u_max]
    regular = [m for m in mode_list if m not in sharp]

    excised = []
    pole_contribs = []
    for m in sharp:
        w = _EXCISE_HALF_WIDTH
        u0 = m.n_eff.real
        value, rho = principal_window_integral(model.density_complex, m.n_eff, w)
        excised.append((u0 - w, u0 + w))
        pole_contribs.append((m.n_eff, value, rho))

    breaks = {1.0}
    for n in (model.n_lower, model.n_upper, model.n1):
        if n is not None and 0.0 < n < u_max:
            breaks.add(float(n))
    breaks.update(_pole_breakpoints(regular, u_max))
    for a, b in excised:
        breaks.add(a)
        breaks.add(b)
    sing = {model.n1} if model.n1 < u_max else set()

    segments = [(0.0, u_max)]
    for a, b in sorted(excised):
        new = []
        for lo, hi in segments:
            if b <= lo or a >= hi:
                new.append((lo, hi))
            else:
                if a > lo:
                    new.append((lo, a))
                if b < hi:
                    new.append((b, hi))
        segments = new

    samples = []
    total = 0.0
    err = 0.0
    scale_guess = None
    for lo, hi in segments:
        val, e = adaptive_integral(
            model.density,
            lo,
            hi,
            breakpoints=[p for p in breaks if lo < p < hi],
            sqrt_singularities=[s for s in sing if lo <= s <= hi],
            rel_tol=rel_tol,
            abs_tol=1e-12 if scale_guess is None else rel_tol * scale_guess * 1e-3,
            collect=samples,
        )
        total += val
        err += e
        scale_guess = abs(total) + 1.0

    for n_eff, value, _rho in pole_contribs:
        total += value

    p_end = float(model.density(np.array([u_max]))[0])
    tail = max(p_end, 0.0) * u_max / 2.0
    total += tail

    # dense local sampling across every mode peak for plotting fidelity
    for m in mode_list:
        u0, width = m.n_eff.real, max(m.n_eff.imag, 1e-6)
        lo = max(u0 - 20 * width, 1e-9)
        hi = min(u0 + 20 * width, u_max)
        if hi > lo:
            ux = np.linspace(lo, hi, 81)
            keep = np.ones_like(ux, dtype=bool)
            for a, b in excised:
                keep &= (ux < a) | (ux > b)
            if np.any(keep):
                samples.append((ux[keep], model.density(ux[keep])))

    u_all = np.concatenate([s[0] for s in samples])
    p_all = np.concatenate([s[1] for s in samples])
    order = np.argsort(u_all, kind="stable")
    u_all, p_all = u_all[order], p_all[order]
    uniq = np.concatenate([[True], np.diff(u_all) > 0])
    spectrum = PowerSpectrum(
        u=u_all[uniq],
        density=p_all[uniq],
        wavelength_nm=emitter.wavelength_nm,
        u_max=u_max,
        total=total,
        tail_estimate=tail,
        quad_error=err,
        stack_token=stack_fingerprint(stack, emitter),
        emitter=emitter,
        pole_contributions=tuple(pole_contribs),
        warnings=tuple(warnings),
    )
    return spectrum


def default_pole_window(n_emitter: float) -> SearchWindow:
    # wide enough for gap modes of deep-subwavelength metal-dielectric-metal
    # cavities, whose effective index grows as the gap narrows
    return SearchWindow(1.0 + 1e-6, max(4.0, 3.2 * n_emitter), 0.0, 0.5)


def total_decay_rate(
    stack: LayerStack,
    emitter: EmitterConfig,
    u_max: float = 20.0,
    *,
    spectrum: PowerSpectrum | None = None,
    reference_rate: float = 1.0,
    tail_fraction_limit: float = 0.01,
) -> float:
    """Decay-rate enhancement: integrated spectrum over the reference rate.

    The default reference is the vacuum rate (1 in these units); pass the
    output of :func:`glass_reference_rate` to normalize to a dipole in the
    same host layer sitting on a glass half-space.
    """
    if spectrum is None:
        spectrum = dissipated_power_spectrum(stack, emitter, u_max)
    if spectrum.tail_estimate > tail_fraction_limit * abs(spectrum.total):
        raise QuadratureConvergenceError(
            f"tail estimate {spectrum.tail_estimate:.3g} exceeds "
            f"{tail_fraction_limit:.0%} of total {spectrum.total:.3g}; "
            "increase u_max"
        )
    return spectrum.total / reference_rate


@dataclass
class DecayChannels:
    """Normalized rates and their derived branching figures.

    All gammas are in units of the vacuum rate; ``reference_rate`` holds
    the configured normalization so dre = gamma_total / reference_rate.
    """

    gamma_total: float
    gamma_ff: float
    gamma_spp: float
    gamma_nf: float
    gamma_ff_up: float
    gamma_ff_down: float
    reference_rate: float = 1.0
    mode_breakdown: tuple = ()  # (GuidedMode, window gamma, residue gamma)
    warnings: tuple = ()

    @property
    def dre(self) -> float:
        return self.gamma_total / self.reference_rate

    @property
    def xi(self) -> float:
        emitted = self.gamma_ff + self.gamma_spp
        return self.gamma_spp / emitted if emitted > 0 else 0.0

    @property
    def beta_spp(self) -> float:
        return self.gamma_spp / self.gamma_total if self.gamma_total > 0 else 0.0

    @property
    def beta_nfloss(self) -> float:
        return self.gamma_nf / self.gamma_total if self.gamma_total > 0 else 0.0

    def validate(self, tol: float = 1e-2):
        s = self.gamma_ff + self.gamma_spp + self.gamma_nf
        if abs(s - self.gamma_total) > tol * abs(self.gamma_total):
            raise PartitionError(
                f"channel sum {s:.6g} vs total {self.gamma_total:.6g} beyond {tol:.0%}"
            )
        for name in ("gamma_ff", "gamma_spp", "gamma_nf"):
            if getattr(self, name) < 0:
                raise PartitionError(f"{name} negative")


def _merge_windows(windows):
    if not windows:
        return []
    windows = sorted(windows)
    merged = [list(windows[0])]
    overlap = False
    for lo, hi, members in windows[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
            merged[-1][2] = merged[-1][2] + members
            overlap = True
        else:
            merged.append([lo, hi, members])
    return merged, overlap


def partition_channels(
    spectrum: PowerSpectrum,
    modes,
    stack: LayerStack,
    emitter: EmitterConfig,
    *,
    lossy_length_cutoff_um: float = 0.1,
    window_linewidths: float = 10.0,
    rel_tol: float = 1e-7,
    reference_rate: float = 1.0,
) -> DecayChannels:
    """Split the integrated rate into far-field, SPP, and near-field loss.

    gamma_FF integrates the transmitted flux into every lossless
    half-space (propagating orders on both sides); gamma_SPP integrates
    each guided-mode Lorentzian above a linearly interpolated local
    background over +-N linewidths, with a pole-residue estimate kept as
    a cross-check; gamma_NF is the remainder.  Modes shorter-lived than
    ``lossy_length_cutoff_um`` are left to the near-field channel.
    """
    if spectrum.stack_token != stack_fingerprint(stack, emitter):
        raise PartitionError("spectrum metadata does not match stack/emitter")
    model = SpectralModel(stack, emitter)
    u_max = spectrum.u_max
    warnings = list(spectrum.warnings)

    mode_list = [m for m in modes if m.n_eff.imag >= 0.0]
    spp_modes = [
        m for m in mode_list
        if m.propagation_length_um >= lossy_length_cutoff_um
        and 0.0 < m.n_eff.real < u_max
    ]
    excised = {round(m.n_eff.real, 12) for m in (
        m for m in spp_modes if m.n_eff.imag < _EXCISE_IM)}

    gamma_spp = 0.0
    breakdown = []
    windows = []
    for m in spp_modes:
        if round(m.n_eff.real, 12) in excised and m.n_eff.imag < _EXCISE_IM:
            # analytic contribution already isolated during integration
            contrib = None
            for n_eff, value, rho in spectrum.pole_contributions:
                if abs(n_eff - m.n_eff) < 1e-9:
                    contrib = (value, rho)
                    break
            if contrib is None:
                value, rho = principal_window_integral(
                    model.density_complex, m.n_eff, _EXCISE_HALF_WIDTH
                )
                contrib = (value, rho)
            peak = -contrib[1].imag * math.pi
            gamma_spp += max(peak, 0.0)
            breakdown.append((m, max(peak, 0.0), max(peak, 0.0)))
        else:
            width = window_linewidths * max(m.n_eff.imag, 1e-6)
            lo = max(m.n_eff.real - width, 0.0)
            hi = min(m.n_eff.real + width, u_max)
            windows.append((lo, hi, [m]))

    merged = []
    overlap = False
    if windows:
        merged, overlap = _merge_windows(windows)
        if overlap:
            warnings.append("overlapping mode windows merged")

    for lo, hi, members in merged:
        inner = [m.n_eff.real for m in members]
        val, _ = adaptive_integral(
            model.density, lo, hi,
            breakpoints=[p for p in _pole_breakpoints(members, u_max) if lo < p < hi],
            rel_tol=rel_tol, abs_tol=1e-12,
        )
        p_lo = float(model.density(np.array([lo]))[0])
        p_hi = float(model.density(np.array([hi]))[0])
        background = 0.5 * (p_lo + p_hi) * (hi - lo)
        peak = max(val - background, 0.0)
        gamma_spp += peak
        for m in members:
            radius = min(0.8 * m.n_eff.imag, 0.25 * (hi - lo)) if m.n_eff.imag > 0 else 0.0
            res_gamma = math.nan
            if radius > 0:
                rho = contour_residue(model.density_complex, m.n_eff, radius)
                res_gamma = -rho.imag * 2.0 * math.atan(window_linewidths)
            share = peak / len(members)
            breakdown.append((m, share, res_gamma))

    # far field through each lossless half-space
    gamma_ff_sides = {}
    for side, n_hs in (("up", model.n_upper), ("down", model.n_lower)):
        if n_hs is None:
            gamma_ff_sides[side] = 0.0
            continue
        ff_max = min(n_hs, model.n1)
        sing = [ff_max] if abs(ff_max - model.n1) < 1e-12 else []
        f = lambda u, s=side: model.far_field_density(u, s)
        val, _ = adaptive_integral(
            f, 0.0, ff_max,
            breakpoints=[p for p in _pole_breakpoints(mode_list, ff_max)] +
                        [n for n in (model.n_lower, model.n_upper) if n and n < ff_max],
            sqrt_singularities=sing,
            rel_tol=rel_tol, abs_tol=1e-12,
        )
        # replace in-range mode peaks with their local background: that
        # power is accounted to the guided channel, not to radiation
        for lo, hi, members in merged:
            lo_c, hi_c = max(lo, 0.0), min(hi, ff_max)
            if hi_c <= lo_c:
                continue
            pk, _ = adaptive_integral(
                f, lo_c, hi_c,
                breakpoints=[p for p in _pole_breakpoints(members, ff_max) if lo_c < p < hi_c],
                rel_tol=rel_tol, abs_tol=1e-12,
            )
            b_lo = float(f(np.array([lo_c]))[0])
            b_hi = float(f(np.array([hi_c]))[0])
            val -= max(pk - 0.5 * (b_lo + b_hi) * (hi_c - lo_c), 0.0)
        gamma_ff_sides[side] = max(val, 0.0)

    gamma_ff = gamma_ff_sides["up"] + gamma_ff_sides["down"]
    gamma_total = spectrum.total
    gamma_nf = gamma_total - gamma_ff - gamma_spp
    if gamma_nf < -1e-2 * max(abs(gamma_total), 1e-300):
        raise PartitionError(
            f"negative near-field remainder {gamma_nf:.4g} of total {gamma_total:.4g}"
        )
    gamma_nf = max(gamma_nf, 0.0)

    channels = DecayChannels(
        gamma_total=gamma_total,
        gamma_ff=gamma_ff,
        gamma_spp=gamma_spp,
        gamma_nf=gamma_nf,
        gamma_ff_up=gamma_ff_sides["up"],
        gamma_ff_down=gamma_ff_sides["down"],
        reference_rate=reference_rate,
        mode_breakdown=tuple(breakdown),
        warnings=tuple(warnings),
    )
    return channels


def spp_ff_ratio(channels: DecayChannels) -> float:
    """Guided-to-radiated power ratio gamma_SPP / gamma_FF."""
    if channels.gamma_ff <= 0:
        raise ZeroDivisionError("gamma_FF is zero; ratio undefined")
    return channels.gamma_spp / channels.gamma_ff


@dataclass
class FarFieldPattern:
    """Angular power density over the upper hemisphere."""

    theta_deg: np.ndarray
    intensity: np.ndarray
    azimuthally_symmetric: bool
    n_upper: float
    gamma_ff_up: float

    def hemisphere_integral(self) -> float:
        th = np.radians(self.theta_deg)
        return float(np.trapezoid(self.intensity * 2.0 * np.pi * np.sin(th), th))


def far_field_pattern(
    stack: LayerStack, emitter: EmitterConfig, n_theta: int = 1441
) -> FarFieldPattern:
    """Asymptotic angular spectrum U(theta) radiated into the upper half-space.

    The hemisphere integral of U equals the upward far-field rate within
    quadrature accuracy.
    """
    model = SpectralModel(stack, emitter)
    n_up = model.n_upper
    if n_up is None:
        raise StackError("upper half-space must be lossless for a far-field pattern")
    theta = np.linspace(0.0, 0.5 * math.pi, n_theta)
    # U = K(u) kz_up(u) n / (2 pi u); evaluate a hair inside the endpoints
    # where K and kz are individually singular but their product is not
    u = np.clip(n_up * np.sin(theta), 1e-9 * n_up, n_up * (1.0 - 1e-12))
    k = model.far_field_density(u, "up")
    kz_up = np.real(kz_normalized(model.eps_up, u))
    U = k * kz_up * n_up / (2.0 * math.pi * u)
    if n_theta > 2:
        U[0] = max(2.0 * U[1] - U[2], 0.0)
    gamma_up = float(np.trapezoid(U * 2.0 * np.pi * np.sin(theta), theta))
    return FarFieldPattern(
        theta_deg=np.degrees(theta),
        intensity=U,
        azimuthally_symmetric=emitter.orientation == VERTICAL,
        n_upper=n_up,
        gamma_ff_up=gamma_up,
    )


def collection_efficiency(pattern: FarFieldPattern, numerical_aperture: float) -> float:
    """Fraction of the hemisphere power inside the collection cone of an
    objective with the given NA."""
    if not 0.0 <= numerical_aperture <= pattern.n_upper + 1e-12:
        raise ValueError(
            f"NA must lie in [0, {pattern.n_upper}], got {numerical_aperture}"
        )
    theta_max = math.degrees(math.asin(min(numerical_aperture / pattern.n_upper, 1.0)))
    th = np.radians(pattern.theta_deg)
    w = pattern.intensity * 2.0 * np.pi * np.sin(th)
    total = np.trapezoid(w, th)
    if total <= 0:
        return 0.0
    inside = pattern.theta_deg <= theta_max
    if inside.sum() < 2:
        return 0.0
    part = np.trapezoid(w[inside], th[inside])
    return float(part / total)


def glass_reference_rate(stack: LayerStack, emitter: EmitterConfig,
                         glass: MaterialModel, ambient: MaterialModel,
                         u_max: float = 20.0) -> float:
    """Rate of the same dipole in its host layer resting on a glass half-space.

    Builds [glass | host layer | ambient] with identical emitter placement
    and integrates its spectrum; serves as the alternative normalization.
    """
    host = stack.layers[emitter.layer_index]
    ref_stack = LayerStack(glass, (host,), ambient, emitter_index=0)
    ref_emitter = EmitterConfig(
        orientation=emitter.orientation,
        layer_index=0,
        z_nm=emitter.z_nm,
        wavelength_nm=emitter.wavelength_nm,
    )
    return dissipated_power_spectrum(ref_stack, ref_emitter, u_max).total


def compute_decay_channels(
    stack: LayerStack,
    emitter: EmitterConfig,
    u_max: float = 20.0,
    *,
    reference_rate: float = 1.0,
    rel_tol: float = 1e-6,
    pole_window: SearchWindow | None = None,
    tail_fraction_limit: float = 0.01,
):
    """Pole search + spectrum + partition for one geometry.

    Returns (channels, spectrum, modes); raises
    QuadratureConvergenceError when the tail estimate exceeds the limit.
    """
    model = SpectralModel(stack, emitter)
    modes = find_tm_poles(
        stack, pole_window or default_pole_window(model.n1), emitter.wavelength_nm
    )
    spectrum = dissipated_power_spectrum(
        stack, emitter, u_max, modes=modes, rel_tol=rel_tol
    )
    if spectrum.tail_estimate > tail_fraction_limit * abs(spectrum.total):
        raise QuadratureConvergenceError(
            f"tail estimate {spectrum.tail_estimate:.3g} exceeds "
            f"{tail_fraction_limit:.0%} of total {spectrum.total:.3g}; increase u_max"
        )
    channels = partition_channels(
        spectrum, modes, stack, emitter, reference_rate=reference_rate
    )
    return channels, spectrum, modes
