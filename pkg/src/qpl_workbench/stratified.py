"""Planar multilayer kernel: Fresnel coefficients, generalized stack
reflection, and complex-plane TM guided-mode pole search.

Conventions
-----------
Time dependence e^(-i omega t); passive media have Im(eps) >= 0.
The transverse wavenumber is expressed as u = k_par / k0 (dimensionless)
and normal wavenumbers as kz/k0 = sqrt(eps - u^2) on the branch with
Im >= 0 (decay away from the stack), tie-broken to Re >= 0.
TE coefficients are electric-field amplitude ratios, TM coefficients are
magnetic-field amplitude ratios, i.e.

    r_TE = (kz1 - kz2) / (kz1 + kz2)
    r_TM = (eps2 kz1 - eps1 kz2) / (eps2 kz1 + eps1 kz2)

Generalized reflection/transmission of a sub-stack is composed with the
recursive two-interface (Airy/Rouard) formula, which stays bounded for
strongly evanescent waves where raw 2x2 transfer matrices overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LosslessModeError, SearchWindowError, StackError
from .materials import DEFAULT_WAVELENGTH_NM, MaterialModel, permittivity

TE = "TE"
TM = "TM"

FROM_BELOW = "from-below"
FROM_ABOVE = "from-above"


# ---------------------------------------------------------------------------
# geometry types

@dataclass(frozen=True)
class Layer:
    """Finite layer: a material and a positive thickness in nm."""

    material: MaterialModel
    thickness_nm: float

    def __post_init__(self):
        if not self.thickness_nm > 0:
            raise StackError(f"layer {self.material.name}: thickness must be > 0")


@dataclass(frozen=True)
class LayerStack:
    """Lower half-space, finite layers bottom-to-top, upper half-space.

    ``emitter_index`` optionally designates the finite layer hosting the
    source dipole.
    """

    lower: MaterialModel
    layers: tuple[Layer, ...]
    upper: MaterialModel
    emitter_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.emitter_index is not None:
            if not 0 <= self.emitter_index < len(self.layers):
                raise StackError(
                    f"emitter_index {self.emitter_index} outside layer range"
                )

    def permittivities(self, wavelength_nm: float):
        """(eps_lower, [eps per layer], eps_upper) at one wavelength."""
        eps_layers = [permittivity(l.material, wavelength_nm) for l in self.layers]
        return (
            permittivity(self.lower, wavelength_nm),
            eps_layers,
            permittivity(self.upper, wavelength_nm),
        )

    def thicknesses(self):
        return [l.thickness_nm for l in self.layers]

    def reversed(self) -> "LayerStack":
        emitter = None
        if self.emitter_index is not None:
            emitter = len(self.layers) - 1 - self.emitter_index
        return LayerStack(self.upper, tuple(reversed(self.layers)), self.lower, emitter)

    def cache_token(self, wavelength_nm: float) -> str:
        eps_lo, eps_layers, eps_up = self.permittivities(wavelength_nm)
        parts = [repr(eps_lo)]
        for layer, eps in zip(self.layers, eps_layers):
            parts.append(f"{eps!r}:{layer.thickness_nm!r}")
        parts.append(repr(eps_up))
        parts.append(repr(self.emitter_index))
        parts.append(repr(float(wavelength_nm)))
        return "|".join(parts)


@dataclass(frozen=True)
class GuidedMode:
    """A TM pole of the stack: complex effective index and derived length."""

    n_eff: complex
    propagation_length_um: float
    polarization: str = TM
    residual: float = 0.0

    @property
    def is_lossy(self) -> bool:
        return self.propagation_length_um < 0.5


@dataclass(frozen=True)
class SearchWindow:
    """Rectangle in the complex u-plane for the pole search."""

    re_min: float = 1.0 + 1e-6
    re_max: float = 4.0
    im_min: float = 0.0
    im_max: float = 0.5

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise SearchWindowError("degenerate search window")
        if self.re_min <= 1.0 - 1e-12:
            raise SearchWindowError("search window must satisfy Re(u) > 1")

    def contains(self, u: complex, pad: float = 0.0) -> bool:
        return (
            self.re_min - pad <= u.real <= self.re_max + pad
            and self.im_min - pad <= u.imag <= self.im_max + pad
        )


# ---------------------------------------------------------------------------
# wave quantities

def kz_normalized(eps, u):
    """kz/k0 = sqrt(eps - u^2), branch with Im >= 0 (then Re >= 0)."""
    u = np.asarray(u, dtype=complex)
    w = np.sqrt(eps - u * u)
    w = np.where(w.imag < 0.0, -w, w)
    w = np.where((w.imag == 0.0) & (w.real < 0.0), -w, w)
    return w


def fresnel_interface(eps1, eps2, u, pol):
    """Single-interface amplitude (r, t) for incidence from medium 1.

    Vectorized over u.  TM amplitudes refer to the magnetic field.
    """
    if pol not in (TE, TM):
        raise ValueError(f"polarization must be TE or TM, got {pol!r}")
    kz1 = kz_normalized(eps1, u)
    kz2 = kz_normalized(eps2, u)
    if pol == TE:
        den = kz1 + kz2
        return (kz1 - kz2) / den, 2.0 * kz1 / den
    den = eps2 * kz1 + eps1 * kz2
    return (eps2 * kz1 - eps1 * kz2) / den, 2.0 * eps2 * kz1 / den


def _chain_coefficients(eps_ref, eps_chain, d_chain, eps_end, u, pol, k0):
    """Generalized (r, t) of [ref | chain layers | end half-space].

    Seen from the reference medium at its interface with the first chain
    layer; the chain is ordered from the reference side outward.  Stable
    for evanescent u because every factor e^{2i kz d} decays.
    """
    media = [eps_ref, *eps_chain]
    if eps_chain:
        r, t = fresnel_interface(media[-1], eps_end, u, pol)
        for j in range(len(eps_chain) - 1, -1, -1):
            r_j, t_j = fresnel_interface(media[j], media[j + 1], u, pol)
            phase = np.exp(1j * k0 * kz_normalized(media[j + 1], u) * d_chain[j])
            rp = r * phase * phase
            den = 1.0 + r_j * rp
            r = (r_j + rp) / den
            t = t_j * t * phase / den
        return r, t
    return fresnel_interface(eps_ref, eps_end, u, pol)


def stack_reflection(stack: LayerStack, u, pol, side, wavelength_nm=DEFAULT_WAVELENGTH_NM):
    """Generalized reflection of the whole stack seen from a half-space.

    ``side`` is 'from-below' (incidence from the lower half-space) or
    'from-above'.  Vectorized over u; stays bounded for u up to ~50.
    """
    eps_lo, eps_layers, eps_up = stack.permittivities(wavelength_nm)
    d = stack.thicknesses()
    k0 = 2.0 * math.pi / wavelength_nm
    if side == FROM_BELOW:
        r, _ = _chain_coefficients(eps_lo, eps_layers, d, eps_up, u, pol, k0)
    elif side == FROM_ABOVE:
        r, _ = _chain_coefficients(
            eps_up, eps_layers[::-1], d[::-1], eps_lo, u, pol, k0
        )
    else:
        raise ValueError(f"side must be 'from-below' or 'from-above', got {side!r}")
    return r


def interior_coefficients(stack: LayerStack, layer_index: int, u, pol,
                          wavelength_nm=DEFAULT_WAVELENGTH_NM):
    """(r_down, t_down, r_up, t_up) seen from inside one finite layer.

    r_down/t_down describe the sub-stack below the layer (referenced at
    its bottom boundary), r_up/t_up the sub-stack above (top boundary).
    """
    if not 0 <= layer_index < len(stack.layers):
        raise StackError(f"layer index {layer_index} outside stack")
    eps_lo, eps_layers, eps_up = stack.permittivities(wavelength_nm)
    d = stack.thicknesses()
    k0 = 2.0 * math.pi / wavelength_nm
    eps_ref = eps_layers[layer_index]
    below = slice(layer_index - 1, None, -1) if layer_index > 0 else slice(0, 0)
    r_dn, t_dn = _chain_coefficients(
        eps_ref, eps_layers[below], d[below], eps_lo, u, pol, k0
    )
    above = slice(layer_index + 1, None)
    r_up, t_up = _chain_coefficients(
        eps_ref, eps_layers[above], d[above], eps_up, u, pol, k0
    )
    return r_dn, t_dn, r_up, t_up


# ---------------------------------------------------------------------------
# TM pole search

def _reference_layer(stack: LayerStack, wavelength_nm) -> int:
    if stack.emitter_index is not None:
        return stack.emitter_index
    _, eps_layers, _ = stack.permittivities(wavelength_nm)
    return int(np.argmax([np.sqrt(e).real for e in eps_layers]))


def tm_dispersion_function(stack: LayerStack, wavelength_nm=DEFAULT_WAVELENGTH_NM):
    """Scalar function whose zeros are the TM guided modes of the stack.

    With finite layers present it is the transverse-resonance function
    1 - r_up r_down e^{2i kz t} referenced in one layer; for two bare
    half-spaces it is the normalized TM interface denominator.  Modes
    whose field is fully screened from the reference layer (e.g. behind
    an opaque film) carry exponentially small weight in this function.
    """
    eps_lo, eps_layers, eps_up = stack.permittivities(wavelength_nm)
    k0 = 2.0 * math.pi / wavelength_nm
    if stack.layers:
        j = _reference_layer(stack, wavelength_nm)
        t_j = stack.layers[j].thickness_nm
        eps_j = eps_layers[j]

        def dispersion(u):
            r_dn, _, r_up, _ = interior_coefficients(stack, j, u, TM, wavelength_nm)
            phase = np.exp(2j * k0 * kz_normalized(eps_j, u) * t_j)
            return 1.0 - r_up * r_dn * phase

        return dispersion

    scale = abs(eps_lo) + abs(eps_up)

    def dispersion(u):
        return (eps_lo * kz_normalized(eps_up, u)
                + eps_up * kz_normalized(eps_lo, u)) / scale

    return dispersion


@dataclass(frozen=True)
class PoleSearchResult:
    """Modes found in a window, plus warnings (e.g. budget exhaustion)."""

    modes: tuple[GuidedMode, ...]
    warnings: tuple[str, ...] = ()

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]


def _newton_polish_batch(f, starts, window, tol=1e-10, max_iter=50):
    """Damped complex Newton iteration on a batch of starting points.

    Derivatives use central differences; steps that fail to reduce |f| are
    halved a few times before the trajectory is abandoned.  Returns the
    final iterates and residual magnitudes.
    """
    u = np.asarray(starts, dtype=complex).copy()
    fu = f(u)
    alive = np.abs(fu) >= 0  # all True
    pad = 0.5 * (window.re_max - window.re_min)
    for _ in range(max_iter):
        active = alive & (np.abs(fu) >= tol)
        if not np.any(active):
            break
        h = 1e-7 * np.maximum(1.0, np.abs(u))
        fp = f(u + h)
        fm = f(u - h)
        dfdu = (fp - fm) / (2.0 * h)
        bad = dfdu == 0
        step = np.where(active & ~bad, fu / np.where(bad, 1.0, dfdu), 0.0)
        improved = np.zeros(u.shape, dtype=bool)
        for _ in range(6):
            trial = np.where(active & ~improved, u - step, u)
            ft = f(trial)
            better = active & ~improved & (
                (np.abs(ft) < np.abs(fu)) | (np.abs(step) < 1e-15)
            )
            u = np.where(better, trial, u)
            fu = np.where(better, ft, fu)
            improved |= better
            step = np.where(improved, step, 0.5 * step)
            if np.all(improved | ~active):
                break
        alive &= improved | ~active
        out = (
            (u.real < window.re_min - pad) | (u.real > window.re_max + pad)
            | (u.imag < window.im_min - pad) | (u.imag > window.im_max + pad)
        )
        alive &= ~out
    return u, np.abs(fu)


def _cell_winding(phase):
    """Winding numbers of each grid cell from node phases (ni, nr)."""
    def dphi(p, q):
        d = q - p
        return (d + math.pi) % (2.0 * math.pi) - math.pi

    bottom = dphi(phase[:-1, :-1], phase[:-1, 1:])
    right = dphi(phase[:-1, 1:], phase[1:, 1:])
    top = dphi(phase[1:, 1:], phase[1:, :-1])
    left = dphi(phase[1:, :-1], phase[:-1, :-1])
    return np.rint((bottom + right + top + left) / (2.0 * math.pi)).astype(int)


def find_tm_poles(
    stack: LayerStack,
    window: SearchWindow | None = None,
    wavelength_nm: float = DEFAULT_WAVELENGTH_NM,
    *,
    grid=None,
    newton_tol: float = 1e-10,
    dedupe_tol: float = 1e-8,
    max_candidates: int = 600,
) -> PoleSearchResult:
    """All TM guided-mode poles inside a complex-u window.

    Coarse |D| / phase-winding scan on a grid seeds complex Newton
    polishing; polished roots are validated against |D| < newton_tol,
    deduplicated, and clipped to Im(n_eff) >= 0.  The default grid
    density scales with the window width (at least 200 x 50).
    """
    window = window or SearchWindow()
    disp = tm_dispersion_function(stack, wavelength_nm)
    if grid is None:
        grid = (max(200, int(80 * (window.re_max - window.re_min))), 50)
    nr, ni = grid
    re = np.linspace(window.re_min, window.re_max, nr)
    im = np.linspace(window.im_min, window.im_max, ni)
    uu = re[None, :] + 1j * im[:, None]
    dv = disp(uu.ravel()).reshape(ni, nr)
    mag = np.abs(dv)

    candidates = []
    # interior local minima of |D|
    interior = mag[1:-1, 1:-1]
    neigh = np.minimum.reduce([
        mag[:-2, 1:-1], mag[2:, 1:-1], mag[1:-1, :-2], mag[1:-1, 2:],
        mag[:-2, :-2], mag[:-2, 2:], mag[2:, :-2], mag[2:, 2:],
    ])
    iy, ix = np.nonzero(interior <= neigh)
    order = np.argsort(interior[iy, ix])
    for k in order:
        candidates.append(uu[iy[k] + 1, ix[k] + 1])
    # winding-number cells (catch poles sitting between grid minima)
    wind = _cell_winding(np.angle(dv))
    wy, wx = np.nonzero(wind != 0)
    for y, x in zip(wy, wx):
        candidates.append(0.25 * (uu[y, x] + uu[y, x + 1] + uu[y + 1, x] + uu[y + 1, x + 1]))
    # edge minima along the window boundary (e.g. lossless poles at Im = 0)
    for row_idx in (0, ni - 1):
        edge = mag[row_idx, :]
        jj = np.nonzero((edge[1:-1] <= edge[:-2]) & (edge[1:-1] <= edge[2:]))[0]
        candidates.extend(uu[row_idx, jj + 1])

    warnings = []
    if len(candidates) > max_candidates:
        warnings.append(
            f"candidate budget exhausted ({len(candidates)} > {max_candidates}); "
            "mode list may be partial"
        )
        candidates = candidates[:max_candidates]

    roots = []
    if candidates:
        polished, resids = _newton_polish_batch(
            disp, np.array(candidates), window, tol=newton_tol
        )
        for root, resid in zip(polished, resids):
            root = complex(root)
            resid = float(resid)
            if resid >= newton_tol:
                continue
            if abs(root.imag) < 1e-12:
                root = complex(root.real, 0.0)
            if root.imag < -1e-9:
                continue
            if root.imag < 0.0:
                root = complex(root.real, 0.0)
            if not window.contains(root, pad=1e-9):
                continue
            if any(abs(root - r) <= dedupe_tol for r, _ in roots):
                continue
            roots.append((root, resid))

    roots.sort(key=lambda item: item[0].real)
    modes = tuple(
        GuidedMode(
            n_eff=r,
            propagation_length_um=(
                wavelength_nm * 1e-3 / (4.0 * math.pi * r.imag) if r.imag > 0 else math.inf
            ),
            polarization=TM,
            residual=resid,
        )
        for r, resid in roots
    )
    return PoleSearchResult(modes=modes, warnings=tuple(warnings))


def mode_propagation_length(mode: GuidedMode, wavelength_nm: float) -> float:
    """Propagation length L = lambda / (4 pi Im n_eff) in micrometers."""
    if mode.n_eff.imag <= 0:
        raise LosslessModeError("lossless mode: propagation length is unbounded")
    return wavelength_nm * 1e-3 / (4.0 * math.pi * mode.n_eff.imag)


def single_interface_spp(eps_metal: complex, eps_dielectric: complex) -> complex:
    """Closed-form SPP effective index of a single metal/dielectric interface."""
    n2 = eps_metal * eps_dielectric / (eps_metal + eps_dielectric)
    n = np.sqrt(complex(n2))
    if n.real < 0:
        n = -n
    return complex(n)
