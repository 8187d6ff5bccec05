"""Optical-constant registry for the media used in launcher stacks.

Time-harmonic convention is e^(-i omega t) throughout the package, so a
passive medium has Im(eps) >= 0.  Shipped models are constants measured at
685 nm and declared valid on a +-50 nm band; tabulated dispersion is
supported with linear interpolation on (eps', eps'') separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownMaterialError, WavelengthRangeError

DEFAULT_WAVELENGTH_NM = 685.0
_DEFAULT_BAND_NM = (635.0, 735.0)

CONSTANT_EPSILON = "constant-epsilon"
CONSTANT_INDEX = "constant-index"
TABLE = "table"


@dataclass(frozen=True)
class MaterialModel:
    """One medium: a name plus a dispersion rule.

    kind selects the payload: 'constant-epsilon' uses ``epsilon``,
    'constant-index' uses ``index`` (eps = index**2), 'table' uses
    ``table`` rows of (wavelength_nm, eps_re, eps_im) with strictly
    increasing wavelengths.  Queries outside the validity range raise
    WavelengthRangeError, never extrapolate.
    """

    name: str
    kind: str
    epsilon: complex | None = None
    index: float | None = None
    table: tuple[tuple[float, float, float], ...] | None = None
    band_nm: tuple[float, float] = _DEFAULT_BAND_NM

    def __post_init__(self):
        if self.kind == CONSTANT_EPSILON:
            if self.epsilon is None:
                raise ValueError(f"{self.name}: constant-epsilon model needs epsilon")
            if self.epsilon.imag < 0:
                raise ValueError(f"{self.name}: Im(eps) < 0 violates passivity")
        elif self.kind == CONSTANT_INDEX:
            if self.index is None or self.index <= 0:
                raise ValueError(f"{self.name}: constant-index model needs index > 0")
        elif self.kind == TABLE:
            if not self.table:
                raise ValueError(f"{self.name}: table model needs rows")
            wl = [row[0] for row in self.table]
            if any(b <= a for a, b in zip(wl, wl[1:])):
                raise ValueError(f"{self.name}: table wavelengths must be strictly increasing")
            if any(row[2] < 0 for row in self.table):
                raise ValueError(f"{self.name}: Im(eps) < 0 violates passivity")
        else:
            raise ValueError(f"{self.name}: unknown dispersion kind {self.kind!r}")
        if self.band_nm[1] <= self.band_nm[0]:
            raise ValueError(f"{self.name}: empty validity band")

    @property
    def validity_range_nm(self) -> tuple[float, float]:
        if self.kind == TABLE:
            return (self.table[0][0], self.table[-1][0])
        return self.band_nm


def permittivity(material: MaterialModel, wavelength_nm: float) -> complex:
    """Complex relative permittivity of ``material`` at ``wavelength_nm``.

    Deterministic and pure.  Index models return index**2; tabulated models
    interpolate eps' and eps'' linearly and reproduce table nodes exactly.
    """
    lo, hi = material.validity_range_nm
    if not lo <= wavelength_nm <= hi:
        raise WavelengthRangeError(
            f"{material.name}: {wavelength_nm} nm outside validity range [{lo}, {hi}] nm"
        )
    if material.kind == CONSTANT_EPSILON:
        return complex(material.epsilon)
    if material.kind == CONSTANT_INDEX:
        return complex(material.index * material.index)
    rows = material.table
    for (w0, re0, im0), (w1, re1, im1) in zip(rows, rows[1:]):
        if w0 <= wavelength_nm <= w1:
            if wavelength_nm == w0:
                return complex(re0, im0)
            if wavelength_nm == w1:
                return complex(re1, im1)
            f = (wavelength_nm - w0) / (w1 - w0)
            return complex(re0 + f * (re1 - re0), im0 + f * (im1 - im0))
    return complex(rows[-1][1], rows[-1][2])


def refractive_index(material: MaterialModel, wavelength_nm: float) -> complex:
    """Complex refractive index, principal root of the permittivity."""
    eps = permittivity(material, wavelength_nm)
    n = eps ** 0.5
    if n.real < 0:
        n = -n
    return n


class MaterialRegistry:
    """Mapping of material ids to models; immutable models, mutable map."""

    def __init__(self, models: dict[str, MaterialModel] | None = None):
        self._models = dict(models or {})

    def add(self, model: MaterialModel) -> None:
        self._models[model.name] = model

    def lookup(self, name: str) -> MaterialModel:
        try:
            return self._models[name]
        except KeyError:
            known = ", ".join(sorted(self._models))
            raise UnknownMaterialError(f"unknown material {name!r} (known: {known})") from None

    def __contains__(self, name: str) -> bool:
        return name in self._models

    def names(self) -> list[str]:
        return sorted(self._models)

    def __iter__(self):
        return iter(sorted(self._models))


def builtin_registry() -> MaterialRegistry:
    """Registry of the stock media, with their 685 nm optical constants.

    Silver permittivities are ellipsometry values for sputtered epitaxial
    film and e-beam evaporated polycrystalline film; the 8 nm cap is
    assigned the bulk e-beam value.  MgO uses the standard literature
    index (no in-house measurement exists for it).
    """
    models = [
        MaterialModel("vacuum", CONSTANT_INDEX, index=1.0, band_nm=(1.0, 1e9)),
        MaterialModel("air", CONSTANT_INDEX, index=1.0, band_nm=(1.0, 1e9)),
        MaterialModel("ag_epitaxial", CONSTANT_EPSILON, epsilon=-21 + 0.4j),
        MaterialModel("ag_ebeam", CONSTANT_EPSILON, epsilon=-21 + 1.2j),
        MaterialModel("diamond", CONSTANT_INDEX, index=2.42),
        MaterialModel("alumina", CONSTANT_INDEX, index=1.74),
        MaterialModel("glass", CONSTANT_INDEX, index=1.525),
        MaterialModel("mgo", CONSTANT_INDEX, index=1.735),
    ]
    return MaterialRegistry({m.name: m for m in models})
