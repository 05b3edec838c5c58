"""Refractive-index models for doped lithium niobate.

Models are loaded from TOML coefficient files.  Each file carries a header
(``id``, ``family``, ``source``), a ``[ranges]`` table and a
``[coefficients]`` table; nested tables such as ``[coefficients.ordinary]``
are flattened to dotted names (``ordinary.strength``).  No dispersion
constant lives in this module.

Wavelengths are in nm, doping in mol%, temperatures in degrees Celsius.
"""

from __future__ import annotations

import hashlib
import os
import re
import sys
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.constants import c as C_LIGHT

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODEL_DIR_ENV = "DOPEDPPLN_MODEL_DIR"
FD_STEP = 1e-4


class SchemaError(ValueError):
    """A coefficient file does not follow the schema."""


class ConflictError(ValueError):
    """Two models with the same id were put into one catalog."""


class RangeError(ValueError):
    """An evaluation point lies outside a model's declared validity range."""


class ExtrapolationWarning(UserWarning):
    """Emitted when an out-of-range point is evaluated on request."""


class RayKind(str, Enum):
    ORDINARY = "ordinary"
    EXTRAORDINARY = "extraordinary"

    @classmethod
    def parse(cls, label: "str | RayKind") -> "RayKind":
        if isinstance(label, RayKind):
            return label
        key = str(label).strip().lower()
        if key in ("o", "ordinary"):
            return cls.ORDINARY
        if key in ("e", "extraordinary"):
            return cls.EXTRAORDINARY
        raise ValueError(f"unknown ray kind {label!r}")

    @property
    def short(self) -> str:
        return self.value[0]


_RAY_FIELDS = {
    "doped-LN-generalized": (
        "strength",
        "strength_slope_below",
        "strength_slope_above",
        "pole_nm",
        "pole_slope_below",
        "pole_slope_above",
        "pole_temperature",
        "uv_strength",
        "ir_strength",
    ),
    "classic-sellmeier": ("a",),
}
_SHARED_FIELDS = {
    "doped-LN-generalized": (
        "doping_threshold",
        "uv_pole_nm",
        "reference_temperature_c",
        "thermal_offset_k",
        "thermal_amplitude",
        "thermal_scale_k",
    ),
    "classic-sellmeier": (),
}
FAMILIES = tuple(_RAY_FIELDS)


@dataclass(frozen=True)
class DispersionModel:
    """Immutable named index model with its validity ranges."""

    id: str
    family: str
    coefficients: Mapping[str, float]
    doping_range: tuple[float, float]
    wavelength_range: tuple[float, float]
    temperature_range: tuple[float, float]
    source: str = ""
    path: Path | None = field(default=None, compare=False)
    sha256: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", MappingProxyType(dict(self.coefficients)))
        for name in ("doping_range", "wavelength_range", "temperature_range"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not lo <= hi:
                raise SchemaError(f"{self.id}: {name} [{lo}, {hi}] is empty")
            object.__setattr__(self, name, (lo, hi))
        _validate_coefficients(self.id, self.family, self.coefficients)

    def coefficient(self, name: str) -> float:
        return self.coefficients[name]

    def in_range(self, wavelength_nm, x: float, temperature_c: float) -> np.ndarray:
        """Boolean mask of wavelengths that are valid at (x, T)."""
        lam = np.asarray(wavelength_nm, dtype=float)
        ok = (lam >= self.wavelength_range[0]) & (lam <= self.wavelength_range[1])
        ok &= self.doping_range[0] <= x <= self.doping_range[1]
        ok &= self.temperature_range[0] <= temperature_c <= self.temperature_range[1]
        return ok

    def check_range(self, wavelength_nm, x: float, temperature_c: float,
                    allow_extrapolation: bool = False, what: str = "wavelength") -> bool:
        """Raise :class:`RangeError` on out-of-range input.

        With ``allow_extrapolation`` a warning is emitted instead and the
        return value is True when the point is extrapolated.
        """
        problems = []
        lam = np.asarray(wavelength_nm, dtype=float)
        lo, hi = self.wavelength_range
        if lam.size and np.nanmin(lam) < lo:
            problems.append(f"{what} {np.nanmin(lam):.6g} nm below minimum {lo:g} nm")
        if lam.size and np.nanmax(lam) > hi:
            problems.append(f"{what} {np.nanmax(lam):.6g} nm above maximum {hi:g} nm")
        lo, hi = self.doping_range
        if not lo <= x <= hi:
            problems.append(f"doping {x:g} mol% outside [{lo:g}, {hi:g}] mol%")
        lo, hi = self.temperature_range
        if not lo <= temperature_c <= hi:
            problems.append(f"temperature {temperature_c:g} C outside [{lo:g}, {hi:g}] C")
        if not problems:
            return False
        msg = f"model {self.id}: " + "; ".join(problems)
        if not allow_extrapolation:
            raise RangeError(msg)
        warnings.warn(msg, ExtrapolationWarning, stacklevel=3)
        return True


def _validate_coefficients(model_id: str, family: str, coeffs: Mapping[str, float]) -> None:
    if family not in _RAY_FIELDS:
        raise SchemaError(f"{model_id}: unknown family {family!r} (expected one of {FAMILIES})")
    required = list(_SHARED_FIELDS[family])
    for ray in RayKind:
        required += [f"{ray.value}.{name}" for name in _RAY_FIELDS[family]]
    for name in required:
        if name not in coeffs:
            raise SchemaError(f"{model_id}: missing coefficient {name!r} required by family {family}")
    for name, value in coeffs.items():
        if not np.isfinite(value):
            raise SchemaError(f"{model_id}: coefficient {name!r} is not finite")
    if family == "classic-sellmeier":
        for ray in RayKind:
            terms = _sellmeier_terms(coeffs, ray)
            for j, (_, cj) in enumerate(terms, start=1):
                if cj is None:
                    raise SchemaError(f"{model_id}: coefficient '{ray.value}.c{j}' missing for '{ray.value}.b{j}'")


def _flatten(table: Mapping, prefix: str = "") -> dict[str, float]:
    out: dict[str, float] = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"coefficient {name!r} must be a number, got {value!r}")
        else:
            out[name] = float(value)
    return out


def _range(ranges: Mapping, key: str, where: str) -> tuple[float, float]:
    try:
        lo, hi = ranges[key]
        return float(lo), float(hi)
    except KeyError:
        raise SchemaError(f"{where}: missing field 'ranges.{key}'") from None
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: field 'ranges.{key}' must be a pair of numbers") from None


def load_model(path: str | os.PathLike) -> DispersionModel:
    """Parse one coefficient file."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    for key in ("id", "family", "ranges", "coefficients"):
        if key not in doc:
            raise SchemaError(f"{path}: missing field {key!r}")
    ranges = doc["ranges"]
    return DispersionModel(
        id=str(doc["id"]),
        family=str(doc["family"]),
        coefficients=_flatten(doc["coefficients"]),
        doping_range=_range(ranges, "doping_mol_percent", str(path)),
        wavelength_range=_range(ranges, "wavelength_nm", str(path)),
        temperature_range=_range(ranges, "temperature_c", str(path)),
        source=str(doc.get("source", "")),
        path=path,
        sha256=hashlib.sha256(raw).hexdigest(),
    )


class Catalog:
    """Collection of models keyed by unique id."""

    def __init__(self, models=()):
        self._models: dict[str, DispersionModel] = {}
        for m in models:
            self.add(m)

    def add(self, model: DispersionModel) -> DispersionModel:
        if model.id in self._models:
            prev = self._models[model.id].path
            raise ConflictError(f"duplicate model id {model.id!r} ({prev} and {model.path})")
        self._models[model.id] = model
        return model

    def load(self, path) -> DispersionModel:
        return self.add(load_model(path))

    def load_dir(self, directory) -> list[DispersionModel]:
        return [self.load(p) for p in sorted(Path(directory).glob("*.toml"))]

    def __getitem__(self, model_id: str) -> DispersionModel:
        try:
            return self._models[model_id]
        except KeyError:
            raise KeyError(f"unknown model {model_id!r}; known: {sorted(self._models)}") from None

    def __contains__(self, model_id) -> bool:
        return model_id in self._models

    def __iter__(self):
        return iter(self._models.values())

    def ids(self) -> list[str]:
        return sorted(self._models)


def builtin_model_dir() -> Path:
    return Path(str(resources.files("dopedppln") / "data"))


def default_catalog(directory: str | os.PathLike | None = None) -> Catalog:
    """Catalog from ``directory``, the env var directory, or the shipped data."""
    directory = directory or os.environ.get(MODEL_DIR_ENV) or builtin_model_dir()
    cat = Catalog()
    cat.load_dir(directory)
    return cat


def _sellmeier_terms(coeffs: Mapping[str, float], ray: RayKind):
    pat = re.compile(rf"^{ray.value}\.b(\d+)$")
    idx = sorted(int(m.group(1)) for k in coeffs if (m := pat.match(k)))
    return [(coeffs[f"{ray.value}.b{j}"], coeffs.get(f"{ray.value}.c{j}")) for j in idx]


def _thermal(model: DispersionModel, temperature_c):
    k = model.coefficients
    tk = np.asarray(temperature_c, dtype=float) + k["thermal_offset_k"]
    return tk**2 + k["thermal_amplitude"] * (1.0 / np.tanh(k["thermal_scale_k"] / tk) - 1.0)


def _n2_doped(model: DispersionModel, ray: RayKind, lam, x, temperature_c):
    k = model.coefficients
    r = ray.value
    th = k["doping_threshold"]
    below, above = min(x, th), max(x - th, 0.0)
    s = k[f"{r}.strength"] + k[f"{r}.strength_slope_below"] * below + k[f"{r}.strength_slope_above"] * above
    f_t = _thermal(model, temperature_c) - _thermal(model, k["reference_temperature_c"])
    pole = (k[f"{r}.pole_nm"] + k[f"{r}.pole_slope_below"] * below
            + k[f"{r}.pole_slope_above"] * above + k[f"{r}.pole_temperature"] * f_t)
    inv2 = lam**-2.0
    return (s / (pole**-2.0 - inv2)
            + k[f"{r}.uv_strength"] / (k["uv_pole_nm"] ** -2.0 - inv2)
            - k[f"{r}.ir_strength"] * lam**2)


def _n2_sellmeier(model: DispersionModel, ray: RayKind, lam, x, temperature_c):
    um2 = (lam * 1e-3) ** 2
    n2 = np.full_like(um2, model.coefficients[f"{ray.value}.a"])
    for b, cj in _sellmeier_terms(model.coefficients, ray):
        n2 = n2 + b * um2 / (um2 - cj)
    return n2


_N2 = {"doped-LN-generalized": _n2_doped, "classic-sellmeier": _n2_sellmeier}


def refractive_index(model: DispersionModel, ray, wavelength_nm, x: float, temperature_c: float,
                     allow_extrapolation: bool = False):
    """Phase index n(lambda, x, T); accepts scalar or array wavelengths."""
    ray = RayKind.parse(ray)
    lam = np.asarray(wavelength_nm, dtype=float)
    model.check_range(lam, x, temperature_c, allow_extrapolation)
    n = np.sqrt(_N2[model.family](model, ray, lam, float(x), float(temperature_c)))
    return float(n) if n.ndim == 0 else n


def group_velocity_valid(model: DispersionModel, wavelength_nm, x: float, temperature_c: float,
                         step: float = FD_STEP) -> np.ndarray:
    """Mask of wavelengths whose differentiation stencil stays in range."""
    lam = np.asarray(wavelength_nm, dtype=float)
    return (model.in_range(lam / (1.0 - 2.0 * step), x, temperature_c)
            & model.in_range(lam / (1.0 + 2.0 * step), x, temperature_c))


def inverse_group_velocity(model: DispersionModel, ray, wavelength_nm, x: float, temperature_c: float,
                           step: float = FD_STEP, allow_extrapolation: bool = False):
    """k'(omega) = n_g / c in s/m.

    dn/domega comes from a five-point central difference in angular
    frequency with h = step * omega.
    """
    ray = RayKind.parse(ray)
    lam = np.asarray(wavelength_nm, dtype=float)
    model.check_range(lam, x, temperature_c, allow_extrapolation)
    omega = 2.0 * np.pi * C_LIGHT / (lam * 1e-9)
    h = step * omega
    stencil = [2.0 * np.pi * C_LIGHT / (omega + j * h) * 1e9 for j in (-2, -1, 1, 2)]
    try:
        model.check_range(np.concatenate([np.ravel(s) for s in stencil]), x, temperature_c,
                          allow_extrapolation, what="differentiation stencil wavelength")
    except RangeError as exc:
        raise RangeError(f"{exc} (stencil of {step:g}*omega around the requested wavelength)") from None
    n2 = _N2[model.family]
    nm2, nm1, np1, np2 = (np.sqrt(n2(model, ray, s, float(x), float(temperature_c))) for s in stencil)
    n0 = np.sqrt(n2(model, ray, lam, float(x), float(temperature_c)))
    dn = (nm2 - 8.0 * nm1 + 8.0 * np1 - np2) / (12.0 * h)
    kp = (n0 + omega * dn) / C_LIGHT
    return float(kp) if kp.ndim == 0 else kp


def group_index(model: DispersionModel, ray, wavelength_nm, x: float, temperature_c: float, **kw):
    return inverse_group_velocity(model, ray, wavelength_nm, x, temperature_c, **kw) * C_LIGHT
