"""Quasi-phase matching, tilt angle and group-velocity-matching solvers.

All wavelengths are vacuum wavelengths in nm.  Energy conservation is
imposed in frequency: 1/lambda_i = 1/lambda_p - 1/lambda_s.
"""

from __future__ import annotations

import dataclasses
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import __version__
from ._io import write_csv, write_json
from .dispersion import (
    DispersionModel,
    RangeError,
    RayKind,
    group_velocity_valid,
    inverse_group_velocity,
    refractive_index,
)

O, E = RayKind.ORDINARY, RayKind.EXTRAORDINARY
DEFAULT_WINDOW_NM = (2000.0, 4800.0)
ORIENTATION_FLOOR = 1e-18  # s/m
THETA_SNAP_DEG = 1e-6
MISMATCH_FLOOR = 1e-12  # relative to k_p


class EnergyConservationError(ValueError):
    """Signal at or below the pump wavelength, so no positive idler exists."""


class ConfigError(ValueError):
    """A required crystal parameter is missing."""


class NoPolingNeeded(ArithmeticError):
    """Birefringent phase matching is exact; the poling period is infinite."""


class DegenerateOrientationError(ArithmeticError):
    """Both group-velocity differences vanish and the tilt angle is undefined."""


class NoRootWarning(UserWarning):
    """A GVM residual does not change sign in the search window."""


@dataclass(frozen=True)
class PmType:
    """Polarisation assignment of pump, signal and idler."""

    kind: str
    pump: RayKind
    signal: RayKind
    idler: RayKind

    @classmethod
    def parse(cls, label) -> "PmType":
        if isinstance(label, PmType):
            return label
        key = str(label).strip().lower().replace("-", "").replace("_", "")
        for pm in (TYPE0, TYPE1, TYPE2):
            if key in _PM_ALIASES[pm.kind]:
                return pm
        raise ValueError(f"unknown phase-matching type {label!r} (use 0, I or II)")

    @property
    def label(self) -> str:
        return {"type0": "0", "type1": "I", "type2": "II"}[self.kind]

    @property
    def notation(self) -> str:
        return f"{self.pump.short}->{self.signal.short}+{self.idler.short}"


TYPE0 = PmType("type0", E, E, E)
TYPE1 = PmType("type1", E, O, O)
TYPE2 = PmType("type2", O, O, E)
_PM_ALIASES = {
    "type0": {"0", "type0", "eee"},
    "type1": {"1", "i", "type1", "typei", "eoo"},
    "type2": {"2", "ii", "type2", "typeii", "ooe"},
}


class GvmCondition(Enum):
    GVM1 = 1
    GVM2 = 2
    GVM3 = 3

    @classmethod
    def parse(cls, value) -> "GvmCondition":
        if isinstance(value, GvmCondition):
            return value
        key = str(value).strip().upper()
        return cls[key] if key.startswith("GVM") else cls(int(key))

    @property
    def nominal_theta_deg(self) -> float:
        return {1: 0.0, 2: 90.0, 3: 45.0}[self.value]


@dataclass(frozen=True)
class CrystalSpec:
    """A concrete crystal: model, doping x (mol%), T (C), length (mm), period (um)."""

    model: DispersionModel
    x: float
    temperature_c: float
    length_mm: float = 50.0
    period_um: float | None = None
    allow_extrapolation: bool = False

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ValueError(f"crystal length must be positive, got {self.length_mm}")
        if self.period_um is not None and not self.period_um > 0:
            raise ValueError(f"poling period must be positive, got {self.period_um}")
        self.model.check_range([], self.x, self.temperature_c, self.allow_extrapolation)

    @property
    def model_id(self) -> str:
        return self.model.id

    def replace(self, **changes) -> "CrystalSpec":
        return dataclasses.replace(self, **changes)

    def n(self, ray, wavelength_nm):
        return refractive_index(self.model, ray, wavelength_nm, self.x, self.temperature_c,
                                allow_extrapolation=self.allow_extrapolation)

    def k(self, ray, wavelength_nm):
        """Wavenumber 2*pi*n/lambda in rad/m."""
        lam = np.asarray(wavelength_nm, dtype=float)
        return 2.0 * np.pi * self.n(ray, lam) / (lam * 1e-9)

    def kprime(self, ray, wavelength_nm):
        """Inverse group velocity in s/m."""
        return inverse_group_velocity(self.model, ray, wavelength_nm, self.x, self.temperature_c,
                                      allow_extrapolation=self.allow_extrapolation)


@dataclass(frozen=True)
class GvmSolution:
    condition: GvmCondition
    wavelength_nm: float
    period_um: float
    theta_deg: float
    multiplicity_note: str = ""

    @property
    def pump_nm(self) -> float:
        return self.wavelength_nm / 2.0


def idler_wavelength(pump_nm, signal_nm):
    lp = np.asarray(pump_nm, dtype=float)
    ls = np.asarray(signal_nm, dtype=float)
    if np.any(ls <= lp):
        raise EnergyConservationError("signal wavelength must exceed the pump wavelength")
    li = 1.0 / (1.0 / lp - 1.0 / ls)
    return float(li) if li.ndim == 0 else li


def _mismatch(crystal: CrystalSpec, pm: PmType, lp, ls):
    li = idler_wavelength(lp, ls)
    return crystal.k(pm.pump, lp) - crystal.k(pm.signal, ls) - crystal.k(pm.idler, li)


def delta_k(crystal: CrystalSpec, pm, pump_nm, signal_nm, qpm: bool = False):
    """k_p - k_s - k_i in rad/m, minus 2*pi/Lambda when ``qpm`` is set."""
    pm = PmType.parse(pm)
    dk = _mismatch(crystal, pm, pump_nm, signal_nm)
    if qpm:
        if crystal.period_um is None:
            raise ConfigError("poling period required for the quasi-phase-matching term")
        dk = dk - 2.0 * np.pi / (crystal.period_um * 1e-6)
    return dk


def poling_period(crystal: CrystalSpec, pm, pump_nm, signal_nm):
    """First-order QPM period 2*pi/|dk| in um."""
    pm = PmType.parse(pm)
    dk = np.abs(delta_k(crystal, pm, pump_nm, signal_nm))
    if np.any(dk <= MISMATCH_FLOOR * np.abs(crystal.k(pm.pump, pump_nm))):
        raise NoPolingNeeded("k_p = k_s + k_i to rounding; no poling required")
    out = 2.0 * np.pi / dk * 1e6
    return float(out) if np.ndim(out) == 0 else out


def _kprimes(crystal: CrystalSpec, pm: PmType, lp, ls):
    li = idler_wavelength(lp, ls)
    return crystal.kprime(pm.pump, lp), crystal.kprime(pm.signal, ls), crystal.kprime(pm.idler, li)


def _theta(kp, ks, ki):
    num = -(kp - ks)
    den = kp - ki
    theta = np.mod(np.degrees(np.arctan2(num, den)), 180.0)
    # a line at -1e-9 deg is the same line as 0 deg
    theta = np.where(theta > 180.0 - THETA_SNAP_DEG, 0.0, theta)
    return theta, num, den


def tilt_angle(crystal: CrystalSpec, pm, pump_nm, signal_nm):
    """Tilt of the phase-matching ridge in degrees, in [0, 180)."""
    pm = PmType.parse(pm)
    theta, num, den = _theta(*_kprimes(crystal, pm, pump_nm, signal_nm))
    if np.any((np.abs(num) < ORIENTATION_FLOOR) & (np.abs(den) < ORIENTATION_FLOOR)):
        raise DegenerateOrientationError("pump, signal and idler group velocities all coincide")
    return float(theta) if np.ndim(theta) == 0 else theta


def gvm_residual(crystal: CrystalSpec, pm, condition, wavelength_nm):
    """Degenerate GVM residual at signal = idler = lambda, pump = lambda/2 (s/m)."""
    pm = PmType.parse(pm)
    condition = GvmCondition.parse(condition)
    lam = np.asarray(wavelength_nm, dtype=float)
    kp = crystal.kprime(pm.pump, lam / 2.0)
    r1 = kp - crystal.kprime(pm.signal, lam)
    r2 = kp - crystal.kprime(pm.idler, lam)
    return {GvmCondition.GVM1: r1, GvmCondition.GVM2: r2, GvmCondition.GVM3: 0.5 * (r1 + r2)}[condition]


def solve_gvm(crystal: CrystalSpec, pm, condition, window=DEFAULT_WINDOW_NM, pitch_nm: float = 2.0,
              xtol_nm: float = 1e-7) -> list[GvmSolution]:
    """All degenerate roots of a GVM condition in ``window``, sorted.

    A uniform scan brackets sign changes, then each bracket is refined with
    Brent's method.
    """
    pm = PmType.parse(pm)
    condition = GvmCondition.parse(condition)
    lo, hi = window
    grid = np.arange(lo, hi + 0.5 * pitch_nm, pitch_nm)
    grid = grid[grid <= hi + 1e-9]
    res = gvm_residual(crystal, pm, condition, grid)
    f = lambda lam: float(gvm_residual(crystal, pm, condition, lam))
    roots = []
    for j in range(len(grid) - 1):
        a, b = res[j], res[j + 1]
        if a == 0.0:
            roots.append(grid[j])
        elif a * b < 0.0:
            roots.append(brentq(f, grid[j], grid[j + 1], xtol=xtol_nm, rtol=1e-15))
    if res[-1] == 0.0:
        roots.append(grid[-1])
    if not roots:
        warnings.warn(
            f"{condition.name} for {crystal.model_id} (x={crystal.x:g}, T={crystal.temperature_c:g}) "
            f"has no sign change in [{lo:g}, {hi:g}] nm; residual ranges from {res.min():.4e} "
            f"to {res.max():.4e} s/m",
            NoRootWarning,
            stacklevel=2,
        )
        return []
    out = []
    for j, lam in enumerate(sorted(roots)):
        note = "unique root in window" if len(roots) == 1 else f"root {j + 1} of {len(roots)}"
        out.append(GvmSolution(
            condition=condition,
            wavelength_nm=float(lam),
            period_um=poling_period(crystal, pm, lam / 2.0, lam),
            theta_deg=tilt_angle(crystal, pm, lam / 2.0, lam),
            multiplicity_note=note,
        ))
    return out


def pick_root(solutions, reference_nm: float | None = None) -> GvmSolution | None:
    """Root nearest to ``reference_nm`` (or the first one)."""
    if not solutions:
        return None
    if reference_nm is None:
        return solutions[0]
    return min(solutions, key=lambda s: abs(s.wavelength_nm - reference_nm))


# --------------------------------------------------------------------------
# scan engines

SCAN_COLUMNS = ("lambda_p_nm", "lambda_s_nm", "lambda_i_nm", "x_mol_percent", "T_C",
                "theta_deg", "period_um", "flags")


@dataclass(frozen=True)
class ScanGrid:
    """Dense 2-D grid of tilt angle and poling period.

    Every array has the shape (rows, cols).  Points that could not be
    evaluated hold NaN in ``theta_deg``/``period_um`` and a flag string.
    """

    lambda_p: np.ndarray
    lambda_s: np.ndarray
    lambda_i: np.ndarray
    x: np.ndarray
    temperature_c: np.ndarray
    theta_deg: np.ndarray
    period_um: np.ndarray
    flags: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.period_um)

    def period_range(self, theta_branch: bool = False) -> tuple[float, float]:
        """Min and max poling period over valid points (optionally theta in [0, 90])."""
        ok = self.valid
        if theta_branch:
            ok &= self.theta_deg <= 90.0
        vals = self.period_um[ok]
        return float(vals.min()), float(vals.max())

    def rows(self):
        for idx in np.ndindex(self.theta_deg.shape):
            yield (self.lambda_p[idx], self.lambda_s[idx], self.lambda_i[idx], self.x[idx],
                   self.temperature_c[idx], self.theta_deg[idx], self.period_um[idx], self.flags[idx])

    def to_csv(self, path, sidecar: bool = True):
        write_csv(path, SCAN_COLUMNS, self.rows())
        if sidecar:
            write_json(str(path) + ".json", {**self.meta, "columns": list(SCAN_COLUMNS),
                                             "tool_version": __version__})


def _run_rows(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _evaluate_points(crystal: CrystalSpec, pm: PmType, lp: np.ndarray, ls: np.ndarray):
    """theta, period, flags for 1-D arrays of pump/signal at one (x, T)."""
    n = lp.size
    theta = np.full(n, np.nan)
    period = np.full(n, np.nan)
    flags = np.array([""] * n, dtype=object)
    good = ls > lp
    flags[~good] = "no_idler"
    li = np.full(n, np.nan)
    li[good] = 1.0 / (1.0 / lp[good] - 1.0 / ls[good])
    m, x, t = crystal.model, crystal.x, crystal.temperature_c
    inside = good.copy()
    for lam in (lp, ls, li):
        inside[good] &= group_velocity_valid(m, lam[good], x, t)
    extrap = good & ~inside
    if crystal.allow_extrapolation:
        use = good
        flags[extrap] = "extrapolated"
    else:
        use = inside
        flags[extrap] = "out_of_range"
    if np.any(use):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kp, ks, ki = _kprimes(crystal, pm, lp[use], ls[use])
            th, num, den = _theta(kp, ks, ki)
            dk = np.abs(_mismatch(crystal, pm, lp[use], ls[use]))
            zero = dk <= MISMATCH_FLOOR * np.abs(crystal.k(pm.pump, lp[use]))
        with np.errstate(divide="ignore"):
            period[use] = np.where(zero, np.inf, 2.0 * np.pi / dk * 1e6)
        theta[use] = th
        sub = flags[use]
        sub[zero] = _join(sub[zero], "no_poling_needed")
        sub[th > 90.0] = _join(sub[th > 90.0], "theta_outside_plot_branch")
        degenerate = (np.abs(num) < ORIENTATION_FLOOR) & (np.abs(den) < ORIENTATION_FLOOR)
        sub[degenerate] = _join(sub[degenerate], "degenerate_orientation")
        flags[use] = sub
    return li, theta, period, flags


def _join(existing, tag):
    return np.array([f"{e}|{tag}" if e else tag for e in existing], dtype=object)


def _assemble(rows_out, lp, ls, x, t, meta) -> ScanGrid:
    li = np.array([r[0] for r in rows_out])
    th = np.array([r[1] for r in rows_out])
    per = np.array([r[2] for r in rows_out])
    fl = np.array([r[3] for r in rows_out], dtype=object)
    return ScanGrid(lp, ls, li, x, t, th, per, fl, meta)


@dataclass(frozen=True)
class DopingScan:
    """Degenerate (lambda, x) grid plus GVM roots for each doping."""

    grid: ScanGrid
    dopings: np.ndarray
    roots: dict  # GvmCondition -> tuple of tuples of root wavelengths

    def curve(self, condition, reference_nm: float | None = None) -> np.ndarray:
        """Root wavelength versus doping; NaN where no root was found."""
        condition = GvmCondition.parse(condition)
        out = []
        for rs in self.roots[condition]:
            if not rs:
                out.append(np.nan)
            elif reference_nm is None:
                out.append(rs[0])
            else:
                out.append(min(rs, key=lambda r: abs(r - reference_nm)))
        return np.array(out)

    def summary(self, condition, reference_nm: float | None = None) -> dict:
        """Values at the ends of the doping axis, maximum, minimum and span."""
        y = self.curve(condition, reference_nm)
        ok = np.isfinite(y)
        j = int(np.nanargmax(y))
        return {
            "first": float(y[0]),
            "last": float(y[-1]),
            "max": float(y[j]),
            "x_at_max": float(self.dopings[j]),
            "min": float(np.nanmin(y)),
            "span": float(np.nanmax(y) - np.nanmin(y)) if ok.any() else np.nan,
        }


def scan_doping(model: DispersionModel, pm, wavelengths_nm, dopings, temperature_c: float = 24.5,
                conditions=tuple(GvmCondition), threads: int = 1, allow_extrapolation: bool = False,
                window=DEFAULT_WINDOW_NM, pitch_nm: float = 2.0) -> DopingScan:
    """Degenerate scan: rows are doping ratios, columns signal(=idler) wavelengths."""
    pm = PmType.parse(pm)
    lam = np.asarray(wavelengths_nm, dtype=float)
    xs = np.asarray(dopings, dtype=float)

    def row(x):
        try:
            cr = CrystalSpec(model, float(x), temperature_c, allow_extrapolation=allow_extrapolation)
        except RangeError:
            nan = np.full(lam.size, np.nan)
            return (lam.copy(), nan, nan, np.array(["out_of_range"] * lam.size, dtype=object)), {}
        li, th, per, fl = _evaluate_points(cr, pm, lam / 2.0, lam.copy())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rts = {GvmCondition.parse(c): tuple(s.wavelength_nm for s in
                                                solve_gvm(cr, pm, c, window, pitch_nm))
                   for c in conditions}
        return (li, th, per, fl), rts

    out = _run_rows(row, xs, threads)
    shape = (xs.size, lam.size)
    grid = _assemble([o[0] for o in out], np.broadcast_to(lam / 2.0, shape).copy(),
                     np.broadcast_to(lam, shape).copy(), np.repeat(xs[:, None], lam.size, 1),
                     np.full(shape, float(temperature_c)),
                     {"scan": "doping", "model_id": model.id, "pm_type": pm.label,
                      "wavelength_nm": _axis_meta(lam), "doping_mol_percent": _axis_meta(xs),
                      "temperature_c": temperature_c})
    roots = {GvmCondition.parse(c): tuple(o[1].get(GvmCondition.parse(c), ()) for o in out)
             for c in conditions}
    return DopingScan(grid, xs, roots)


def scan_pump_signal(crystal: CrystalSpec, pm, pumps_nm, signals_nm, threads: int = 1) -> ScanGrid:
    """Non-degenerate scan: rows are pump wavelengths, columns signal wavelengths."""
    pm = PmType.parse(pm)
    lp_axis = np.asarray(pumps_nm, dtype=float)
    ls_axis = np.asarray(signals_nm, dtype=float)

    def row(lp):
        return _evaluate_points(crystal, pm, np.full(ls_axis.size, lp), ls_axis.copy())

    out = _run_rows(row, lp_axis, threads)
    shape = (lp_axis.size, ls_axis.size)
    return _assemble(out, np.repeat(lp_axis[:, None], ls_axis.size, 1),
                     np.broadcast_to(ls_axis, shape).copy(), np.full(shape, crystal.x),
                     np.full(shape, crystal.temperature_c),
                     {"scan": "pump_signal", "model_id": crystal.model_id, "pm_type": pm.label,
                      "pump_nm": _axis_meta(lp_axis), "signal_nm": _axis_meta(ls_axis),
                      "x_mol_percent": crystal.x, "temperature_c": crystal.temperature_c})


@dataclass(frozen=True)
class TemperatureScan:
    condition: GvmCondition
    temperatures_c: np.ndarray
    wavelengths_nm: np.ndarray
    periods_um: np.ndarray
    slope_nm_per_c: float
    max_linear_deviation_nm: float

    @property
    def delta_nm(self) -> float:
        """Signed change lambda(T_last) - lambda(T_first)."""
        return float(self.wavelengths_nm[-1] - self.wavelengths_nm[0])


def scan_temperature(model: DispersionModel, pm, condition, x: float, temperatures_c,
                     reference_nm: float | None = None, threads: int = 1,
                     allow_extrapolation: bool = False, window=DEFAULT_WINDOW_NM) -> TemperatureScan:
    pm = PmType.parse(pm)
    condition = GvmCondition.parse(condition)
    ts = np.asarray(temperatures_c, dtype=float)

    def point(t):
        try:
            cr = CrystalSpec(model, x, float(t), allow_extrapolation=allow_extrapolation)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                s = pick_root(solve_gvm(cr, pm, condition, window), reference_nm)
        except RangeError:
            s = None
        return (np.nan, np.nan) if s is None else (s.wavelength_nm, s.period_um)

    vals = np.array(_run_rows(point, ts, threads), dtype=float).reshape(-1, 2)
    lam, per = vals[:, 0], vals[:, 1]
    ok = np.isfinite(lam)
    if ok.sum() >= 2:
        coef = np.polyfit(ts[ok], lam[ok], 1)
        dev = float(np.max(np.abs(np.polyval(coef, ts[ok]) - lam[ok])))
        slope = float(coef[0])
    else:
        slope, dev = np.nan, np.nan
    return TemperatureScan(condition, ts, lam, per, slope, dev)


def _axis_meta(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"min": float(a.min()), "max": float(a.max()), "count": int(a.size)}
