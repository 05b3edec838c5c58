"""Effective nonlinear coefficient for collinear interaction in uniaxial crystals.

Entries of the contracted 3x6 d matrix are named by the output axis
followed by a representative input pair: column 1..6 stands for the pairs
xx, yy, zz, yz, xz, xy, so ``xxz`` is d15 and ``zyz`` is d34.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ROWS = "xyz"
_PAIRS = ("xx", "yy", "zz", "yz", "xz", "xy")


def contracted_index(name: str) -> tuple[int, int]:
    """Zero-based (row, column) of a named entry such as ``"xxz"``."""
    if len(name) != 3 or any(ch not in _ROWS for ch in name):
        raise KeyError(f"bad d-matrix entry name {name!r}")
    pair = name[1:]
    pair = pair if pair in _PAIRS else pair[::-1]
    return _ROWS.index(name[0]), _PAIRS.index(pair)


@dataclass(frozen=True)
class DMatrix:
    """Second-order nonlinear coefficients in pm/V (contracted notation)."""

    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (3, 6):
            raise ValueError(f"d matrix must be 3x6, got {arr.shape}")
        object.__setattr__(self, "values", tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def from_entries(cls, **entries: float) -> "DMatrix":
        arr = np.zeros((3, 6))
        for name, value in entries.items():
            arr[contracted_index(name)] = value
        return cls(arr)

    @classmethod
    def lithium_niobate(cls) -> "DMatrix":
        return cls.from_entries(xxz=-4.6, xxy=-2.2, yxx=-2.2, yyy=2.2, yyz=-4.6,
                                zxx=-4.6, zyy=-4.6, zzz=-25.0)

    def __getitem__(self, name: str) -> float:
        r, c = contracted_index(name)
        return self.values[r][c]

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def scaled(self, factor: float) -> "DMatrix":
        return DMatrix(self.as_array() * factor)


@dataclass(frozen=True)
class CrystalAngles:
    """Polar angle, azimuth and walk-off in degrees; PPLN defaults."""

    theta_deg: float = 90.0
    phi_deg: float = 90.0
    rho_deg: float = 0.0


def _sincos(deg: float) -> tuple[float, float]:
    """sin and cos in degrees, exact on multiples of 90."""
    q, r = divmod(deg, 90.0)
    if r == 0.0:
        return ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0))[int(q) % 4]
    rad = math.radians(deg)
    return math.sin(rad), math.cos(rad)


def _trig(angles: CrystalAngles):
    st, ct = _sincos(angles.theta_deg + angles.rho_deg)
    sp, cp = _sincos(angles.phi_deg)
    return st, ct, sp, cp


def _ooe_terms(st, ct, sp, cp):
    return (
        ("xxx", -ct * cp * sp**2),
        ("xyy", ct * cp * sp**2),
        ("xyz", -st * cp * sp),
        ("xxz", st * sp**2),
        ("xxy", ct * cp**2 * sp - ct * sp**3),
        ("yxx", ct * cp**2 * sp),
        ("yyy", -ct * cp**2 * sp),
        ("yyz", st * cp**2),
        ("yxz", -st * cp * sp),
        ("yxy", ct * cp * sp**2 - ct * cp**3),
    )


def _eoe_terms(st, ct, sp, cp):
    return (
        ("xxx", ct**2 * cp**2 * sp),
        ("xyy", -ct**2 * cp**2 * sp),
        ("xyz", ct * st * cp**2),
        ("xxz", -ct * st * cp * sp),
        ("xxy", ct**2 * cp * sp**2 - ct**2 * cp**3),
        ("yxx", ct**2 * cp * sp**2),
        ("yyy", -ct**2 * cp * sp**2),
        ("yyz", ct * st * cp * sp),
        ("yxz", -ct * st * sp**2),
        ("yxy", ct**2 * sp**3 - ct**2 * cp**2 * sp),
        ("zxx", -ct * st * cp * sp),
        ("zyy", ct * st * cp * sp),
        ("zyz", -st**2 * cp),
        ("zxz", st**2 * sp),
        ("zxy", ct * st * cp**2 - ct * st * sp**2),
    )


def _breakdown(d: DMatrix, geometry) -> list[tuple[str, float]]:
    return [(name, d[name] * g + 0.0) for name, g in geometry]


def d_eff_ooe_terms(d: DMatrix, angles: CrystalAngles = CrystalAngles()) -> list[tuple[str, float]]:
    """Per-entry contributions for o -> o + e."""
    return _breakdown(d, _ooe_terms(*_trig(angles)))


def d_eff_eoe_terms(d: DMatrix, angles: CrystalAngles = CrystalAngles()) -> list[tuple[str, float]]:
    """Per-entry contributions for e -> o + e."""
    return _breakdown(d, _eoe_terms(*_trig(angles)))


def d_eff_ooe(d: DMatrix, angles: CrystalAngles = CrystalAngles()) -> float:
    return math.fsum(v for _, v in d_eff_ooe_terms(d, angles))


def d_eff_eoe(d: DMatrix, angles: CrystalAngles = CrystalAngles()) -> float:
    return math.fsum(v for _, v in d_eff_eoe_terms(d, angles))
