"""Joint spectral amplitudes, Schmidt decomposition and heralded purity.

A JSA is tabulated on a signal x idler wavelength grid with rows indexed
by signal.  Normalisation is a plain sum over grid cells (no Jacobian), so
the table can be fed directly to a matrix SVD.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import brentq

from ._io import write_csv, write_json
from .phasematch import ConfigError, CrystalSpec, PmType, delta_k, idler_wavelength

NORM_TOL = 1e-10
SV_CUTOFF = 1e-12
EXPANSIONS = ("exact", "linear")
UNIMODAL_TOL = 1e-3  # purity wiggles smaller than this are ignored


class NormalizationError(ValueError):
    """Schmidt decomposition was asked for an un-normalised JSA."""


class NonUnimodalWarning(UserWarning):
    """The purity-versus-bandwidth profile has more than one local maximum."""


@dataclass(frozen=True)
class PumpSpec:
    """Gaussian pump: centre wavelength (nm) and bandwidth parameter (nm).

    The spectral intensity has FWHM close to 2*sqrt(ln 2)*bandwidth, about
    1.67*bandwidth, when the bandwidth is small against the centre.
    """

    center_nm: float
    bandwidth_nm: float

    def __post_init__(self):
        if not self.bandwidth_nm > 0:
            raise ValueError(f"pump bandwidth must be positive, got {self.bandwidth_nm}")
        if not self.center_nm > 0:
            raise ValueError(f"pump centre must be positive, got {self.center_nm}")

    @classmethod
    def for_signal_idler(cls, signal_nm: float, idler_nm: float, bandwidth_nm: float) -> "PumpSpec":
        return cls(1.0 / (1.0 / signal_nm + 1.0 / idler_nm), bandwidth_nm)

    @property
    def degenerate_nm(self) -> float:
        return 2.0 * self.center_nm

    @property
    def fwhm_approx_nm(self) -> float:
        return 2.0 * math.sqrt(math.log(2.0)) * self.bandwidth_nm

    @property
    def fwhm_nm(self) -> float:
        """Exact intensity FWHM in pump wavelength."""
        l0, d = self.degenerate_nm, self.bandwidth_nm
        num = 2.0 * math.sqrt(math.log(2.0)) * d * l0**2 * (l0**2 - d**2)
        den = l0**4 + d**4 - 2.0 * l0**2 * d**2 * (1.0 + math.log(4.0))
        return num / den


def pump_envelope(signal_nm, idler_nm, pump: PumpSpec):
    """Gaussian pump amplitude in reciprocal-wavelength form, peak value 1."""
    ls = np.asarray(signal_nm, dtype=float)
    li = np.asarray(idler_nm, dtype=float)
    lc, d = pump.center_nm, pump.bandwidth_nm
    width = d / (lc**2 - (d / 2.0) ** 2)
    u = (1.0 / ls + 1.0 / li - 1.0 / lc) / width
    return np.exp(-0.5 * u**2)


def _omega(lam_nm):
    return 2.0 * np.pi * C_LIGHT / (np.asarray(lam_nm, dtype=float) * 1e-9)


def _sinc(z):
    return np.sinc(np.asarray(z) / np.pi)


def phase_matching_amplitude(crystal: CrystalSpec, pm, signal_nm, idler_nm, expansion: str = "exact",
                             about: tuple[float, float] | None = None):
    """sinc(dk*L/2) with the QPM term included.

    ``expansion="linear"`` replaces dk by its first-order group-velocity
    expansion about ``about`` = (signal_nm, idler_nm) (required then).
    """
    pm = PmType.parse(pm)
    ls = np.asarray(signal_nm, dtype=float)
    li = np.asarray(idler_nm, dtype=float)
    if expansion == "exact":
        lp = 1.0 / (1.0 / ls + 1.0 / li)
        dk = delta_k(crystal, pm, lp, ls, qpm=True)
    elif expansion == "linear":
        if about is None:
            raise ValueError("linear expansion needs an expansion point")
        s0, i0 = about
        p0 = 1.0 / (1.0 / s0 + 1.0 / i0)
        dk0 = delta_k(crystal, pm, p0, s0, qpm=True)
        kp = crystal.kprime(pm.pump, p0)
        dws = _omega(ls) - _omega(s0)
        dwi = _omega(li) - _omega(i0)
        dk = dk0 + (kp - crystal.kprime(pm.signal, s0)) * dws + (kp - crystal.kprime(pm.idler, i0)) * dwi
    else:
        raise ValueError(f"expansion must be one of {EXPANSIONS}, got {expansion!r}")
    return _sinc(dk * crystal.length_mm * 1e-3 / 2.0)


@dataclass(frozen=True)
class JointSpectrum:
    """Tabulated JSA; ``amplitudes[a, b]`` belongs to (signal_nm[a], idler_nm[b])."""

    signal_nm: np.ndarray
    idler_nm: np.ndarray
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        s = np.asarray(self.signal_nm, dtype=float)
        i = np.asarray(self.idler_nm, dtype=float)
        a = np.asarray(self.amplitudes)
        if a.shape != (s.size, i.size):
            raise ValueError(f"amplitude table {a.shape} does not match axes ({s.size}, {i.size})")
        for name, ax in (("signal", s), ("idler", i)):
            if ax.size > 1 and not np.all(np.diff(ax) > 0):
                raise ValueError(f"{name} axis must be strictly increasing")
        for name, v in (("signal_nm", s), ("idler_nm", i), ("amplitudes", a)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def normalize(self) -> "JointSpectrum":
        total = self.norm2
        if not total > 0:
            raise NormalizationError("JSA is identically zero")
        return JointSpectrum(self.signal_nm, self.idler_nm, self.amplitudes / math.sqrt(total), True)

    def transposed(self) -> "JointSpectrum":
        """Swap the roles of signal and idler."""
        return JointSpectrum(self.idler_nm, self.signal_nm, self.amplitudes.T.copy(), self.normalized)

    def marginal_signal(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def marginal_idler(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    def to_csv(self, path):
        rows = ((s, i, self.amplitudes[a, b]) for a, s in enumerate(self.signal_nm)
                for b, i in enumerate(self.idler_nm))
        return write_csv(path, ("lambda_s_nm", "lambda_i_nm", "amplitude"), rows)

    def to_json(self, path, **extra):
        return write_json(path, {
            "signal_nm": self.signal_nm.tolist(),
            "idler_nm": self.idler_nm.tolist(),
            "values_row_major": np.real(self.amplitudes).ravel().tolist(),
            "normalized": self.normalized,
            **extra,
        })


@dataclass(frozen=True)
class SchmidtResult:
    coefficients: np.ndarray
    purity: float
    schmidt_number: float

    def to_json(self, path):
        return write_json(path, {"c": self.coefficients.tolist(), "p": self.purity, "K": self.schmidt_number})


def _axes(center, span, n):
    s0, i0 = center
    ss, si = (span, span) if np.isscalar(span) else span
    if not (ss > 0 and si > 0):
        raise ValueError("span must be positive")
    if n < 16:
        raise ValueError(f"grid size must be at least 16, got {n}")
    return np.linspace(s0 - ss / 2.0, s0 + ss / 2.0, n), np.linspace(i0 - si / 2.0, i0 + si / 2.0, n)


def phase_matching_table(crystal: CrystalSpec, pm, center, span, n: int = 200, expansion: str = "exact"):
    """Signal axis, idler axis and the PMF table on them."""
    ls, li = _axes(center, span, n)
    S, I = np.meshgrid(ls, li, indexing="ij")
    try:
        pmf = phase_matching_amplitude(crystal, pm, S, I, expansion, about=tuple(center))
    except ValueError as exc:
        raise type(exc)(f"{exc} (JSA grid signal [{ls[0]:.6g}, {ls[-1]:.6g}] nm, "
                        f"idler [{li[0]:.6g}, {li[-1]:.6g}] nm)") from None
    return ls, li, pmf


def build_jsa(crystal: CrystalSpec, pm, pump: PumpSpec, center, span, n: int = 200,
              expansion: str = "exact", include_pmf: bool = True, include_pump: bool = True) -> JointSpectrum:
    """Normalised PEF x PMF on an n x n wavelength grid centred on ``center``."""
    if crystal.period_um is None and include_pmf:
        raise ConfigError("crystal needs a poling period to build a JSA")
    if include_pmf:
        ls, li, table = phase_matching_table(crystal, pm, center, span, n, expansion)
    else:
        ls, li = _axes(center, span, n)
        table = np.ones((n, n))
    if include_pump:
        table = table * pump_envelope(ls[:, None], li[None, :], pump)
    return JointSpectrum(ls, li, table).normalize()


def schmidt(js: JointSpectrum, cutoff: float = SV_CUTOFF) -> SchmidtResult:
    """Singular values of the amplitude table and the purity sum c^4."""
    if abs(js.norm2 - 1.0) > NORM_TOL:
        raise NormalizationError(f"JSA norm {js.norm2:.15g} differs from 1")
    c = np.linalg.svd(js.amplitudes, compute_uv=False)
    c = c[c >= cutoff]
    p = float(np.sum(c**4))
    return SchmidtResult(c, p, 1.0 / p)


def containment_limit(center, span, pump_center_nm: float, edge_level: float) -> float:
    """Largest bandwidth whose pump amplitude stays below ``edge_level`` at the
    midpoint of every grid edge."""
    s0, i0 = center
    ss, si = (span, span) if np.isscalar(span) else span
    edges = [(s0 - ss / 2, i0), (s0 + ss / 2, i0), (s0, i0 - si / 2), (s0, i0 + si / 2)]
    g = min(abs(1.0 / a + 1.0 / b - 1.0 / pump_center_nm) for a, b in edges)
    u0 = math.sqrt(-2.0 * math.log(edge_level))
    a = g / u0
    lc2 = pump_center_nm**2
    return (math.sqrt(1.0 + a * a * lc2) - 1.0) / (a / 2.0)


_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def optimize_pump_bandwidth(crystal: CrystalSpec, pm, center, span, n: int = 200,
                            window=(0.05, 20.0), expansion: str = "exact", edge_level: float | None = 1e-2,
                            samples: int = 25, tol: float = 1e-4):
    """Pump bandwidth maximising purity at fixed crystal length.

    The search runs on log(bandwidth): a coarse sample locates the best
    bracket, golden-section refines it.  With ``edge_level`` the upper end
    of the window is capped so the pump envelope decays to that level
    before the edges of the grid.  Returns ``(bandwidth_nm, purity)``.
    """
    lo, hi = (float(v) for v in window)
    if not 0 < lo <= hi:
        raise ValueError(f"bandwidth window must be positive, got {window}")
    if crystal.period_um is None:
        raise ConfigError("crystal needs a poling period to build a JSA")
    ls, li, pmf = phase_matching_table(crystal, pm, center, span, n, expansion)
    pump_center = 1.0 / (1.0 / center[0] + 1.0 / center[1])
    if edge_level is not None:
        hi = max(lo, min(hi, containment_limit(center, span, pump_center, edge_level)))

    def purity(d):
        pef = pump_envelope(ls[:, None], li[None, :], PumpSpec(pump_center, d))
        return schmidt(JointSpectrum(ls, li, pef * pmf).normalize()).purity

    if hi - lo <= 1e-12 * hi:
        return lo, purity(lo)

    xs = np.linspace(math.log(lo), math.log(hi), max(samples, 3))
    ps = np.array([purity(math.exp(v)) for v in xs])
    j = int(np.argmax(ps))
    inner = ps[1:-1]
    peaks = np.sum((inner > ps[:-2] + UNIMODAL_TOL) & (inner > ps[2:] + UNIMODAL_TOL))
    peaks += int(ps[0] > ps[1] + UNIMODAL_TOL) + int(ps[-1] > ps[-2] + UNIMODAL_TOL)
    peaks = max(peaks, 1)
    if peaks > 1:
        warnings.warn("purity versus pump bandwidth is not unimodal; refining around the best sample",
                      NonUnimodalWarning, stacklevel=2)
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, xs.size - 1)]
    best_x, best_p = xs[j], ps[j]
    c_, d_ = b - _GOLD * (b - a), a + _GOLD * (b - a)
    pc, pd = purity(math.exp(c_)), purity(math.exp(d_))
    while b - a > tol:
        if pc > pd:
            b, d_, pd = d_, c_, pc
            c_ = b - _GOLD * (b - a)
            pc = purity(math.exp(c_))
        else:
            a, c_, pc = c_, d_, pd
            d_ = a + _GOLD * (b - a)
            pd = purity(math.exp(d_))
    for v, p in ((c_, pc), (d_, pd)):
        if p > best_p:
            best_x, best_p = v, p
    return math.exp(best_x), float(best_p)


def bandwidth_for_purity(crystal: CrystalSpec, pm, center, span, target: float, n: int = 200,
                         window=(0.05, 20.0), expansion: str = "exact") -> float:
    """Smallest-side bandwidth in ``window`` at which the purity equals ``target``.

    The purity is assumed monotone on the side of the optimum closest to
    ``window[0]``.
    """
    ls, li, pmf = phase_matching_table(crystal, pm, center, span, n, expansion)
    pump_center = 1.0 / (1.0 / center[0] + 1.0 / center[1])

    def f(logd):
        pef = pump_envelope(ls[:, None], li[None, :], PumpSpec(pump_center, math.exp(logd)))
        return schmidt(JointSpectrum(ls, li, pef * pmf).normalize()).purity - target

    return math.exp(brentq(f, math.log(window[0]), math.log(window[1]), xtol=1e-10))


def degenerate_center(solution) -> tuple[float, float]:
    """(signal, idler) centre for a degenerate GVM solution."""
    lam = solution.wavelength_nm
    return lam, float(idler_wavelength(lam / 2.0, lam))
