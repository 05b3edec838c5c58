"""Hong-Ou-Mandel coincidence traces from tabulated joint spectra.

Delays are in ps.  Phases use the absolute angular frequency of each grid
sample, omega = 2*pi*c/lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT

from ._io import write_csv, write_json
from .spectrum import NORM_TOL, JointSpectrum, NormalizationError

MODES = ("two_signals", "two_idlers")
BASELINE_FRACTION = 0.10
MAX_BASELINE_SLOPE = 0.01  # fraction of baseline per ps
DEFAULT_POINTS = 201
WIDTH_MULTIPLE = 5.0
MAX_WIDENINGS = 4


class GridError(ValueError):
    """Joint spectra are not sampled on compatible axes."""


class RangeTooNarrowError(ValueError):
    """The delay range does not reach a flat baseline."""


@dataclass(frozen=True)
class HomTrace:
    delays_ps: np.ndarray
    probabilities: np.ndarray
    baseline: float
    visibility: float
    width_fwhm_ps: float
    mode: str

    def to_csv(self, path):
        return write_csv(path, ("tau_ps", "P"), zip(self.delays_ps, self.probabilities))

    def to_json(self, path):
        return write_json(path, {"visibility": self.visibility, "fwhm_ps": self.width_fwhm_ps,
                                 "baseline": self.baseline, "mode": self.mode})

    def interior_extrema(self, level: float = 1e-3) -> int:
        """Local extrema where the trace departs from the baseline by more than
        ``level`` times the baseline."""
        p = self.probabilities
        inside = np.abs(p - self.baseline) > level * self.baseline
        d = np.sign(np.diff(p))
        turns = np.nonzero(d[1:] * d[:-1] < 0)[0] + 1
        return int(np.sum(inside[turns]))


def omega_axis(lam_nm) -> np.ndarray:
    """Angular frequency in rad/ps."""
    return 2.0 * np.pi * C_LIGHT / (np.asarray(lam_nm, dtype=float) * 1e-9) * 1e-12


def _require_normalized(js: JointSpectrum):
    if abs(js.norm2 - 1.0) > NORM_TOL:
        raise NormalizationError(f"JSA norm {js.norm2:.15g} differs from 1")


def _same(a, b) -> bool:
    return a.shape == b.shape and np.allclose(a, b, rtol=1e-12, atol=0.0)


def _quadratic_form(g: np.ndarray, w: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """Re sum_ab g[a, b] exp(i (w_b - w_a) tau) for every tau."""
    u = np.exp(1j * np.outer(w, delays))
    return np.real(np.sum(np.conj(u) * (g @ u), axis=0))


def _two_fold_setup(js: JointSpectrum):
    _require_normalized(js)
    if not _same(js.signal_nm, js.idler_nm):
        raise GridError("two-fold interference needs identical signal and idler axes")
    f = js.amplitudes
    w = omega_axis(js.signal_nm)
    g = np.conj(f) * f.T

    def evaluate(tau):
        return 0.25 * (2.0 * js.norm2 - 2.0 * _quadratic_form(g, w, tau))

    diff = w[:, None] - w[None, :]
    return evaluate, _rms(diff, np.abs(f) ** 2), _alias_period(w)


def _four_fold_setup(js1: JointSpectrum, js2: JointSpectrum, mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    for js in (js1, js2):
        _require_normalized(js)
    if not (_same(js1.signal_nm, js2.signal_nm) and _same(js1.idler_nm, js2.idler_nm)):
        raise GridError("four-fold interference needs both sources on identical axes")
    if mode == "two_signals":
        f1, f2, lam = js1.amplitudes, js2.amplitudes, js1.signal_nm
    else:
        f1, f2, lam = js1.amplitudes.T, js2.amplitudes.T, js1.idler_nm
    m1 = f1 @ np.conj(f1.T)
    m2 = f2 @ np.conj(f2.T)
    g = m1 * m2.T
    w = omega_axis(lam)
    norm = js1.norm2 * js2.norm2

    def evaluate(tau):
        return 0.25 * (2.0 * norm - 2.0 * _quadratic_form(g, w, tau))

    marg = np.real(np.diag(m1)) + np.real(np.diag(m2))
    return evaluate, math.sqrt(2.0) * _rms(w, marg), _alias_period(w)


def _delays(delays_ps) -> np.ndarray:
    t = np.asarray(delays_ps, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("delays must be a non-empty 1-D sequence")
    return t


def two_fold_probabilities(js: JointSpectrum, delays_ps) -> np.ndarray:
    """P2 at the given delays, without baseline analysis."""
    return _two_fold_setup(js)[0](_delays(delays_ps))


def four_fold_probabilities(js1: JointSpectrum, js2: JointSpectrum, delays_ps, mode: str = "two_signals") -> np.ndarray:
    """P4 at the given delays, without baseline analysis."""
    return _four_fold_setup(js1, js2, mode)[0](_delays(delays_ps))


def two_fold_trace(js: JointSpectrum, delays_ps=None) -> HomTrace:
    """Signal-idler interference of one source.

    P(tau) = 1/4 sum |f(s, i) - f(i, s) exp(-i (w_s - w_i) tau)|^2.
    """
    evaluate, scale, alias = _two_fold_setup(js)
    if delays_ps is None:
        return _auto_trace(evaluate, scale, alias, "two_fold")
    return _trace(np.asarray(delays_ps, dtype=float), evaluate, "two_fold")


def four_fold_trace(js1: JointSpectrum, js2: JointSpectrum, delays_ps=None, mode: str = "two_signals") -> HomTrace:
    """Heralded interference of photons from two sources.

    Uses P(tau) = 1/4 (2 - 2 Re Tr[M1 D(tau) M2 D(-tau)]) where M = F F^H
    traces out the heralding photon and D is the diagonal delay phase.
    """
    evaluate, scale, alias = _four_fold_setup(js1, js2, mode)
    if delays_ps is None:
        return _auto_trace(evaluate, scale, alias, mode)
    return _trace(np.asarray(delays_ps, dtype=float), evaluate, mode)


def _alias_period(w: np.ndarray) -> float:
    """Delay after which the sampled spectrum starts to rephase (ps)."""
    step = np.max(np.abs(np.diff(w))) if w.size > 1 else 0.0
    return 2.0 * np.pi / step if step > 0 else math.inf


def _rms(values: np.ndarray, weights: np.ndarray) -> float:
    wsum = np.sum(weights)
    mean = np.sum(values * weights) / wsum
    return float(np.sqrt(np.sum((values - mean) ** 2 * weights) / wsum))


def _trace(delays, evaluate, mode) -> HomTrace:
    if delays.size < 3 or not np.all(np.diff(delays) > 0):
        raise ValueError("delays must be strictly increasing with at least 3 points")
    p = evaluate(delays)
    v, width, base = extract_visibility_and_width(delays, p)
    return HomTrace(delays, p, base, v, width, mode)


def _auto_trace(evaluate, spectral_rms: float, alias_ps: float, mode: str) -> HomTrace:
    """Default delay grid, widened until a flat baseline is reached.

    The range never exceeds half the alias period of the wavelength grid,
    beyond which the discretised trace revives.
    """
    expected = 2.0 * math.sqrt(2.0 * math.log(2.0)) / spectral_rms if spectral_rms > 0 else 1.0
    half = min(WIDTH_MULTIPLE * expected, 0.5 * alias_ps)
    for attempt in range(MAX_WIDENINGS + 1):
        delays = np.linspace(-half, half, DEFAULT_POINTS)
        try:
            return _trace(delays, evaluate, mode)
        except RangeTooNarrowError:
            if half >= 0.5 * alias_ps:
                raise RangeTooNarrowError(
                    f"no flat baseline within half the grid alias period ({0.5 * alias_ps:.4g} ps); "
                    "use a finer JSA grid") from None
            if attempt == MAX_WIDENINGS:
                raise
            half = min(2.0 * half, 0.5 * alias_ps)


def extract_visibility_and_width(delays_ps, probabilities) -> tuple[float, float, float]:
    """Visibility, FWHM (ps) and baseline of a dip or bump trace.

    The baseline is the mean over the outermost 10% of the delay samples,
    split between both ends.  The FWHM is taken at half the extremal
    excursion from the baseline by linear interpolation.
    """
    t = np.asarray(delays_ps, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    k = max(2, int(round(BASELINE_FRACTION * t.size / 2.0)))
    if 2 * k >= t.size:
        raise RangeTooNarrowError("too few delay samples for a baseline estimate")
    ends = (slice(0, k), slice(t.size - k, t.size))
    base = float(np.mean(np.concatenate([p[s] for s in ends])))
    if not base > 0:
        raise RangeTooNarrowError("baseline is not positive")
    for s in ends:
        slope = np.polyfit(t[s], p[s], 1)[0]
        if abs(slope) / base > MAX_BASELINE_SLOPE:
            raise RangeTooNarrowError(
                f"baseline slope {abs(slope) / base:.3g}/ps exceeds {MAX_BASELINE_SLOPE}/ps; widen the delay range")
    visibility = min(max((base - float(p.min())) / base, 0.0), 1.0)
    dev = p - base
    j = int(np.argmax(np.abs(dev)))
    half = 0.5 * dev[j]
    width = _crossing_width(t, dev, j, half)
    return visibility, width, base


def _crossing_width(t, dev, j, half) -> float:
    if half == 0:
        return 0.0
    s = np.sign(half)
    inside = s * dev >= s * half
    left = j
    while left > 0 and inside[left - 1]:
        left -= 1
    right = j
    while right < t.size - 1 and inside[right + 1]:
        right += 1
    if left == 0 or right == t.size - 1:
        raise RangeTooNarrowError("feature does not fall to half depth inside the delay range")

    def cross(a, b):
        return t[a] + (half - dev[a]) * (t[b] - t[a]) / (dev[b] - dev[a])

    return float(cross(right, right + 1) - cross(left - 1, left))
