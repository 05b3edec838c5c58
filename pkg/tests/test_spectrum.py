import json
import math
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from dopedppln.phasematch import TYPE2, ConfigError, GvmCondition, delta_k, pick_root, solve_gvm, tilt_angle
from dopedppln.reproduce import GVM_REFERENCE_NM, gvm_source
from dopedppln.spectrum import (
    JointSpectrum,
    NormalizationError,
    PumpSpec,
    build_jsa,
    degenerate_center,
    optimize_pump_bandwidth,
    phase_matching_amplitude,
    phase_matching_table,
    pump_envelope,
    schmidt,
)
from oracles import gram_purity

G1, G2, G3 = GvmCondition


@pytest.fixture(scope="module")
def sources(catalog):
    return {c: gvm_source(catalog, c, bandwidth_nm=b) for c, b in ((G1, 2.44), (G2, 5.27), (G3, 0.52))}


def test_pump_envelope_center_and_symmetry():
    pump = PumpSpec(1600.0, 1.0)
    assert pump_envelope(3200.0, 3200.0, pump) == 1.0
    rng = np.random.default_rng(3)
    a, b = rng.uniform(3150.0, 3250.0, (2, 100))
    assert np.array_equal(pump_envelope(a, b, pump), pump_envelope(b, a, pump))
    v = pump_envelope(a, b, pump)
    assert np.all((v > 0) & (v <= 1))


def test_pump_fwhm_convention():
    pump = PumpSpec(1600.0, 1.0)

    def intensity(lp):
        # PEF^2 along the sum-frequency direction, parametrised by the pump wavelength
        return pump_envelope(2 * lp, 2 * lp, pump) ** 2 - 0.5

    lo = brentq(intensity, 1590.0, 1600.0, xtol=1e-13)
    hi = brentq(intensity, 1600.0, 1610.0, xtol=1e-13)
    assert hi - lo == pytest.approx(pump.fwhm_nm, rel=1e-9)
    assert (hi - lo) / pump.bandwidth_nm == pytest.approx(1.67, abs=0.005)
    assert pump.fwhm_approx_nm == pytest.approx(hi - lo, rel=1e-5)


def test_pump_validation():
    with pytest.raises(ValueError):
        PumpSpec(1600.0, 0.0)
    assert PumpSpec.for_signal_idler(3200.0, 3200.0, 1.0).center_nm == pytest.approx(1600.0)


def test_pmf_one_at_phase_matching_and_zero_at_pi(sources):
    src = sources[G1]
    s0, i0 = src.center
    assert phase_matching_amplitude(src.crystal, TYPE2, s0, i0) == pytest.approx(1.0, abs=1e-10)
    L = src.crystal.length_mm * 1e-3

    def arg(ls):
        li = 1.0 / (1.0 / (s0 / 2.0) - 1.0 / ls)  # fixed pump, move along the energy line
        lp = s0 / 2.0
        return delta_k(src.crystal, TYPE2, lp, ls, qpm=True) * L / 2.0 - math.pi, li

    ls = brentq(lambda v: arg(v)[0], s0, s0 + 200.0, xtol=1e-12)
    li = arg(ls)[1]
    assert abs(phase_matching_amplitude(src.crystal, TYPE2, ls, li)) < 1e-9


def test_pmf_linear_expansion_agrees_near_center(sources):
    src = sources[G2]
    s0, i0 = src.center
    ls = s0 + np.linspace(-0.2, 0.2, 5)
    li = i0 + np.linspace(0.2, -0.2, 5)
    exact = phase_matching_amplitude(src.crystal, TYPE2, ls, li)
    lin = phase_matching_amplitude(src.crystal, TYPE2, ls, li, "linear", about=(s0, i0))
    assert np.allclose(exact, lin, atol=2e-5)
    with pytest.raises(ValueError):
        phase_matching_amplitude(src.crystal, TYPE2, ls, li, "linear")
    with pytest.raises(ValueError):
        phase_matching_amplitude(src.crystal, TYPE2, ls, li, "cubic")


def test_pmf_ridge_orientation_at_gvm3(sources):
    src = sources[G3]
    ls, li, pmf = phase_matching_table(src.crystal, TYPE2, src.center, 6.0, 301)
    rows = np.arange(60, 241)
    peak = []
    for r in rows:
        j = int(np.argmax(pmf[r]))
        y0, y1, y2 = pmf[r, j - 1:j + 2]
        peak.append(li[j] + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2) * (li[1] - li[0]))
    slope = np.polyfit(ls[rows], peak, 1)[0]
    ridge = math.degrees(math.atan(slope)) % 180.0
    s0, i0 = src.center
    assert ridge == pytest.approx(tilt_angle(src.crystal, TYPE2, s0 / 2.0, s0), abs=0.5)
    assert ridge == pytest.approx(45.0, abs=0.5)


def test_build_jsa_normalized_and_immutable(sources):
    js = sources[G1].jsa()
    assert abs(js.norm2 - 1.0) < 1e-12 and js.normalized
    assert js.amplitudes.shape == (200, 200)
    with pytest.raises(ValueError):
        js.amplitudes[0, 0] = 1.0


def test_build_jsa_requires_period(catalog):
    src = gvm_source(catalog, G1, bandwidth_nm=1.0)
    with pytest.raises(ConfigError):
        build_jsa(src.crystal.replace(period_um=None), TYPE2, src.pump, src.center, 60.0)


def test_build_jsa_range_error_names_grid(sources):
    src = sources[G2]
    with pytest.raises(ValueError, match="JSA grid"):
        build_jsa(src.crystal, TYPE2, src.pump, src.center, 3000.0, 32)


def test_build_jsa_grid_validation(sources):
    src = sources[G1]
    with pytest.raises(ValueError):
        build_jsa(src.crystal, TYPE2, src.pump, src.center, 60.0, 8)
    with pytest.raises(ValueError):
        build_jsa(src.crystal, TYPE2, src.pump, src.center, -1.0)


def test_gvm3_antidiagonal_symmetry_linear(catalog):
    src = gvm_source(catalog, G3, bandwidth_nm=0.52, expansion="linear")
    f = src.jsa().amplitudes
    assert np.max(np.abs(f - f.T)) <= 1e-8 * np.max(np.abs(f))


def test_gvm3_antidiagonal_symmetry_exact_is_approximate(sources):
    f = sources[G3].jsa().amplitudes
    assert np.max(np.abs(f - f.T)) < 0.03 * np.max(np.abs(f))


def test_pump_only_jsa_is_entangled(sources):
    src = sources[G1]
    js = build_jsa(src.crystal, TYPE2, src.pump, src.center, 60.0, 64, include_pmf=False)
    p = schmidt(js).purity
    assert p < 1.0
    assert p == pytest.approx(gram_purity(js.amplitudes), abs=1e-10)


def test_schmidt_rank_one():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2, 40))
    js = JointSpectrum(np.arange(40.0), np.arange(40.0), np.outer(u, v)).normalize()
    r = schmidt(js)
    assert r.purity == pytest.approx(1.0, abs=1e-10)
    assert r.schmidt_number == pytest.approx(1.0, abs=1e-10)


def test_schmidt_matches_gram_oracle_and_transpose():
    rng = np.random.default_rng(1)
    f = rng.normal(size=(30, 30)) + 1j * rng.normal(size=(30, 30))
    js = JointSpectrum(np.arange(30.0), np.arange(30.0), f).normalize()
    r = schmidt(js)
    assert r.purity == pytest.approx(gram_purity(js.amplitudes), abs=1e-10)
    assert np.sum(r.coefficients**2) == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.diff(r.coefficients) <= 0)
    assert schmidt(js.transposed()).purity == pytest.approx(r.purity, abs=1e-12)


def test_schmidt_rejects_unnormalized():
    js = JointSpectrum(np.arange(4.0), np.arange(4.0), np.ones((4, 4)))
    with pytest.raises(NormalizationError):
        schmidt(js)
    with pytest.raises(NormalizationError):
        JointSpectrum(np.arange(4.0), np.arange(4.0), np.zeros((4, 4))).normalize()


def test_joint_spectrum_validation():
    with pytest.raises(ValueError):
        JointSpectrum(np.arange(3.0), np.arange(4.0), np.ones((4, 4)))
    with pytest.raises(ValueError):
        JointSpectrum(np.array([1.0, 0.0]), np.arange(2.0), np.ones((2, 2)))


def test_marginals(sources):
    js = sources[G1].jsa()
    assert np.sum(js.marginal_signal()) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(js.marginal_idler(), js.transposed().marginal_signal())


@pytest.mark.parametrize("cond", list(GvmCondition))
def test_grid_refinement(catalog, sources, cond):
    src = sources[cond]
    coarse = schmidt(src.jsa()).purity
    fine = schmidt(build_jsa(src.crystal, TYPE2, src.pump, src.center, src.span_nm, 400)).purity
    assert abs(coarse - fine) < 0.002


def test_optimizer_gvm1_at_30mm(catalog):
    src = gvm_source(catalog, G1, length_mm=30.0, bandwidth_nm=1.0)
    d, p = optimize_pump_bandwidth(src.crystal, TYPE2, src.center, 120.0)
    assert p >= 0.96
    js = build_jsa(src.crystal, TYPE2, PumpSpec(src.pump.center_nm, d), src.center, 120.0)
    assert schmidt(js).purity == pytest.approx(p, abs=1e-12)


def test_optimizer_beats_neighbours(sources):
    src = sources[G1]
    d, p = optimize_pump_bandwidth(src.crystal, TYPE2, src.center, src.span_nm, 100, window=(0.5, 5.0),
                                   edge_level=None)
    assert 0.5 < d < 5.0
    for f in (0.9, 1.1):
        js = build_jsa(src.crystal, TYPE2, PumpSpec(src.pump.center_nm, d * f), src.center, src.span_nm, 100)
        assert schmidt(js).purity <= p + 1e-9


def test_length_bandwidth_scaling(catalog):
    short = gvm_source(catalog, G1, length_mm=25.0, bandwidth_nm=1.0)
    long = gvm_source(catalog, G1, length_mm=50.0, bandwidth_nm=1.0)
    d1, p1 = optimize_pump_bandwidth(short.crystal, TYPE2, short.center, 120.0)
    d2, p2 = optimize_pump_bandwidth(long.crystal, TYPE2, long.center, 60.0)
    assert abs(p1 - p2) < 0.005
    assert d2 == pytest.approx(d1 / 2.0, rel=0.05)


def test_optimizer_degenerate_window(sources):
    src = sources[G1]
    d, p = optimize_pump_bandwidth(src.crystal, TYPE2, src.center, 60.0, 64, window=(1.5, 1.5))
    js = build_jsa(src.crystal, TYPE2, PumpSpec(src.pump.center_nm, 1.5), src.center, 60.0, 64)
    assert d == 1.5 and p == pytest.approx(schmidt(js).purity, abs=1e-12)


def test_optimizer_window_validation(sources):
    src = sources[G1]
    with pytest.raises(ValueError):
        optimize_pump_bandwidth(src.crystal, TYPE2, src.center, 60.0, window=(2.0, 1.0))
    with pytest.raises(ConfigError):
        optimize_pump_bandwidth(src.crystal.replace(period_um=None), TYPE2, src.center, 60.0)


def test_degenerate_center(mgln5):
    sol = pick_root(solve_gvm(mgln5, TYPE2, G2), GVM_REFERENCE_NM[G2])
    s, i = degenerate_center(sol)
    assert s == sol.wavelength_nm and i == pytest.approx(s, rel=1e-14)


def test_exports(tmp_path, sources):
    js = build_jsa(sources[G1].crystal, TYPE2, sources[G1].pump, sources[G1].center, 60.0, 16)
    js.to_csv(tmp_path / "j.csv")
    lines = (tmp_path / "j.csv").read_text().splitlines()
    assert lines[0] == "lambda_s_nm,lambda_i_nm,amplitude" and len(lines) == 257
    js.to_json(tmp_path / "j.json")
    doc = json.loads((tmp_path / "j.json").read_text())
    assert len(doc["values_row_major"]) == 256 and doc["normalized"]
    schmidt(js).to_json(tmp_path / "s.json")
    s = json.loads((tmp_path / "s.json").read_text())
    assert s["K"] == pytest.approx(1.0 / s["p"])
