import json

import numpy as np
import pytest

from dopedppln.interference import (
    GridError,
    RangeTooNarrowError,
    HomTrace,
    extract_visibility_and_width,
    four_fold_probabilities,
    four_fold_trace,
    omega_axis,
    two_fold_probabilities,
    two_fold_trace,
)
from dopedppln.spectrum import JointSpectrum, NormalizationError, schmidt
from oracles import four_fold_direct, two_fold_direct


def random_js(rng, n, lam0=3000.0, step=2.0, complex_=True):
    lam = lam0 + step * np.arange(n)
    f = rng.normal(size=(n, n))
    if complex_:
        f = f + 1j * rng.normal(size=(n, n))
    return JointSpectrum(lam, lam.copy(), f).normalize()


def gaussian_product_js(n=64):
    lam = np.linspace(3150.0, 3250.0, n)
    u = np.exp(-0.5 * ((lam - 3190.0) / 8.0) ** 2)
    v = np.exp(-0.5 * ((lam - 3210.0) / 12.0) ** 2)
    return JointSpectrum(lam, lam.copy(), np.outer(u, v)).normalize()


def test_omega_axis():
    assert omega_axis(1000.0) == pytest.approx(2 * np.pi * 299792458.0 / 1e-6 * 1e-12)


@pytest.mark.parametrize("mode", ["two_signals", "two_idlers"])
def test_four_fold_matches_direct_sum(mode):
    rng = np.random.default_rng(11)
    a, b = random_js(rng, 16), random_js(rng, 16)
    taus = np.array([-0.7, 0.0, 0.3, 1.9])
    got = four_fold_probabilities(a, b, taus, mode)
    f1, f2 = (a.amplitudes, b.amplitudes) if mode == "two_signals" else (a.amplitudes.T, b.amplitudes.T)
    want = [four_fold_direct(f1, f2, a.signal_nm, t) for t in taus]
    assert np.allclose(got, want, rtol=1e-10, atol=0.0)


def test_two_fold_matches_direct_sum():
    rng = np.random.default_rng(12)
    js = random_js(rng, 20)
    taus = np.array([-1.1, 0.0, 0.4, 2.5])
    got = two_fold_probabilities(js, taus)
    want = [two_fold_direct(js.amplitudes, js.signal_nm, t) for t in taus]
    assert np.allclose(got, want, rtol=1e-10, atol=0.0)


def test_rank_one_sources_interfere_perfectly():
    js = gaussian_product_js()
    tr = four_fold_trace(js, js)
    assert tr.visibility == pytest.approx(1.0, abs=1e-8)
    assert schmidt(js).purity == pytest.approx(1.0, abs=1e-10)


def test_symmetric_in_delay_for_real_jsa():
    rng = np.random.default_rng(5)
    js = random_js(rng, 24, complex_=False)
    taus = np.linspace(-3.0, 3.0, 41)
    for p in (two_fold_probabilities(js, taus), four_fold_probabilities(js, js, taus),
              four_fold_probabilities(js, js, taus, "two_idlers")):
        assert np.allclose(p, p[::-1], rtol=0.0, atol=1e-10)


def symmetric_entangled_js(n=64):
    lam = np.linspace(3150.0, 3250.0, n)
    s, i = np.meshgrid(lam, lam, indexing="ij")
    f = np.exp(-0.5 * ((s + i - 6400.0) / 10.0) ** 2 - 0.5 * ((s - i) / 12.0) ** 2)
    return JointSpectrum(lam, lam.copy(), f).normalize()


def test_bounds_and_baseline():
    js = gaussian_product_js()
    ent = symmetric_entangled_js()
    for tr in (four_fold_trace(js, js, mode="two_idlers"), four_fold_trace(ent, ent), two_fold_trace(ent)):
        p = tr.probabilities
        assert np.all(p >= -1e-15) and np.all(p <= tr.baseline * (1 + 1e-6))
        assert tr.baseline == pytest.approx(0.5, rel=0.01)
        assert 0.0 <= tr.visibility <= 1.0
        assert np.all(np.diff(tr.delays_ps) > 0)


def test_symmetrized_two_fold_is_perfect():
    js = gaussian_product_js()
    sym = JointSpectrum(js.signal_nm, js.idler_nm, js.amplitudes + js.amplitudes.T).normalize()
    assert two_fold_trace(sym).visibility > 0.9999
    assert two_fold_trace(symmetric_entangled_js()).visibility > 0.9999
    assert two_fold_trace(js).visibility < 0.9999


def test_two_fold_can_exceed_baseline():
    # a symmetrised pair of displaced Gaussians beats, giving shoulders above 1/2
    js = gaussian_product_js()
    sym = JointSpectrum(js.signal_nm, js.idler_nm, js.amplitudes + js.amplitudes.T).normalize()
    tr = two_fold_trace(sym, np.linspace(-8.0, 8.0, 401))
    assert tr.probabilities.max() > 1.1 * tr.baseline


def test_axis_errors():
    rng = np.random.default_rng(2)
    js = random_js(rng, 16)
    shifted = JointSpectrum(js.signal_nm + 1.0, js.idler_nm, js.amplitudes)
    with pytest.raises(GridError):
        four_fold_probabilities(js, shifted.normalize(), [0.0])
    with pytest.raises(GridError):
        two_fold_probabilities(shifted.normalize(), [0.0])
    with pytest.raises(NormalizationError):
        two_fold_probabilities(JointSpectrum(js.signal_nm, js.idler_nm, 2 * js.amplitudes), [0.0])
    with pytest.raises(ValueError):
        four_fold_probabilities(js, js, [0.0], mode="two_herald")
    with pytest.raises(ValueError):
        two_fold_trace(gaussian_product_js(), [0.0, 0.0, 1.0])


def test_extract_gaussian_dip():
    t = np.linspace(-10.0, 10.0, 4001)
    sigma = 1.3
    p = 0.5 * (1.0 - 0.9 * np.exp(-0.5 * (t / sigma) ** 2))
    v, width, base = extract_visibility_and_width(t, p)
    assert base == pytest.approx(0.5, rel=1e-6)
    assert v == pytest.approx(0.9, abs=1e-6)
    assert width == pytest.approx(2 * sigma * np.sqrt(2 * np.log(2)), abs=1e-3)


def test_extract_parabola_dip():
    t = np.linspace(-5.0, 5.0, 1001)
    a = 1.7
    p = 1.0 - 0.8 * np.clip(1.0 - (t / a) ** 2, 0.0, None)
    v, width, base = extract_visibility_and_width(t, p)
    assert v == pytest.approx(0.8, abs=1e-9)
    assert width == pytest.approx(np.sqrt(2.0) * a, abs=1e-3)


def test_extract_bump():
    t = np.linspace(-10.0, 10.0, 2001)
    p = 0.5 * (1.0 + 0.4 * np.exp(-0.5 * t**2))
    v, width, _ = extract_visibility_and_width(t, p)
    assert v == 0.0
    assert width == pytest.approx(2 * np.sqrt(2 * np.log(2)), abs=1e-3)


def test_range_too_narrow():
    t = np.linspace(-1.0, 1.0, 201)
    with pytest.raises(RangeTooNarrowError, match="slope"):
        extract_visibility_and_width(t, 0.5 * (1.0 - 0.5 * np.exp(-t**2)))
    with pytest.raises(RangeTooNarrowError):
        extract_visibility_and_width(t[:4], np.ones(4))


def test_interior_extrema_counts_oscillation():
    t = np.linspace(-20.0, 20.0, 2001)
    p = 0.5 * (1.0 - 0.5 * np.exp(-0.5 * (t / 3.0) ** 2) * np.cos(2.0 * t))
    synth = HomTrace(t, p, 0.5, 0.5, 1.0, "two_fold")
    assert synth.interior_extrema() >= 5
    flat = HomTrace(t, np.full_like(t, 0.5), 0.5, 0.0, 0.0, "two_fold")
    assert flat.interior_extrema() == 0


def test_auto_grid_reaches_baseline():
    js = gaussian_product_js()
    tr = four_fold_trace(js, js)
    assert tr.delays_ps.size == 201
    assert tr.delays_ps[0] == pytest.approx(-tr.delays_ps[-1])
    assert abs(tr.probabilities[0] - tr.baseline) < 1e-3 * tr.baseline


def test_exports(tmp_path):
    tr = four_fold_trace(gaussian_product_js(), gaussian_product_js())
    tr.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "tau_ps,P"
    tr.to_json(tmp_path / "t.json")
    doc = json.loads((tmp_path / "t.json").read_text())
    assert set(doc) == {"visibility", "fwhm_ps", "baseline", "mode"}


def test_coarse_grid_reports_alias_limit():
    lam = np.linspace(2450.0, 2510.0, 32)
    s, i = np.meshgrid(lam, lam, indexing="ij")
    f = np.exp(-0.5 * ((s + i - 4960.0) / 2.0) ** 2 - 0.5 * ((s - i) / 4.0) ** 2)
    js = JointSpectrum(lam, lam.copy(), f).normalize()
    with pytest.raises(RangeTooNarrowError, match="alias"):
        four_fold_trace(js, js, mode="two_idlers")
