import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from darkcavity.core import HBAR, SingleExcitationState
from darkcavity.field import SphereGeometry, rabi_profile
from darkcavity.inhomog import eigenmode_evolution, uniform_random_detunings
from darkcavity.spectrum import (SpanError, SpectrumResult, c10_single_excited,
                                 correlator_analytic, peak_summary, spectrum_analytic,
                                 spectrum_numeric)
from oracles import spectrum_pole_sum

params = st.tuples(st.integers(1, 100), st.floats(0.1, 50), st.floats(0.05, 100))


@given(params)
def test_closed_form_matches_pole_sum(p):
    n, w, mu = p
    if n * w * w <= mu * mu / 16 * 1.0001:
        return
    x = np.sqrt(n) * w
    nu = np.linspace(-3 * x, 3 * x, 301)
    ref = spectrum_pole_sum(nu, w, mu, n)
    got = spectrum_analytic(nu, w, mu, n).S
    assert np.allclose(got, ref, rtol=1e-8, atol=1e-12 * ref.max())


@given(params, st.floats(-1e3, 1e3))
def test_nonnegative_and_symmetric(p, omega):
    n, w, mu = p
    x = np.linspace(0, 5 * np.sqrt(n) * w + mu, 200)
    up = spectrum_analytic(omega + x, w, mu, n, omega=omega, absolute=True).S
    dn = spectrum_analytic(omega - x[::-1], w, mu, n, omega=omega, absolute=True).S[::-1]
    assert np.all(up >= 0)
    assert np.allclose(up, dn, rtol=1e-9)


def test_resolved_lines():
    n, w, mu = 10, 20.0, 1.0
    nu = np.linspace(-120, 120, 240001)
    peaks = peak_summary(spectrum_analytic(nu, w, mu, n))
    assert len(peaks) == 2
    for pk, sign in zip(peaks, (-1, 1)):
        assert pk.position == pytest.approx(sign * w * np.sqrt(n), rel=1e-3)
        assert pk.height == pytest.approx(2 / (np.pi * n * mu ** 2), rel=1e-3)
        assert pk.fwhm == pytest.approx(mu / 2, rel=0.02)


def test_height_halves_when_n_doubles():
    w, mu = 10.0, 0.5
    h = []
    for n in (20, 40):
        x = w * np.sqrt(n)
        h.append(spectrum_analytic(np.linspace(x - 2, x + 2, 20001), w, mu, n).S.max())
    assert h[0] / h[1] == pytest.approx(2.0, rel=1e-3)


def _numeric(n, w, mu, T, tau, dt):
    t = np.arange(int(round((T + tau) / dt)) + 1) * dt
    return t, c10_single_excited(t, w, mu, n)


def test_numeric_matches_closed_form():
    n, w = 5, 10.0
    mu = 2 * w
    tmu = HBAR / mu
    nu = np.linspace(-60, 60, 241)
    t0 = time.perf_counter()
    t, c = _numeric(n, w, mu, 40 * tmu, 40 * tmu, 0.01 * tmu)
    s = spectrum_numeric(t, c, nu, 40 * tmu, 40 * tmu).S
    assert time.perf_counter() - t0 < 1.0
    ref = spectrum_analytic(nu, w, mu, n).S
    assert np.max(np.abs(s / ref - 1)) < 0.02


def test_numeric_converges_monotonically():
    n, w = 5, 10.0
    mu = 2 * w
    tmu = HBAR / mu
    nu = np.linspace(-60, 60, 121)
    ref = spectrum_analytic(nu, w, mu, n).S
    errs = []
    for T in (4, 8, 16):
        t, c = _numeric(n, w, mu, T * tmu, T * tmu, 0.01 * tmu)
        errs.append(np.max(np.abs(spectrum_numeric(t, c, nu, T * tmu, T * tmu).S - ref)))
    assert errs[0] > errs[1] > errs[2]


def test_zero_trajectory():
    t = np.linspace(0, 10, 101)
    s = spectrum_numeric(t, np.zeros(101), np.linspace(-5, 5, 11), 5.0, 5.0)
    assert np.all(s.S == 0)
    assert peak_summary(s) == []


def test_span_and_grid_errors():
    t = np.linspace(0, 10, 101)
    with pytest.raises(SpanError):
        spectrum_numeric(t, np.zeros(101), [0.0], 8.0, 8.0)
    with pytest.raises(SpanError):
        spectrum_numeric(t + 1, np.zeros(101), [0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        spectrum_numeric(t ** 2, np.zeros(101), [0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        SpectrumResult([0.0, 1.0], [1.0])


def test_correlator():
    n, w, mu = 4, 10.0, 4.0
    sig = np.sqrt(n * w * w - mu * mu / 16)
    t = np.linspace(0, 3 * HBAR / sig, 3001)
    k0 = np.abs(correlator_analytic(t, 0.0, w, mu, n))
    # |C10|^2 peaks where d/ds [e^{-mu s/2} sin^2(sig s)] = 0
    s_pk = np.arctan(4 * sig / mu) / sig
    assert t[np.argmax(k0)] == pytest.approx(s_pk * HBAR, abs=2 * (t[1] - t[0]))
    tt, tau = 37.0, 11.0
    c = c10_single_excited(np.array([tt, tt + tau]), w, mu, n)
    assert correlator_analytic(tt, tau, w, mu, n) == pytest.approx(np.conj(c[0]) * c[1])
    assert abs(correlator_analytic(1e5, 0.0, w, mu, n)) < 1e-30
    with pytest.warns(RuntimeWarning):
        correlator_analytic(1.0, 1.0, 0.1, 10.0, 1)


def test_peak_summary_examples():
    nu = np.linspace(-6, 6, 12001)
    peaks = peak_summary(spectrum_analytic(nu, 1.0, 0.1, 10))
    assert len(peaks) == 2
    assert peaks[1].position == pytest.approx(np.sqrt(10), rel=1e-3)
    g = 0.7
    lor = SpectrumResult(nu, (g / 2) ** 2 / ((nu - 1.3) ** 2 + (g / 2) ** 2))
    (pk,) = peak_summary(lor)
    assert pk.position == pytest.approx(1.3, abs=1e-6) and pk.fwhm == pytest.approx(g, rel=0.01)
    assert peak_summary(SpectrumResult(nu, np.ones_like(nu))) == []


def test_inhomogeneous_doublet():
    rabi = rabi_profile(SphereGeometry(1.2), "line", 120.0, np.linspace(0, 1, 41))
    det = uniform_random_detunings(41, 50.0, 0)
    mu = HBAR / 20.0
    wn = np.linalg.norm(rabi)
    dt = 0.01 * HBAR / wn
    T = 40 * HBAR / mu
    t = np.arange(int(round(2 * T / dt)) + 1) * dt
    tr = eigenmode_evolution(SingleExcitationState.qubit_excited(41), mu, rabi, det, t)
    nu = np.linspace(-1.5 * wn, 1.5 * wn, 601)
    s = spectrum_numeric(t, tr.c10, nu, T, T)
    top = sorted(peak_summary(s), key=lambda p: -p.height)[:2]
    assert sorted(np.sign([p.position for p in top])) == [-1, 1]
    for p in top:
        assert abs(abs(p.position) / wn - 1) < 0.05
    # shielding: far weaker than if the same energy started in the bright state
    br = eigenmode_evolution(SingleExcitationState.bright(rabi), mu, rabi, det, t)
    bright_top = spectrum_numeric(t, br.c10, nu, T, T).S.max()
    assert max(p.height for p in top) < 0.1 * bright_top
