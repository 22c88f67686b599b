import numpy as np
import pytest
from hypothesis import given, strategies as st

from darkcavity.core import HBAR, QubitEnsemble, RelaxationSpec, SingleExcitationState
from darkcavity.single import evolve_detuned_numeric
from darkcavity.sse import (
    GridMismatchError, SSESpec, StabilityError, complex_normal, decay_rates,
    ensemble_average, noise_realization, sample_trajectories, sse_trajectory,
)
from oracles import lindblad_single_excitation

RABI = np.array([20.0, 15.0, 10.0])
DET = np.array([0.0, 10.0, -10.0])
MU = 32.9
ENS = QubitEnsemble(DET, RABI)
T = np.linspace(0, 200, 11)


def _spec(g=2.0, gel=5.0, n=3, **kw):
    return SSESpec(MU, RelaxationSpec(np.full(n, g), np.full(n, gel)), **kw)


def _rho(initial):
    v = np.concatenate([[initial.c00], initial.excited_vector])
    return np.outer(v, v.conj())


def test_decay_rates_and_t2():
    r = RelaxationSpec([2.0, 4.0], [1.0, 0.0])
    g00, g10, g0 = decay_rates(SSESpec(10.0, r))
    assert g00 == 0 and g10 == 5.0
    np.testing.assert_allclose(g0, [2.0, 2.0])
    np.testing.assert_allclose(r.t2, HBAR / g0)
    np.testing.assert_allclose(1 / r.t2, 1 / (2 * r.t1) + r.elastic / HBAR)


def test_spec_validation():
    r = RelaxationSpec.none(2)
    with pytest.raises(ValueError):
        SSESpec(-1.0, r)
    with pytest.raises(ValueError, match="zero-temperature"):
        SSESpec(1.0, r, temperature=300.0)
    with pytest.raises(ValueError, match="dephasing_noise"):
        SSESpec(1.0, r, dephasing_noise="white")


def test_noise_statistics():
    xi = complex_normal(np.random.default_rng(0), (100_000,))
    k = len(xi)
    assert abs(xi.mean()) < 4 / np.sqrt(k)
    assert np.mean(np.abs(xi) ** 2) == pytest.approx(1.0, abs=5 / np.sqrt(k))
    assert abs(np.mean(xi ** 2)) < 5 / np.sqrt(k)  # circular


def test_noise_realization_scaling():
    nr = noise_realization(4, 0.5, 1000, 3)
    assert nr.xi.shape == (1000, 3)
    np.testing.assert_array_equal(nr.xi, noise_realization(4, 0.5, 1000, 3).xi)
    D = np.array([1.0, 2.0, 0.0])
    np.testing.assert_allclose(nr.increments(D), np.sqrt(D * 0.5 / HBAR) * nr.xi)


def test_noiseless_equals_deterministic():
    init = SingleExcitationState.qubit_excited(3, 1)
    spec = _spec(0.0, 0.0)
    tr = sse_trajectory(init, spec, ENS, T + 30.0, seed=1, dt=0.4)
    ref = evolve_detuned_numeric(SingleExcitationState(0, 0, init.c0), MU, RABI, DET,
                                 t_grid=T + 30.0)
    np.testing.assert_allclose(tr.c10, ref.c10, atol=1e-11)
    np.testing.assert_allclose(tr.c0, ref.c0, atol=1e-11)


def test_dephasing_only_matches_density_matrix():
    gel = 5.0
    # qubit 1 is uncoupled, so only its pure dephasing acts
    r = RelaxationSpec([0.0, 0.0], [gel, 0.0])
    ens = QubitEnsemble([0.0, 0.0], [0.0, 10.0])
    init = SingleExcitationState(1 / np.sqrt(2), 0.0, [1 / np.sqrt(2), 0.0])
    t = np.linspace(0, 300, 16)
    ens_t = sample_trajectories(init, SSESpec(0.0, r), ens, t, 4000, seed=3, dt=1.0)
    coh, err = ensemble_average(ens_t, lambda tr: tr.c00 * np.conj(tr.c0[:, 0]))
    rho = lindblad_single_excitation(_rho(init), 0.0, [0.0, 10.0], [0.0, 0.0], [0.0, 0.0],
                                     [gel, 0.0], t)
    np.testing.assert_allclose(np.abs(rho[:, 0, 2]), 0.5 * np.exp(-gel * t / HBAR), rtol=1e-10)
    assert np.all(np.abs(coh - rho[:, 0, 2]) < 4.5 * np.abs(err) + 1e-12)
    pop, perr = ensemble_average(ens_t, lambda tr: np.abs(tr.c0[:, 0]) ** 2)
    assert np.all(np.abs(pop - 0.5) < 4.5 * perr + 1e-12)


def test_ensemble_means_match_lindblad():
    init = SingleExcitationState(0.6, 0.0, [0.8, 0.0, 0.0])
    spec = _spec()
    ens_t = sample_trajectories(init, spec, ENS, T, 2000, seed=11, dt=0.4)
    rho = lindblad_single_excitation(_rho(init), MU, RABI, DET, spec.relaxation.inelastic,
                                     spec.relaxation.elastic, T)
    checks = [
        (lambda tr: np.abs(tr.c10) ** 2, rho[:, 1, 1].real),
        (lambda tr: tr.qubit_population, np.trace(rho[:, 2:, 2:], axis1=1, axis2=2).real),
        (lambda tr: np.abs(tr.c00) ** 2, rho[:, 0, 0].real),
        (lambda tr: tr.c00 * np.conj(tr.c10), rho[:, 0, 1]),
    ]
    for obs, ref in checks:
        m, e = ensemble_average(ens_t, obs)
        assert np.all(np.abs(m - ref) < 4.5 * np.abs(e) + 1e-9)


def test_norm_conserved_in_mean():
    init = SingleExcitationState.qubit_excited(3, 0)
    ens_t = sample_trajectories(init, _spec(), ENS, T, 1000, seed=5, dt=0.4)
    m, e = ensemble_average(ens_t, lambda tr: tr.norm)
    assert m[0] == pytest.approx(1.0)
    assert np.all(np.abs(m[1:] - 1) < 3 * e[1:])


def test_constant_dephasing_form_runs():
    init = SingleExcitationState.qubit_excited(3, 0)
    ens_t = sample_trajectories(init, _spec(dephasing_noise="constant"), ENS, T, 50, seed=5,
                                dt=0.4)
    assert np.all(np.isfinite(ens_t.c0))


def test_seed_reproducible():
    init = SingleExcitationState.qubit_excited(3, 2)
    a = sample_trajectories(init, _spec(), ENS, T, 20, seed=9, dt=0.4)
    b = sample_trajectories(init, _spec(), ENS, T, 20, seed=9, dt=0.4)
    c = sample_trajectories(init, _spec(), ENS, T, 20, seed=10, dt=0.4)
    np.testing.assert_array_equal(a.c0, b.c0)
    np.testing.assert_array_equal(a.c00, b.c00)
    assert not np.array_equal(a.c0, c.c0)


def test_batching_does_not_change_streams():
    init = SingleExcitationState.qubit_excited(3, 2)
    a = sample_trajectories(init, _spec(), ENS, T, 12, seed=9, dt=0.4, batch=12)
    b = sample_trajectories(init, _spec(), ENS, T, 12, seed=9, dt=0.4, batch=5)
    np.testing.assert_array_equal(a.c0, b.c0)
    np.testing.assert_array_equal(a.c00, b.c00)


def test_trajectories_differ():
    init = SingleExcitationState.qubit_excited(3, 0)
    ens_t = sample_trajectories(init, _spec(), ENS, T, 4, seed=2, dt=0.4)
    assert len(ens_t) == 4
    assert not np.array_equal(ens_t[0].c0, ens_t[1].c0)
    assert len(list(ens_t)) == 4


@given(st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False))
def test_zero_temperature_one_way_flow(c00):
    """Ground amplitude never feeds back into the excited manifold."""
    base = SingleExcitationState.qubit_excited(3, 0)
    other = SingleExcitationState(c00, base.c10, base.c0)
    t = np.linspace(0, 40, 3)
    a = sse_trajectory(base, _spec(), ENS, t, seed=4, dt=0.4)
    b = sse_trajectory(other, _spec(), ENS, t, seed=4, dt=0.4)
    np.testing.assert_array_equal(a.c0, b.c0)
    np.testing.assert_array_equal(a.c10, b.c10)


def test_stability_error():
    with pytest.raises(StabilityError, match="reduce dt"):
        sse_trajectory(SingleExcitationState.qubit_excited(3, 0), _spec(), ENS, T, seed=0,
                       dt=10.0)


def test_size_and_grid_errors():
    with pytest.raises(ValueError):
        sse_trajectory(SingleExcitationState.qubit_excited(2, 0), _spec(), ENS, T, seed=0)
    with pytest.raises(ValueError):
        sse_trajectory(SingleExcitationState.qubit_excited(3, 0), _spec(), ENS, T[::-1], seed=0)
    with pytest.raises(ValueError):
        sample_trajectories(SingleExcitationState.qubit_excited(3, 0), _spec(), ENS, T, 0, 0)
    init = SingleExcitationState.qubit_excited(3, 0)
    a = sse_trajectory(init, _spec(), ENS, T, seed=0, dt=0.4)
    b = sse_trajectory(init, _spec(), ENS, T[:-1], seed=0, dt=0.4)
    with pytest.raises(GridMismatchError):
        ensemble_average([a, b], lambda tr: tr.norm)
    with pytest.raises(ValueError):
        ensemble_average([a], lambda tr: tr.norm)


def test_constant_observable_zero_stderr():
    init = SingleExcitationState.qubit_excited(3, 0)
    ens_t = sample_trajectories(init, _spec(), ENS, T, 10, seed=0, dt=0.4)
    m, e = ensemble_average(ens_t, lambda tr: np.ones(len(tr.times)))
    np.testing.assert_array_equal(m, 1.0)
    np.testing.assert_array_equal(e, 0.0)
