import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from flyqubit import core
from flyqubit.clock import (
    FlightConfig,
    Wavepacket,
    evolve_pointlike,
    internal_state_exact,
    trajectory,
)
from flyqubit.core import SIGMA_X, SIGMA_Y, SIGMA_Z, pure_state
from flyqubit.errors import LargeEpsilon
from flyqubit.potentials import (
    CallableProfile,
    GaussianProfile,
    PotentialProfile,
    PotentialTerm,
    SmoothRectProfile,
)

W = 2.0 * np.pi


def gaussian_flight(delta_x=0.05, chi0=W, omega_q=W, width=1.0, n_times=41, v0=1.0, **kw):
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, width), 0.5 * chi0, SIGMA_X),))
    x0 = pot.support[0] - 6.0 * delta_x
    base = FlightConfig(0.5 * omega_q * SIGMA_Z, pot, Wavepacket.gaussian(x0, delta_x), v0,
                        time_grid=np.array([0.0]), **kw)
    return base.replace(time_grid=np.linspace(0.0, base.t_final, n_times))


# ---------------------------------------------------------------- wavepackets


@pytest.mark.parametrize("n_nodes", [11, 21, 41])
def test_gaussian_quadrature_moments(n_nodes):
    wp = Wavepacket.gaussian(-2.5, 0.07)
    x, w = wp.quadrature(n_nodes)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-10)
    mean = np.sum(w * x)
    assert mean == pytest.approx(-2.5, abs=1e-8)
    assert np.sqrt(np.sum(w * (x - mean) ** 2)) == pytest.approx(0.07, abs=1e-8)


def test_tabulated_quadrature_moments():
    xs = np.linspace(-1, 3, 4001)
    dens = np.exp(-((xs - 1.0) ** 2) / (2 * 0.2**2)) * (1 + 0.3 * np.sin(xs))
    wp = Wavepacket.tabulated(xs, dens)
    x, w = wp.quadrature()
    assert np.sum(w) == pytest.approx(1.0, abs=1e-10)
    assert np.sum(w * x) == pytest.approx(wp.x0, abs=1e-8)
    assert np.sqrt(np.sum(w * (x - wp.x0) ** 2)) == pytest.approx(wp.delta_x, abs=1e-8)


# ---------------------------------------------------------------- flight config


def test_config_rejects_packet_inside_support():
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, 1.0), 1.0, SIGMA_X),))
    with pytest.raises(ValueError, match="overlaps"):
        FlightConfig(SIGMA_Z, pot, Wavepacket.gaussian(-1.0, 0.05), 1.0)


def test_epsilon_and_large_epsilon_warning():
    cfg = gaussian_flight(0.05)
    # E0 = max norm of H0 + V = (1/2) sqrt(omega_q^2 + chi0^2) = pi sqrt(2)
    assert cfg.E0 == pytest.approx(np.pi * np.sqrt(2.0), rel=1e-6)
    assert cfg.epsilon == pytest.approx(0.05 * np.pi * np.sqrt(2.0), rel=1e-6)
    with pytest.warns(LargeEpsilon):
        gaussian_flight(0.1)


# ---------------------------------------------------------------- point-like evolution


def test_free_evolution_and_identity_at_zero():
    pot = PotentialProfile.zero(2)
    cfg = FlightConfig(0.5 * W * SIGMA_Z, pot, Wavepacket.gaussian(0.0, 0.0), 1.0)
    for t in (0.0, 0.3, 1.7):
        u = evolve_pointlike(cfg, 0.0, t)
        assert np.allclose(u, np.diag(np.exp([-0.5j * W * t, 0.5j * W * t])), atol=1e-10)


def test_rect_pulse_area_pi_is_not_gate():
    # H0 = 0, V = (chi0/2) sigma_x on a tanh-edged rectangle; integral of chi dt = chi0 * length / v0 = pi
    length, v0 = 2.0, 1.5
    chi0 = np.pi * v0 / length
    pot = PotentialProfile((PotentialTerm(SmoothRectProfile(0.0, length, 0.05), 0.5 * chi0, SIGMA_X),))
    x0 = pot.support[0] - 1.0
    cfg = FlightConfig(np.zeros((2, 2)), pot, Wavepacket.gaussian(x0, 0.01), v0)
    u = evolve_pointlike(cfg, x0, cfg.t_final)
    assert np.allclose(u, -1j * SIGMA_X, atol=1e-9)


def test_matches_time_ordered_oracle():
    cfg = gaussian_flight()
    t = 3.7
    u = evolve_pointlike(cfg, cfg.x0, t)
    ref = oracles.time_ordered(lambda s: cfg.h_tilde(cfg.x0 + s)[()], t, steps=800)
    assert np.max(np.abs(u - ref)) < 1e-8


def test_composition_property():
    cfg = gaussian_flight()
    y, t1, t2 = cfg.x0 + 0.01, 2.1, 1.6
    whole = evolve_pointlike(cfg, y, t1 + t2)
    first = evolve_pointlike(cfg, y, t1)
    second = evolve_pointlike(cfg, y + cfg.v0 * t1, t2)
    assert np.max(np.abs(whole - second @ first)) <= 1e-8
    assert np.max(np.abs(whole.conj().T @ whole - np.eye(2))) <= 1e-10


# ---------------------------------------------------------------- averaged state


def test_exact_state_matches_brute_force_oracle():
    cfg = gaussian_flight(0.04)
    rho0 = pure_state([1, 1])
    t = 3.2  # inside the interaction region
    rho = internal_state_exact(cfg, rho0, t, check_quadrature=True)
    ref = oracles.clock_state(lambda x: cfg.h_tilde(x)[()], rho0, cfg.x0, 0.04, 1.0, t, n=61, steps=120)
    assert np.max(np.abs(rho - ref)) < 1e-7


def test_unital_and_pointlike_limits():
    cfg = gaussian_flight()
    t = cfg.t_final
    assert np.allclose(internal_state_exact(cfg, np.eye(2) / 2, t), np.eye(2) / 2, atol=1e-12)
    rho0 = pure_state([1, 1j])
    point = cfg.replace(wavepacket=Wavepacket.gaussian(cfg.x0, 0.0))
    u = evolve_pointlike(cfg, cfg.x0, t)
    assert np.allclose(internal_state_exact(point, rho0, t, n_nodes=1), u @ rho0 @ u.conj().T, atol=1e-12)


def test_commuting_potential_gives_no_decoherence():
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, 1.0), 2.0, SIGMA_Z),))
    x0 = pot.support[0] - 0.5
    cfg = FlightConfig(0.5 * W * SIGMA_Z, pot, Wavepacket.gaussian(x0, 0.05), 1.0)
    rho0 = core.random_density_matrix(2, np.random.default_rng(4))
    rho = internal_state_exact(cfg, rho0, cfg.t_final)
    u = evolve_pointlike(cfg, x0, cfg.t_final)
    assert core.state_fidelity(u @ rho0 @ u.conj().T, rho) >= 1 - 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_unitality_random_potentials(seed, n):
    rng = np.random.default_rng(seed)
    terms = tuple(
        PotentialTerm(GaussianProfile(rng.uniform(-1, 1), rng.uniform(0.5, 2)), 1.0, core.random_hermitian(n, rng))
        for _ in range(2)
    )
    pot = PotentialProfile(terms)
    x0 = pot.support[0] - 0.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LargeEpsilon)
        cfg = FlightConfig(core.random_hermitian(n, rng), pot, Wavepacket.gaussian(x0, 0.05), 1.0,
                           time_grid=np.linspace(0, 8.0, 5))
    tr = trajectory(cfg, np.eye(n) / n, n_nodes=11)
    assert np.max(np.abs(tr.rho - np.eye(n) / n)) <= 1e-9


def test_trajectory_trace_hermiticity_and_edge_cases():
    cfg = gaussian_flight(n_times=31)
    rho0 = pure_state([1, 1])
    tr = trajectory(cfg, rho0)
    assert np.all(np.abs(np.trace(tr.rho, axis1=1, axis2=2) - 1) <= 1e-10)
    assert np.max(np.abs(tr.rho - np.conj(np.transpose(tr.rho, (0, 2, 1))))) <= 1e-10
    assert tr.fidelity[0] == pytest.approx(1.0) and tr.entropy[0] == pytest.approx(0.0, abs=1e-12)

    empty = trajectory(cfg.replace(time_grid=np.array([])), rho0)
    assert len(empty) == 0
    single = trajectory(cfg.replace(time_grid=np.array([0.0])), np.diag([0.7, 0.3]))
    assert np.allclose(single.rho[0], np.diag([0.7, 0.3]))
    assert single.entropy[0] == pytest.approx(oracles.entropy(np.diag([0.7, 0.3])))


def test_fig2_shape_is_non_monotonic():
    cfg = gaussian_flight(0.05, n_times=201)
    tr = trajectory(cfg, pure_state([1, 1]))
    assert np.any(np.diff(tr.fidelity) > 1e-6) and np.any(np.diff(tr.fidelity) < -1e-6)
    s = tr.entropy
    peak = int(np.argmax(s))
    assert 0 < peak < s.size - 1
    assert s[peak] > s[-1] + 1e-4


def test_callable_profile_finite_difference_derivative():
    prof = CallableProfile(lambda x: np.exp(-x**2), (-6.0, 6.0))
    x = np.linspace(-2, 2, 9)
    assert np.allclose(prof.derivative(x), -2 * x * np.exp(-x**2), atol=1e-8)
    assert SIGMA_Y.shape == (2, 2)
