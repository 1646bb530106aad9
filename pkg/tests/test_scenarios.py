import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from flyqubit import core
from flyqubit.clock import internal_state_exact
from flyqubit.core import SIGMA_X, SIGMA_Z, pure_state
from flyqubit.errors import InvalidCorrelation, InvalidOperator, OutOfValidity
from flyqubit.potentials import GaussianProfile, PotentialProfile, PotentialTerm
from flyqubit.scenarios import (
    CNOT,
    GateSpec,
    TwoBodyConfig,
    ballistic_regime_estimate,
    cnot_metrics,
    cnot_state,
    custom_gate_correction,
    not_gate_flight,
    not_gate_metrics,
    phase_gate_flight,
    phase_gate_metrics,
    two_body_reduce,
)

W = 2.0 * np.pi


# ---------------------------------------------------------------- closed forms


def test_not_gate_metrics_example():
    # omega_q dx / v0 = 0.1 with |+>: K = 0.01
    k, f, s = not_gate_metrics(0.5, 0.5, 0.3, W, 0.1 / W, 1.0)
    assert k == pytest.approx(0.01, rel=1e-12)
    assert f == pytest.approx(0.99, rel=1e-12)
    assert s == pytest.approx(oracles.not_gate_damage(0.01)[1], rel=1e-12)
    assert round(s, 4) == 0.0561


def test_not_gate_metrics_edge_cases():
    assert not_gate_metrics(1.0, 0.0, 0.0, W, 0.1, 1.0) == (0.0, 1.0, 0.0)
    with pytest.warns(OutOfValidity):
        not_gate_metrics(0.5, 0.5, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        not_gate_metrics(0.7, 0.7, 0.0, 1.0, 0.1, 1.0)


def test_phase_gate_metrics():
    assert phase_gate_metrics(0.7, np.eye(2) / 2) == (1.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-np.pi, np.pi))
def test_custom_not_correction_matches_closed_form(a0, theta):
    psi = np.array([np.sqrt(a0), np.exp(1j * theta) * np.sqrt(1 - a0)])
    gate = GateSpec.not_gate(W)
    ct, coeff = custom_gate_correction(gate, pure_state(psi), energy_scale=W)
    assert np.allclose(ct.dimensionless(), oracles.not_gate_correction(a0, theta), atol=1e-12)
    assert coeff == pytest.approx(4.0 * a0 * (1 - a0), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi), st.integers(0, 2**32 - 1))
def test_phase_gate_has_no_correction(phi, seed):
    rho0 = core.random_density_matrix(2, np.random.default_rng(seed))
    ct, coeff = custom_gate_correction(GateSpec.phase(phi, W), rho0)
    assert np.max(np.abs(ct.matrix)) <= 1e-12 and abs(coeff) <= 1e-12


def test_phase_spec_must_commute():
    with pytest.raises(InvalidOperator):
        GateSpec("PHASE", 0.5 * W * SIGMA_Z, SIGMA_X)
    with pytest.raises(InvalidOperator):
        GateSpec.custom(2 * SIGMA_X, SIGMA_Z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_custom_correction_hermitian_traceless_and_lowers_fidelity(seed):
    rng = np.random.default_rng(seed)
    h0 = core.random_hermitian(3, rng)
    gate = GateSpec.custom(core.random_unitary(3, rng), h0)
    rho0 = core.random_pure_state(3, rng)
    ct, coeff = custom_gate_correction(gate, rho0)
    c = ct.matrix
    assert np.max(np.abs(c - c.conj().T)) <= 1e-10
    assert abs(np.trace(c)) <= 1e-10
    assert coeff >= -1e-10


def test_ballistic_estimate():
    r, r2 = ballistic_regime_estimate(2.0, 0.05)
    assert (r, r2) == pytest.approx((0.1, 0.01))
    with pytest.raises(ValueError):
        ballistic_regime_estimate(-1.0, 0.1)


# ---------------------------------------------------------------- calibrated flights


@pytest.mark.parametrize("kind", ["gaussian", "rect"])
def test_not_flight_hits_target(kind):
    flight = not_gate_flight(W, 0.05 / W, kind=kind)
    assert flight.overlap >= 1 - 1e-10
    assert flight.t_gate > flight.config.time_grid[0]


def test_not_flight_damage_close_to_closed_form():
    ratio = 0.05
    flight = not_gate_flight(W, ratio / W)
    rho = internal_state_exact(flight.config, pure_state([1, 1]), flight.t_gate)
    k, f, _ = not_gate_metrics(0.5, 0.5, 0.0, W, ratio / W, 1.0)
    target = flight.u_na @ pure_state([1, 1]) @ flight.u_na.conj().T
    assert abs(core.state_fidelity(rho, target) - f) <= 5 * k * k + 0.05 * k


def test_phase_flight_is_lossless():
    flight = phase_gate_flight(0.8, W, 0.05 / W)
    rho0 = core.random_density_matrix(2, np.random.default_rng(3))
    rho = internal_state_exact(flight.config, rho0, flight.t_gate)
    target = flight.u_na @ rho0 @ flight.u_na.conj().T
    assert core.state_fidelity(rho, target) >= 1 - 1e-8


# ---------------------------------------------------------------- two bodies


def _two_body(correlation=0.0, v1=1.0, v2=0.0, m=2.0, d=0.03):
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, 1.0), 1.0, np.kron(SIGMA_X, SIGMA_X)),))
    return TwoBodyConfig(m1=m, m2=m, v1=v1, v2=v2, x1=-5.0, x2=0.0, dx1=d, dx2=d,
                         H1=SIGMA_Z, H2=SIGMA_Z, v_rel=pot, correlation=correlation)


def test_two_body_reduction_equal_spreads():
    tb = _two_body()
    cfg = two_body_reduce(tb)
    assert cfg.wavepacket.delta_x == pytest.approx(0.03 * np.sqrt(2.0), rel=1e-10)
    assert cfg.mass == pytest.approx(1.0)
    assert cfg.v0 == pytest.approx(1.0) and cfg.x0 == pytest.approx(-5.0)
    assert cfg.H0.shape == (4, 4)


def test_two_body_reflection_and_correlation():
    tb = _two_body(v1=0.0, v2=1.0)
    tb = TwoBodyConfig(**{**tb.__dict__, "x1": 5.0})
    cfg = two_body_reduce(tb)
    assert cfg.v0 == pytest.approx(1.0) and cfg.x0 == pytest.approx(-5.0)
    with pytest.raises(InvalidCorrelation):
        _two_body(correlation=0.03**2).relative_spread
    assert _two_body(correlation=-0.03**2).relative_spread == pytest.approx(0.06)


def test_cnot_metrics_limits():
    assert cnot_metrics(0.0, 0.01) == pytest.approx((1.0, 0.0), abs=1e-12)
    f, s = cnot_metrics(1.0, 0.01)
    _, f_not, s_not = not_gate_metrics(0.5, 0.5, 0.0, 1.0, 0.1, 1.0)
    assert f == pytest.approx(f_not, abs=1e-12)
    assert s == pytest.approx(s_not, rel=0.02)
    assert cnot_metrics(0.5, 0.01)[0] == pytest.approx(0.995, abs=1e-12)
    with pytest.warns(OutOfValidity):
        cnot_metrics(1.0, 0.6)


def test_cnot_state_and_controlled_phase():
    rho = cnot_state(0.3)
    assert np.trace(rho).real == pytest.approx(1.0)
    h0 = np.kron(np.eye(2), 0.5 * W * SIGMA_Z)
    cphase = np.diag([1, 1, 1, -1]).astype(complex)
    ct, coeff = custom_gate_correction(GateSpec.custom(cphase, h0), rho)
    assert np.max(np.abs(ct.matrix)) <= 1e-12 and abs(coeff) <= 1e-12
    assert core.is_unitary(CNOT)
