import struct

import numpy as np
import pytest

import oracles
from flyqubit import core
from flyqubit.clock import FlightConfig, Wavepacket, internal_state_exact, trajectory
from flyqubit.core import SIGMA_X, SIGMA_Z, pure_state
from flyqubit.errors import GridTooSmall, UnstableStep
from flyqubit.grid import (
    GridState,
    auto_dt,
    energy,
    grid_for_flight,
    make_grid,
    propagate_full,
    propagate_record,
    read_snapshot,
    reduce_internal,
    stability_number,
    write_snapshot,
)
from flyqubit.perturbation import perturbative_series
from flyqubit.potentials import GaussianProfile, PotentialProfile, PotentialTerm

W = 2.0 * np.pi
ZERO = PotentialProfile.zero(2)


def free_state(k0=20.0, mass=1.0, dx=0.1, internal=(1, 0)):
    x = make_grid(-4.0, 12.0, dx / 8)
    return GridState.gaussian(x, 0.0, dx, k0, internal, mass)


def test_make_grid_power_of_two():
    x = make_grid(-3.0, 5.0, 0.01)
    n = x.size
    assert n & (n - 1) == 0 and n >= 800
    assert x[1] - x[0] <= 0.01


def test_free_gaussian_matches_closed_form():
    st = free_state()
    # spreading factor sqrt(1 + (t / (2 m dx^2))^2) = sqrt(2) at t = 2 m dx^2
    t = 2.0 * st.mass * st.delta_x**2
    steps = int(np.ceil(t / auto_dt(st)))
    out = propagate_full(st, np.zeros((2, 2)), ZERO, t / steps, steps)
    ref = oracles.free_gaussian(st.x, t, 0.0, st.delta_x, st.k0, st.mass)
    psi = out.wavefunction[:, 0]
    overlap = abs(np.sum(np.conj(ref) * psi) * st.dx) ** 2
    assert overlap >= 1 - 1e-6


def test_zero_potential_internal_precession():
    st = free_state(mass=10.0, internal=(1, 1))
    t = 0.35
    steps = int(np.ceil(t / auto_dt(st)))
    out = propagate_full(st, 0.5 * W * SIGMA_Z, ZERO, t / steps, steps)
    u = np.diag(np.exp([-0.5j * W * t, 0.5j * W * t]))
    assert np.allclose(reduce_internal(out), u @ pure_state([1, 1]) @ u.conj().T, atol=1e-12)


def test_norm_conservation():
    st = free_state(internal=(1, 1))
    pot = PotentialProfile((PotentialTerm(GaussianProfile(3.0, 1.0), 5.0, SIGMA_X),))
    dt = auto_dt(st)
    one = propagate_full(st, SIGMA_Z, pot, dt, 1)
    assert abs(one.norm() - 1.0) <= 1e-12
    many = propagate_full(st, SIGMA_Z, pot, dt, 400)
    assert abs(many.norm() - 1.0) <= 1e-9


def test_energy_conservation():
    st = free_state(internal=(1, 1))
    pot = PotentialProfile((PotentialTerm(GaussianProfile(3.0, 1.0), 5.0, SIGMA_X),))
    h0 = 0.5 * W * SIGMA_Z
    e0 = energy(st, h0, pot)
    out = propagate_full(st, h0, pot, auto_dt(st), 2000)
    assert abs(energy(out, h0, pot) - e0) <= 1e-6 * abs(e0)


def test_unstable_step_and_edge_contamination():
    st = free_state()
    with pytest.raises(UnstableStep):
        propagate_full(st, np.zeros((2, 2)), ZERO, 10 * auto_dt(st), 1)
    assert stability_number(st, auto_dt(st)) < np.pi / 4
    x = make_grid(-0.5, 0.5, 0.01)
    with pytest.raises(GridTooSmall):
        GridState.gaussian(x, 0.0, 0.1, 0.0, (1, 0), 1.0)


def test_reduce_internal_examples():
    st = free_state(internal=(1, 0))
    assert np.allclose(reduce_internal(st), np.diag([1, 0]))
    x = make_grid(-6.0, 6.0, 0.01)
    a = np.exp(-((x + 2) ** 2) / 0.04)
    b = np.exp(-((x - 2) ** 2) / 0.04)
    spinor = np.stack([a, b], axis=1).astype(complex)
    spinor /= np.sqrt(np.sum(np.abs(spinor) ** 2) * (x[1] - x[0]))
    two = GridState(x, spinor, 1.0)
    assert np.allclose(reduce_internal(two), np.eye(2) / 2, atol=1e-12)


def test_snapshot_layout_roundtrip(tmp_path):
    st = free_state(internal=(1, 1j))
    path = tmp_path / "snap.bin"
    write_snapshot(st, path)
    raw = path.read_bytes()
    n_pts, n, dx, t = struct.unpack("<qqdd", raw[:32])
    assert (n_pts, n, t) == (st.n_points, 2, 0.0) and dx == st.dx
    assert len(raw) == 32 + 8 * n_pts * n
    spinor, dx2, _ = read_snapshot(path)
    assert np.allclose(spinor, st.spinor, atol=1e-6) and dx2 == dx


# ---------------------------------------------------------------- against the clock model


def fig2_config(k0_dx, delta_x=0.05, n_times=41):
    k0 = k0_dx / delta_x
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, 1.0), 0.5 * W, SIGMA_X),))
    x0 = pot.support[0] - 6.0 * delta_x
    base = FlightConfig(0.5 * W * SIGMA_Z, pot, Wavepacket.gaussian(x0, delta_x, k0), 1.0,
                        time_grid=np.array([0.0]), mass=k0)
    return base.replace(time_grid=np.linspace(0.0, base.t_final, n_times))


def test_grid_for_flight_layout():
    cfg = fig2_config(50)
    st = grid_for_flight(cfg, [1, 1])
    assert st.n_points & (st.n_points - 1) == 0
    assert st.x[-1] - st.x[0] >= cfg.v0 * cfg.t_final + 16 * cfg.wavepacket.delta_x
    assert st.v0 == pytest.approx(cfg.v0)


@pytest.mark.slow
def test_approximate_state_tracks_grid_for_fig2():
    cfg = fig2_config(50, n_times=81)
    rho0 = pure_state([1, 1])
    tr = trajectory(cfg, rho0)
    ps = perturbative_series(cfg, tr.u_na, rho0)
    rho_grid, final = propagate_record(grid_for_flight(cfg, [1, 1]), cfg.H0, cfg.potential, cfg.time_grid)
    fid = [core.state_fidelity(a, b) for a, b in zip(ps.rho_approx, rho_grid)]
    assert min(fid) >= 0.999
    assert abs(final.norm() - 1.0) <= 1e-9


@pytest.mark.slow
def test_clock_limit_convergence():
    # trace distance to the clock model at t_f shrinks as the carrier grows at fixed epsilon
    dists = []
    for k0_dx in (50, 100, 200):
        cfg = fig2_config(k0_dx, n_times=2)
        clock = internal_state_exact(cfg, pure_state([1, 1]), cfg.t_final)
        rho_grid, _ = propagate_record(grid_for_flight(cfg, [1, 1]), cfg.H0, cfg.potential, cfg.time_grid)
        dists.append(core.trace_distance(clock, rho_grid[-1]))
    assert dists[0] > dists[1] > dists[2]
    # <q^2>/p0^2 = 2.5e-5 at k0 dx = 100
    assert dists[1] <= 1e-3
