"""Named gate scenarios, two-body reduction and back-of-envelope regime estimates.

The NOT-gate closed forms assume ``H0 = hbar omega_q sigma_z / 2`` and an
ideal evolution equal to ``-i sigma_x`` at the end of the flight; the
correction term then depends only on ``H0`` and the gate, not on the
potential that realises it.
"""

from __future__ import annotations

import dataclasses
import functools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from flyqubit.clock import FlightConfig, Wavepacket, evolve_pointlike
from flyqubit.core import (
    IDENTITY2,
    SIGMA_X,
    SIGMA_Z,
    check_density_matrix,
    check_hermitian,
    commutator,
    dag,
    is_unitary,
    max_abs,
    pure_state,
)
from flyqubit.errors import (
    CalibrationError,
    InvalidCorrelation,
    InvalidOperator,
    OutOfValidity,
)
from flyqubit.perturbation import BoundaryHamiltonians, correction_term
from flyqubit.potentials import (
    GaussianProfile,
    ModulatedProfile,
    PotentialProfile,
    PotentialTerm,
    SmoothRectProfile,
    reflect,
)

K_VALIDITY = 0.5

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def gate_overlap(u, target) -> float:
    """``|Tr(U^dag U_target)| / n``; equals one iff the gates agree up to a global phase."""
    u = np.asarray(u)
    return float(abs(np.trace(dag(u) @ target)) / u.shape[0])


@dataclass(frozen=True)
class GateSpec:
    """Target gate for the ideal evolution at the end of the flight.

    Build with :meth:`not_gate`, :meth:`phase` or :meth:`custom`.
    """

    kind: str
    H0: np.ndarray
    u_target: np.ndarray
    phi: float | None = None

    def __post_init__(self):
        h0 = check_hermitian(self.H0, "H0")
        object.__setattr__(self, "H0", h0)
        u = np.asarray(self.u_target, dtype=complex)
        if u.shape != h0.shape or not is_unitary(u):
            raise InvalidOperator("target gate must be unitary with the dimension of H0")
        object.__setattr__(self, "u_target", u)
        if self.kind == "PHASE" and max_abs(commutator(u, h0)) > 1e-12 * max(max_abs(h0), 1.0):
            raise InvalidOperator("PHASE gate must commute with H0")

    @classmethod
    def not_gate(cls, omega_q: float, hbar: float = 1.0):
        return cls("NOT", 0.5 * hbar * omega_q * SIGMA_Z, -1j * SIGMA_X)

    @classmethod
    def phase(cls, phi: float, omega_q: float, hbar: float = 1.0):
        u = np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])
        return cls("PHASE", 0.5 * hbar * omega_q * SIGMA_Z, u, float(phi))

    @classmethod
    def custom(cls, u_target, H0):
        return cls("custom", H0, u_target)


def not_gate_metrics(a0: float, a1: float, theta: float, omega_q: float, delta_x: float, v0: float):
    """Closed-form NOT-gate damage ``(K, F, S)``.

    ``K = 4 a0 a1 (omega_q delta_x / v0)**2``, ``F = 1 - K`` and
    ``S = K (1 - ln K)`` in nats. ``theta`` does not enter.

    Warns
    -----
    OutOfValidity
        If ``K >= 0.5``.
    """
    if a0 < 0 or a1 < 0 or abs(a0 + a1 - 1.0) > 1e-12:
        raise ValueError("populations must be non-negative and sum to one")
    k = 4.0 * a0 * a1 * (omega_q * delta_x / v0) ** 2
    if k >= K_VALIDITY:
        warnings.warn(f"K = {k:.3g} is outside the perturbative regime", OutOfValidity, stacklevel=2)
    s = k * (1.0 - np.log(k)) if k > 0 else 0.0
    return k, 1.0 - k, s


def phase_gate_metrics(phi: float, rho0=None):
    """A gate commuting with ``H0`` is untouched by the spread: ``(F, S) = (1, 0)``."""
    if rho0 is not None:
        check_density_matrix(rho0)
    return 1.0, 0.0


def custom_gate_correction(gate: GateSpec, rho0, energy_scale: float | None = None):
    """Correction term after the gate, in the scattering limit.

    Returns
    -------
    correction : CorrectionTerm
    coefficient : float
        ``-Tr(C_par)`` normalised by ``energy_scale**2`` (default the
        spectral norm of ``H0``), so that ``1 - F ~ epsilon**2 * coefficient``.
        For a pure state this is ``|<psi_NA|C|psi_NA>|``.
    """
    rho0 = check_density_matrix(rho0)
    e0 = energy_scale or float(np.max(np.abs(np.linalg.eigvalsh(gate.H0))))
    ct = correction_term(gate.u_target, BoundaryHamiltonians.scattering(gate.H0), rho0,
                         energy_scale=e0)
    rho_na = gate.u_target @ rho0 @ dag(gate.u_target)
    w, v = np.linalg.eigh(rho_na)
    support = v[:, w > 1e-6]
    c_par = dag(support) @ ct.dimensionless() @ support
    return ct, float(-np.trace(c_par).real)


# ---------------------------------------------------------------- calibration


# envelope length of the calibrated NOT pulse, in carrier periods
NOT_PERIODS = 4.0


def _profile(kind: str, center: float, width: float):
    if kind == "gaussian":
        return GaussianProfile(center, width)
    if kind == "rect":
        return SmoothRectProfile(center, width, 0.1 * width)
    raise ValueError(f"unknown profile kind {kind!r}")


def _drive_potential(kind, amplitude, k, width, center=0.0):
    prof = ModulatedProfile(_profile(kind, center, width), k)
    return PotentialProfile((PotentialTerm(prof, 0.5 * amplitude, SIGMA_X),))


def _crossing(h0, potential, v0, hbar):
    # point-like propagator from the support start to its end
    lo, hi = potential.support
    start = lo - 1e-9 * (hi - lo)
    cfg = FlightConfig(h0, potential, Wavepacket.gaussian(start, 0.0), v0, E0=1.0,
                       time_grid=np.array([0.0]), hbar=hbar)
    return evolve_pointlike(cfg, start, (hi - start) / v0)


@functools.lru_cache(maxsize=64)
def calibrate_not_potential(omega_q: float, v0: float, kind: str = "gaussian",
                            hbar: float = 1.0, center: float = 0.0, tol: float = 1e-10):
    """Find a ``sigma_x`` drive that fully inverts the qubit in one crossing.

    The potential is ``(A/2) f(x) cos(k x) sigma_x`` with an envelope
    ``f`` spanning a few carrier periods, so the moving qubit sees a drive
    near resonance. A single-signed detuned pulse cannot zero ``W_00``
    (a complex number); the amplitude ``A`` and carrier ``k`` are solved
    jointly instead. The remaining relative phase is fixed by free
    precession, see :func:`not_gate_flight`. Results are cached.

    Parameters
    ----------
    kind : {"gaussian", "rect"}
        Gaussian or tanh-edged rectangular envelope (edge = width/10).

    Returns
    -------
    PotentialProfile

    Raises
    ------
    CalibrationError
        If the residual ``|W_00|`` stays above ``sqrt(tol)``.
    """
    h0 = 0.5 * hbar * omega_q * SIGMA_Z
    k_res = omega_q / v0
    width = NOT_PERIODS * 2.0 * np.pi / k_res
    area = width if kind == "gaussian" else width  # both envelopes integrate to ``width``
    # rotating-frame Rabi rate A/(2 hbar) integrated over the crossing gives pi
    guess = np.array([2.0 * np.pi * hbar * v0 / area, 1.0])

    def residual(p):
        w = _crossing(h0, _drive_potential(kind, p[0], p[1] * k_res, width, center), v0, hbar)
        return [w[0, 0].real, w[0, 0].imag]

    sol, info, ier, msg = scipy.optimize.fsolve(residual, guess, xtol=1e-12, full_output=True)
    res = float(np.hypot(*residual(sol)))
    if res > np.sqrt(tol):
        raise CalibrationError(f"NOT calibration for {kind} profile stalled at |W00| = {res:.2e}: {msg}")
    return _drive_potential(kind, sol[0], sol[1] * k_res, width, center)


@dataclass(frozen=True)
class GateFlight:
    """Flight whose point-like evolution implements ``gate`` at ``t_gate``."""

    config: FlightConfig
    gate: GateSpec
    t_gate: float
    u_na: np.ndarray

    @property
    def overlap(self) -> float:
        return gate_overlap(self.u_na, self.gate.u_target)


def _entry_point(potential, delta_x, clearance):
    return potential.support[0] - 6.0 * delta_x - clearance


def not_gate_flight(omega_q: float, delta_x: float, v0: float = 1.0, kind: str = "gaussian",
                    hbar: float = 1.0, n_times: int = 201, potential: PotentialProfile | None = None,
                    mass: float | None = None, tol: float = 1e-10) -> GateFlight:
    """Flight through a calibrated NOT potential ending exactly at the gate time.

    After the packet leaves the potential the ideal evolution is
    ``diag(e^{-i a tau}, e^{i a tau}) W`` with off-diagonal ``W``; the
    shortest ``tau >= 0`` making it proportional to ``-i sigma_x`` is added
    to the exit time. Energy scale ``E0 = hbar omega_q``.
    """
    gate = GateSpec.not_gate(omega_q, hbar)
    pot = potential or calibrate_not_potential(omega_q, v0, kind, hbar)
    x0 = _entry_point(pot, delta_x, 0.1 * v0 / omega_q)
    base = FlightConfig(gate.H0, pot, Wavepacket.gaussian(x0, delta_x), v0, E0=hbar * omega_q,
                        time_grid=np.array([0.0]), hbar=hbar, mass=mass)
    t_exit = base.t_final
    u_exit = evolve_pointlike(base, x0, t_exit)
    beta, gamma = u_exit[0, 1], u_exit[1, 0]
    # diag(e^{-i w t/2}, e^{i w t/2}) W ~ -i sigma_x needs e^{-i w tau} = gamma / beta
    period = 2.0 * np.pi / omega_q
    tau = (-np.angle(gamma / beta) / omega_q) % period
    t_gate = t_exit + tau
    cfg = base.replace(time_grid=np.linspace(0.0, t_gate, n_times))
    u_na = evolve_pointlike(cfg, x0, t_gate)
    flight = GateFlight(cfg, gate, t_gate, u_na)
    if 1.0 - flight.overlap > tol:
        raise CalibrationError(f"NOT flight misses the target gate by {1.0 - flight.overlap:.2e}")
    return flight


def phase_gate_flight(phi: float, omega_q: float, delta_x: float, v0: float = 1.0,
                      hbar: float = 1.0, width: float = 1.0, n_times: int = 201) -> GateFlight:
    """Flight through a ``sigma_z`` Gaussian adding phase ``phi`` on top of free precession."""
    amp = phi * hbar * v0 / width
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, width), 0.5 * amp, SIGMA_Z),))
    gate = GateSpec.phase(phi, omega_q, hbar)
    x0 = _entry_point(pot, delta_x, 0.1 * width)
    cfg = FlightConfig(gate.H0, pot, Wavepacket.gaussian(x0, delta_x), v0, E0=hbar * omega_q,
                       time_grid=np.array([0.0]), hbar=hbar)
    t_gate = cfg.t_final
    cfg = cfg.replace(time_grid=np.linspace(0.0, t_gate, n_times))
    u_na = evolve_pointlike(cfg, x0, t_gate)
    # the realised diagonal gate includes the free precession
    return GateFlight(cfg, GateSpec("PHASE", gate.H0, u_na, phi), t_gate, u_na)


# ---------------------------------------------------------------- two bodies


@dataclass(frozen=True)
class TwoBodyConfig:
    """Two flying systems interacting through ``V_rel(x1 - x2)``.

    ``correlation`` is ``<x1 x2> - <x1><x2>``. ``v_rel`` acts on the
    product space ``H1 (x) H2``.
    """

    m1: float
    m2: float
    v1: float
    v2: float
    x1: float
    x2: float
    dx1: float
    dx2: float
    H1: np.ndarray
    H2: np.ndarray
    v_rel: PotentialProfile
    correlation: float = 0.0
    hbar: float = 1.0
    E0: float | None = None
    n_times: int = 201

    def __post_init__(self):
        if self.m1 <= 0 or self.m2 <= 0:
            raise ValueError("masses must be positive")
        if self.dx1 <= 0 or self.dx2 <= 0:
            raise ValueError("spreads must be positive")
        if self.v1 == self.v2:
            raise ValueError("relative velocity must be non-zero")

    @property
    def reduced_mass(self) -> float:
        return self.m1 * self.m2 / (self.m1 + self.m2)

    @property
    def relative_spread(self) -> float:
        var = self.dx1**2 + self.dx2**2 - 2.0 * self.correlation
        if var <= 0:
            raise InvalidCorrelation(f"relative position variance {var:.3e} is not positive")
        return float(np.sqrt(var))


def two_body_reduce(cfg: TwoBodyConfig) -> FlightConfig:
    """One-body flight in the relative coordinate ``x = x1 - x2``.

    The centre of mass decouples and is dropped. If ``v1 < v2`` the
    relative axis is flipped so the reduced particle moves to the right.

    Raises
    ------
    InvalidCorrelation
        If the relative variance is not positive.
    """
    h1 = check_hermitian(cfg.H1, "H1")
    h2 = check_hermitian(cfg.H2, "H2")
    h0 = np.kron(h1, np.eye(h2.shape[0])) + np.kron(np.eye(h1.shape[0]), h2)
    dx = cfg.relative_spread
    v = cfg.v1 - cfg.v2
    x = cfg.x1 - cfg.x2
    pot = cfg.v_rel
    if v < 0:
        v, x, pot = -v, -x, reflect(pot)
    mu = cfg.reduced_mass
    wp = Wavepacket.gaussian(x, dx, mu * v / cfg.hbar)
    base = FlightConfig(h0, pot, wp, v, E0=cfg.E0, time_grid=np.array([0.0]), hbar=cfg.hbar, mass=mu)
    return base.replace(time_grid=np.linspace(0.0, base.t_final, cfg.n_times))


def cnot_flight(omega_q: float, delta_x1: float, delta_x2: float, v1: float = 1.0, v2: float = 0.0,
                m1: float = 1.0, m2: float = 1.0, correlation: float = 0.0, omega_c: float = 0.0,
                hbar: float = 1.0, n_times: int = 201):
    """Two co-flying qubits whose relative passage implements a cNOT up to diagonal phases.

    The interaction is the calibrated NOT drive on the target conditioned
    on the control being in ``|1>``, written in the relative coordinate.
    Diagonal phases left over on the control and on the idle branch act
    as a common unitary on every component of the packet, so they change
    neither fidelity nor entropy.

    Returns
    -------
    config : FlightConfig
        Reduced one-body flight, time grid ending at the gate time.
    u_na : (4, 4) array
    """
    v_rel = abs(v1 - v2)
    pot1 = calibrate_not_potential(omega_q, v_rel, "gaussian", hbar)
    proj1 = np.diag([0.0, 1.0]).astype(complex)
    v_ctrl = PotentialProfile(tuple(
        PotentialTerm(t.profile, t.amplitude, np.kron(proj1, t.operator)) for t in pot1.terms
    ))
    tb = TwoBodyConfig(
        m1=m1, m2=m2, v1=v1, v2=v2, x1=0.0, x2=0.0, dx1=delta_x1, dx2=delta_x2,
        H1=0.5 * hbar * omega_c * SIGMA_Z, H2=0.5 * hbar * omega_q * SIGMA_Z, v_rel=v_ctrl,
        correlation=correlation, hbar=hbar, E0=hbar * omega_q, n_times=n_times,
    )
    dx = tb.relative_spread
    # start the relative coordinate before the interaction, on the side it moves away from
    x_rel = _entry_point(v_ctrl, dx, 0.1 * v_rel / omega_q)
    shift = x_rel if v1 > v2 else -x_rel
    tb = dataclasses.replace(tb, x1=shift)
    base = two_body_reduce(tb)
    # the control-|1> block follows the one-body NOT flight; reuse its gate time
    single = not_gate_flight(omega_q, dx, v_rel, hbar=hbar, potential=pot1)
    cfg = base.replace(time_grid=np.linspace(0.0, single.t_gate, n_times))
    u_na = evolve_pointlike(cfg, cfg.x0, single.t_gate)
    return cfg, u_na


def cnot_state(p: float):
    """Control ``sqrt(1-p)|0> + sqrt(p)|1>`` times target ``|+>``."""
    control = np.array([np.sqrt(1.0 - p), np.sqrt(p)], dtype=complex)
    target = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return pure_state(np.kron(control, target))


def cnot_metrics(p: float, k: float, omega_q: float = 1.0, hbar: float = 1.0):
    """Fidelity ``1 - p K`` and the entropy of ``rho_NA + K C`` for a cNOT.

    The target starts in ``|+>``, so ``K = (omega_q delta_x / v)**2``
    with the relative spread and velocity. The entropy is found by exact
    diagonalisation; negative eigenvalues of order ``K**2`` left by the
    truncated expansion are set to zero.

    Warns
    -----
    OutOfValidity
        If ``p K >= 0.5``.
    """
    if not 0.0 <= p <= 1.0 or k < 0:
        raise ValueError("need 0 <= p <= 1 and K >= 0")
    if p * k >= K_VALIDITY:
        warnings.warn(f"pK = {p * k:.3g} is outside the perturbative regime", OutOfValidity, stacklevel=2)
    h0 = np.kron(np.zeros((2, 2)), IDENTITY2) + np.kron(IDENTITY2, 0.5 * hbar * omega_q * SIGMA_Z)
    rho0 = cnot_state(p)
    ct = correction_term(CNOT, BoundaryHamiltonians.scattering(h0), rho0, energy_scale=hbar * omega_q)
    rho = CNOT @ rho0 @ CNOT.T + k * ct.dimensionless()
    # second-order truncation leaves O(K^2) negative eigenvalues in the kernel
    lam = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    lam = lam[lam > 0] / np.sum(lam)
    return 1.0 - p * k, float(-np.sum(lam * np.log(lam)))


def ballistic_regime_estimate(omega_q: float, delta_x_over_v0: float):
    """``(omega_q delta_x / v0, (omega_q delta_x / v0)**2)``; the square sets ``1 - F``."""
    if omega_q < 0 or delta_x_over_v0 < 0:
        raise ValueError("inputs must be non-negative")
    r = omega_q * delta_x_over_v0
    return r, r * r
