"""Qubits carried inside a moving trap.

The spatial state is truncated to the trap ground and first excited
levels ``|g>, |e>`` (energy gap ``E_eg``, dipole element ``r_eg``). To
second order in the trap coupling the internal state picks up the
oscillatory integrals

    X1(t) = int_0^t exp(i E s / hbar) A(s) ds,
    X2(t) = 2 int_0^t ds1 int_0^s1 ds2 exp(-i E (s1 - s2) / hbar) A(s1) A(s2),

with ``A = U_NA^dag dV/dt U_NA``, and the internal state (interaction
picture) is ``rho0 - r**2 / (2 hbar**2 v0**2) (X2 rho0 + rho0 X2^dag - 2 X1 rho0 X1^dag)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from flyqubit.core import SIGMA_X, dag, hermitian_part, max_abs, propagator, pure_state
from flyqubit.errors import PerturbationTooLarge, QuadratureError
from flyqubit.potentials import GaussianProfile, PotentialProfile, PotentialTerm

HBAR_SI = 1.054571817e-34
MIN_SAMPLES_PER_PERIOD = 20
CORRECTION_LIMIT = 0.1
RICHARDSON_RTOL = 0.05


@dataclass(frozen=True)
class TrapConfig:
    """Trap level structure and transport parameters.

    Use :meth:`harmonic` or :meth:`box` so that ``E_eg``, ``r_eg`` and
    ``delta_x`` are mutually consistent.
    """

    kind: str
    E_eg: float
    r_eg: float
    delta_x: float
    m: float
    v0: float
    tau: float
    hbar: float = HBAR_SI

    @classmethod
    def harmonic(cls, delta_x: float, m: float, v0: float, tau: float, hbar: float = HBAR_SI):
        """Ground-state spread ``delta_x``; then ``|r_eg| = delta_x`` and ``E_eg = hbar**2 / (2 m delta_x**2)``."""
        return cls("harmonic", hbar**2 / (2.0 * m * delta_x**2), delta_x, delta_x, m, v0, tau, hbar)

    @classmethod
    def box(cls, length: float, m: float, v0: float, tau: float, hbar: float = HBAR_SI):
        """Infinite well of width ``length``."""
        r = 16.0 * length / (9.0 * np.pi**2)
        e = 3.0 * hbar**2 / (8.0 * m * length**2)
        dx = length * np.sqrt((np.pi**2 - 6.0) / (12.0 * np.pi**2))
        return cls("box", e, r, dx, m, v0, tau, hbar)

    @classmethod
    def box_with_spread(cls, delta_x: float, m: float, v0: float, tau: float, hbar: float = HBAR_SI):
        """Box whose ground state has position spread ``delta_x``."""
        length = delta_x / np.sqrt((np.pi**2 - 6.0) / (12.0 * np.pi**2))
        return cls.box(length, m, v0, tau, hbar)

    def with_spread(self, delta_x: float) -> "TrapConfig":
        """Same trap type and transport with a different ground-state spread."""
        if self.kind == "harmonic":
            return TrapConfig.harmonic(delta_x, self.m, self.v0, self.tau, self.hbar)
        return TrapConfig.box_with_spread(delta_x, self.m, self.v0, self.tau, self.hbar)

    @property
    def gap_times_tau(self) -> float:
        """``E_eg tau / hbar``; the adiabatic parameter of the gate."""
        return self.E_eg * self.tau / self.hbar


ELECTRON_MASS_ORDER = 1e-31

PRESETS = {
    # name: (delta_x [m], v0 [m/s], tau [s])
    "surfing": (10e-9, 1e4, 1e-10),
    "shuttling": (10e-9, 10.0, 1e-7),
    # flight over l = 1 cm at v0, tau = l / v0
    "rydberg": (10e-6, 1e4, 1e-2 / 1e4),
}


def preset(name: str, kind: str = "harmonic") -> TrapConfig:
    """Experimental regimes with ``m = 1e-31 kg``."""
    try:
        dx, v0, tau = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown trap preset {name!r}; choose from {sorted(PRESETS)}") from None
    if kind == "harmonic":
        return TrapConfig.harmonic(dx, ELECTRON_MASS_ORDER, v0, tau)
    return TrapConfig.box_with_spread(dx, ELECTRON_MASS_ORDER, v0, tau)


def worst_case_bound(cfg: TrapConfig) -> float:
    """Order-of-magnitude infidelity ``9 hbar**2 r_eg**2 / (v0**2 tau**4 E_eg**2)``."""
    return 9.0 * cfg.hbar**2 * cfg.r_eg**2 / (cfg.v0**2 * cfg.tau**4 * cfg.E_eg**2)


def harmonic_bound(delta_x, m, v0, tau, hbar=HBAR_SI) -> float:
    """``36 m**2 delta_x**6 / (hbar**2 v0**2 tau**4)``."""
    return 36.0 * m**2 * delta_x**6 / (hbar**2 * v0**2 * tau**4)


BOX_COEFFICIENT = 2.0**20 * np.pi**2 / (3.0 * (np.pi**2 - 6.0) ** 3)


def box_bound(delta_x, m, v0, tau, hbar=HBAR_SI) -> float:
    """``2**20 pi**2 / (3 (pi**2 - 6)**3) m**2 delta_x**6 / (hbar**2 v0**2 tau**4)``, about ``6e4`` times the bracket."""
    return BOX_COEFFICIENT * m**2 * delta_x**6 / (hbar**2 * v0**2 * tau**4)


@dataclass(frozen=True)
class MagnitudeRow:
    name: str
    delta_x: float
    m: float
    v0: float
    tau: float
    bound_harmonic: float
    bound_box: float


def magnitude_table() -> list[MagnitudeRow]:
    """Worst-case bounds for the surfing, shuttling and flying Rydberg regimes."""
    rows = []
    for name in PRESETS:
        h = preset(name, "harmonic")
        b = preset(name, "box")
        rows.append(MagnitudeRow(name, h.delta_x, h.m, h.v0, h.tau, worst_case_bound(h), worst_case_bound(b)))
    return rows


# ---------------------------------------------------------------- Dyson terms


@dataclass(frozen=True)
class DysonTerms:
    """``X1``, ``X2`` (energy, energy**2 times time**0 after integration) at ``at_time``."""

    X1: np.ndarray
    X2: np.ndarray
    at_time: float


def _uniform_step(times):
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise QuadratureError("need at least three samples")
    h = np.diff(times)
    if np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise QuadratureError("samples must be uniformly spaced")
    return times, float(h[0])


def _product_trapezoid(times, a_path, e_eg, hbar):
    h = times[1] - times[0]
    w = np.full(times.size, h)
    w[0] = w[-1] = 0.5 * h
    ph = np.exp(1j * e_eg * times / hbar)[:, None, None]
    a = w[:, None, None] * ph * a_path
    c = dag(a)
    x1 = a.sum(axis=0)
    # sum_{l<k} a_l for every k
    before = np.cumsum(a, axis=0) - a
    x2 = 2.0 * np.einsum("kij,kjl->il", c, before) + np.einsum("kij,kjl->il", c, a)
    return x1, x2


def dyson_terms(times, u_path, vdot_path, e_eg: float, hbar: float = 1.0,
                t: float | None = None, check: bool = True) -> DysonTerms:
    """Oscillatory integrals ``X1``, ``X2`` up to time ``t`` by product trapezoid rules.

    ``X2`` is discretised so that ``X2 + X2^dag = 2 X1^dag X1`` holds
    exactly, which keeps the trapped state's trace at one.

    Parameters
    ----------
    times : (T,) array
        Uniform samples starting at 0.
    u_path : (T, n, n) array
        Ideal internal evolution at the samples.
    vdot_path : (T, n, n) array
        Time derivative of the internal potential.
    t : float, optional
        Upper limit; the samples up to ``t`` are used. Defaults to the last sample.
    check : bool
        Compare with the rule on every other sample and raise if ``X1``
        changes by more than 5 % of ``max(|X1|, hbar max|A| / E_eg)``.

    Raises
    ------
    QuadratureError
        Fewer than 20 samples per period ``2 pi hbar / E_eg``, non-uniform
        samples, or a failed refinement check.
    """
    times, h = _uniform_step(times)
    period = 2.0 * np.pi * hbar / e_eg if e_eg > 0 else np.inf
    if period / h < MIN_SAMPLES_PER_PERIOD:
        raise QuadratureError(
            f"{period / h:.1f} samples per period; at least {MIN_SAMPLES_PER_PERIOD} required"
        )
    stop = times.size if t is None else int(np.searchsorted(times, t + 0.5 * h))
    times = times[:stop]
    u = np.asarray(u_path)[:stop]
    a_path = dag(u) @ np.asarray(vdot_path)[:stop] @ u
    x1, x2 = _product_trapezoid(times, a_path, e_eg, hbar)
    if check and stop >= 5 and (stop - 1) % 2 == 0:
        x1c, _ = _product_trapezoid(times[::2], a_path[::2], e_eg, hbar)
        # one period's worth of integrand sets the floor; X1 itself can be exponentially small
        scale = max(max_abs(x1), hbar / e_eg * max_abs(a_path) if e_eg > 0 else 0.0,
                    1e-14 * h * max_abs(a_path) * stop)
        if max_abs(x1 - x1c) > RICHARDSON_RTOL * scale:
            raise QuadratureError(f"X1 changed by {max_abs(x1 - x1c) / scale:.2%} under refinement")
    return DysonTerms(x1, x2, float(times[-1]))


def dyson_x1_path(times, u_path, vdot_path, e_eg: float, hbar: float = 1.0):
    """``X1`` at every sample by cumulative trapezoid, shape ``(T, n, n)``."""
    times, _ = _uniform_step(times)
    a_path = dag(u_path) @ vdot_path @ u_path
    integrand = np.exp(1j * e_eg * times / hbar)[:, None, None] * a_path
    return scipy.integrate.cumulative_trapezoid(integrand, times, axis=0, initial=0.0)


def trapped_state(rho0, terms: DysonTerms, r_eg: float, v0: float, hbar: float = 1.0):
    """Internal state to second order in the trap coupling (interaction picture).

    Raises
    ------
    PerturbationTooLarge
        If the correction exceeds 0.1 in max-abs norm.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    x1, x2 = terms.X1, terms.X2
    corr = (abs(r_eg) ** 2 / (2.0 * hbar**2 * v0**2)) * (
        x2 @ rho0 + rho0 @ dag(x2) - 2.0 * x1 @ rho0 @ dag(x1)
    )
    if max_abs(corr) >= CORRECTION_LIMIT:
        raise PerturbationTooLarge(f"trap correction {max_abs(corr):.2e} is not small")
    return hermitian_part(rho0 - corr)


# ---------------------------------------------------------------- test gates

MAX_SAMPLES = 2_000_000


def _fixed_step_path(ham, times, hbar: float = 1.0):
    # fourth-order Magnus on a fine uniform grid; step propagators built in one batch
    h = times[1] - times[0]
    lo = times[:-1] + (0.5 - np.sqrt(3.0) / 6.0) * h
    hi = times[:-1] + (0.5 + np.sqrt(3.0) / 6.0) * h
    h1, h2 = ham(lo), ham(hi)
    heff = 0.5 * (h1 + h2) - 1j * np.sqrt(3.0) / 12.0 * h / hbar * (h2 @ h1 - h1 @ h2)
    steps = propagator(heff, h, hbar)
    out = np.empty((times.size,) + steps.shape[1:], dtype=complex)
    out[0] = np.eye(steps.shape[-1])
    for k in range(steps.shape[0]):
        out[k + 1] = steps[k] @ out[k]
    return out


@dataclass(frozen=True)
class PulseGate:
    """Gaussian ``sigma_x`` pulse of area ``pi``: ``V(t) = (hbar/2) chi(t) sigma_x``,
    ``chi(t) = (pi / tau) exp(-pi (t - t_c)**2 / tau**2)`` with ``t_c = 3 tau``.

    ``omega_q`` adds ``H0 = hbar omega_q sigma_z / 2``. Work is done in
    units of ``tau`` and ``hbar / tau``.
    """

    omega_q_tau: float = 0.0
    duration: float = 6.0
    center: float = 3.0

    def potential(self):
        prof = GaussianProfile(self.center, 1.0)
        return PotentialProfile((PotentialTerm(prof, 0.5 * np.pi, SIGMA_X),))

    def paths(self, samples_per_unit: float):
        """Times, ideal evolution and ``dV/dt`` on a uniform grid (dimensionless)."""
        n = int(np.ceil(self.duration * samples_per_unit))
        n += n % 2  # even number of intervals for the refinement check
        if n > MAX_SAMPLES:
            raise QuadratureError(f"{n} samples needed; gap too large for direct quadrature")
        times = np.linspace(0.0, self.duration, n + 1)
        pot = self.potential()
        h0 = 0.5 * self.omega_q_tau * np.diag([1.0, -1.0]).astype(complex)
        u = _fixed_step_path(lambda t: h0 + pot(t), times)
        vdot = pot.derivative(times)
        return times, u, vdot


def pulse_deviation(cfg: TrapConfig, gate: PulseGate | None = None, psi0=None,
                    samples_per_period: float = 40.0):
    """Largest infidelity ``1 - <psi0|rho_I(t)|psi0>`` over the gate, for a smooth pulse.

    For a pure initial state the second-order infidelity is
    ``r**2 / (hbar v0)**2 (<X1^dag X1> - |<X1>|**2)``. Returns
    ``(deviation, final_state)`` with the state from :func:`trapped_state`
    at the end of the gate.
    """
    gate = gate or PulseGate()
    psi0 = np.array([1.0, 0.0], dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    e = cfg.gap_times_tau
    per_unit = samples_per_period * e / (2.0 * np.pi)
    times, u, vdot = gate.paths(max(per_unit, 200.0))
    x1 = dyson_x1_path(times, u, vdot, e)
    # dimensionless prefactor r^2 / (v0 tau)^2 since X1 is in units hbar / tau
    pref = (cfg.r_eg / (cfg.v0 * cfg.tau)) ** 2
    x1psi = x1 @ psi0
    mean = np.einsum("i,tij,j->t", psi0.conj(), x1, psi0)
    var = np.einsum("ti,ti->t", x1psi.conj(), x1psi).real - np.abs(mean) ** 2
    terms = dyson_terms(times, u, vdot, e)
    rho_f = trapped_state(pure_state(psi0), terms, cfg.r_eg / (cfg.v0 * cfg.tau), 1.0)
    return float(pref * np.max(var)), rho_f
