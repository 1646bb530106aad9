"""Split-step Fourier propagation of a spinor wavepacket with full kinetic energy.

The wavefunction is stored as a slowly varying envelope times the carrier
``exp(i k0 x)``, so the grid only has to resolve the envelope. In the
envelope the kinetic phase for wavevector ``k0 + kappa`` is
``hbar kappa**2 / 2m + v0 kappa`` (a constant phase ``hbar k0**2 / 2m`` is
dropped), where ``v0 = hbar k0 / m``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from flyqubit.core import dag, hermitian_part, propagator
from flyqubit.errors import GridTooSmall, UnstableStep

# hbar kappa_max**2 dt / 2m must stay below this
STABILITY_LIMIT = np.pi / 4
DT_SAFETY = 0.5
EDGE_PROB_TOL = 1e-8
EDGE_SIGMAS = 8.0

_HEADER = struct.Struct("<qqdd")


@dataclass
class GridState:
    """Spinor envelope on a uniform periodic grid.

    Attributes
    ----------
    x : (N,) array
        Grid positions, spacing ``dx``.
    spinor : (N, n) complex array
        Envelope; the wavefunction is ``exp(i k0 x) * spinor``.
    mass : float
    k0 : float
        Carrier wavevector.
    t : float
    hbar : float
    delta_x : float
        Initial position spread, sets the width of the edge guard bands.
    """

    x: np.ndarray
    spinor: np.ndarray
    mass: float
    k0: float = 0.0
    t: float = 0.0
    hbar: float = 1.0
    delta_x: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n_points(self) -> int:
        return self.x.size

    @property
    def v0(self) -> float:
        return self.hbar * self.k0 / self.mass

    @property
    def wavefunction(self):
        return np.exp(1j * self.k0 * self.x)[:, None] * self.spinor

    def norm(self) -> float:
        return float(np.sum(np.abs(self.spinor) ** 2) * self.dx)

    def density(self):
        return np.sum(np.abs(self.spinor) ** 2, axis=1)

    def kappa(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def mean_position(self) -> float:
        return float(np.sum(self.x * self.density()) * self.dx)

    @classmethod
    def gaussian(cls, x, x0: float, delta_x: float, k0: float, internal, mass: float,
                 hbar: float = 1.0):
        """Product of a Gaussian packet (position spread ``delta_x``) and an internal ket."""
        x = np.asarray(x, dtype=float)
        internal = np.asarray(internal, dtype=complex)
        internal = internal / np.linalg.norm(internal)
        env = (2.0 * np.pi * delta_x**2) ** -0.25 * np.exp(-((x - x0) ** 2) / (4.0 * delta_x**2))
        spinor = env[:, None] * internal[None, :]
        state = cls(x, spinor.astype(complex), float(mass), float(k0), 0.0, hbar, float(delta_x))
        state.spinor /= np.sqrt(state.norm())
        check_edges(state)
        return state


def make_grid(x_lo: float, x_hi: float, dx_max: float):
    """Uniform grid of ``2**k`` points covering ``[x_lo, x_hi)`` with spacing at most ``dx_max``."""
    n = 1 << int(np.ceil(np.log2(max((x_hi - x_lo) / dx_max, 2.0))))
    return x_lo + (x_hi - x_lo) / n * np.arange(n)


def free_width(delta_x: float, mass: float, t: float, hbar: float = 1.0) -> float:
    """Position spread of a free Gaussian after time ``t``."""
    return delta_x * np.sqrt(1.0 + (hbar * t / (2.0 * mass * delta_x**2)) ** 2)


def stability_number(state: GridState, dt: float) -> float:
    kmax = np.pi / state.dx
    return state.hbar * kmax**2 * abs(dt) / (2.0 * state.mass)


def auto_dt(state: GridState, safety: float = DT_SAFETY) -> float:
    """Largest step within ``safety`` times the stability bound."""
    kmax = np.pi / state.dx
    return safety * STABILITY_LIMIT * 2.0 * state.mass / (state.hbar * kmax**2)


def check_edges(state: GridState, tol: float = EDGE_PROB_TOL):
    """Raise :class:`GridTooSmall` if probability within the guard bands exceeds ``tol``."""
    band = max(EDGE_SIGMAS * state.delta_x, 2 * state.dx)
    x = state.x
    near = (x < x[0] + band) | (x > x[-1] - band)
    p = float(np.sum(state.density()[near]) * state.dx)
    if p > tol:
        raise GridTooSmall(f"probability {p:.2e} within {band:g} of the grid edges at t={state.t:g}")


class _Stepper:
    # cached phases and per-point internal propagators for a fixed dt
    def __init__(self, state: GridState, h0, potential, dt: float):
        if stability_number(state, dt) >= STABILITY_LIMIT:
            raise UnstableStep(
                f"hbar k_max^2 dt / 2m = {stability_number(state, dt):.3g} exceeds {STABILITY_LIMIT:.3g}"
            )
        kappa = state.kappa()
        omega = state.hbar * kappa**2 / (2.0 * state.mass) + state.v0 * kappa
        self.half_kin = np.exp(-0.5j * omega * dt)[:, None]
        self.full_kin = self.half_kin**2
        h = np.asarray(h0, dtype=complex) + potential(state.x)
        self.u_pot = propagator(hermitian_part(h), dt, state.hbar)

    def kinetic(self, spinor, half: bool):
        phase = self.half_kin if half else self.full_kin
        return np.fft.ifft(phase * np.fft.fft(spinor, axis=0), axis=0)

    def potential(self, spinor):
        return np.einsum("xij,xj->xi", self.u_pot, spinor)

    def run(self, spinor, steps: int):
        if steps == 0:
            return spinor
        psi = self.kinetic(spinor, half=True)
        for k in range(steps):
            psi = self.potential(psi)
            psi = self.kinetic(psi, half=(k == steps - 1))
        return psi


def propagate_full(state: GridState, h0, potential, dt: float, steps: int) -> GridState:
    """Strang split-step propagation under ``p**2/2m + H0 + V(x)``.

    Each step is a half kinetic step in Fourier space, a full step of the
    local internal propagator ``exp(-i (H0 + V(x)) dt / hbar)`` and another
    half kinetic step; consecutive half steps are merged.

    Raises
    ------
    UnstableStep
        If ``hbar k_max**2 dt / 2m`` reaches ``pi/4``.
    GridTooSmall
        If the final state has probability near the grid edges.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    stepper = _Stepper(state, h0, potential, dt)
    out = replace(state, spinor=stepper.run(state.spinor, steps), t=state.t + steps * dt)
    check_edges(out)
    return out


def propagate_record(state: GridState, h0, potential, times, dt_max: float | None = None):
    """Propagate through increasing ``times`` and return the reduced internal states there.

    The step is the largest value not exceeding ``dt_max`` (default
    :func:`auto_dt`) that divides each interval evenly; each distinct step
    size is set up once.

    Returns
    -------
    rho : (T, n, n) array
    final : GridState
    """
    times = np.asarray(times, dtype=float)
    dt_max = auto_dt(state) if dt_max is None else dt_max
    out = np.empty((times.size, state.spinor.shape[1], state.spinor.shape[1]), dtype=complex)
    steppers = {}
    cur = state
    for i, t in enumerate(times):
        span = t - cur.t
        if span < -1e-12:
            raise ValueError("times must be increasing and not before the state time")
        steps = int(np.ceil(span / dt_max - 1e-9)) if span > 0 else 0
        if steps:
            dt = span / steps
            key = round(dt / dt_max, 12)
            if key not in steppers:
                steppers[key] = _Stepper(cur, h0, potential, dt)
            cur = replace(cur, spinor=steppers[key].run(cur.spinor, steps), t=float(t))
            check_edges(cur)
        out[i] = reduce_internal(cur)
    return out, cur


def reduce_internal(state: GridState):
    """Partial trace over position, ``sum_x psi(x) psi(x)^dag dx``."""
    psi = state.spinor
    rho = (psi.T @ psi.conj()) * state.dx
    rho = 0.5 * (rho + dag(rho))
    return rho / np.trace(rho).real


def energy(state: GridState, h0, potential) -> float:
    """Expectation of the full Hamiltonian, including the carrier kinetic energy."""
    k = state.k0 + state.kappa()
    phi = np.fft.fft(state.spinor, axis=0)
    kin = np.sum((state.hbar * k) ** 2 / (2.0 * state.mass) * np.sum(np.abs(phi) ** 2, axis=1))
    kin = kin / np.sum(np.abs(phi) ** 2)
    h = np.asarray(h0, dtype=complex) + potential(state.x)
    pot = np.einsum("xi,xij,xj->", state.spinor.conj(), h, state.spinor).real * state.dx
    return float(kin + pot / state.norm())


def write_snapshot(state: GridState, path) -> None:
    """Binary dump: little-endian header ``(N: int64, n: int64, dx: float64, t: float64)``
    followed by the ``(N, n)`` envelope as row-major complex64."""
    n_pts, n = state.spinor.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(n_pts, n, state.dx, state.t))
        fh.write(np.ascontiguousarray(state.spinor, dtype="<c8").tobytes())


def read_snapshot(path):
    """Return ``(spinor, dx, t)`` from :func:`write_snapshot` output."""
    with open(path, "rb") as fh:
        n_pts, n, dx, t = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<c8")
    return data.reshape(n_pts, n).astype(complex), dx, t


def grid_for_flight(config, internal, points_per_dx: float = 8.0, hbar: float | None = None) -> GridState:
    """Grid state matching a :class:`~flyqubit.clock.FlightConfig` with a Gaussian packet.

    The grid spans the whole flight plus guard bands sized for the spread
    at the final time. The carrier is ``k0 = m v0 / hbar``.
    """
    if config.mass is None:
        raise ValueError("grid propagation needs the particle mass")
    hbar = config.hbar if hbar is None else hbar
    wp = config.wavepacket
    t_end = float(config.time_grid[-1]) if len(config.time_grid) else 0.0
    width = free_width(wp.delta_x, config.mass, t_end, hbar)
    pad = EDGE_SIGMAS * wp.delta_x + 8.0 * width
    lo = wp.x0 - pad
    hi = wp.x0 + config.v0 * t_end + pad
    dx_max = min(wp.delta_x / points_per_dx, config.potential.feature_scale / 16.0)
    x = make_grid(lo, hi, dx_max)
    k0 = config.mass * config.v0 / hbar
    return GridState.gaussian(x, wp.x0, wp.delta_x, k0, internal, config.mass, hbar)
