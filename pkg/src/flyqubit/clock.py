"""Exact internal dynamics under the linearized (clock) kinetic term.

Each point ``x`` of the initial wavepacket carries its own internal
evolution ``U_x(t) = T exp[-i/hbar int_0^t H(x + v0 s) ds]`` with
``H(y) = H0 + V(y)``; the reduced internal state is the probability-weighted
average of ``U_x rho0 U_x^dag``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from flyqubit.core import (
    check_density_matrix,
    check_hermitian,
    dag,
    max_abs,
    propagator,
    state_fidelity,
    von_neumann_entropy,
)
from flyqubit.errors import (
    IntegrationError,
    LargeEpsilon,
    QuadratureError,
)
from flyqubit.potentials import PotentialProfile

EPSILON_WARN = 0.3
# wavepacket edge taken as 5 standard deviations
EDGE_SIGMAS = 5.0

_GL_LO = 0.5 - np.sqrt(3.0) / 6.0
_GL_HI = 0.5 + np.sqrt(3.0) / 6.0
_SQRT3_12 = np.sqrt(3.0) / 12.0


@dataclass(frozen=True)
class Wavepacket:
    """Initial spatial probability density ``A0(x, x)``.

    Use :meth:`gaussian` or :meth:`tabulated`; for tabulated densities the
    mean and spread are computed from the table.
    """

    kind: str
    x0: float
    delta_x: float
    k0: float = 0.0
    xs: np.ndarray | None = None
    density: np.ndarray | None = None

    @classmethod
    def gaussian(cls, x0: float, delta_x: float, k0: float = 0.0):
        if delta_x < 0:
            raise ValueError("delta_x must be non-negative")
        return cls("gaussian", float(x0), float(delta_x), float(k0))

    @classmethod
    def tabulated(cls, xs, density, k0: float = 0.0):
        xs = np.asarray(xs, dtype=float)
        density = np.asarray(density, dtype=float)
        if xs.ndim != 1 or xs.shape != density.shape or np.any(np.diff(xs) <= 0):
            raise ValueError("tabulated density needs matching increasing 1D arrays")
        if np.any(density < 0):
            raise ValueError("density must be non-negative")
        density = density / scipy.integrate.trapezoid(density, xs)
        mean = scipy.integrate.trapezoid(xs * density, xs)
        spread = np.sqrt(scipy.integrate.trapezoid((xs - mean) ** 2 * density, xs))
        return cls("tabulated", float(mean), float(spread), float(k0), xs, density)

    def quadrature(self, n_nodes: int = 21):
        """Nodes and weights integrating against ``A0(x, x)``.

        Gauss-Hermite for Gaussian packets (``n_nodes`` nodes; odd counts put
        a node on ``x0``), trapezoid on the table otherwise.
        """
        if self.kind == "gaussian":
            if self.delta_x == 0.0:
                return np.array([self.x0]), np.array([1.0])
            xi, w = np.polynomial.hermite.hermgauss(n_nodes)
            return self.x0 + np.sqrt(2.0) * self.delta_x * xi, w / np.sqrt(np.pi)
        w = np.empty_like(self.xs)
        dx = np.diff(self.xs)
        w[0], w[-1] = 0.5 * dx[0], 0.5 * dx[-1]
        w[1:-1] = 0.5 * (dx[:-1] + dx[1:])
        return self.xs.copy(), w * self.density

    @property
    def leading_edge(self) -> float:
        if self.kind == "tabulated":
            return float(self.xs[self.density > 0][-1])
        return self.x0 + EDGE_SIGMAS * self.delta_x


@dataclass(frozen=True)
class FlightConfig:
    """Ballistic flight of an internal system through a potential.

    Parameters
    ----------
    H0 : (n, n) array
        Position-independent internal Hamiltonian (energy).
    potential : PotentialProfile
    wavepacket : Wavepacket
    v0 : float
        Group velocity.
    E0 : float, optional
        Characteristic internal energy. Defaults to the largest spectral
        norm of ``H0 + V(x)`` over the potential support.
    time_grid : array, optional
        Increasing sample times starting at 0. Defaults to 201 points up to
        the exit time :attr:`t_final`.
    hbar : float
    mass : float, optional
        Particle mass; only needed by the grid solver.
    """

    H0: np.ndarray
    potential: PotentialProfile
    wavepacket: Wavepacket
    v0: float
    E0: float | None = None
    time_grid: np.ndarray | None = None
    hbar: float = 1.0
    mass: float | None = None
    epsilon: float = field(init=False)

    def __post_init__(self):
        h0 = check_hermitian(self.H0, "H0")
        object.__setattr__(self, "H0", h0)
        if h0.shape[0] != self.potential.dim:
            raise ValueError("H0 and potential dimensions differ")
        if self.v0 <= 0:
            raise ValueError("v0 must be positive")
        x_min = self.potential.support[0]
        if self.potential.terms and not self.wavepacket.leading_edge < x_min:
            raise ValueError(
                f"wavepacket edge {self.wavepacket.leading_edge:g} overlaps the potential "
                f"support starting at {x_min:g} at t=0"
            )
        if self.E0 is None:
            object.__setattr__(self, "E0", self._default_energy_scale())
        if self.time_grid is None:
            tf = self.t_final
            object.__setattr__(self, "time_grid", np.linspace(0.0, tf, 201) if tf > 0 else np.array([0.0]))
        grid = np.asarray(self.time_grid, dtype=float)
        if grid.size and (grid[0] != 0.0 or np.any(np.diff(grid) <= 0)):
            raise ValueError("time_grid must start at 0 and be strictly increasing")
        object.__setattr__(self, "time_grid", grid)
        eps = self.wavepacket.delta_x * self.E0 / (self.hbar * self.v0)
        object.__setattr__(self, "epsilon", float(eps))
        if eps > EPSILON_WARN:
            warnings.warn(f"epsilon = {eps:.3g} > {EPSILON_WARN}", LargeEpsilon, stacklevel=3)

    def _default_energy_scale(self) -> float:
        lo, hi = self.potential.support
        xs = np.linspace(lo, hi, 2001) if self.potential.terms else np.array([0.0])
        hs = self.H0 + self.potential(xs)
        return float(np.max(np.abs(np.linalg.eigvalsh(hs))))

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @property
    def x0(self) -> float:
        return self.wavepacket.x0

    def h_tilde(self, x):
        """``H0 + V(x)`` for scalar or array positions."""
        return self.H0 + self.potential(x)

    def h_tilde_prime(self, x):
        return self.potential.derivative(x)

    def h_na(self, t):
        return self.h_tilde(self.x0 + self.v0 * np.asarray(t, dtype=float))

    def dh_na_dt(self, t):
        return self.v0 * self.h_tilde_prime(self.x0 + self.v0 * np.asarray(t, dtype=float))

    @property
    def t_final(self) -> float:
        """Time at which the packet centre is ``5 delta_x`` past the support."""
        x_max = self.potential.support[1] if self.potential.terms else self.x0
        return max((x_max + EDGE_SIGMAS * self.wavepacket.delta_x - self.x0) / self.v0, 0.0)

    def inside_interaction(self, t) -> bool:
        lo, hi = self.potential.support
        x = self.x0 + self.v0 * t
        return bool(self.potential.terms) and lo < x < hi

    def replace(self, **changes) -> "FlightConfig":
        fields = dict(
            H0=self.H0, potential=self.potential, wavepacket=self.wavepacket, v0=self.v0,
            E0=self.E0, time_grid=self.time_grid, hbar=self.hbar, mass=self.mass,
        )
        fields.update(changes)
        return FlightConfig(**fields)


@dataclass
class StepperOptions:
    """Adaptive fourth-order Magnus stepping controls.

    The local error of each step is estimated by comparing one full step
    with two half steps; the two-half-step product is kept.
    """

    tol: float = 1e-10
    h_init: float | None = None
    h_min_rel: float = 1e-13
    max_steps: int = 2_000_000


def _march(config: FlightConfig, starts, times, opts: StepperOptions):
    """Evolve every start position through the sorted ``times``.

    Returns an array ``(len(times), len(starts), n, n)``.
    """
    starts = np.asarray(starts, dtype=float)
    times = np.asarray(times, dtype=float)
    n = config.dim
    b = starts.size
    out = np.empty((times.size, b, n, n), dtype=complex)
    u = np.broadcast_to(np.eye(n, dtype=complex), (b, n, n)).copy()
    if times.size == 0:
        return out
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and sorted")

    v0, hbar = config.v0, config.hbar
    span = max(times[-1], 1e-300)
    h_max = config.potential.feature_scale / (4.0 * v0)
    h_max = min(h_max, span)
    h = opts.h_init or min(h_max, span / 64.0)
    h_min = opts.h_min_rel * span

    def ham(s):
        return config.h_tilde(starts + v0 * s)

    def magnus(s, step):
        # fourth-order Magnus step on the two Gauss-Legendre nodes
        h1 = ham(s + _GL_LO * step)
        h2 = ham(s + _GL_HI * step)
        heff = 0.5 * (h1 + h2) - 1j * _SQRT3_12 * step / hbar * (h2 @ h1 - h1 @ h2)
        return propagator(heff, step, hbar)

    s = 0.0
    steps = 0
    for k, target in enumerate(times):
        while target - s > 1e-15 * span:
            step = min(h, target - s)
            full = magnus(s, step)
            fine = magnus(s + 0.5 * step, 0.5 * step) @ magnus(s, 0.5 * step)
            err = max_abs(fine - full)
            steps += 1
            if steps > opts.max_steps:
                raise IntegrationError(f"exceeded {opts.max_steps} steps at t={s:g}")
            if err <= opts.tol:
                u = fine @ u
                s += step
                grow = 4.0 if err == 0 else min(4.0, 0.9 * (opts.tol / err) ** 0.2)
                if step == h:
                    h = min(h * max(grow, 1.0), h_max)
            else:
                h = step * max(0.2, 0.9 * (opts.tol / err) ** 0.2)
                if h < h_min:
                    raise IntegrationError(f"step size underflow at t={s:g} (err={err:.2e})")
        out[k] = u
    return out


def evolve_pointlike(config: FlightConfig, x_start: float, t: float,
                     options: StepperOptions | None = None):
    """Internal evolution operator ``U_x(t)`` for a point particle starting at ``x_start``.

    Raises
    ------
    IntegrationError
        If the adaptive stepper cannot reach the local tolerance.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    opts = options or StepperOptions()
    return _march(config, [x_start], [t], opts)[-1, 0]


def evolve_pointlike_path(config: FlightConfig, x_starts, times, options: StepperOptions | None = None):
    """Evolution operators for several start points at several times, ``(T, B, n, n)``."""
    return _march(config, x_starts, times, options or StepperOptions())


def _average(weights, unitaries, rho0):
    # sum_k w_k U_k rho0 U_k^dag over the node axis (second to last batch axis)
    states = unitaries @ rho0 @ dag(unitaries)
    return np.tensordot(weights, states, axes=([0], [-3]))


def internal_state_exact(config: FlightConfig, rho0, t: float, n_nodes: int = 21,
                         options: StepperOptions | None = None, check_quadrature: bool = False,
                         quadrature_tol: float = 1e-8):
    """Reduced internal state at time ``t`` from the exact clock dynamics.

    Parameters
    ----------
    check_quadrature : bool
        Recompute with ``2 n_nodes + 1`` nodes and require agreement within
        ``quadrature_tol`` (max-abs).

    Raises
    ------
    QuadratureError
        If the refinement check fails.
    """
    rho0 = check_density_matrix(rho0)
    rho = _state_at(config, rho0, t, n_nodes, options)
    if check_quadrature and config.wavepacket.kind == "gaussian":
        fine = _state_at(config, rho0, t, 2 * n_nodes + 1, options)
        if max_abs(fine - rho) > quadrature_tol:
            raise QuadratureError(f"quadrature refinement changed the state by {max_abs(fine - rho):.2e}")
    return 0.5 * (rho + dag(rho))


def _state_at(config, rho0, t, n_nodes, options):
    nodes, weights = config.wavepacket.quadrature(n_nodes)
    us = evolve_pointlike_path(config, nodes, [t], options)[0]
    return _average(weights, us, rho0)


@dataclass
class ClockTrajectory:
    """Exact-clock time series on the configuration's time grid.

    ``rho`` holds the reduced states, ``rho_na`` the point-like ideal
    states and ``u_na`` the ideal evolution operators.
    """

    times: np.ndarray
    rho: np.ndarray
    rho_na: np.ndarray
    u_na: np.ndarray
    fidelity: np.ndarray
    entropy: np.ndarray

    def __len__(self):
        return self.times.size


def trajectory(config: FlightConfig, rho0, n_nodes: int = 21,
               options: StepperOptions | None = None) -> ClockTrajectory:
    """Reduced internal state, fidelity to the ideal state and entropy at every grid time.

    All quadrature nodes are marched once through the time grid, so cost
    grows linearly with the number of grid times.
    """
    rho0 = check_density_matrix(rho0)
    times = np.asarray(config.time_grid, dtype=float)
    n = config.dim
    if times.size == 0:
        empty = np.empty((0, n, n), dtype=complex)
        return ClockTrajectory(times, empty, empty.copy(), empty.copy(), np.empty(0), np.empty(0))
    nodes, weights = config.wavepacket.quadrature(n_nodes)
    starts = np.append(nodes, config.x0)
    us = evolve_pointlike_path(config, starts, times, options)
    rho = _average(weights, us[:, :-1], rho0)
    rho = 0.5 * (rho + dag(rho))
    u_na = us[:, -1]
    rho_na = u_na @ rho0 @ dag(u_na)
    fid = np.array([state_fidelity(a, b) for a, b in zip(rho_na, rho)])
    ent = np.array([von_neumann_entropy(r) for r in rho])
    return ClockTrajectory(times, rho, rho_na, u_na, fid, ent)
