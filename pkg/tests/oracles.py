"""Independent reference implementations used to check the package.

Nothing here imports the numerical code under test. The oracles favour
transparency over speed: Taylor-series exponentials, fixed-step midpoint
products with Richardson extrapolation, brute-force position integrals and
closed-form expressions.
"""

import numpy as np
import scipy.integrate
import scipy.linalg

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def expm_taylor(a, scale=1.0, terms=30):
    """exp(scale * a) by scaling and squaring a truncated Taylor series."""
    m = scale * np.asarray(a, dtype=complex)
    norm = np.max(np.sum(np.abs(m), axis=1)) if m.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    m = m / 2.0**squarings
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def entropy(rho):
    """-Tr rho ln rho from the general (non-Hermitian) eigenvalue routine."""
    w = np.linalg.eigvals(np.asarray(rho, dtype=complex)).real
    w = w[w > 1e-300]
    return float(-np.sum(w * np.log(w)))


def fidelity(rho, sigma):
    """Uhlmann fidelity through scipy's Schur-based matrix square root."""
    s = scipy.linalg.sqrtm(np.asarray(rho, dtype=complex))
    inner = scipy.linalg.sqrtm(s @ np.asarray(sigma, dtype=complex) @ s)
    return float(np.real(np.trace(inner)) ** 2)


def midpoint_path(ham, t, steps):
    """Time-ordered exponential of -i int_0^t ham(s) ds by midpoint products (hbar = 1)."""
    h = t / steps
    u = np.eye(ham(0.0).shape[0], dtype=complex)
    for k in range(steps):
        u = expm_taylor(ham((k + 0.5) * h), -1j * h) @ u
    return u


def time_ordered(ham, t, steps=400):
    """Midpoint products at two step sizes, Richardson-extrapolated to fourth order."""
    coarse = midpoint_path(ham, t, steps)
    fine = midpoint_path(ham, t, 2 * steps)
    return (4.0 * fine - coarse) / 3.0


def gaussian_average(func, x0, delta_x, n=801, width=9.0):
    """int A0(x) func(x) dx for a normal density, by the trapezoid rule on +-width sigmas."""
    xs = np.linspace(x0 - width * delta_x, x0 + width * delta_x, n)
    w = np.exp(-((xs - x0) ** 2) / (2.0 * delta_x**2))
    w = w / scipy.integrate.trapezoid(w, xs)
    vals = np.array([func(x) for x in xs])
    return scipy.integrate.trapezoid(w[:, None, None] * vals, xs, axis=0)


def clock_state(h_of_x, rho0, x0, delta_x, v0, t, n=401, steps=200):
    """Reduced state of the clock model by brute force in position and time."""
    def rotated(x):
        u = time_ordered(lambda s: h_of_x(x + v0 * s), t, steps)
        return u @ rho0 @ u.conj().T
    return gaussian_average(rotated, x0, delta_x, n=n)


def not_gate_correction(a0, theta):
    """Closed-form C(t_f) / (hbar omega_q)**2 after a NOT gate on sqrt(a0)|0> + e^{i theta} sqrt(a1)|1>."""
    a1 = 1.0 - a0
    off = np.exp(1j * theta) * np.sqrt(a0 * a1)
    return -2.0 * np.array([[0, off], [np.conj(off), 0]], dtype=complex)


def not_gate_damage(k):
    """(F, S) = (1 - K, K (1 - ln K))."""
    return 1.0 - k, (k * (1.0 - np.log(k)) if k > 0 else 0.0)


def free_gaussian(x, t, x0, delta_x, k0, mass, hbar=1.0):
    """Exact free-particle Gaussian wavefunction (with carrier) at time t."""
    a = delta_x**2
    c = 1.0 + 1j * hbar * t / (2.0 * mass * a)
    v = hbar * k0 / mass
    xc = x - x0 - v * t
    norm = (2.0 * np.pi * a) ** -0.25 / np.sqrt(c)
    phase = np.exp(1j * k0 * (x - x0) - 1j * hbar * k0**2 * t / (2.0 * mass))
    return norm * np.exp(-(xc**2) / (4.0 * a * c)) * phase


def qubit_entropy_exact(q, eps2):
    """Entropy of diag(1 - q, q) + eps2 diag(-1, 1)."""
    p = np.array([1.0 - q - eps2, q + eps2])
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def harmonic_bound(delta_x, m, v0, tau, hbar):
    return 36.0 * m**2 * delta_x**6 / (hbar**2 * v0**2 * tau**4)


def generic_bound(r, e, v0, tau, hbar):
    return 9.0 * hbar**2 * r**2 / (v0**2 * tau**4 * e**2)


def dyson_x1(times, u_path, vdot_path, e):
    """X1 at the last time by Simpson's rule (hbar = 1)."""
    a = np.conj(np.transpose(u_path, (0, 2, 1))) @ vdot_path @ u_path
    f = np.exp(1j * e * times)[:, None, None] * a
    return scipy.integrate.simpson(f, x=times, axis=0)

