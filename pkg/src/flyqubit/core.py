"""Dense linear algebra and state diagnostics on the internal Hilbert space.

Operators and density matrices are plain ``numpy`` complex arrays of shape
``(n, n)``; stacks of them carry leading batch axes. Functions here never
mutate their inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from flyqubit.errors import (
    AmbiguousRank,
    InvalidOperator,
    NotAState,
    PSDClipped,
    ShapeError,
)

MAX_DENSE_DIM = 64

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
PSD_FLOOR = 1e-8

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dag(a):
    return np.swapaxes(np.conj(a), -1, -2)


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def dissipator(x, rho):
    """Return ``X rho X^dag - {X^dag X, rho}/2``."""
    xdx = dag(x) @ x
    return x @ rho @ dag(x) - 0.5 * (xdx @ rho + rho @ xdx)


def max_abs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def _as_square(a, name="operator"):
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidOperator(f"{name} has non-finite entries")
    return a


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    scale = max(max_abs(a), 1.0)
    return max_abs(a - dag(a)) <= tol * scale


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    return max_abs(dag(u) @ u - eye) <= tol


def hermitian_part(a):
    return 0.5 * (a + dag(a))


def check_hermitian(a, name="operator", tol: float = HERMITIAN_TOL):
    a = _as_square(a, name)
    if not is_hermitian(a, tol):
        raise InvalidOperator(f"{name} is not Hermitian")
    return a


def check_density_matrix(rho, tol: float = TRACE_TOL, psd_tol: float = PSD_TOL):
    """Validate a density matrix and return it as a complex array.

    Raises
    ------
    NotAState
        If ``rho`` is not Hermitian, not unit trace, or has an eigenvalue
        below ``-psd_tol``.
    """
    rho = _as_square(rho, "density matrix")
    if rho.ndim != 2:
        raise ShapeError("expected a single density matrix")
    if not is_hermitian(rho, tol):
        raise NotAState("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise NotAState(f"trace is {np.trace(rho).real:.3e}, not 1")
    if np.linalg.eigvalsh(rho)[0] < -psd_tol:
        raise NotAState("density matrix has negative eigenvalues")
    return rho


def expm(a, scale: complex = 1.0):
    """Matrix exponential ``exp(scale * A)``.

    Hermitian ``A`` goes through an eigendecomposition (exactly unitary when
    ``scale`` is imaginary); anything else falls back to scaling-and-squaring
    Pade via :func:`scipy.linalg.expm`. Leading batch axes are supported.

    Raises
    ------
    InvalidOperator
        If ``A`` has non-finite entries or ``scale`` is not finite.
    """
    a = _as_square(a)
    if a.shape[-1] > MAX_DENSE_DIM:
        raise InvalidOperator(f"dimension {a.shape[-1]} exceeds dense limit {MAX_DENSE_DIM}")
    if not np.isfinite(scale):
        raise InvalidOperator("scale must be finite")
    if is_hermitian(a):
        w, v = np.linalg.eigh(hermitian_part(a))
        return (v * np.exp(scale * w)[..., None, :]) @ dag(v)
    return scipy.linalg.expm(scale * a)


def propagator(h, dt: float, hbar: float = 1.0):
    """``exp(-i dt H / hbar)`` for a Hermitian ``H`` or a stack of them.

    Skips validation; this is the inner-loop kernel of the time steppers.
    """
    tau = dt / hbar
    if h.shape[-1] == 2:
        # closed form for qubits: exp(-i tau (a0 + r.sigma))
        a0 = 0.5 * (h[..., 0, 0].real + h[..., 1, 1].real)
        traceless = h - a0[..., None, None] * np.eye(2)
        r = np.sqrt(np.abs(h[..., 0, 1]) ** 2 + traceless[..., 0, 0].real ** 2)
        c = np.cos(tau * r)
        s = tau * np.sinc(tau * r / np.pi)
        out = -1j * s[..., None, None] * traceless
        out[..., 0, 0] += c
        out[..., 1, 1] += c
        return np.exp(-1j * tau * a0)[..., None, None] * out
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * tau * w)[..., None, :]) @ dag(v)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order with matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dag(v)


def spectral_decomposition(rho) -> SpectralDecomposition:
    rho = _as_square(rho, "density matrix")
    w, v = np.linalg.eigh(hermitian_part(rho))
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def _clipped_spectrum(rho, floor: float):
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w[0] < -floor:
        raise NotAState(f"eigenvalue {w[0]:.3e} below PSD floor -{floor:.1e}")
    if w[0] < -PSD_TOL:
        warnings.warn(f"clipped {np.sum(w < 0)} negative eigenvalue(s)", PSDClipped, stacklevel=3)
    return np.clip(w, 0.0, 1.0)


def von_neumann_entropy(rho, base: str = "nats", floor: float = PSD_FLOOR) -> float:
    """Von Neumann entropy ``-Tr rho ln rho``.

    Parameters
    ----------
    rho : array_like
        Density matrix. Eigenvalues in ``[-floor, 0)`` are clipped to zero.
    base : {"nats", "bits"}
    floor : float
        Largest tolerated negative eigenvalue magnitude.

    Raises
    ------
    NotAState
        If an eigenvalue lies below ``-floor``.
    """
    if base not in ("nats", "bits"):
        raise ValueError(f"unknown entropy base {base!r}")
    rho = _as_square(rho, "density matrix")
    p = _clipped_spectrum(rho, floor)
    p = p[p > 0]
    s = float(-np.sum(p * np.log(p)))
    s = s if s > 0.0 else 0.0  # also turns -0.0 into 0.0
    return s / np.log(2.0) if base == "bits" else s


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(hermitian_part(rho))
    # eigenvalues at roundoff level would enter as their square roots
    cut = w.size * np.finfo(float).eps * max(w[-1], 0.0)
    w = np.where(w > cut, w, 0.0)
    return (v * np.sqrt(w)) @ dag(v)


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2``.

    Small negative eigenvalues (perturbative states) are treated as zero.
    """
    rho = _as_square(rho, "rho")
    sigma = _as_square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    sq = _psd_sqrt(rho)
    m = sq @ hermitian_part(sigma) @ sq
    lam = np.linalg.eigvalsh(hermitian_part(m))
    lam = np.where(lam > lam.size * np.finfo(float).eps * max(lam[-1], 0.0), lam, 0.0)
    f = float(np.sum(np.sqrt(lam)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho, sigma) -> float:
    d = hermitian_part(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(d))))


def partial_projectors(rho_ref, rank_cut: float = 1e-6):
    """Projectors onto the support and kernel of ``rho_ref``.

    The support is spanned by eigenvectors whose eigenvalue exceeds
    ``rank_cut``. Returns ``(P_support, P_kernel)``.

    Raises
    ------
    AmbiguousRank
        If some eigenvalue lies within a factor of ten of ``rank_cut``.
    """
    dec = spectral_decomposition(rho_ref)
    p = dec.eigenvalues
    close = (p > rank_cut / 10.0) & (p < rank_cut * 10.0)
    if np.any(close):
        raise AmbiguousRank(
            f"eigenvalue(s) {p[close]} within a factor 10 of rank_cut={rank_cut:g}"
        )
    keep = p > rank_cut
    v = dec.eigenvectors
    p_par = v[:, keep] @ dag(v[:, keep])
    p_perp = np.eye(p.size, dtype=complex) - p_par
    return p_par, p_perp


def pure_state(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def qubit_state(a0: float, theta: float = 0.0):
    """Ket ``sqrt(a0)|0> + exp(i theta) sqrt(1-a0)|1>``."""
    return np.array([np.sqrt(a0), np.exp(1j * theta) * np.sqrt(1.0 - a0)], dtype=complex)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(n: int, rng: np.random.Generator):
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None):
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(n: int, rng: np.random.Generator):
    return random_density_matrix(n, rng, rank=1)
