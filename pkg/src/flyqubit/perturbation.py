"""Second-order corrections in the wavepacket spread.

To order ``delta_x**2`` the reduced internal state is
``rho_NA + (delta_x / (hbar v0))**2 * C`` where ``C`` (units energy**2) is
built from the ideal evolution ``U_NA(t)`` and the internal Hamiltonian at
the packet's initial and current positions. Dividing ``C`` by ``E0**2``
gives the dimensionless correction multiplying ``epsilon**2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from flyqubit.core import (
    _as_square,
    check_density_matrix,
    commutator,
    anticommutator,
    dag,
    dissipator,
    hermitian_part,
    max_abs,
    partial_projectors,
    spectral_decomposition,
    state_fidelity,
    von_neumann_entropy,
    PSD_FLOOR,
    PSD_TOL,
)
from flyqubit.errors import (
    AmbiguousRank,
    DegenerateSpectrum,
    IncompleteScenario,
    PerturbationTooLarge,
    PSDClipped,
    ShapeError,
)


@dataclass(frozen=True)
class BoundaryHamiltonians:
    """Internal Hamiltonian and its spatial derivative at the packet's start and current centre.

    ``h_p``/``dh_p`` are evaluated at ``x0``; ``h_f``/``dh_f`` at
    ``x0 + v0 t``. Derivatives are in energy per length.
    """

    h_p: np.ndarray
    h_f: np.ndarray
    dh_p: np.ndarray | None = None
    dh_f: np.ndarray | None = None

    @classmethod
    def scattering(cls, h0):
        """Both ends outside the potential: ``H_p = H_f = H0`` and no gradients."""
        h0 = np.asarray(h0, dtype=complex)
        zero = np.zeros_like(h0)
        return cls(h0, h0, zero, zero.copy())

    @classmethod
    def from_flight(cls, config, t: float):
        x0 = config.x0
        xf = x0 + config.v0 * t
        return cls(
            config.h_tilde(x0), config.h_tilde(xf),
            config.h_tilde_prime(x0), config.h_tilde_prime(xf),
        )


@dataclass(frozen=True)
class CorrectionTerm:
    """Correction operator ``C`` in energy**2 units, with the energy scale used to normalise it."""

    matrix: np.ndarray
    at_time: float | None = None
    energy_scale: float | None = None

    def dimensionless(self, energy_scale: float | None = None):
        e0 = energy_scale if energy_scale is not None else self.energy_scale
        if e0 is None:
            raise IncompleteScenario("no energy scale to normalise the correction term")
        return self.matrix / e0**2


def _dimensionless(c, energy_scale=None):
    if isinstance(c, CorrectionTerm):
        return c.dimensionless(energy_scale)
    return _as_square(c, "correction term")


def u1_u2_scattering(u_na, h0):
    """First- and second-order coefficients of ``U_x`` in the scattering limit.

    ``U1 = [H0, U_NA]`` and ``U2 = H0 U_NA H0 - {H0**2, U_NA}/2``.
    """
    u_na = _as_square(u_na, "U_NA")
    h0 = _as_square(h0, "H0")
    if u_na.shape != h0.shape:
        raise ShapeError(f"shape mismatch {u_na.shape} vs {h0.shape}")
    u1 = commutator(h0, u_na)
    u2 = h0 @ u_na @ h0 - 0.5 * anticommutator(h0 @ h0, u_na)
    return u1, u2


def u1_u2(u_na, boundaries: BoundaryHamiltonians, v0: float, hbar: float = 1.0):
    """General first/second order coefficients including the gradient terms."""
    b = boundaries
    u1 = b.h_f @ u_na - u_na @ b.h_p
    u2 = (
        b.h_f @ u_na @ b.h_p
        - 0.5 * (b.h_f @ b.h_f @ u_na + u_na @ b.h_p @ b.h_p)
        - 0.5j * hbar * v0 * (b.dh_f @ u_na - u_na @ b.dh_p)
    )
    return u1, u2


def correction_term(u_na, boundaries: BoundaryHamiltonians, rho0, t: float | None = None,
                    v0: float = 1.0, hbar: float = 1.0,
                    energy_scale: float | None = None) -> CorrectionTerm:
    """Correction operator ``C(rho0, t)`` multiplying ``(delta_x / hbar v0)**2``.

    Parameters
    ----------
    u_na : (n, n) array
        Ideal evolution operator at time ``t``.
    boundaries : BoundaryHamiltonians
        Use :meth:`BoundaryHamiltonians.scattering` once the packet has left
        the potential; inside it the gradients must be supplied.
    rho0 : (n, n) array
        Initial internal state.

    Raises
    ------
    IncompleteScenario
        If a boundary gradient is missing.
    """
    b = boundaries
    if b.dh_p is None or b.dh_f is None:
        raise IncompleteScenario("gradient of the internal Hamiltonian is required")
    u = _as_square(u_na, "U_NA")
    rho0 = _as_square(rho0, "rho0")
    shapes = {u.shape, rho0.shape, b.h_p.shape, b.h_f.shape, b.dh_p.shape, b.dh_f.shape}
    if len(shapes) != 1:
        raise ShapeError(f"operator shapes disagree: {sorted(shapes)}")
    ud = dag(u)
    rho_na = u @ rho0 @ ud
    c = (
        u @ dissipator(b.h_p, rho0) @ ud
        + dissipator(b.h_f, rho_na)
        + commutator(b.h_f, u @ commutator(b.h_p, rho0) @ ud)
        - 0.5j * hbar * v0 * (commutator(b.dh_f, rho_na) - u @ commutator(b.dh_p, rho0) @ ud)
    )
    return CorrectionTerm(hermitian_part(c), t, energy_scale)


def correction_from_unitaries(u_na, u1, u2, rho0):
    """``U1 rho0 U1^dag + U_NA rho0 U2^dag + U2 rho0 U_NA^dag`` (same units as ``C``)."""
    return u1 @ rho0 @ dag(u1) + u_na @ rho0 @ dag(u2) + u2 @ rho0 @ dag(u_na)


def approx_state(rho_na, c, epsilon: float, floor: float = PSD_FLOOR, energy_scale=None):
    """``rho_NA + epsilon**2 C`` with ``C`` dimensionless.

    Raises
    ------
    PerturbationTooLarge
        If an eigenvalue falls below ``-floor``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    rho_na = _as_square(rho_na, "rho_NA")
    c = _dimensionless(c, energy_scale)
    rho = rho_na + epsilon**2 * hermitian_part(c)
    # traceless C keeps the trace; remove roundoff
    rho = rho + (1.0 - np.trace(rho).real) / rho.shape[0] * np.eye(rho.shape[0])
    w = np.linalg.eigvalsh(rho)
    if w[0] < -floor:
        raise PerturbationTooLarge(f"eigenvalue {w[0]:.3e} below -{floor:.1e}; epsilon={epsilon:.3g} too large")
    if w[0] < -PSD_TOL:
        warnings.warn(f"perturbative state has eigenvalue {w[0]:.2e}", PSDClipped, stacklevel=2)
    return rho


def fidelity_pure_perturbative(c, psi_na, epsilon: float, energy_scale=None) -> float:
    """``1 - epsilon**2 |<psi_NA|C|psi_NA>|``."""
    c = _dimensionless(c, energy_scale)
    psi = np.asarray(psi_na, dtype=complex).ravel()
    if psi.size != c.shape[0]:
        raise ShapeError("state and correction dimensions differ")
    psi = psi / np.linalg.norm(psi)
    return 1.0 - epsilon**2 * abs(np.vdot(psi, c @ psi))


def _split(rho_na, c, epsilon, rank_cut):
    dec = spectral_decomposition(rho_na)
    p_par, _ = partial_projectors(rho_na, rank_cut)
    keep = dec.eigenvalues > rank_cut
    v = dec.eigenvectors
    ct = dag(v) @ c @ v
    scale = epsilon**2 * max(max_abs(c), 1e-300)
    support = dec.eigenvalues[keep]
    if support.size and np.min(support) < 10.0 * scale:
        raise AmbiguousRank(
            f"support eigenvalue {np.min(support):.2e} comparable to perturbation {scale:.2e}"
        )
    kernel = dec.eigenvalues[~keep]
    if kernel.size and epsilon > 0 and np.max(kernel) > 0.1 * scale:
        raise AmbiguousRank(
            f"kernel eigenvalue {np.max(kernel):.2e} comparable to perturbation {scale:.2e}"
        )
    return dec.eigenvalues, keep, ct


def entropy_perturbative(c, rho_na, epsilon: float, rank_cut: float = 1e-6,
                         branch: str = "auto", energy_scale=None) -> float:
    """Entropy of ``rho_NA + epsilon**2 C`` to first order, in nats.

    The correction is split into its blocks on the support and kernel of
    ``rho_NA``; the kernel block enters through ``C_perp ln(epsilon**2 C_perp)``.

    Parameters
    ----------
    branch : {"auto", "pure", "full-rank", "general"}
        Forces a formula; ``"auto"`` picks from the spectrum of ``rho_NA``.
        All three agree where their domains overlap.

    Raises
    ------
    AmbiguousRank
        If the spectrum does not separate cleanly from ``epsilon**2``.
    PerturbationTooLarge
        If the kernel block of ``C`` has a significantly negative eigenvalue.
    """
    c = hermitian_part(_dimensionless(c, energy_scale))
    rho_na = _as_square(rho_na, "rho_NA")
    p, keep, ct = _split(rho_na, c, epsilon, rank_cut)
    n_support = int(np.sum(keep))
    if branch == "auto":
        branch = "full-rank" if n_support == p.size else ("pure" if n_support == 1 else "general")
    if branch == "full-rank" and n_support != p.size:
        raise AmbiguousRank("full-rank formula requested for a rank-deficient state")
    if branch == "pure" and n_support != 1:
        raise AmbiguousRank("pure-state formula requested for a mixed state")

    eps2 = epsilon**2
    c_perp = ct[np.ix_(~keep, ~keep)]
    kernel_term = 0.0
    if c_perp.size:
        lam = np.linalg.eigvalsh(c_perp)
        if lam[0] < -1e-8 * max(max_abs(c), 1.0):
            raise PerturbationTooLarge(f"kernel block of C has eigenvalue {lam[0]:.2e}")
        lam = lam[lam > 0]
        trace_perp = float(np.sum(lam))
        kernel_term = float(np.sum(lam * np.log(eps2 * lam))) if eps2 > 0 else 0.0
    else:
        trace_perp = 0.0

    if branch == "pure":
        return eps2 * (trace_perp - kernel_term)

    ps = p[keep]
    s_na = float(-np.sum(ps * np.log(ps)))
    c_par_diag = np.real(np.diag(ct)[keep])
    par_term = float(np.sum(c_par_diag) + np.sum(c_par_diag * np.log(ps)))
    if branch == "full-rank":
        return s_na - eps2 * float(np.sum(c_par_diag * np.log(ps)))
    return s_na - eps2 * (par_term + kernel_term)


@dataclass(frozen=True)
class FidelityEstimate:
    """Perturbative fidelity of ``rho_NA + epsilon**2 C`` against ``rho_NA``.

    ``fourth_order`` is only set when ``rho_NA`` is full rank; in that case
    the first-order value is identically one.
    """

    first_order: float
    fourth_order: float | None = None
    excluded_pairs: tuple = field(default_factory=tuple)

    @property
    def value(self) -> float:
        return self.first_order if self.fourth_order is None else self.fourth_order


def fidelity_mixed_perturbative(c, rho_na, epsilon: float, rank_cut: float = 1e-6,
                                degeneracy_tol: float = 1e-8, energy_scale=None) -> FidelityEstimate:
    """Fidelity to first order in ``epsilon**2``, plus the ``epsilon**4`` term for full-rank states.

    Nearly degenerate eigenvalue pairs (``|p_i^2 - p_j^2| < degeneracy_tol``)
    make the fourth-order sum singular; they are skipped, listed in
    ``excluded_pairs`` and reported with a :class:`DegenerateSpectrum` warning.
    """
    c = hermitian_part(_dimensionless(c, energy_scale))
    rho_na = _as_square(rho_na, "rho_NA")
    p, keep, ct = _split(rho_na, c, epsilon, rank_cut)
    eps2 = epsilon**2
    first = 1.0 + eps2 * float(np.sum(np.real(np.diag(ct))[keep]))
    if not np.all(keep):
        return FidelityEstimate(first)

    total = 0.0
    excluded = []
    n = p.size
    for i in range(n):
        total += ct[i, i].real ** 2 / (4.0 * p[i])
        for j in range(n):
            if j == i:
                continue
            gap = p[i] ** 2 - p[j] ** 2
            if abs(gap) < degeneracy_tol:
                if i < j:
                    excluded.append((i, j))
                continue
            total -= p[j] * abs(ct[i, j]) ** 2 / gap
    if excluded:
        warnings.warn(f"skipped degenerate eigenvalue pairs {excluded}", DegenerateSpectrum, stacklevel=2)
    return FidelityEstimate(first, 1.0 - eps2**2 * total, tuple(excluded))


@dataclass
class PerturbativeSeries:
    """Perturbative tier evaluated on a time grid (``c`` in energy**2)."""

    times: np.ndarray
    c: np.ndarray
    rho_na: np.ndarray
    rho_approx: np.ndarray
    fidelity: np.ndarray
    entropy: np.ndarray
    epsilon: float
    energy_scale: float


def perturbative_series(config, u_na_path, rho0, rank_cut: float = 1e-6,
                        floor: float = 1.0) -> PerturbativeSeries:
    """Correction term, approximate state, fidelity and entropy at every grid time.

    ``floor`` bounds how negative the approximate state may get before it is
    rejected; the default accepts anything since the series is diagnostic.
    Fidelity uses the pure-state formula when ``rho0`` is pure and the
    mixed-state estimate otherwise. Entropy is NaN where the rank split is
    ambiguous.
    """
    rho0 = check_density_matrix(rho0)
    times = np.asarray(config.time_grid, dtype=float)
    e0, eps = config.E0, config.epsilon
    n = config.dim
    cs = np.empty((times.size, n, n), dtype=complex)
    approx = np.empty_like(cs)
    rho_na = np.asarray(u_na_path) @ rho0 @ dag(np.asarray(u_na_path)) if times.size else cs.copy()
    fid = np.empty(times.size)
    ent = np.empty(times.size)
    pure = von_neumann_entropy(rho0) < 1e-12 and np.linalg.eigvalsh(rho0)[-1] > 1 - 1e-12
    for k, t in enumerate(times):
        ct = correction_term(u_na_path[k], BoundaryHamiltonians.from_flight(config, t), rho0, t,
                             config.v0, config.hbar, e0)
        cs[k] = ct.matrix
        cd = ct.dimensionless()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PSDClipped)
            approx[k] = approx_state(rho_na[k], cd, eps, floor=floor)
        if pure:
            w, v = np.linalg.eigh(rho_na[k])
            fid[k] = fidelity_pure_perturbative(cd, v[:, -1], eps)
        else:
            try:
                fid[k] = fidelity_mixed_perturbative(cd, rho_na[k], eps, rank_cut).value
            except AmbiguousRank:
                fid[k] = state_fidelity(rho_na[k], approx[k])
        try:
            ent[k] = entropy_perturbative(cd, rho_na[k], eps, rank_cut)
        except (AmbiguousRank, PerturbationTooLarge):
            ent[k] = np.nan
    return PerturbativeSeries(times, cs, rho_na, approx, fid, ent, eps, e0)
