"""
Gate damage: NOT, PHASE and cNOT
================================

A gate built from a potential the qubit flies through inherits the
spread of arrival times. For a NOT on sqrt(a0)|0> + e^{i theta} sqrt(a1)|1>
the damage is K = 4 a0 a1 (omega_q delta_x / v0)**2 with F = 1 - K and
S = K (1 - ln K). A gate commuting with H0 is untouched.

Run with ``python notebooks/02_gates.py``.
"""

import numpy as np

from flyqubit import core
from flyqubit.clock import internal_state_exact
from flyqubit.core import pure_state
from flyqubit.scenarios import (
    cnot_flight,
    cnot_metrics,
    cnot_state,
    not_gate_flight,
    not_gate_metrics,
    phase_gate_flight,
)

W = 2.0 * np.pi

# NOT through a calibrated Gaussian drive; the first call solves for the
# drive amplitude and wavenumber and is cached afterwards.
print("NOT gate on |+>")
print(f"{'w dx/v0':>8s} {'K':>10s} {'1-F clock':>10s} {'1-F closed':>10s} {'S clock':>10s} {'S closed':>10s}")
for r in (0.02, 0.05, 0.1):
    fl = not_gate_flight(W, r / W)
    rho0 = pure_state([1, 1])
    rho = internal_state_exact(fl.config, rho0, fl.t_gate)
    target = fl.u_na @ rho0 @ fl.u_na.conj().T
    k, f, s = not_gate_metrics(0.5, 0.5, 0.0, W, r / W, 1.0)
    print(f"{r:8.3f} {k:10.3e} {1 - core.state_fidelity(rho, target):10.3e} {1 - f:10.3e} "
          f"{core.von_neumann_entropy(rho):10.3e} {s:10.3e}")

# The damage does not depend on the pulse shape: a smoothed rectangle gives the same numbers
fl = not_gate_flight(W, 0.05 / W, kind="rect")
rho = internal_state_exact(fl.config, pure_state([1, 1]), fl.t_gate)
print(f"rect profile at 0.05: S = {core.von_neumann_entropy(rho):.3e}")

# PHASE: the potential commutes with H0, so nothing is lost at the end of the flight
fl = phase_gate_flight(0.9, W, 0.05 / W)
rho0 = core.random_pure_state(2, np.random.default_rng(1))
rho = internal_state_exact(fl.config, rho0, fl.t_gate)
print(f"\nPHASE: 1 - F = {1 - core.state_fidelity(rho, fl.u_na @ rho0 @ fl.u_na.conj().T):.1e}, "
      f"S = {core.von_neumann_entropy(rho):.1e}")

# cNOT between two co-flying qubits: only the control-|1> branch is flipped,
# so the damage is weighted by the control population p.
k = 0.01
d = np.sqrt(k) / W / np.sqrt(2.0)
print("\ncNOT, target |+>, K = 0.01")
for p in (0.2, 0.5, 1.0):
    cfg, u = cnot_flight(W, d, d, m1=1e4, m2=1e4, n_times=2)
    rho0 = cnot_state(p)
    rho = internal_state_exact(cfg, rho0, cfg.time_grid[-1])
    f_ref, s_ref = cnot_metrics(p, k, W)
    print(f"p = {p:.1f}: F = {core.state_fidelity(rho, u @ rho0 @ u.conj().T):.6f} (1 - pK = {f_ref:.6f}), "
          f"S = {core.von_neumann_entropy(rho):.4e} (expansion {s_ref:.4e})")
