"""
Qubits carried in a moving trap
===============================

When the qubit sits in a trap that moves at v0, the spread in position
is fixed by the trap ground state and the gate only leaks into excited
trap levels. The worst case is 9 hbar**2 r_eg**2 / (v0**2 tau**4 E_eg**2);
in a harmonic trap it becomes 36 m**2 delta_x**6 / (hbar**2 v0**2 tau**4).

Run with ``python notebooks/03_trapped_bounds.py``.
"""

from flyqubit.trapped import PulseGate, TrapConfig, magnitude_table, pulse_deviation, worst_case_bound

# Order of magnitude for three transport schemes (m = 1e-31 kg)
print(f"{'regime':10s} {'delta_x [m]':>12s} {'v0 [m/s]':>9s} {'tau [s]':>9s} {'harmonic':>10s} {'box':>10s}")
for r in magnitude_table():
    print(f"{r.name:10s} {r.delta_x:12.1e} {r.v0:9.1e} {r.tau:9.1e} {r.bound_harmonic:10.3e} {r.bound_box:10.3e}")

# A smooth pi pulse stays below the bound and shows the delta_x**6 law
print("\nGaussian pi pulse, natural units")
for dx in (0.04, 0.02, 0.01):
    cfg = TrapConfig.harmonic(dx, 1.0, 1.0, 1.0, hbar=1.0)
    dev, rho = pulse_deviation(cfg, PulseGate())
    print(f"delta_x = {dx:5.3f}  E_eg tau = {cfg.gap_times_tau:8.1f}  deviation = {dev:.3e}  "
          f"bound = {worst_case_bound(cfg):.3e}  ratio = {dev / worst_case_bound(cfg):.3f}")
