"""Experiment orchestration: build scenarios from configs, run solver tiers, write artifacts."""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import math
import platform
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from flyqubit import __version__
from flyqubit.clock import FlightConfig, Wavepacket, evolve_pointlike_path, trajectory
from flyqubit.config import ExperimentConfig, check_axis
from flyqubit.core import SIGMA_X, SIGMA_Z, pure_state, qubit_state, state_fidelity
from flyqubit.errors import ConfigError, FlyQubitError, LargeEpsilon
from flyqubit.grid import auto_dt, free_width, grid_for_flight, propagate_record, stability_number
from flyqubit.perturbation import perturbative_series
from flyqubit.potentials import GaussianProfile, PotentialProfile, PotentialTerm
from flyqubit.scenarios import (
    cnot_flight,
    cnot_metrics,
    cnot_state,
    not_gate_flight,
    not_gate_metrics,
    phase_gate_flight,
)
from flyqubit.trapped import TrapConfig, magnitude_table, preset, pulse_deviation, worst_case_bound

TRAJECTORY_COLUMNS = (
    "t", "F_pert", "S_pert_nats", "S_pert_bits", "F_clock", "S_clock_nats", "fid_approx_vs_grid",
)
TRAPPED_COLUMNS = ("kind", "delta_x", "m", "v0", "tau", "E_eg", "r_eg", "E_eg_tau_over_hbar", "bound", "deviation")
TABLE_COLUMNS = ("name", "delta_x_m", "m_kg", "v0_m_per_s", "tau_s", "bound_harmonic", "bound_box")
SWEEP_COLUMNS = {
    "flight": ("epsilon", "F_pert_final", "S_pert_final", "F_clock_final", "S_clock_final",
               "S_clock_max", "fid_approx_vs_grid_min", "K", "F_closed", "S_closed"),
    "trapped": ("bound", "deviation"),
}
STRONG_DECOHERENCE = 0.5
CLOCK_RATIO_LIMIT = 1e-4


class TierError(FlyQubitError):
    """A solver tier failed; ``tier`` names it."""

    def __init__(self, tier: str, exc: Exception):
        super().__init__(f"{tier} tier failed: {type(exc).__name__}: {exc}")
        self.tier = tier


@dataclass
class Flight:
    """A flight scenario ready to simulate."""

    config: FlightConfig
    rho0: np.ndarray
    ket: np.ndarray
    n_nodes: int = 21
    extras: dict = field(default_factory=dict)


@dataclass
class TrajectoryRecord:
    """Time series from every enabled tier plus run metadata.

    Disabled tiers leave their columns as ``None``.
    """

    times: np.ndarray
    columns: dict
    states: dict
    metadata: dict

    def __post_init__(self):
        n = self.times.size
        for name, col in self.columns.items():
            if col is not None and len(col) != n:
                raise ValueError(f"column {name} has length {len(col)}, expected {n}")


# ---------------------------------------------------------------- builders


def fig2_flight(params: dict, hbar: float = 1.0) -> Flight:
    """Gaussian packet through ``V = (hbar chi0 / 2) exp(-pi x**2 / L**2) sigma_x`` with ``H0 = hbar omega_q sigma_z / 2``."""
    L, v0, wq, chi0, dx = (params[k] for k in ("L", "v0", "omega_q", "chi0", "delta_x"))
    k0 = params["k0_delta_x"] / dx
    mass = hbar * k0 / v0
    pot = PotentialProfile((PotentialTerm(GaussianProfile(0.0, L), 0.5 * hbar * chi0, SIGMA_X),))
    x0 = params.get("x0")
    if x0 is None:
        x0 = pot.support[0] - 6.0 * dx
    base = FlightConfig(0.5 * hbar * wq * SIGMA_Z, pot, Wavepacket.gaussian(x0, dx, k0), v0,
                        time_grid=np.array([0.0]), hbar=hbar, mass=mass)
    cfg = base.replace(time_grid=np.linspace(0.0, base.t_final, params["n_times"]))
    ket = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return Flight(cfg, pure_state(ket), ket, params["n_nodes"])


def gate_flight(params: dict, hbar: float = 1.0) -> Flight:
    wq, v0, dx = params["omega_q"], params["v0"], params["delta_x"]
    ket = qubit_state(params["a0"], params["theta"])
    if params["kind"] == "NOT":
        mass = hbar * params["k0_delta_x"] / dx / v0
        fl = not_gate_flight(wq, dx, v0, params["profile"], hbar, params["n_times"], mass=mass)
        k, f, s = not_gate_metrics(params["a0"], 1.0 - params["a0"], params["theta"], wq, dx, v0)
        extras = {"K": k, "F_closed": f, "S_closed": s}
    else:
        fl = phase_gate_flight(params["phi"], wq, dx, v0, hbar, width=2.0 * np.pi * v0 / wq,
                               n_times=params["n_times"])
        extras = {"K": 0.0, "F_closed": 1.0, "S_closed": 0.0}
    k0 = params["k0_delta_x"] / dx
    cfg = fl.config.replace(mass=hbar * k0 / v0, wavepacket=Wavepacket.gaussian(fl.config.x0, dx, k0))
    return Flight(cfg, pure_state(ket), ket, params["n_nodes"], extras)


def twobody_flight(params: dict, hbar: float = 1.0) -> Flight:
    cfg, _ = cnot_flight(params["omega_q"], params["dx1"], params["dx2"], params["v1"], params["v2"],
                         params["m1"], params["m2"], params["correlation"], hbar=hbar,
                         n_times=params["n_times"])
    p = params["p"]
    rho0 = cnot_state(p)
    ket = np.kron([np.sqrt(1.0 - p), np.sqrt(p)], [1.0, 1.0]).astype(complex) / np.sqrt(2.0)
    k = (params["omega_q"] * cfg.wavepacket.delta_x / cfg.v0) ** 2
    f, s = cnot_metrics(p, k, params["omega_q"], hbar)
    return Flight(cfg, rho0, ket, params["n_nodes"], {"K": p * k, "F_closed": f, "S_closed": s})


BUILDERS = {"fig2": fig2_flight, "gate": gate_flight, "twobody": twobody_flight}


def build_flight(cfg: ExperimentConfig) -> Flight:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LargeEpsilon)
            return BUILDERS[cfg.scenario](cfg.params, cfg.hbar)
    except ValueError as exc:
        if isinstance(exc, FlyQubitError) and not isinstance(exc, ConfigError):
            raise TierError("setup", exc) from exc
        raise ConfigError(f"{cfg.source}: {exc}") from exc


def trap_config(params: dict, hbar: float) -> TrapConfig:
    if params.get("preset"):
        return preset(params["preset"], params["kind"])
    args = (params["delta_x"], params["m"], params["v0"], params["tau"], hbar)
    if params["kind"] == "harmonic":
        return TrapConfig.harmonic(*args)
    return TrapConfig.box_with_spread(*args)


# ---------------------------------------------------------------- tiers


def simulate(flight: Flight, tiers=("clock", "perturbative")) -> TrajectoryRecord:
    """Run the requested tiers on a flight.

    The grid column compares the perturbative state with the grid state,
    so the perturbative tier is evaluated whenever the grid tier is on.

    Raises
    ------
    TierError
        Naming the tier that failed.
    """
    cfg = flight.config
    times = np.asarray(cfg.time_grid)
    cols = dict.fromkeys(TRAJECTORY_COLUMNS[1:])
    states = {}
    meta = {"epsilon": cfg.epsilon, "E0": cfg.E0, "hbar": cfg.hbar, "tiers": list(tiers),
            "t_final": float(times[-1]) if times.size else 0.0}
    u_na = None
    if "clock" in tiers:
        try:
            tr = trajectory(cfg, flight.rho0, flight.n_nodes)
        except Exception as exc:
            raise TierError("clock", exc) from exc
        cols["F_clock"], cols["S_clock_nats"] = tr.fidelity, tr.entropy
        states["clock"] = tr.rho
        u_na = tr.u_na
        meta["clock"] = {"n_nodes": flight.n_nodes, "stepper": "adaptive 4th-order Magnus, tol 1e-10"}
    if "perturbative" in tiers or "grid" in tiers:
        try:
            if u_na is None:
                u_na = evolve_pointlike_path(cfg, [cfg.x0], times)[:, 0]
            ps = perturbative_series(cfg, u_na, flight.rho0)
        except Exception as exc:
            raise TierError("perturbative", exc) from exc
        if "perturbative" in tiers:
            cols["F_pert"], cols["S_pert_nats"] = ps.fidelity, ps.entropy
            cols["S_pert_bits"] = ps.entropy / math.log(2.0)
        states["perturbative"] = ps.rho_approx
    if "grid" in tiers:
        try:
            state = grid_for_flight(cfg, flight.ket)
            dt = auto_dt(state)
            meta["grid_stability_number"] = stability_number(state, dt)
            rho_grid, final = propagate_record(state, cfg.H0, cfg.potential, times, dt)
        except Exception as exc:
            raise TierError("grid", exc) from exc
        cols["fid_approx_vs_grid"] = np.array(
            [state_fidelity(a, b) for a, b in zip(states["perturbative"], rho_grid)]
        )
        states["grid"] = rho_grid
        meta["grid"] = {"N": state.n_points, "dx": state.dx, "dt_max": dt, "k0": state.k0,
                        "mass": state.mass, "final_norm": final.norm(),
                        "q2_over_p0_2": (1.0 / (2.0 * state.k0 * cfg.wavepacket.delta_x)) ** 2}
    return TrajectoryRecord(times, cols, states, meta)


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, columns, rows) -> None:
    """CSV with LF line endings; numbers to 17 significant digits, missing values empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def trajectory_rows(rec: TrajectoryRecord):
    rows = []
    for i, t in enumerate(rec.times):
        row = {"t": t}
        for name, col in rec.columns.items():
            row[name] = None if col is None else col[i]
        rows.append(row)
    return rows


def write_manifest(path, cfg: ExperimentConfig, metadata: dict, wall_time: float) -> None:
    manifest = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "scenario": cfg.scenario,
        "units": cfg.units,
        "tiers": list(cfg.tiers),
        "seed": cfg.seed,
        "config": {"source": cfg.source, "table": cfg.raw, "sweep": cfg.sweep},
        "results": metadata,
        "wall_time_s": wall_time,
        "versions": {"flyqubit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def manifest_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.stem + ".manifest.json")


# ---------------------------------------------------------------- commands


def run_trapped(cfg: ExperimentConfig):
    tc = trap_config(cfg.params, cfg.hbar)
    row = {"kind": tc.kind, "delta_x": tc.delta_x, "m": tc.m, "v0": tc.v0, "tau": tc.tau,
           "E_eg": tc.E_eg, "r_eg": tc.r_eg, "E_eg_tau_over_hbar": tc.gap_times_tau,
           "bound": worst_case_bound(tc), "deviation": None}
    if cfg.params.get("deviation"):
        try:
            row["deviation"], _ = pulse_deviation(tc)
        except Exception as exc:
            raise TierError("dyson", exc) from exc
    return row


def run(cfg: ExperimentConfig, output=None) -> dict:
    """Run one configured experiment and write its CSV and manifest.

    Returns the run metadata.
    """
    np.random.seed(cfg.seed)
    start = time.perf_counter()
    out = Path(output or cfg.output)
    if cfg.scenario == "trapped":
        row = run_trapped(cfg)
        write_csv(out, TRAPPED_COLUMNS, [row])
        meta = {k: v for k, v in row.items()}
    else:
        flight = build_flight(cfg)
        rec = simulate(flight, cfg.tiers)
        write_csv(out, TRAJECTORY_COLUMNS, trajectory_rows(rec))
        meta = dict(rec.metadata)
        meta.update(flight.extras)
    write_manifest(manifest_path(out), cfg, meta, time.perf_counter() - start)
    return meta


def summarize(cfg: ExperimentConfig) -> dict:
    """Final-time metrics of one experiment, for sweep rows."""
    if cfg.scenario == "trapped":
        row = run_trapped(cfg)
        return {"bound": row["bound"], "deviation": row["deviation"]}
    flight = build_flight(cfg)
    rec = simulate(flight, cfg.tiers)
    c = rec.columns

    def last(name):
        return None if c[name] is None else c[name][-1]

    out = {
        "epsilon": flight.config.epsilon,
        "F_pert_final": last("F_pert"),
        "S_pert_final": last("S_pert_nats"),
        "F_clock_final": last("F_clock"),
        "S_clock_final": last("S_clock_nats"),
        "S_clock_max": None if c["S_clock_nats"] is None else float(np.max(c["S_clock_nats"])),
        "fid_approx_vs_grid_min": None if c["fid_approx_vs_grid"] is None else float(np.min(c["fid_approx_vs_grid"])),
    }
    out.update(flight.extras)
    return out


def _sweep_point(args):
    cfg, axis, value = args
    try:
        point = cfg.with_value(axis, value)
        return {axis: str(value), **summarize(point), "error": ""}
    except Exception as exc:  # recorded as an error row, the sweep goes on
        return {axis: str(value), "error": f"{type(exc).__name__}: {exc}"}


def sweep(cfg: ExperimentConfig, axis: str, values, workers: int = 1, output=None):
    """Run one experiment per value of ``axis``; rows come back in input order.

    Returns the list of row dictionaries.
    """
    check_axis(cfg, axis)
    start = time.perf_counter()
    jobs = [(cfg, axis, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    kind = "trapped" if cfg.scenario == "trapped" else "flight"
    columns = (axis, *SWEEP_COLUMNS[kind], "error")
    out = Path(output or cfg.output)
    write_csv(out, columns, rows)
    write_manifest(manifest_path(out), cfg, {"axis": axis, "values": [str(v) for v in values],
                                             "workers": workers, "rows": len(rows)},
                   time.perf_counter() - start)
    return rows


def trapped_table(output=None):
    """Magnitude table rows; written as CSV when ``output`` is given."""
    rows = [
        {"name": r.name, "delta_x_m": r.delta_x, "m_kg": r.m, "v0_m_per_s": r.v0, "tau_s": r.tau,
         "bound_harmonic": r.bound_harmonic, "bound_box": r.bound_box}
        for r in magnitude_table()
    ]
    if output:
        write_csv(output, TABLE_COLUMNS, rows)
    return rows


@dataclass
class Check:
    name: str
    status: str  # "ok", "warn" or "fail"
    detail: str


def validate(cfg: ExperimentConfig) -> list[Check]:
    """Static diagnostics; no simulation is run."""
    p = cfg.params
    checks = []
    if cfg.scenario == "trapped":
        tc = trap_config(p, cfg.hbar)
        e = tc.gap_times_tau
        checks.append(Check("bound", "ok", f"worst-case infidelity {worst_case_bound(tc):.3g}"))
        checks.append(Check("adiabaticity", "ok" if e > 10 else "warn",
                            f"E_eg tau / hbar = {e:.3g}" + ("" if e > 10 else " (gate not slow compared to the trap gap)")))
        return checks

    if cfg.scenario == "fig2":
        dx, v0, wq = p["delta_x"], p["v0"], p["omega_q"]
        k0 = p["k0_delta_x"] / dx
        e0 = cfg.hbar * 0.5 * math.hypot(wq, p["chi0"])
        pot_lo = -p["L"] * math.sqrt(math.log(1e12) / math.pi)
        x0 = p["x0"] if p["x0"] is not None else pot_lo - 6.0 * dx
        edge = x0 + 5.0 * dx
        checks.append(Check("outside_support", "ok" if edge < pot_lo else "fail",
                            f"packet edge x0 + 5 delta_x = {edge:.6g}, potential starts at {pot_lo:.6g}"
                            + ("" if edge < pot_lo else ": packet is not outside the interaction region at t = 0")))
    elif cfg.scenario == "gate":
        dx, v0, wq = p["delta_x"], p["v0"], p["omega_q"]
        k0 = p["k0_delta_x"] / dx
        e0 = cfg.hbar * wq
        checks.append(Check("outside_support", "ok", "entry point is placed before the calibrated potential"))
    else:
        dx = math.sqrt(p["dx1"] ** 2 + p["dx2"] ** 2 - 2.0 * p["correlation"]) if (
            p["dx1"] ** 2 + p["dx2"] ** 2 - 2.0 * p["correlation"]) > 0 else float("nan")
        v0 = abs(p["v1"] - p["v2"])
        wq = p["omega_q"]
        mu = p["m1"] * p["m2"] / (p["m1"] + p["m2"])
        k0 = mu * v0 / cfg.hbar
        e0 = cfg.hbar * wq
        checks.append(Check("relative_spread", "ok" if math.isfinite(dx) else "fail",
                            f"relative spread {dx:.6g}" if math.isfinite(dx) else "correlation gives non-positive variance"))
        checks.append(Check("outside_support", "ok", "entry point is placed before the calibrated potential"))
    eps = dx * e0 / (cfg.hbar * v0)
    checks.append(Check("epsilon", "ok" if eps < 0.3 else "warn", f"epsilon = {eps:.4g}"))
    ratio = (1.0 / (2.0 * k0 * dx)) ** 2
    checks.append(Check("clock_ratio", "ok" if ratio <= CLOCK_RATIO_LIMIT else "warn",
                        f"<q^2>/p0^2 = {ratio:.3g} (limit {CLOCK_RATIO_LIMIT:g})"))
    s = wq * dx / v0
    checks.append(Check("decoherence", "ok" if s < STRONG_DECOHERENCE else "warn",
                        f"omega_q delta_x / v0 = {s:.3g}"
                        + ("" if s < STRONG_DECOHERENCE else ": strong-decoherence regime (omega_q delta_x / v0 ~ 1)")))
    if "grid" in cfg.tiers and cfg.scenario == "fig2":
        dx_grid = dx / 8.0
        mass = cfg.hbar * k0 / v0
        dt = 0.5 * (math.pi / 4) * 2.0 * mass / (cfg.hbar * (math.pi / dx_grid) ** 2)
        t_end = 2.0 * (abs(x0) + 5 * dx) / v0
        width = free_width(dx, mass, t_end, cfg.hbar)
        checks.append(Check("grid_stability", "ok",
                            f"dt_max = {dt:.3g} at half the bound hbar k_max^2 dt / 2m < pi/4; "
                            f"packet width grows to about {width / dx:.3g} delta_x"))
    return checks
