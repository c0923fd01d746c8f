"""Flat procedural surface consumed by the CLI and external bindings.

Every function takes plain scalars, paths, or numpy arrays and returns the
same; sessions are opaque handles created by load_case. The surface is
described by an interface manifest whose digest lets bindings verify they
were built against the same engine revision.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import sys

import numpy as np

from . import __version__
from ._backend import backend_name
from .dynamics import DynamicState, SimulationConfig
from .engine import EngineSession
from .network import FaultEvent
from .sampling import SamplerSpec, collect_operating_points
from .sampling import generate_dataset as _generate_dataset


def _fault_from_tuple(fault) -> FaultEvent | None:
    if fault is None:
        return None
    if isinstance(fault, FaultEvent):
        return fault
    branch, lam, t_on, t_clear = fault[:4]
    trip = bool(fault[4]) if len(fault) > 4 else True
    return FaultEvent(branch=int(branch), location=float(lam),
                      t_on=float(t_on), t_clear=float(t_clear),
                      trip_branch=trip)


def load_case(path) -> EngineSession:
    """Open a case file and return a fresh session handle."""
    return EngineSession.load(path)


def export_case(session, path) -> None:
    """Write the session's case back out in canonical JSON."""
    session.export(path)


def component_counts(session) -> dict:
    """Number of buses, branches, generators, and loads."""
    return session.component_counts()


def get_parameter(session, kind: str, index: int, field: str):
    """Read one component field."""
    return session.get_parameter(kind, index, field)


def set_parameter(session, kind: str, index: int, field: str, value,
                  force: bool = False) -> None:
    """Write one component field, enforcing its constraints unless forced."""
    session.set_parameter(kind, index, field, value, force)


def set_branch_status(session, branch: int, in_service: bool) -> dict:
    """Switch a branch and return the resulting island report."""
    return session.set_branch_status(branch, in_service)


def find_branch(session, from_bus: int, to_bus: int, circuit=None) -> int:
    """Position of the branch between two buses (circuit disambiguates)."""
    return session.case.find_branch(from_bus, to_bus, circuit)


def solve_power_flow(session, tolerance: float = 1e-6,
                     max_iterations: int = 30) -> dict:
    """Run the Newton power flow; returns convergence metadata."""
    sol = session.run_power_flow(tolerance=tolerance,
                                 max_iterations=max_iterations)
    return {"converged": sol.converged, "iterations": sol.iterations,
            "max_mismatch": sol.max_mismatch,
            "pv_pq_switches": list(sol.pv_pq_switches)}


def bus_voltages(session) -> tuple[np.ndarray, np.ndarray]:
    """Solved per-bus voltage magnitude and angle arrays."""
    return session.query_solution("bus_voltages")


def generator_output(session) -> tuple[np.ndarray, np.ndarray]:
    """Solved per-generator active and reactive power."""
    pf = session._require_pf("generator output")
    return pf.gen_p.copy(), pf.gen_q.copy()


def run_simulation(session, fault=None, step: float = 0.01,
                   horizon: float = 10.0, tolerance: float = 1e-6,
                   max_inner_iterations: int = 20) -> dict:
    """Run a transient simulation; fault is (branch, location, t_on, t_clear).

    Returns the stability label and summary statistics.
    """
    res = session.run_simulation(
        _fault_from_tuple(fault), step=step, horizon=horizon,
        tolerance=tolerance, max_inner_iterations=max_inner_iterations)
    return {
        "label": res.label,
        "max_separation_deg": res.max_separation_deg,
        "steps": res.steps,
        "inner_iterations_max": int(res.inner_iterations.max()),
        "inner_iterations_total": int(res.inner_iterations.sum()),
    }


def result_column(session, name: str) -> np.ndarray:
    """Extract one trajectory column block (rotor_angles, rotor_speeds, ...)."""
    return session.extract(name)


def time_axis(session) -> np.ndarray:
    """Time points of the last simulation."""
    return session.extract("time")


def get_dynamic_state(session, k: int) -> dict:
    """Dynamic state snapshot at step k as plain arrays."""
    st = session.get_state(k)
    return {"t": st.t, "k": st.k, "x": st.x, "v": st.v,
            "delta": st.delta, "omega": st.omega, "ep": st.ep}


def set_dynamic_state(session, k: int, state: dict) -> None:
    """Inject a (possibly edited) state snapshot at step k."""
    session.set_state(k, DynamicState(
        t=float(state.get("t", k * session.sim_config.step)),
        k=k,
        x=np.asarray(state["x"], dtype=float),
        v=np.asarray(state["v"], dtype=complex),
        delta=np.asarray(state.get("delta", []), dtype=float),
        omega=np.asarray(state.get("omega", []), dtype=float),
        ep=np.asarray(state.get("ep", []), dtype=float),
    ))


def continue_simulation(session) -> dict:
    """Resume the retained simulator to the horizon after a set_state."""
    res = session.continue_simulation()
    return {"label": res.label, "max_separation_deg": res.max_separation_deg,
            "steps": res.steps}


def query_solution(session, item: str):
    """Read-only solution values (iterations, fill_ins, islands, y0, ...)."""
    return session.query_solution(item)


def topology_snapshots(session, fault) -> dict:
    """Y0/Y1/Y2 admittance triplets for a fault, as coordinate arrays."""
    y0, y1, y2 = session.topology_snapshots(_fault_from_tuple(fault))
    out = {}
    for name, y in (("y0", y0), ("y1", y1), ("y2", y2)):
        rows, cols, re, im = y.to_triplets()
        out[name] = {"dimension": y.n, "rows": rows, "cols": cols,
                     "re": re, "im": im}
    return out


def islands(session) -> list:
    """Connected components of the in-service network."""
    return session.query_solution("islands")


def island_report(session) -> dict:
    """Islands plus which of them lack a slack generator."""
    return session.island_report()


def sample_operating_points(session, count: int, seed: int = 0,
                            workers: int = 1,
                            gen_band=(0.9, 1.1)) -> dict:
    """Step-wise sampling; returns stacked arrays of the saved draws."""
    spec = SamplerSpec.from_case(session.case, count=count, seed=seed,
                                 gen_band=tuple(gen_band))
    records, attempts = collect_operating_points(session.case, spec, workers)
    return {
        "pd": np.array([r.pd for r in records]),
        "qd": np.array([r.qd for r in records]),
        "pg": np.array([r.pg for r in records]),
        "vg": np.array([r.vg for r in records]),
        "attempt": np.array([r.attempt for r in records]),
        "slack_p": np.array([r.slack_p for r in records]),
        "attempts_scanned": attempts,
    }


def generate_dataset(session, count: int, contingencies_per_point: int,
                     seed: int, workers: int, out_dir,
                     step: float = 0.01, horizon: float = 10.0,
                     gen_band=(0.9, 1.1)) -> dict:
    """Sample operating points and run the contingency batch; returns the
    manifest."""
    spec = SamplerSpec.from_case(session.case, count=count, seed=seed,
                                 gen_band=tuple(gen_band))
    cfg = SimulationConfig(step=step, horizon=horizon)
    return _generate_dataset(session.case, spec, contingencies_per_point,
                             workers, out_dir, cfg)


def nn_forward(spec_file, blob_file, x) -> np.ndarray:
    """Validate a network spec/blob pair and run one forward pass."""
    from .nn_runtime import load_network

    net = load_network(spec_file, blob_file)
    return net.forward(np.asarray(x, dtype=float))


def engine_backend() -> str:
    """Which kernel backend is active: compiled or pure-python."""
    return backend_name()


def engine_version() -> str:
    """Engine package version string."""
    return __version__


_SURFACE = [
    load_case, export_case, component_counts, get_parameter, set_parameter,
    set_branch_status, find_branch, solve_power_flow, bus_voltages,
    generator_output, run_simulation, result_column, time_axis,
    get_dynamic_state, set_dynamic_state, continue_simulation, query_solution,
    topology_snapshots, islands, island_report, sample_operating_points,
    generate_dataset, nn_forward, engine_backend, engine_version,
]


def interface_manifest() -> dict:
    """Describe the flat surface; bindings check the digest at bind time."""
    functions = []
    for fn in _SURFACE:
        sig = inspect.signature(fn)
        functions.append({
            "name": fn.__name__,
            "parameters": [
                {"name": p.name,
                 "default": None if p.default is inspect.Parameter.empty
                 else repr(p.default)}
                for p in sig.parameters.values()
            ],
            "doc": (fn.__doc__ or "").strip().splitlines()[0]
            if fn.__doc__ else "",
        })
    digest = hashlib.sha256(
        json.dumps(functions, sort_keys=True).encode()).hexdigest()
    return {"version": __version__, "functions": functions, "digest": digest}


def manifest_digest() -> str:
    return interface_manifest()["digest"]


def write_interface_manifest(path) -> None:
    with open(path, "w") as fh:
        json.dump(interface_manifest(), fh, indent=1, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "/dev/stdout"
    write_interface_manifest(target)
