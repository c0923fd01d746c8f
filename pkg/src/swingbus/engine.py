"""Session facade: case access, parameter get/set, solution queries, runs.

A session owns one loaded case and the artifacts computed from it. Session
state moves loaded -> solved -> simulated; any parameter mutation drops the
downstream artifacts back to loaded so stale solutions can never be read.
Mutating calls are appended to a replayable call log.
"""

from __future__ import annotations

import numpy as np

from .case import PowerSystemCase
from .dynamics import (
    DynamicState,
    SimulationConfig,
    SimulationResult,
    TransientSimulator,
)
from .errors import (
    ConstraintViolation,
    NotYetComputed,
    UnknownComponent,
    UnknownField,
)
from .network import FaultEvent, export_topology_snapshots, find_islands
from .powerflow import PfOptions, PowerFlowSolution, solve_power_flow
from .sparse import SymbolicLu

# settable fields per component kind: field -> constraint checker
# (checker returns an error string or None; case is available for context)


def _positive(value, _case, _rec):
    return None if value > 0 else f"must be > 0, got {value}"


def _non_negative(value, _case, _rec):
    return None if value >= 0 else f"must be >= 0, got {value}"


def _free(_value, _case, _rec):
    return None


def _bool(value, _case, _rec):
    return None if isinstance(value, (bool, np.bool_)) else "must be a boolean"


def _load_p(value, _case, rec):
    if not rec.pmin <= value <= rec.pmax:
        return f"outside sampling limits [{rec.pmin}, {rec.pmax}]"
    return None


def _load_q(value, _case, rec):
    if not rec.qmin <= value <= rec.qmax:
        return f"outside sampling limits [{rec.qmin}, {rec.qmax}]"
    return None


def _gen_p(value, _case, rec):
    if not rec.pmin <= value <= rec.pmax:
        return f"outside active-power limits [{rec.pmin}, {rec.pmax}]"
    return None


def _gen_v(value, _case, _rec):
    return None if 0.5 <= value <= 1.5 else "voltage setpoint outside [0.5, 1.5]"


_SETTABLE = {
    "bus": {"base_kv": _positive, "gs": _free, "bs": _free},
    "branch": {"r": _non_negative, "x": _free, "b": _free,
               "tap": _positive, "shift": _free, "status": _bool},
    "generator": {"p": _gen_p, "v": _gen_v, "qmin": _free, "qmax": _free,
                  "pmin": _free, "pmax": _free, "h": _positive,
                  "d": _non_negative, "xdp": _positive, "status": _bool},
    "load": {"p": _load_p, "q": _load_q, "pmin": _free, "pmax": _free,
             "qmin": _free, "qmax": _free},
    "case": {"frequency_hz": _positive},
}

_KIND_LISTS = {
    "bus": "buses",
    "branch": "branches",
    "generator": "generators",
    "load": "loads",
}

_FIELD_ALIASES = {"P": "p", "Q": "q", "V": "v", "H": "h", "D": "d",
                  "X'd": "xdp", "B": "b", "R": "r", "X": "x"}


class EngineSession:
    def __init__(self, case: PowerSystemCase):
        case.validate()
        self.case = case
        self.pf: PowerFlowSolution | None = None
        self.sim_result: SimulationResult | None = None
        self.simulator: TransientSimulator | None = None
        self.last_fault: FaultEvent | None = None
        self.sim_config: SimulationConfig | None = None
        self.call_log: list[tuple] = []
        self._y0_cache = None
        self._factor_cache = None

    # -- model API ----------------------------------------------------------

    @classmethod
    def load(cls, path) -> "EngineSession":
        return cls(PowerSystemCase.load(path))

    def export(self, path) -> None:
        self.case.save(path)

    def component_counts(self) -> dict:
        return {
            "buses": len(self.case.buses),
            "branches": len(self.case.branches),
            "generators": len(self.case.generators),
            "loads": len(self.case.loads),
        }

    @property
    def state(self) -> str:
        if self.sim_result is not None:
            return "simulated"
        if self.pf is not None:
            return "solved"
        return "loaded"

    def _invalidate(self):
        self.pf = None
        self.sim_result = None
        self.simulator = None
        self.sim_config = None
        self._y0_cache = None
        self._factor_cache = None

    # -- parameter API --------------------------------------------------------

    def _record(self, kind: str, index: int):
        if kind == "case":
            return self.case
        try:
            records = getattr(self.case, _KIND_LISTS[kind])
        except KeyError:
            raise UnknownComponent(
                f"unknown component kind {kind!r}; "
                f"expected one of {sorted(_KIND_LISTS) + ['case']}") from None
        if not 0 <= index < len(records):
            raise UnknownComponent(
                f"{kind} index {index} out of range [0, {len(records)})")
        return records[index]

    def get_parameter(self, kind: str, index: int, field: str):
        rec = self._record(kind, index)
        field = _FIELD_ALIASES.get(field, field)
        if not hasattr(rec, field):
            raise UnknownField(f"{kind} has no field {field!r}")
        return getattr(rec, field)

    def set_parameter(self, kind: str, index: int, field: str, value,
                      force: bool = False):
        rec = self._record(kind, index)
        field = _FIELD_ALIASES.get(field, field)
        if not hasattr(rec, field):
            raise UnknownField(f"{kind} has no field {field!r}")
        allowed = _SETTABLE.get(kind, {})
        if field not in allowed:
            raise ConstraintViolation(f"{kind}.{field} is read-only")
        if not force:
            problem = allowed[field](value, self.case, rec)
            if problem:
                raise ConstraintViolation(f"{kind}[{index}].{field}: {problem}")
        setattr(rec, field, type(getattr(rec, field))(value))
        self.call_log.append(("set_parameter", kind, index, field, value,
                              force))
        self._invalidate()

    def set_branch_status(self, branch: int, in_service: bool) -> dict:
        rec = self._record("branch", branch)
        rec.status = bool(in_service)
        self.call_log.append(("set_branch_status", branch, bool(in_service)))
        self._invalidate()
        return self.island_report()

    def island_report(self) -> dict:
        islands = find_islands(self.case)
        slack_buses = {g.bus for g in self.case.generators
                       if g.slack and g.status}
        missing = [i for i, comp in enumerate(islands)
                   if not slack_buses & set(comp)]
        return {
            "islands": islands,
            "n_islands": len(islands),
            "islands_without_slack": missing,
        }

    # -- function API --------------------------------------------------------

    def run(self, function: str, **args):
        if function == "power_flow":
            return self.run_power_flow(**args)
        if function == "simulation":
            return self.run_simulation(**args)
        raise UnknownComponent(
            f"unknown function {function!r}; expected power_flow or simulation")

    def run_power_flow(self, **options) -> PowerFlowSolution:
        opts = PfOptions(**options) if options else PfOptions()
        self.pf = solve_power_flow(self.case, opts)
        self.sim_result = None
        self.simulator = None
        self._y0_cache = None
        self._factor_cache = None
        self.call_log.append(("run", "power_flow", sorted(options.items())))
        return self.pf

    def run_simulation(self, fault: FaultEvent | None = None,
                       **config) -> SimulationResult:
        if self.pf is None:
            raise NotYetComputed("simulation", "run(power_flow)")
        cfg = SimulationConfig(**config) if config else SimulationConfig()
        self.simulator = TransientSimulator(self.case, self.pf, fault, cfg)
        self.sim_result = self.simulator.run()
        self.sim_config = cfg
        self.last_fault = self.simulator.fault
        self.call_log.append((
            "run", "simulation",
            None if fault is None else (fault.branch, fault.location,
                                        fault.t_on, fault.t_clear,
                                        fault.trip_branch),
            sorted(config.items()),
        ))
        return self.sim_result

    def get_state(self, k: int) -> DynamicState:
        if self.simulator is None:
            raise NotYetComputed("dynamic state", "run(simulation)")
        return self.simulator.get_state(k)

    def set_state(self, k: int, state: DynamicState):
        if self.simulator is None:
            raise NotYetComputed("dynamic state", "run(simulation)")
        self.simulator.set_state(k, state)

    def continue_simulation(self) -> SimulationResult:
        if self.simulator is None:
            raise NotYetComputed("simulation", "run(simulation)")
        self.sim_result = self.simulator.run()
        return self.sim_result

    # -- solution API ----------------------------------------------------------

    def _require_pf(self, item):
        if self.pf is None:
            raise NotYetComputed(item, "run(power_flow)")
        return self.pf

    def _network_factors(self):
        if self._factor_cache is None:
            y0 = self._snapshot_y0()
            self._factor_cache = SymbolicLu(y0).factor(y0)
        return self._factor_cache

    def _snapshot_y0(self):
        if self._y0_cache is None:
            pf = self._require_pf("admittance snapshot")
            from .network import (
                augment_admittance,
                build_admittance,
                device_norton_shunts,
                load_norton_shunts,
            )

            index = self.case.bus_index()
            devices = device_norton_shunts(self.case) + load_norton_shunts(
                self.case, pf.vm, index)
            self._y0_cache = augment_admittance(
                build_admittance(self.case), devices, index)
        return self._y0_cache

    def topology_snapshots(self, fault: FaultEvent):
        pf = self._require_pf("topology snapshots")
        return export_topology_snapshots(self.case, fault, v_mag=pf.vm)

    def query_solution(self, item: str):
        """Read-only view onto computed artifacts; see _QUERIES for names."""
        if item in ("iterations", "converged", "max_mismatch",
                    "pv_pq_switches"):
            pf = self._require_pf(item)
            return getattr(pf, item)
        if item == "bus_voltages":
            pf = self._require_pf(item)
            return pf.vm.copy(), pf.va.copy()
        if item == "fill_ins":
            self._require_pf(item)
            return self._network_factors().fill_in_count
        if item == "lu_lower":
            self._require_pf(item)
            return self._network_factors().lower
        if item == "lu_upper":
            self._require_pf(item)
            return self._network_factors().upper
        if item == "node_ordering":
            self._require_pf(item)
            return self._network_factors().perm.copy()
        if item == "y0":
            return self._snapshot_y0()
        if item in ("y1", "y2"):
            if self.last_fault is None:
                raise NotYetComputed(item, "run(simulation, fault) or "
                                           "topology_snapshots(fault)")
            snaps = self.topology_snapshots(self.last_fault)
            return snaps[1] if item == "y1" else snaps[2]
        if item == "islands":
            return find_islands(self.case)
        if item == "events":
            if self.sim_result is None:
                raise NotYetComputed(item, "run(simulation)")
            return [] if self.last_fault is None else [self.last_fault]
        if item == "integration_step":
            if self.sim_config is None:
                raise NotYetComputed(item, "run(simulation)")
            return self.sim_config.step
        if item == "simulation_time":
            if self.sim_config is None:
                raise NotYetComputed(item, "run(simulation)")
            return self.sim_config.horizon
        if item in ("label", "max_separation_deg"):
            if self.sim_result is None:
                raise NotYetComputed(item, "run(simulation)")
            return getattr(self.sim_result, item)
        if item == "inner_iteration_stats":
            if self.sim_result is None:
                raise NotYetComputed(item, "run(simulation)")
            inner = self.sim_result.inner_iterations
            return {"max": int(inner.max()), "total": int(inner.sum())}
        raise UnknownField(f"unknown solution item {item!r}")

    def extract(self, column: str) -> np.ndarray:
        if self.sim_result is None:
            raise NotYetComputed(column, "run(simulation)")
        return self.sim_result.extract(column)


def replay(case: PowerSystemCase, call_log) -> EngineSession:
    """Re-run a recorded call log on a fresh session of the same case."""
    session = EngineSession(case.copy())
    for entry in call_log:
        op = entry[0]
        if op == "set_parameter":
            _, kind, index, field, value, force = entry
            session.set_parameter(kind, index, field, value, force)
        elif op == "set_branch_status":
            _, branch, status = entry
            session.set_branch_status(branch, status)
        elif op == "run" and entry[1] == "power_flow":
            session.run_power_flow(**dict(entry[2]))
        elif op == "run" and entry[1] == "simulation":
            fault = None
            if entry[2] is not None:
                b, lam, t0, t1, trip = entry[2]
                fault = FaultEvent(branch=b, location=lam, t_on=t0,
                                   t_clear=t1, trip_branch=trip)
            session.run_simulation(fault, **dict(entry[3]))
        else:
            raise ValueError(f"unreplayable log entry {entry!r}")
    return session
