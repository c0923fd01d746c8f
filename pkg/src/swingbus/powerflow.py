"""Newton-Raphson AC power flow with PV-PQ switching.

Polar mismatch equations over the pre-fault admittance matrix. PV buses whose
aggregate generator reactive power leaves its limits are switched to PQ at the
violated limit (starting from iteration 2); a switched bus returns to PV when
its solved magnitude crosses the setpoint from the side that relaxes the
binding limit. Non-convergence is reported as data, never as an exception,
because samplers branch on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .case import PowerSystemCase
from .errors import DimensionMismatch, InvalidCase
from .network import build_admittance, find_islands
from .sparse import SparseComplexMatrix, SymbolicLu

Q_LIMIT_EPS = 1e-9


@dataclass
class PfOptions:
    tolerance: float = 1e-6
    max_iterations: int = 30
    enable_switching: bool = True
    switch_start_iteration: int = 2
    warm_start: "PowerFlowSolution | None" = None


@dataclass
class PowerFlowSolution:
    vm: np.ndarray  # per-bus voltage magnitude, pu
    va: np.ndarray  # per-bus voltage angle, rad
    gen_p: np.ndarray
    gen_q: np.ndarray
    iterations: int
    converged: bool
    max_mismatch: float
    pv_pq_switches: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def voltages(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)


class _BusModel:
    """Index maps and specified injections shared by mismatch and Jacobian."""

    def __init__(self, case: PowerSystemCase):
        self.case = case
        self.index = case.bus_index()
        n = case.n_buses()
        self.n = n
        self.p_spec = np.zeros(n)
        self.q_load = np.zeros(n)
        self.v_set = np.ones(n)
        self.has_vset = np.zeros(n, dtype=bool)
        self.qmin = np.zeros(n)
        self.qmax = np.zeros(n)
        self.slack = np.zeros(n, dtype=bool)
        self.gen_buses = np.zeros(n, dtype=bool)

        for load in case.loads:
            i = self.index[load.bus]
            self.p_spec[i] -= load.p
            self.q_load[i] += load.q
        for g in case.generators:
            if not g.status:
                continue
            i = self.index[g.bus]
            self.gen_buses[i] = True
            self.qmin[i] += g.qmin
            self.qmax[i] += g.qmax
            if self.has_vset[i] and abs(self.v_set[i] - g.v) > 1e-9:
                raise InvalidCase(
                    f"conflicting voltage setpoints at bus {g.bus}")
            self.v_set[i] = g.v
            self.has_vset[i] = True
            if g.slack:
                self.slack[i] = True
            else:
                self.p_spec[i] += g.p

        for comp in find_islands(case):
            slacks = [b for b in comp if self.slack[self.index[b]]]
            if len(slacks) != 1:
                raise InvalidCase(
                    f"island {comp[0]}..{comp[-1]} has {len(slacks)} slack "
                    "generators, expected exactly 1")

    def static_pv(self) -> np.ndarray:
        return self.gen_buses & ~self.slack

    def static_pq(self) -> np.ndarray:
        return ~self.gen_buses & ~self.slack


def _injections(y: SparseComplexMatrix, v: np.ndarray):
    s = v * np.conj(y.matvec(v))
    return s.real, s.imag


def _polar_jacobian_triplets(y, v, p_calc, q_calc, p_rows, q_rows,
                             th_cols, vm_cols):
    """Standard polar Jacobian entries for the active equation/variable sets.

    p_rows/q_rows map bus -> equation row (-1 when absent); th_cols/vm_cols
    map bus -> variable column (-1 when absent).
    """
    vm = np.abs(v)
    va = np.angle(v)
    rows, cols, vals = [], [], []
    indptr, indices, data = y.indptr, y.indices, y.data
    n = y.n
    for i in range(n):
        pi, qi = p_rows[i], q_rows[i]
        if pi < 0 and qi < 0:
            continue
        for t in range(indptr[i], indptr[i + 1]):
            j = int(indices[t])
            g, b = data[t].real, data[t].imag
            if i == j:
                if pi >= 0 and th_cols[i] >= 0:
                    rows.append(pi)
                    cols.append(th_cols[i])
                    vals.append(-q_calc[i] - b * vm[i] ** 2)
                if pi >= 0 and vm_cols[i] >= 0:
                    rows.append(pi)
                    cols.append(vm_cols[i])
                    vals.append(p_calc[i] / vm[i] + g * vm[i])
                if qi >= 0 and th_cols[i] >= 0:
                    rows.append(qi)
                    cols.append(th_cols[i])
                    vals.append(p_calc[i] - g * vm[i] ** 2)
                if qi >= 0 and vm_cols[i] >= 0:
                    rows.append(qi)
                    cols.append(vm_cols[i])
                    vals.append(q_calc[i] / vm[i] - b * vm[i])
            else:
                aij = va[i] - va[j]
                sn, cs = np.sin(aij), np.cos(aij)
                if pi >= 0 and th_cols[j] >= 0:
                    rows.append(pi)
                    cols.append(th_cols[j])
                    vals.append(vm[i] * vm[j] * (g * sn - b * cs))
                if pi >= 0 and vm_cols[j] >= 0:
                    rows.append(pi)
                    cols.append(vm_cols[j])
                    vals.append(vm[i] * (g * cs + b * sn))
                if qi >= 0 and th_cols[j] >= 0:
                    rows.append(qi)
                    cols.append(th_cols[j])
                    vals.append(-vm[i] * vm[j] * (g * cs + b * sn))
                if qi >= 0 and vm_cols[j] >= 0:
                    rows.append(qi)
                    cols.append(vm_cols[j])
                    vals.append(vm[i] * (g * sn - b * cs))
    return rows, cols, vals


def _maps(p_mask, q_mask):
    n = p_mask.shape[0]
    p_rows = np.full(n, -1, dtype=np.int64)
    q_rows = np.full(n, -1, dtype=np.int64)
    p_rows[p_mask] = np.arange(int(p_mask.sum()))
    q_rows[q_mask] = int(p_mask.sum()) + np.arange(int(q_mask.sum()))
    return p_rows, q_rows


def active_equations(case: PowerSystemCase):
    """Bus ids carrying P equations and Q equations (static classification)."""
    model = _BusModel(case)
    ids = [b.id for b in case.buses]
    p_buses = [ids[i] for i in range(model.n) if not model.slack[i]]
    q_buses = [ids[i] for i in range(model.n) if model.static_pq()[i]]
    return p_buses, q_buses


def compute_mismatch(case: PowerSystemCase, v: np.ndarray) -> np.ndarray:
    """[dP for non-slack buses; dQ for PQ buses] at voltages v, in pu."""
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (case.n_buses(),):
        raise DimensionMismatch(
            f"voltage vector length {v.shape} != bus count {case.n_buses()}")
    model = _BusModel(case)
    y = build_admittance(case)
    p_calc, q_calc = _injections(y, v)
    p_mask = ~model.slack
    q_mask = model.static_pq()
    dp = model.p_spec[p_mask] - p_calc[p_mask]
    dq = -model.q_load[q_mask] - q_calc[q_mask]
    return np.concatenate([dp, dq])


def assemble_jacobian(case: PowerSystemCase, v: np.ndarray) -> SparseComplexMatrix:
    """Polar Jacobian d(P_calc, Q_calc)/d(theta, V) over the static sets.

    Rows follow compute_mismatch ordering; columns are [theta at non-slack
    buses; V at PQ buses]. Values are real, stored in the shared CSR type.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (case.n_buses(),):
        raise DimensionMismatch(
            f"voltage vector length {v.shape} != bus count {case.n_buses()}")
    model = _BusModel(case)
    y = build_admittance(case)
    p_calc, q_calc = _injections(y, v)
    p_mask = ~model.slack
    q_mask = model.static_pq()
    p_rows, q_rows = _maps(p_mask, q_mask)
    rows, cols, vals = _polar_jacobian_triplets(
        y, v, p_calc, q_calc, p_rows, q_rows, p_rows, q_rows)
    m = int(p_mask.sum() + q_mask.sum())
    return SparseComplexMatrix.from_triplets(m, rows, cols, vals)


def solve_power_flow(case: PowerSystemCase,
                     options: PfOptions | None = None) -> PowerFlowSolution:
    """Full Newton iterations on the polar mismatch equations.

    Returns converged=False (never an exception) when the iteration cap is
    reached; raises InvalidCase only for structural defects.
    """
    opts = options or PfOptions()
    model = _BusModel(case)
    n = model.n
    y = build_admittance(case)

    vm = np.ones(n)
    va = np.zeros(n)
    fixed_v = model.has_vset | model.slack
    vm[fixed_v] = model.v_set[fixed_v]
    if opts.warm_start is not None:
        vm = opts.warm_start.vm.copy()
        va = opts.warm_start.va.copy()

    # mode per bus: 0 = PV/slack-style fixed V, 1 = PQ, 2 = PQ at qmax, 3 = PQ at qmin
    mode = np.where(model.static_pq(), 1, 0)
    switches: list[tuple[int, int, str]] = []
    bus_ids = [b.id for b in case.buses]

    converged = False
    iterations = 0
    max_mismatch = np.inf
    symbolic: SymbolicLu | None = None
    symbolic_key = None

    for it in range(1, opts.max_iterations + 1):
        iterations = it
        v = vm * np.exp(1j * va)
        p_calc, q_calc = _injections(y, v)

        if opts.enable_switching and it >= opts.switch_start_iteration:
            barred = set()
            for i in range(n):
                # release a bound bus when its magnitude crosses the setpoint
                if mode[i] == 2 and vm[i] > model.v_set[i]:
                    mode[i] = 0
                    vm[i] = model.v_set[i]
                    switches.append((bus_ids[i], it, "to_pv"))
                    barred.add(i)
                elif mode[i] == 3 and vm[i] < model.v_set[i]:
                    mode[i] = 0
                    vm[i] = model.v_set[i]
                    switches.append((bus_ids[i], it, "to_pv"))
                    barred.add(i)
            v = vm * np.exp(1j * va)
            p_calc, q_calc = _injections(y, v)
            for i in range(n):
                if mode[i] != 0 or model.slack[i] or not model.gen_buses[i] \
                        or i in barred:
                    continue
                q_gen = q_calc[i] + model.q_load[i]
                if q_gen > model.qmax[i] + Q_LIMIT_EPS:
                    mode[i] = 2
                    switches.append((bus_ids[i], it, "to_pq_qmax"))
                elif q_gen < model.qmin[i] - Q_LIMIT_EPS:
                    mode[i] = 3
                    switches.append((bus_ids[i], it, "to_pq_qmin"))

        p_mask = ~model.slack
        q_mask = mode > 0
        q_spec = -model.q_load.copy()
        q_spec[mode == 2] = model.qmax[mode == 2] - model.q_load[mode == 2]
        q_spec[mode == 3] = model.qmin[mode == 3] - model.q_load[mode == 3]

        dp = model.p_spec[p_mask] - p_calc[p_mask]
        dq = q_spec[q_mask] - q_calc[q_mask]
        mism = np.concatenate([dp, dq])
        max_mismatch = float(np.max(np.abs(mism))) if mism.size else 0.0
        if max_mismatch <= opts.tolerance:
            converged = True
            break

        p_rows, q_rows = _maps(p_mask, q_mask)
        rows, cols, vals = _polar_jacobian_triplets(
            y, v, p_calc, q_calc, p_rows, q_rows, p_rows, q_rows)
        m = int(p_mask.sum() + q_mask.sum())
        jac = SparseComplexMatrix.from_triplets(m, rows, cols, vals)

        key = (tuple(mode.tolist()),)
        if symbolic is None or symbolic_key != key:
            symbolic = SymbolicLu(jac)
            symbolic_key = key
        dx = symbolic.factor(jac).solve(mism).real

        n_p = int(p_mask.sum())
        va[p_mask] += dx[:n_p]
        vm[q_mask] += dx[n_p:]

    v = vm * np.exp(1j * va)
    p_calc, q_calc = _injections(y, v)
    gen_p, gen_q = _per_generator_outputs(case, model, p_calc, q_calc)
    return PowerFlowSolution(
        vm=vm, va=va, gen_p=gen_p, gen_q=gen_q,
        iterations=iterations, converged=converged,
        max_mismatch=max_mismatch, pv_pq_switches=switches,
    )


def _per_generator_outputs(case, model, p_calc, q_calc):
    """Distribute bus-level injections back onto generator units."""
    gen_p = np.zeros(len(case.generators))
    gen_q = np.zeros(len(case.generators))
    load_p = np.zeros(model.n)
    for load in case.loads:
        load_p[model.index[load.bus]] += load.p
    by_bus: dict[int, list[int]] = {}
    for gi, g in enumerate(case.generators):
        if g.status:
            by_bus.setdefault(model.index[g.bus], []).append(gi)
    for i, gens in by_bus.items():
        q_total = q_calc[i] + model.q_load[i]
        span = sum(case.generators[gi].qmax - case.generators[gi].qmin
                   for gi in gens)
        for gi in gens:
            g = case.generators[gi]
            if g.slack:
                # the slack unit covers the bus balance left by the fixed units
                gen_p[gi] = p_calc[i] + load_p[i] - sum(
                    case.generators[gj].p for gj in gens
                    if gj != gi and not case.generators[gj].slack)
            else:
                gen_p[gi] = g.p
            if span > 0:
                gen_q[gi] = q_total * (g.qmax - g.qmin) / span
            else:
                gen_q[gi] = q_total / len(gens)
    return gen_p, gen_q
