"""Time-domain transient stability simulation by the alternating approach.

Each step integrates the device ODEs with the implicit trapezoidal rule
against the current voltage guess, recomputes the Norton injection currents,
and re-solves the sparse network equations, iterating until the voltage
update falls below tolerance. Devices are represented by Norton equivalents
folded into the stage admittance matrix; the network is refactorized only at
fault application and clearing.

The stock device is the second-order classic generator (constant EMF behind
transient reactance). Other device models plug in through the same small
interface (see nn_runtime for the neural adapter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .case import PowerSystemCase
from .errors import InnerLoopDiverged, NotConverged, OutOfRange
from .network import (
    FaultEvent,
    Stage,
    augment_admittance,
    build_admittance,
    device_norton_shunts,
    load_norton_shunts,
)
from .powerflow import PowerFlowSolution
from .sparse import SymbolicLu


@dataclass
class SimulationConfig:
    step: float = 0.01           # s
    horizon: float = 10.0        # s
    tolerance: float = 1e-6      # pu, on the inner voltage iteration
    max_inner_iterations: int = 20
    instability_threshold_deg: float = 360.0

    def validate(self):
        if not 0 < self.step <= self.horizon:
            raise ValueError("need 0 < step <= horizon")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class DynamicState:
    """System state at one instant: device states plus bus voltages."""

    t: float
    k: int
    x: np.ndarray       # concatenated device state vector
    v: np.ndarray       # complex bus voltages
    delta: np.ndarray   # per-generator rotor angle, rad
    omega: np.ndarray   # per-generator speed, pu
    ep: np.ndarray      # per-generator internal EMF magnitude, pu

    def copy(self) -> "DynamicState":
        return DynamicState(self.t, self.k, self.x.copy(), self.v.copy(),
                            self.delta.copy(), self.omega.copy(),
                            self.ep.copy())


class ClassicGenerator:
    """Constant EMF behind transient reactance; swing equation rotor."""

    state_size = 2

    def __init__(self, gen, omega_s):
        self.xdp = gen.xdp
        self.inertia = gen.h
        self.damping = gen.d
        self.omega_s = omega_s
        self.norton_y = 1.0 / (1j * gen.xdp)
        self.ep = 1.0
        self.pm = 0.0

    def initialize(self, v_term: complex, p: float, q: float) -> np.ndarray:
        i_term = np.conj(complex(p, q) / v_term)
        e = v_term + 1j * self.xdp * i_term
        self.ep = abs(e)
        delta0 = float(np.angle(e))
        # fix P_m with the same expression the derivative uses, so the
        # initial point is an equilibrium to the last bit
        self.pm = self._pe(delta0, v_term)
        return np.array([delta0, 1.0])

    def _pe(self, delta, v):
        return self.ep * abs(v) * math.sin(delta - math.atan2(v.imag, v.real)) \
            / self.xdp

    def derivative(self, x, v) -> np.ndarray:
        acc = (self.pm - self._pe(x[0], v)
               - self.damping * (x[1] - 1.0)) / (2.0 * self.inertia)
        return np.array([self.omega_s * (x[1] - 1.0), acc])

    def injection(self, x) -> complex:
        return self.ep * complex(math.cos(x[0]), math.sin(x[0])) * self.norton_y

    def trapezoidal_update(self, x_old, f_old, v, h) -> np.ndarray:
        """Exact implicit-trapezoidal step for fixed terminal voltage.

        The two-state system reduces to one scalar equation in the new speed;
        Newton converges in a handful of iterations.
        """
        a = x_old[0] + 0.5 * h * f_old[0]
        b = x_old[1] + 0.5 * h * f_old[1]
        vm = abs(v)
        th = math.atan2(v.imag, v.real)
        c1 = self.ep * vm / self.xdp
        k_delta = 0.5 * h * self.omega_s
        k_omega = h / (4.0 * self.inertia)
        omega = float(x_old[1])
        for _ in range(60):
            delta = a + k_delta * (omega - 1.0)
            pe = c1 * math.sin(delta - th)
            g = omega - b - k_omega * (self.pm - pe
                                       - self.damping * (omega - 1.0))
            dg = 1.0 + k_omega * (c1 * math.cos(delta - th) * k_delta
                                  + self.damping)
            step = g / dg
            omega -= step
            if abs(step) <= 1e-14:
                break
        return np.array([a + k_delta * (omega - 1.0), omega])

    def angle(self, x) -> float:
        return float(x[0])

    def speed(self, x) -> float:
        return float(x[1])

    def emf(self) -> float:
        return self.ep

    def electrical_power(self, x, v) -> float:
        return self._pe(x[0], v)

    def terminal_current(self, x, v) -> complex:
        e = self.ep * complex(math.cos(x[0]), math.sin(x[0]))
        return (e - v) * self.norton_y


def generic_trapezoidal_update(device, x_old, f_old, v, h,
                               tol=1e-12, max_iter=50) -> np.ndarray:
    """Implicit trapezoidal solve for an arbitrary device derivative.

    Newton iteration on r(x) = x - x_old - h/2 (f_old + f(x, v)) with a
    finite-difference Jacobian; devices with analytic structure override this.
    """
    m = device.state_size
    x = x_old + h * f_old  # explicit predictor
    eye = np.eye(m)
    for _ in range(max_iter):
        f = device.derivative(x, v)
        r = x - x_old - 0.5 * h * (f_old + f)
        if np.max(np.abs(r)) <= tol:
            return x
        jac = np.empty((m, m))
        eps = 1e-7
        for j in range(m):
            xp = x.copy()
            xp[j] += eps
            jac[:, j] = (device.derivative(xp, v) - f) / eps
        step = np.linalg.solve(eye - 0.5 * h * jac, r)
        x = x - step
        if np.max(np.abs(step)) <= tol:
            return x
    return x


def build_devices(case: PowerSystemCase, omega_s: float):
    """One device model per in-service generator, honoring neural overrides."""
    neural = {nd.generator: nd for nd in case.neural_devices}
    devices = []
    gen_rows = []
    for gi, gen in enumerate(case.generators):
        if not gen.status:
            continue
        if gi in neural:
            from .nn_runtime import load_network, as_derivative_model

            nd = neural[gi]
            net = load_network(nd.spec_file, nd.blob_file)
            devices.append(as_derivative_model(net, nd.layout, gen, omega_s))
        else:
            devices.append(ClassicGenerator(gen, omega_s))
        gen_rows.append(gi)
    return devices, gen_rows


def init_dynamic_state(case: PowerSystemCase, pf: PowerFlowSolution,
                       devices=None, gen_rows=None) -> DynamicState:
    """Equilibrium state reproducing the power-flow operating point."""
    if not pf.converged:
        raise NotConverged("dynamic initialization needs a converged power flow")
    omega_s = 2.0 * math.pi * case.frequency_hz
    if devices is None:
        devices, gen_rows = build_devices(case, omega_s)
    index = case.bus_index()
    v = pf.voltages
    xs = []
    for dev, gi in zip(devices, gen_rows):
        gen = case.generators[gi]
        xs.append(dev.initialize(v[index[gen.bus]], pf.gen_p[gi], pf.gen_q[gi]))
    x = np.concatenate(xs) if xs else np.zeros(0)
    delta = np.array([d.angle(xi) for d, xi in zip(devices, xs)])
    omega = np.array([d.speed(xi) for d, xi in zip(devices, xs)])
    ep = np.array([d.emf() for d in devices])
    return DynamicState(t=0.0, k=0, x=x, v=v.astype(np.complex128),
                        delta=delta, omega=omega, ep=ep)


@dataclass
class SimulationResult:
    time: np.ndarray
    delta: np.ndarray          # (steps+1, n_dev)
    omega: np.ndarray
    ep: np.ndarray
    electrical_power: np.ndarray
    p_terminal: np.ndarray
    q_terminal: np.ndarray
    vm: np.ndarray             # (steps+1, n_bus)
    label: str
    max_separation_deg: float
    inner_iterations: np.ndarray
    effective_fault: FaultEvent | None = None
    gen_buses: list[int] = field(default_factory=list)

    def extract(self, item: str) -> np.ndarray:
        table = {
            "time": self.time,
            "rotor_angles": self.delta,
            "rotor_speeds": self.omega,
            "internal_emf": self.ep,
            "electrical_power": self.electrical_power,
            "active_power": self.p_terminal,
            "reactive_power": self.q_terminal,
            "bus_voltage_magnitudes": self.vm,
            "regulator_outputs": np.zeros((self.time.shape[0], 0)),
        }
        if item not in table:
            raise KeyError(f"unknown result column {item!r}; "
                           f"choose from {sorted(table)}")
        return table[item]

    @property
    def steps(self) -> int:
        return self.time.shape[0] - 1


def label_stability(delta: np.ndarray,
                    threshold_deg: float = 360.0) -> tuple[str, float]:
    """Instability = raw pairwise rotor-angle spread exceeding the threshold.

    Ties at exactly the threshold count as stable.
    """
    if delta.shape[1] == 0:
        return "stable", 0.0
    spread = delta.max(axis=1) - delta.min(axis=1)
    max_sep = float(np.degrees(spread.max()))
    return ("unstable" if max_sep > threshold_deg else "stable"), max_sep


class TransientSimulator:
    """Owns one simulation: stage matrices, device states, records.

    Instances are single-threaded; run several instances for parallelism.
    """

    def __init__(self, case: PowerSystemCase, pf: PowerFlowSolution,
                 fault: FaultEvent | None = None,
                 config: SimulationConfig | None = None):
        self.config = config or SimulationConfig()
        self.config.validate()
        if not pf.converged:
            raise NotConverged("simulation needs a converged power flow")
        self.case = case
        self.pf = pf
        self.index = case.bus_index()
        self.n_bus = case.n_buses()
        self.omega_s = 2.0 * math.pi * case.frequency_hz

        h = self.config.step
        self.total_steps = int(math.floor(self.config.horizon / h + 1e-9))
        if fault is not None:
            fault.validate(case, horizon=self.config.horizon)
            k_on = int(round(fault.t_on / h))
            k_clear = max(int(round(fault.t_clear / h)), k_on)
            self.fault = FaultEvent(branch=fault.branch,
                                    location=fault.location,
                                    t_on=k_on * h, t_clear=k_clear * h,
                                    trip_branch=fault.trip_branch)
            self.k_on, self.k_clear = k_on, k_clear
        else:
            self.fault = None
            self.k_on = self.k_clear = None

        self.devices, self.gen_rows = build_devices(case, self.omega_s)
        self.device_bus = [self.index[case.generators[gi].bus]
                           for gi in self.gen_rows]
        sizes = [d.state_size for d in self.devices]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.slices = [slice(offsets[i], offsets[i + 1])
                       for i in range(len(sizes))]
        self.state_len = int(offsets[-1])

        self._shunts = device_norton_shunts(case) + load_norton_shunts(
            case, pf.vm, self.index)
        self._stage_cache: dict[Stage, tuple] = {}

        n_rec = self.total_steps + 1
        self._x = np.zeros((n_rec, self.state_len))
        self._v = np.zeros((n_rec, self.n_bus), dtype=np.complex128)
        self._inner = np.zeros(n_rec, dtype=np.int64)

        state0 = init_dynamic_state(case, pf, self.devices, self.gen_rows)
        self._x[0] = state0.x
        self._v[0] = state0.v
        self.k = 0
        self._stage = None
        self._enter_stage(self._stage_for(0), resolve_from=state0.x)

    # -- staging ----------------------------------------------------------

    def _stage_for(self, k: int) -> Stage:
        if self.fault is None or k < self.k_on:
            return Stage.PRE_FAULT
        if k < self.k_clear:
            return Stage.DURING_FAULT
        return Stage.POST_FAULT

    def _enter_stage(self, stage: Stage, resolve_from: np.ndarray):
        if stage not in self._stage_cache:
            y = build_admittance(self.case, stage, self.fault)
            y = augment_admittance(y, self._shunts, self.index)
            lu = SymbolicLu(y).factor(y)
            self._stage_cache[stage] = (y, lu)
        self._stage = stage
        self._y, self._lu = self._stage_cache[stage]
        self._dim = self._y.n
        # algebraic jump: re-solve the network from the injected currents
        v_full = self._network_solve(resolve_from)
        self._v[self.k] = v_full[:self.n_bus]
        self._v_full = v_full
        self._f_old = self._derivatives(resolve_from, v_full)

    def _network_solve(self, x: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self._dim, dtype=np.complex128)
        for dev, sl, bus in zip(self.devices, self.slices, self.device_bus):
            rhs[bus] += dev.injection(x[sl])
        return self._lu.solve(rhs)

    def _derivatives(self, x: np.ndarray, v_full: np.ndarray) -> np.ndarray:
        f = np.zeros(self.state_len)
        for dev, sl, bus in zip(self.devices, self.slices, self.device_bus):
            f[sl] = dev.derivative(x[sl], v_full[bus])
        return f

    # -- stepping ---------------------------------------------------------

    def _advance(self):
        """One integration step k -> k+1 with the alternating inner loop."""
        k = self.k
        stage = self._stage_for(k)
        if stage is not self._stage:
            self._enter_stage(stage, resolve_from=self._x[k])

        h = self.config.step
        x_old = self._x[k]
        f_old = self._f_old
        v_guess = self._v_full
        x_new = x_old.copy()
        converged = False
        dv = np.inf
        for it in range(1, self.config.max_inner_iterations + 1):
            for dev, sl, bus in zip(self.devices, self.slices,
                                    self.device_bus):
                x_new[sl] = dev.trapezoidal_update(
                    x_old[sl], f_old[sl], v_guess[bus], h)
            v_new = self._network_solve(x_new)
            dv = float(np.max(np.abs(v_new - v_guess)))
            v_guess = v_new
            if dv <= self.config.tolerance:
                converged = True
                break
        if not converged:
            raise InnerLoopDiverged((k + 1) * h, dv,
                                    last_state=(x_new.copy(), v_guess.copy()))

        self.k = k + 1
        self._x[self.k] = x_new
        self._v[self.k] = v_guess[:self.n_bus]
        self._v_full = v_guess
        self._inner[self.k] = it
        self._f_old = self._derivatives(x_new, v_guess)

    def step_once(self) -> DynamicState:
        """Advance one integration step and return the new state."""
        if self.k >= self.total_steps:
            raise OutOfRange(f"horizon reached at step {self.k}")
        self._advance()
        return self._state_at(self.k)

    def run(self) -> "SimulationResult":
        while self.k < self.total_steps:
            self._advance()
        return self.result()

    # -- state access -------------------------------------------------------

    def _state_at(self, k: int) -> DynamicState:
        x = self._x[k].copy()
        delta = np.array([d.angle(x[sl])
                          for d, sl in zip(self.devices, self.slices)])
        omega = np.array([d.speed(x[sl])
                          for d, sl in zip(self.devices, self.slices)])
        ep = np.array([d.emf() for d in self.devices])
        return DynamicState(t=k * self.config.step, k=k, x=x,
                            v=self._v[k].copy(), delta=delta, omega=omega,
                            ep=ep)

    def get_state(self, k: int) -> DynamicState:
        if not 0 <= k <= self.k:
            raise OutOfRange(f"step {k} outside recorded range [0, {self.k}]")
        return self._state_at(k)

    def set_state(self, k: int, state: DynamicState):
        """Inject a state at step k and continue the run from there."""
        if not 0 <= k <= self.total_steps:
            raise OutOfRange(f"step {k} outside horizon [0, {self.total_steps}]")
        if state.x.shape != (self.state_len,):
            raise OutOfRange(
                f"state vector length {state.x.shape} != {self.state_len}")
        self.k = k
        self._x[k] = state.x
        if k + 1 <= self.total_steps:
            self._x[k + 1:] = 0.0
            self._v[k + 1:] = 0.0
            self._inner[k + 1:] = 0
        self._stage = None  # force stage re-entry and algebraic re-solve
        self._enter_stage(self._stage_for(k), resolve_from=self._x[k])

    # -- results ------------------------------------------------------------

    def result(self) -> SimulationResult:
        upto = self.k + 1
        h = self.config.step
        n_dev = len(self.devices)
        delta = np.zeros((upto, n_dev))
        omega = np.zeros((upto, n_dev))
        pe = np.zeros((upto, n_dev))
        p_term = np.zeros((upto, n_dev))
        q_term = np.zeros((upto, n_dev))
        for j, (dev, sl, bus) in enumerate(
                zip(self.devices, self.slices, self.device_bus)):
            for k in range(upto):
                xk = self._x[k, sl]
                vk = self._v[k, bus]
                delta[k, j] = dev.angle(xk)
                omega[k, j] = dev.speed(xk)
                pe[k, j] = dev.electrical_power(xk, vk)
                s = vk * np.conj(dev.terminal_current(xk, vk))
                p_term[k, j] = s.real
                q_term[k, j] = s.imag
        ep = np.tile([d.emf() for d in self.devices], (upto, 1))
        label, sep = label_stability(
            delta, self.config.instability_threshold_deg)
        return SimulationResult(
            time=np.arange(upto) * h,
            delta=delta, omega=omega, ep=ep,
            electrical_power=pe, p_terminal=p_term, q_terminal=q_term,
            vm=np.abs(self._v[:upto]),
            label=label, max_separation_deg=sep,
            inner_iterations=self._inner[:upto].copy(),
            effective_fault=self.fault,
            gen_buses=[self.case.generators[gi].bus for gi in self.gen_rows],
        )


def simulate(case: PowerSystemCase, pf: PowerFlowSolution,
             fault: FaultEvent | None = None,
             config: SimulationConfig | None = None) -> SimulationResult:
    """Run from t=0 to the horizon and label the trajectory."""
    return TransientSimulator(case, pf, fault, config).run()
