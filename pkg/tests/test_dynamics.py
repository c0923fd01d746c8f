"""Time-domain simulation: initialization, stepping, staging, labels, state IO."""

import math

import numpy as np
import pytest

from conftest import make_smib
from oracles import (
    dense_admittance,
    equal_area_cct,
    rk4_multi_machine,
    smib_equilibrium,
)
from swingbus.case import Generator
from swingbus.dynamics import (
    ClassicGenerator,
    SimulationConfig,
    TransientSimulator,
    init_dynamic_state,
    label_stability,
    simulate,
)
from swingbus.errors import NotConverged, OutOfRange
from swingbus.network import FaultEvent
from swingbus.powerflow import solve_power_flow

OMEGA_S_50 = 2 * math.pi * 50.0


def classic(xdp=0.3, h=3.5, d=0.0, omega_s=OMEGA_S_50):
    gen = Generator(bus=1, p=0.0, v=1.0, xdp=xdp, h=h, d=d)
    return ClassicGenerator(gen, omega_s)


def smib_oracle_setup(case):
    """Independent initialization of the two-machine SMIB system."""
    x_line = case.branches[0].x
    xdp = case.generators[0].xdp
    xdp_ib = case.generators[1].xdp
    p = case.generators[0].p
    e1, d1, pm1, e2, d2 = smib_equilibrium(p, x_line / 2.0, xdp, xdp_ib)
    params = [
        {"ep": e1, "xdp": xdp, "H": case.generators[0].h,
         "D": case.generators[0].d, "pm": pm1},
        {"ep": e2, "xdp": xdp_ib, "H": case.generators[1].h,
         "D": 0.0, "pm": -pm1},
    ]
    ydense = dense_admittance(case)
    for m, b in enumerate((0, 1)):
        ydense[b, b] += 1.0 / (1j * params[m]["xdp"])
    x0 = np.array([d1, 1.0, d2, 1.0])
    return ydense, params, x0


class TestInitialization:
    def test_no_load_generator(self):
        dev = classic()
        x0 = dev.initialize(1.0 + 0j, 0.0, 0.0)
        assert dev.ep == 1.0
        assert x0[0] == 0.0
        assert x0[1] == 1.0

    def test_loaded_generator_closed_form(self):
        dev = classic(xdp=0.3)
        x0 = dev.initialize(1.0 + 0j, 0.8, 0.2)
        # E = 1 + 0.3j*(0.8 - 0.2j) = 1.06 + 0.24j
        assert abs(dev.ep - abs(complex(1.06, 0.24))) < 1e-12
        assert abs(x0[0] - math.atan2(0.24, 1.06)) < 1e-12
        assert abs(dev.ep - 1.0868302) < 1e-6
        assert abs(x0[0] - 0.2226609) < 1e-6

    def test_ieee39_initial_derivatives_vanish(self, ieee39):
        pf = solve_power_flow(ieee39)
        state = init_dynamic_state(ieee39, pf)
        sim = TransientSimulator(ieee39, pf)
        f0 = sim._derivatives(state.x, state.v)
        assert np.max(np.abs(f0)) <= 1e-8

    def test_requires_converged_power_flow(self, ieee39):
        pf = solve_power_flow(ieee39)
        pf.converged = False
        with pytest.raises(NotConverged):
            init_dynamic_state(ieee39, pf)


class TestDeviceModel:
    def test_equilibrium_derivative_is_zero(self):
        dev = classic()
        x0 = dev.initialize(complex(1.02, 0.05), 0.7, 0.1)
        f = dev.derivative(x0, complex(1.02, 0.05))
        assert np.max(np.abs(f)) < 1e-14

    def test_speed_deviation_drives_angle(self):
        dev = classic(d=0.0)
        dev.ep, dev.pm = 1.0, 0.0
        # with pe = 0 (v aligned with delta=0 gives sin=0) and omega = 1.01
        f = dev.derivative(np.array([0.0, 1.01]), 1.0 + 0j)
        assert abs(f[0] - 0.01 * OMEGA_S_50) < 1e-12
        assert abs(f[1]) < 1e-15

    def test_injection_closed_forms(self):
        dev = classic(xdp=0.2)
        dev.ep = 1.0
        assert abs(dev.injection(np.array([0.0, 1.0])) - (-5j)) < 1e-12
        assert abs(dev.injection(np.array([math.pi / 2, 1.0])) - 5.0) < 1e-12

    def test_electrical_power_matches_energy_balance(self):
        # P_e must equal the real power leaving the internal EMF node
        rng = np.random.default_rng(4)
        dev = classic(xdp=0.25)
        dev.ep = 1.05
        for _ in range(25):
            delta = rng.uniform(-2, 2)
            v = rng.uniform(0.8, 1.1) * np.exp(1j * rng.uniform(-1, 1))
            x = np.array([delta, 1.0])
            e = dev.ep * np.exp(1j * delta)
            i_term = (e - v) / (1j * dev.xdp)
            pe_ref = (e * np.conj(i_term)).real
            assert abs(dev.electrical_power(x, v) - pe_ref) < 1e-12


class TestStepping:
    def test_equilibrium_is_fixed_point(self, ieee39):
        pf = solve_power_flow(ieee39)
        sim = TransientSimulator(ieee39, pf)
        x0 = sim._x[0].copy()
        v0 = sim._v[0].copy()
        sim._advance()
        assert np.max(np.abs(sim._x[1] - x0)) < 1e-10
        assert np.max(np.abs(sim._v[1] - v0)) < 1e-10
        assert sim._inner[1] <= 2

    def test_network_balance_at_every_step(self, ieee39):
        # Y' V = I'(x) must hold at factorization accuracy on accepted steps
        pf = solve_power_flow(ieee39)
        fault = FaultEvent(branch=ieee39.find_branch(16, 17), location=0.2,
                           t_on=0.0, t_clear=0.1)
        sim = TransientSimulator(ieee39, pf, fault,
                                 SimulationConfig(horizon=0.5))
        while sim.k < sim.total_steps:
            sim._advance()
            rhs = np.zeros(sim._dim, dtype=complex)
            for dev, sl, bus in zip(sim.devices, sim.slices, sim.device_bus):
                rhs[bus] += dev.injection(sim._x[sim.k][sl])
            residual = sim._y.matvec(sim._v_full) - rhs
            assert np.max(np.abs(residual)) < 1e-10 * max(
                1.0, np.max(np.abs(rhs)))

    def test_inner_loop_iteration_budget(self, ieee39):
        pf = solve_power_flow(ieee39)
        fault = FaultEvent(branch=ieee39.find_branch(3, 4), location=0.5,
                           t_on=0.1, t_clear=0.2)
        res = simulate(ieee39, pf, fault, SimulationConfig(horizon=2.0))
        assert int(res.inner_iterations.max()) <= 20

    def test_smib_matches_rk4_reference(self, smib):
        pf = solve_power_flow(smib)
        sim = TransientSimulator(smib, pf, config=SimulationConfig(
            step=0.01, horizon=1.0, tolerance=1e-10,
            max_inner_iterations=50))
        state = sim.get_state(0)
        ydense, params, x0 = smib_oracle_setup(smib)
        # same small perturbation on both paths
        x0[0] += 0.05
        pert = state.copy()
        pert.x[0] += 0.05
        sim.set_state(0, pert)
        res = sim.run()
        ref = rk4_multi_machine(ydense, (0, 1), params, x0,
                                2 * math.pi * smib.frequency_hz,
                                h=1e-4, t_end=1.0)
        ref_delta = ref[::100, 0]  # every 0.01 s
        err = np.max(np.abs(res.delta[:, 0] - ref_delta))
        assert err < 1e-3

    def test_trapezoidal_is_second_order(self, smib):
        pf = solve_power_flow(smib)
        ydense, params, x0 = smib_oracle_setup(smib)
        x0[0] += 0.05
        ref = rk4_multi_machine(ydense, (0, 1), params, x0,
                                2 * math.pi * smib.frequency_hz,
                                h=1e-4, t_end=1.0)

        def solve_at(h):
            sim = TransientSimulator(smib, pf, config=SimulationConfig(
                step=h, horizon=1.0, tolerance=1e-11,
                max_inner_iterations=60))
            pert = sim.get_state(0)
            pert.x[0] += 0.05
            sim.set_state(0, pert)
            res = sim.run()
            stride = int(round(h / 1e-4))
            return np.max(np.abs(res.delta[:, 0] - ref[::stride, 0]))

        e_coarse = solve_at(0.02)
        e_fine = solve_at(0.01)
        ratio = e_coarse / e_fine
        assert 3.0 <= ratio <= 5.0


class TestSimulate:
    def test_no_fault_steady_state(self, ieee39):
        pf = solve_power_flow(ieee39)
        res = simulate(ieee39, pf, config=SimulationConfig(horizon=2.0))
        drift = np.max(np.abs(res.delta - res.delta[0]))
        assert drift < 1e-4
        assert res.label == "stable"
        assert res.time.shape[0] == 201

    def test_zero_duration_no_trip_equals_no_fault(self, ieee39):
        pf = solve_power_flow(ieee39)
        cfg = SimulationConfig(horizon=1.0)
        base = simulate(ieee39, pf, config=cfg)
        fault = FaultEvent(branch=ieee39.find_branch(3, 4), location=0.5,
                           t_on=0.2, t_clear=0.2, trip_branch=False)
        diag = simulate(ieee39, pf, fault, cfg)
        assert np.max(np.abs(diag.delta - base.delta)) < 1e-9
        assert np.max(np.abs(diag.vm - base.vm)) < 1e-9

    def test_determinism_bit_identical(self, ieee39):
        pf = solve_power_flow(ieee39)
        fault = FaultEvent(branch=ieee39.find_branch(16, 17), location=0.3,
                           t_on=0.1, t_clear=0.25)
        cfg = SimulationConfig(horizon=1.5)
        r1 = simulate(ieee39, pf, fault, cfg)
        r2 = simulate(ieee39, pf, fault, cfg)
        assert np.array_equal(r1.delta, r2.delta)
        assert np.array_equal(r1.vm, r2.vm)
        assert np.array_equal(r1.omega, r2.omega)

    def test_snapshot_count_contract(self, ieee39):
        pf = solve_power_flow(ieee39)
        res = simulate(ieee39, pf, config=SimulationConfig(step=0.3,
                                                           horizon=1.0))
        assert res.time.shape[0] == math.floor(1.0 / 0.3) + 1

    def test_lossless_energy_balance(self, ieee39):
        # r = 0 everywhere and D = 0: total accelerating power integrates to
        # the total kinetic-energy change within 1% over a stable swing.
        # (loads still consume power, so the totals are far from zero)
        case = ieee39.copy()
        for br in case.branches:
            br.r = 0.0
        pf = solve_power_flow(case)
        assert pf.converged
        fault = FaultEvent(branch=case.find_branch(16, 17), location=0.5,
                           t_on=0.1, t_clear=0.2)
        res = simulate(case, pf, fault, SimulationConfig(horizon=2.0))
        assert res.label == "stable"
        h_const = np.array([g.h for g in case.generators])
        pm = res.electrical_power[0]  # pre-fault equilibrium P_e equals P_m
        pacc = (pm - res.electrical_power).sum(axis=1)
        ke = (h_const * (res.omega ** 2 - 1.0)).sum(axis=1)
        dt = res.time[1] - res.time[0]
        integral = np.concatenate(
            [[0.0], np.cumsum(0.5 * dt * (pacc[1:] + pacc[:-1]))])
        # compare where the kinetic-energy deviation is the most significant
        kmax = int(np.argmax(np.abs(ke)))
        assert abs(ke[kmax]) > 1e-3
        assert abs(integral[kmax] - ke[kmax]) <= 0.01 * abs(ke[kmax])


class TestStability:
    def test_smib_cct_bracket_coarse(self, smib):
        pf = solve_power_flow(smib)
        e1, d1, pm1, e2, d2 = smib_equilibrium(
            smib.generators[0].p, smib.branches[0].x / 2.0,
            smib.generators[0].xdp, smib.generators[1].xdp)
        x_post = smib.generators[0].xdp + smib.branches[0].x \
            + smib.generators[1].xdp
        cct = equal_area_cct(pm1, e1 * e2 / x_post, d1 - d2,
                             smib.generators[0].h,
                             2 * math.pi * smib.frequency_hz)
        h = 0.01
        cfg = SimulationConfig(step=h, horizon=5.0)

        def is_stable(t_clear):
            fault = FaultEvent(branch=0, location=0.0, t_on=0.0,
                               t_clear=t_clear)
            return simulate(smib, pf, fault, cfg).label == "stable"

        k_oracle = cct / h
        assert is_stable(math.floor(k_oracle - 1) * h)
        assert not is_stable(math.ceil(k_oracle + 1) * h)

    def test_label_rule(self):
        delta = np.zeros((5, 2))
        assert label_stability(delta) == ("stable", 0.0)
        delta[3, 1] = 2 * math.pi  # exactly 360 deg: tie counts stable
        label, sep = label_stability(delta)
        assert label == "stable"
        assert abs(sep - 360.0) < 1e-9
        delta[3, 1] = 2 * math.pi + 0.01
        label, sep = label_stability(delta)
        assert label == "unstable"

    def test_symmetric_pair_keeps_separation(self, smib):
        case = make_smib(h=3.5)
        case.generators[1].h = 3.5
        case.generators[1].xdp = case.generators[0].xdp
        pf = solve_power_flow(case)
        sim = TransientSimulator(case, pf, config=SimulationConfig(horizon=1.0))
        state = sim.get_state(0)
        state.x[1] += 0.002  # same speed kick on both machines
        state.x[3] += 0.002
        sim.set_state(0, state)
        res = sim.run()
        sep = res.delta[:, 0] - res.delta[:, 1]
        assert np.max(np.abs(sep - sep[0])) < 1e-6
        assert res.label == "stable"


class TestStateAccess:
    def test_get_set_roundtrip_reproduces_tail(self, ieee39):
        pf = solve_power_flow(ieee39)
        fault = FaultEvent(branch=ieee39.find_branch(3, 4), location=0.5,
                           t_on=0.1, t_clear=0.2)
        cfg = SimulationConfig(horizon=1.0)
        full = simulate(ieee39, pf, fault, cfg)

        sim = TransientSimulator(ieee39, pf, fault, cfg)
        sim.run()
        mid = sim.get_state(50)
        sim.set_state(50, mid)
        res = sim.run()
        assert np.array_equal(res.delta, full.delta)
        assert np.array_equal(res.vm, full.vm)

    def test_get_zero_matches_init(self, ieee39):
        pf = solve_power_flow(ieee39)
        init = init_dynamic_state(ieee39, pf)
        sim = TransientSimulator(ieee39, pf)
        got = sim.get_state(0)
        assert np.array_equal(got.x, init.x)
        assert got.t == 0.0

    def test_perturbation_propagates(self, ieee39):
        pf = solve_power_flow(ieee39)
        cfg = SimulationConfig(horizon=0.5)
        base = simulate(ieee39, pf, config=cfg)
        sim = TransientSimulator(ieee39, pf, config=cfg)
        sim.run()
        state = sim.get_state(20)
        state.x[0] += 0.2
        sim.set_state(20, state)
        res = sim.run()
        assert np.max(np.abs(res.delta[-1] - base.delta[-1])) > 1e-4

    def test_get_out_of_range(self, ieee39):
        pf = solve_power_flow(ieee39)
        sim = TransientSimulator(ieee39, pf, config=SimulationConfig(horizon=0.2))
        with pytest.raises(OutOfRange):
            sim.get_state(5)


class TestResultColumns:
    def test_extract_shapes(self, ieee39):
        pf = solve_power_flow(ieee39)
        res = simulate(ieee39, pf, config=SimulationConfig(horizon=0.5))
        steps = res.steps
        assert res.extract("rotor_angles").shape == (steps + 1, 10)
        assert res.extract("bus_voltage_magnitudes").shape == (steps + 1, 39)
        assert res.extract("regulator_outputs").shape == (steps + 1, 0)
        with pytest.raises(KeyError):
            res.extract("nonsense")


class TestInitialTerminalPower:
    def test_t0_terminal_power_matches_power_flow(self, ieee39):
        # the initialized state must reproduce the operating point: terminal
        # P, Q at t=0 equal the power-flow generator outputs within 1e-8
        pf = solve_power_flow(ieee39)
        res = simulate(ieee39, pf, config=SimulationConfig(horizon=0.02))
        assert np.max(np.abs(res.p_terminal[0] - pf.gen_p)) < 1e-8
        assert np.max(np.abs(res.q_terminal[0] - pf.gen_q)) < 1e-8
