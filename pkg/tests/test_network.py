"""Admittance assembly, fault staging, Norton augmentation, islands."""

import numpy as np
import pytest

from conftest import make_two_bus
from oracles import bfs_islands, dense_admittance
from swingbus.errors import UnknownBus
from swingbus.network import (
    FaultEvent,
    NortonShunt,
    Stage,
    augment_admittance,
    build_admittance,
    device_norton_shunts,
    export_topology_snapshots,
    find_islands,
    load_norton_shunts,
    triplet_records,
)


def branch_position(case, a, b):
    return case.find_branch(a, b)


class TestBuildAdmittance:
    def test_two_bus_closed_form(self):
        y = build_admittance(make_two_bus(x=0.1))
        expected = np.array([[-10j, 10j], [10j, -10j]])
        assert np.allclose(y.to_dense(), expected, atol=1e-14)

    def test_ieee39_matches_dense_oracle(self, ieee39):
        y = build_admittance(ieee39).to_dense()
        ref = dense_admittance(ieee39)
        assert y.shape == (39, 39)
        assert np.max(np.abs(y - ref)) < 1e-12

    def test_row_sums_are_charging_plus_shunt_for_tapless_buses(self, ieee39):
        # for a bus touched only by tap-1 branches the series terms cancel in
        # the row sum, leaving half-charging contributions (plus bus shunts)
        idx = ieee39.bus_index()
        tap_buses = set()
        for br in ieee39.branches:
            if br.tap != 1.0:
                tap_buses.update((br.from_bus, br.to_bus))
        y = build_admittance(ieee39).to_dense()
        rowsum = y.sum(axis=1)
        for bus in ieee39.buses:
            if bus.id in tap_buses:
                continue
            expected = complex(bus.gs, bus.bs)
            for br in ieee39.branches:
                if bus.id in (br.from_bus, br.to_bus):
                    expected += 1j * br.b / 2.0
            assert abs(rowsum[idx[bus.id]] - expected) < 1e-9

    def test_postfault_differs_only_on_tripped_rows(self, ieee39):
        k = branch_position(ieee39, 16, 17)
        fault = FaultEvent(branch=k, location=0.0, t_on=0.0, t_clear=0.1)
        pre = build_admittance(ieee39).to_dense()
        post = build_admittance(ieee39, Stage.POST_FAULT, fault).to_dense()
        diff = np.argwhere(np.abs(pre - post) > 0)
        idx = ieee39.bus_index()
        touched = {idx[16], idx[17]}
        assert set(diff.flatten().tolist()) == touched

    def test_build_is_pure_and_deterministic(self, ieee39):
        y1 = build_admittance(ieee39)
        y2 = build_admittance(ieee39)
        assert np.array_equal(y1.indptr, y2.indptr)
        assert np.array_equal(y1.indices, y2.indices)
        assert np.array_equal(y1.data, y2.data)

    def test_unknown_bus_raises(self):
        case = make_two_bus()
        case.branches[0].to_bus = 77
        with pytest.raises(UnknownBus):
            build_admittance(case)


class TestFaultStages:
    def test_endpoint_fault_adds_shunt_only(self, ieee39):
        k = branch_position(ieee39, 3, 4)
        fault = FaultEvent(branch=k, location=0.0)
        pre = build_admittance(ieee39).to_dense()
        during = build_admittance(ieee39, Stage.DURING_FAULT, fault).to_dense()
        assert during.shape == (39, 39)
        i = ieee39.bus_index()[3]
        diff = during - pre
        assert abs(diff[i, i] - 1e7) < 1e-6
        diff[i, i] = 0.0
        assert np.max(np.abs(diff)) == 0.0

    def test_midline_fault_matches_dense_oracle(self, ieee39):
        k = branch_position(ieee39, 3, 4)
        fault = FaultEvent(branch=k, location=0.5)
        during = build_admittance(ieee39, Stage.DURING_FAULT, fault).to_dense()
        ref = dense_admittance(ieee39, fault_branch=k, fault_location=0.5)
        assert during.shape == (40, 40)
        assert np.max(np.abs(during - ref)) < 1e-9

    def test_midline_fault_on_transformer_keeps_tap_on_from_segment(self, ieee39):
        k = branch_position(ieee39, 2, 30)  # tap 1.025
        fault = FaultEvent(branch=k, location=0.3)
        during = build_admittance(ieee39, Stage.DURING_FAULT, fault).to_dense()
        ref = dense_admittance(ieee39, fault_branch=k, fault_location=0.3)
        assert np.max(np.abs(during - ref)) < 1e-9


class TestAugment:
    def test_empty_devices_is_identity(self, ieee39):
        y = build_admittance(ieee39)
        assert augment_admittance(y, [], ieee39.bus_index()) is y

    def test_single_generator_shunt(self):
        case = make_two_bus()
        y = build_admittance(case)
        y2 = augment_admittance(y, [NortonShunt(1, 1.0 / (1j * 0.2))],
                                case.bus_index())
        d = y2.to_dense() - y.to_dense()
        assert abs(d[0, 0] - (-5j)) < 1e-14
        d[0, 0] = 0
        assert np.max(np.abs(d)) == 0.0

    def test_ieee39_full_augmentation_is_diagonal_only(self, ieee39):
        y = build_admittance(ieee39)
        devices = device_norton_shunts(ieee39) + load_norton_shunts(
            ieee39, np.ones(39), ieee39.bus_index())
        y2 = augment_admittance(y, devices, ieee39.bus_index())
        d = y2.to_dense() - y.to_dense()
        off = d - np.diag(np.diag(d))
        assert np.max(np.abs(off)) == 0.0
        assert np.count_nonzero(np.diag(d)) > 0

    def test_unknown_bus(self, ieee39):
        y = build_admittance(ieee39)
        with pytest.raises(UnknownBus):
            augment_admittance(y, [NortonShunt(999, 1j)], ieee39.bus_index())


class TestIslands:
    def test_ieee39_is_one_island(self, ieee39):
        islands = find_islands(ieee39)
        assert len(islands) == 1
        assert len(islands[0]) == 39
        assert islands == bfs_islands(ieee39)

    def test_all_branches_out_gives_singletons(self, ieee39):
        case = ieee39.copy()
        for br in case.branches:
            br.status = False
        islands = find_islands(case)
        assert len(islands) == 39
        assert all(len(c) == 1 for c in islands)

    def test_cut_set_makes_two_islands(self, ieee39):
        case = ieee39.copy()
        cut = [case.find_branch(1, 39), case.find_branch(2, 3),
               case.find_branch(2, 25)]
        for k in cut:
            case.branches[k].status = False
        islands = find_islands(case)
        assert islands == bfs_islands(case)
        assert len(islands) == 2
        assert islands[0] == [1, 2, 30]

    def test_partition_property(self, ieee39):
        rng = np.random.default_rng(31)
        for _ in range(10):
            case = ieee39.copy()
            drop = rng.choice(len(case.branches),
                              size=rng.integers(1, 12), replace=False)
            for k in drop:
                case.branches[int(k)].status = False
            islands = find_islands(case)
            flat = [b for c in islands for b in c]
            assert sorted(flat) == sorted(b.id for b in case.buses)
            assert len(flat) == len(set(flat))
            assert islands == bfs_islands(case)


class TestSnapshots:
    def test_y2_is_y0_minus_branch_contribution(self, ieee39):
        k = branch_position(ieee39, 16, 17)
        fault = FaultEvent(branch=k, location=0.0)
        y0, y1, y2 = export_topology_snapshots(ieee39, fault)
        d = y0.to_dense() - y2.to_dense()
        ref = dense_admittance(ieee39) - dense_admittance(ieee39, tripped=(k,))
        assert np.max(np.abs(d - ref)) < 1e-12

    def test_y0_equals_augmented_prefault(self, ieee39):
        k = branch_position(ieee39, 3, 4)
        y0, _, _ = export_topology_snapshots(ieee39, FaultEvent(branch=k))
        manual = augment_admittance(
            build_admittance(ieee39), device_norton_shunts(ieee39),
            ieee39.bus_index())
        assert y0 == manual

    def test_midline_snapshot_vs_dense_oracle(self, ieee39):
        idx = ieee39.bus_index()
        k = branch_position(ieee39, 3, 4)
        fault = FaultEvent(branch=k, location=0.5)
        vm = np.linspace(0.95, 1.05, 39)
        y0, y1, y2 = export_topology_snapshots(ieee39, fault, v_mag=vm)

        def norton_dense(dim):
            d = np.zeros((dim, dim), dtype=complex)
            for g in ieee39.generators:
                d[idx[g.bus], idx[g.bus]] += 1.0 / (1j * g.xdp)
            for load in ieee39.loads:
                i = idx[load.bus]
                d[i, i] += complex(load.p, -load.q) / vm[i] ** 2
            return d

        ref0 = dense_admittance(ieee39) + norton_dense(39)
        ref1 = dense_admittance(ieee39, fault_branch=k, fault_location=0.5) \
            + norton_dense(40)
        ref2 = dense_admittance(ieee39, tripped=(k,)) + norton_dense(39)
        assert np.max(np.abs(y0.to_dense() - ref0)) < 1e-9
        assert np.max(np.abs(y1.to_dense() - ref1)) < 1e-9
        assert np.max(np.abs(y2.to_dense() - ref2)) < 1e-9

    def test_triplet_records_row_major(self, ieee39):
        y = build_admittance(ieee39)
        recs = triplet_records(y)
        assert recs == sorted(recs, key=lambda r: (r[0], r[1]))
        dense = np.zeros((39, 39), dtype=complex)
        for r, c, re, im in recs:
            dense[r, c] = complex(re, im)
        assert np.max(np.abs(dense - y.to_dense())) == 0.0


class TestAugmentedFactorization:
    def test_ieee39_prefault_factors_solve_100_rhs(self, ieee39):
        from swingbus.sparse import order_and_factorize

        y = build_admittance(ieee39)
        yp = augment_admittance(
            y, device_norton_shunts(ieee39) + load_norton_shunts(
                ieee39, np.ones(39), ieee39.bus_index()),
            ieee39.bus_index())
        lu = order_and_factorize(yp)
        dense = yp.to_dense()
        rng = np.random.default_rng(41)
        for _ in range(100):
            b = rng.normal(size=39) + 1j * rng.normal(size=39)
            x = lu.solve(b)
            res = np.max(np.abs(dense @ x - b))
            assert res < 1e-10 * max(1.0, np.max(np.abs(b)))
