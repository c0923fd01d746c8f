"""Admittance matrices for all network stages, island detection, exports.

A branch is a pi-equivalent with series impedance r+jx, total charging b and
an off-nominal tap on the from side. A three-phase metallic short at fraction
lam along a branch splits it into two series segments joined at a temporary
fault node that carries a large real shunt (FAULT_SHUNT); lam of 0 or 1 puts
the shunt directly on the endpoint bus without an extra node. Clearing trips
the whole branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .case import PowerSystemCase
from .errors import UnknownBus, ZeroImpedanceBranch
from .sparse import SparseComplexMatrix

FAULT_SHUNT = 1e7  # pu; effectively grounds the fault point


class Stage(Enum):
    PRE_FAULT = "pre"
    DURING_FAULT = "during"
    POST_FAULT = "post"


@dataclass(frozen=True)
class FaultEvent:
    """Three-phase short on a branch, applied at t_on and cleared at t_clear."""

    branch: int
    location: float = 0.5  # fraction along the branch from its from-bus
    t_on: float = 0.0
    t_clear: float = 0.1
    trip_branch: bool = True  # diagnostic runs may clear without tripping

    def validate(self, case: PowerSystemCase, horizon: float | None = None):
        if not 0 <= self.branch < len(case.branches):
            raise UnknownBus(f"fault references branch {self.branch}")
        if not case.branches[self.branch].status:
            raise ValueError(f"fault on out-of-service branch {self.branch}")
        if not 0.0 <= self.location <= 1.0:
            raise ValueError("fault location must lie in [0, 1]")
        if self.t_clear < self.t_on:
            raise ValueError("clearing time precedes fault time")
        if horizon is not None and self.t_clear > horizon:
            raise ValueError("clearing time beyond simulation horizon")


@dataclass(frozen=True)
class NortonShunt:
    """Diagonal admittance contribution of a dynamic device or load."""

    bus: int  # bus id
    admittance: complex


def _branch_stamps(br, lam_split=None):
    """Yield (from_idx_kind, to_idx_kind, yff, yft, ytf, ytt) pi stamps.

    Without a split this is the standard single pi model. With lam_split
    (fraction, fault-node marker) the branch becomes two cascaded segments;
    the tap and phase shift stay with the from-side segment.
    """
    y = 1.0 / complex(br.r, br.x)
    if lam_split is None:
        ysh = 0.5j * br.b
        tap = br.tap * np.exp(1j * br.shift)
        yff = (y + ysh) / (br.tap * br.tap)
        yft = -y / np.conj(tap)
        ytf = -y / tap
        ytt = y + ysh
        return [("from", "to", yff, yft, ytf, ytt)]
    lam = lam_split
    stamps = []
    seg1 = 1.0 / (complex(br.r, br.x) * lam)
    ysh1 = 0.5j * br.b * lam
    tap = br.tap * np.exp(1j * br.shift)
    stamps.append(
        ("from", "fault",
         (seg1 + ysh1) / (br.tap * br.tap), -seg1 / np.conj(tap),
         -seg1 / tap, seg1 + ysh1)
    )
    seg2 = 1.0 / (complex(br.r, br.x) * (1.0 - lam))
    ysh2 = 0.5j * br.b * (1.0 - lam)
    stamps.append(("fault", "to", seg2 + ysh2, -seg2, -seg2, seg2 + ysh2))
    return stamps


def build_admittance(case: PowerSystemCase, stage: Stage = Stage.PRE_FAULT,
                     fault: FaultEvent | None = None) -> SparseComplexMatrix:
    """Bus admittance matrix of the given stage, without device Nortons.

    DURING_FAULT with a mid-branch fault appends one temporary node, so the
    returned dimension is n_buses + 1 in that case. POST_FAULT removes the
    faulted branch entirely (when the fault trips it).
    """
    if stage is not Stage.PRE_FAULT and fault is None:
        raise ValueError(f"stage {stage} needs a fault event")
    if fault is not None:
        fault.validate(case)

    index = case.bus_index()
    n = case.n_buses()
    mid_fault = (
        stage is Stage.DURING_FAULT and fault is not None
        and 0.0 < fault.location < 1.0
    )
    dim = n + 1 if mid_fault else n
    fault_node = n

    rows, cols, vals = [], [], []

    def stamp(i, j, yff, yft, ytf, ytt):
        rows.extend((i, i, j, j))
        cols.extend((i, j, i, j))
        vals.extend((yff, yft, ytf, ytt))

    for k, br in enumerate(case.branches):
        if not br.status:
            continue
        if stage is Stage.POST_FAULT and fault is not None \
                and k == fault.branch and fault.trip_branch:
            continue
        try:
            fi = index[br.from_bus]
            ti = index[br.to_bus]
        except KeyError as exc:
            raise UnknownBus(f"branch {k} references bus {exc.args[0]}") from None
        if abs(complex(br.r, br.x)) == 0.0:
            raise ZeroImpedanceBranch(f"branch {k} ({case.branch_label(k)})")
        if stage is Stage.DURING_FAULT and fault is not None and k == fault.branch:
            if mid_fault:
                for a, b, *ys in _branch_stamps(br, lam_split=fault.location):
                    ia = {"from": fi, "to": ti, "fault": fault_node}[a]
                    ib = {"from": fi, "to": ti, "fault": fault_node}[b]
                    stamp(ia, ib, *ys)
                continue
            # endpoint fault: normal stamp plus the shunt added below
        for a, b, *ys in _branch_stamps(br):
            stamp(fi, ti, *ys)

    for bus in case.buses:
        if bus.gs or bus.bs:
            i = index[bus.id]
            rows.append(i)
            cols.append(i)
            vals.append(complex(bus.gs, bus.bs))

    if stage is Stage.DURING_FAULT and fault is not None:
        if mid_fault:
            node = fault_node
        else:
            br = case.branches[fault.branch]
            node = index[br.from_bus] if fault.location == 0.0 else index[br.to_bus]
        rows.append(node)
        cols.append(node)
        vals.append(complex(FAULT_SHUNT, 0.0))

    return SparseComplexMatrix.from_triplets(dim, rows, cols, vals)


def augment_admittance(y: SparseComplexMatrix,
                       devices: list[NortonShunt],
                       bus_index: dict[int, int]) -> SparseComplexMatrix:
    """Y' = Y plus diagonal Norton shunts; the input matrix is unchanged."""
    if not devices:
        return y
    idx, vals = [], []
    for dev in devices:
        if dev.bus not in bus_index:
            raise UnknownBus(f"Norton shunt targets unknown bus {dev.bus}")
        idx.append(bus_index[dev.bus])
        vals.append(dev.admittance)
    return y.add_to_diagonal(idx, vals)


def device_norton_shunts(case: PowerSystemCase) -> list[NortonShunt]:
    """Generator transient-reactance shunts 1/(j x'd) for in-service units."""
    return [
        NortonShunt(g.bus, 1.0 / (1j * g.xdp))
        for g in case.generators
        if g.status
    ]


def load_norton_shunts(case: PowerSystemCase, v_mag, bus_index) -> list[NortonShunt]:
    """Constant-impedance conversion of loads at the solved voltage magnitudes."""
    shunts = []
    for load in case.loads:
        vm = v_mag[bus_index[load.bus]]
        s = complex(load.p, load.q)
        shunts.append(NortonShunt(load.bus, np.conj(s) / (vm * vm)))
    return shunts


def find_islands(case: PowerSystemCase, stage: Stage = Stage.PRE_FAULT,
                 fault: FaultEvent | None = None) -> list[list[int]]:
    """Connected components of the in-service branch graph, as bus-id lists.

    Components are each sorted by bus id and ordered by their smallest member.
    """
    index = case.bus_index()
    adj: dict[int, set[int]] = {b.id: set() for b in case.buses}
    for k, br in enumerate(case.branches):
        if not br.status:
            continue
        if stage is Stage.POST_FAULT and fault is not None \
                and k == fault.branch and fault.trip_branch:
            continue
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)

    seen: set[int] = set()
    islands = []
    for start in sorted(index):
        if start in seen:
            continue
        stack = [start]
        comp = []
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        islands.append(sorted(comp))
    islands.sort(key=lambda c: c[0])
    return islands


def export_topology_snapshots(case: PowerSystemCase, fault: FaultEvent,
                              v_mag=None):
    """(Y0, Y1, Y2): pre-fault, faulted, and post-clearing admittance matrices.

    Each stage matrix includes the generator Norton shunts, and, when solved
    voltage magnitudes are supplied, the constant-impedance load conversion.
    These are the matrices the dynamic solver factorizes.
    """
    index = case.bus_index()
    devices = device_norton_shunts(case)
    if v_mag is not None:
        devices = devices + load_norton_shunts(case, v_mag, index)
    out = []
    for stage in (Stage.PRE_FAULT, Stage.DURING_FAULT, Stage.POST_FAULT):
        y = build_admittance(case, stage, fault)
        # a temporary fault node never hosts a device, so the bus index
        # stays valid even when y has dimension n_buses + 1
        out.append(augment_admittance(y, devices, index))
    return tuple(out)


def triplet_records(y: SparseComplexMatrix):
    """Row-major coordinate triplets as a list of (row, col, re, im)."""
    rows, cols, re, im = y.to_triplets()
    return list(zip(rows.tolist(), cols.tolist(), re.tolist(), im.tolist()))
