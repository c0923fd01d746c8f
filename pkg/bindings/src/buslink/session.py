"""Array-centric session wrapper over the engine's flat API surface.

Everything crosses the boundary as contiguous float64/complex128 numpy
arrays; returned arrays are copies, so they can never go silently stale when
the session recomputes. No numeric transformation happens here: every value
is the engine's value bit for bit.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .errors import LibraryNotFound, VersionMismatch


def _load_api():
    try:
        from swingbus import api
    except ImportError as exc:
        raise LibraryNotFound(
            f"swingbus engine not importable: {exc}") from exc
    return api


def pinned_digest() -> str:
    ref = resources.files("buslink").joinpath("engine_manifest_pin.json")
    with ref.open() as fh:
        return json.load(fh)["digest"]


def bind_all(check_version: bool = True):
    """Verify the interface manifest and return the engine's flat surface.

    The returned module exposes every facade operation; errors raised by it
    are the engine's own exception types.
    """
    api = _load_api()
    if check_version:
        live = api.manifest_digest()
        pinned = pinned_digest()
        if live != pinned:
            raise VersionMismatch(
                f"engine interface digest {live[:12]} != pinned {pinned[:12]}; "
                "rebuild the bindings against this engine")
    return api


def interface_manifest() -> dict:
    """The engine's live interface manifest, for introspection."""
    return _load_api().interface_manifest()


class Session:
    """One engine session per worker; thin, synchronous, array in/out."""

    def __init__(self, handle, api):
        self._h = handle
        self._api = api

    @classmethod
    def open(cls, case_path, check_version: bool = True) -> "Session":
        api = bind_all(check_version)
        return cls(api.load_case(case_path), api)

    # -- model / parameter access -----------------------------------------

    def component_counts(self) -> dict:
        return self._api.component_counts(self._h)

    def get_parameter(self, kind, index, field):
        return self._api.get_parameter(self._h, kind, index, field)

    def set_parameter(self, kind, index, field, value, force=False):
        self._api.set_parameter(self._h, kind, index, field, value, force)

    def set_branch_status(self, branch, in_service) -> dict:
        return self._api.set_branch_status(self._h, branch, in_service)

    def find_branch(self, from_bus, to_bus, circuit=None) -> int:
        return self._api.find_branch(self._h, from_bus, to_bus, circuit)

    # -- computations -------------------------------------------------------

    def solve_power_flow(self, **kw) -> dict:
        return self._api.solve_power_flow(self._h, **kw)

    def bus_voltages(self):
        vm, va = self._api.bus_voltages(self._h)
        return np.array(vm, dtype=np.float64), np.array(va, dtype=np.float64)

    def generator_output(self):
        p, q = self._api.generator_output(self._h)
        return np.array(p, dtype=np.float64), np.array(q, dtype=np.float64)

    def run_simulation(self, fault=None, **kw) -> dict:
        return self._api.run_simulation(self._h, fault, **kw)

    def column(self, name) -> np.ndarray:
        return np.array(self._api.result_column(self._h, name))

    def time_axis(self) -> np.ndarray:
        return np.array(self._api.time_axis(self._h))

    def get_state(self, k) -> dict:
        st = self._api.get_dynamic_state(self._h, k)
        return {key: (np.array(v) if isinstance(v, np.ndarray) else v)
                for key, v in st.items()}

    def set_state(self, k, state: dict):
        self._api.set_dynamic_state(self._h, k, state)

    def continue_simulation(self) -> dict:
        return self._api.continue_simulation(self._h)

    def query(self, item):
        return self._api.query_solution(self._h, item)

    def topology_snapshots(self, fault) -> dict:
        snaps = self._api.topology_snapshots(self._h, fault)
        return {
            name: {k: (np.array(v) if isinstance(v, np.ndarray) else v)
                   for k, v in snap.items()}
            for name, snap in snaps.items()
        }

    def islands(self) -> list:
        return self._api.islands(self._h)

    def sample_operating_points(self, count, seed=0, workers=1,
                                gen_band=(0.9, 1.1)) -> dict:
        return self._api.sample_operating_points(
            self._h, count, seed, workers, gen_band)

    def generate_dataset(self, count, contingencies_per_point, seed, workers,
                         out_dir, **kw) -> dict:
        return self._api.generate_dataset(
            self._h, count, contingencies_per_point, seed, workers, out_dir,
            **kw)


def load_case(case_path, check_version: bool = True) -> Session:
    """Open a case through the bound engine and return a Session."""
    return Session.open(case_path, check_version)
