"""Static network description: buses, branches, generators, loads.

All electrical quantities are per-unit on the system MVA base. The on-disk
format is a single canonical JSON document with sections
{buses, branches, generators, loads, neural_devices, config}; loading and
exporting round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

from .errors import ParseError, UnknownComponent, ValidationError

BUS_TYPES = ("Slack", "PV", "PQ")


@dataclass
class Bus:
    id: int
    type: str = "PQ"
    base_kv: float = 345.0
    gs: float = 0.0  # shunt conductance, pu
    bs: float = 0.0  # shunt susceptance, pu


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0  # total line charging
    tap: float = 1.0
    shift: float = 0.0  # phase shift, rad
    status: bool = True
    circuit: int = 1


@dataclass
class Generator:
    bus: int
    p: float
    v: float
    qmin: float = -9.99
    qmax: float = 9.99
    pmin: float = 0.0
    pmax: float = 99.99
    h: float = 5.0  # inertia constant, s
    d: float = 0.0  # damping, pu torque per pu speed deviation
    xdp: float = 0.3  # transient reactance, pu
    slack: bool = False
    status: bool = True


@dataclass
class Load:
    bus: int
    p: float
    q: float
    pmin: float = 0.0  # sampling range, pu
    pmax: float = 0.0
    qmin: float = 0.0
    qmax: float = 0.0


@dataclass
class NeuralDevice:
    """Attachment record binding a loadable network to one generator."""

    generator: int
    spec_file: str
    blob_file: str
    layout: list[str] = field(default_factory=lambda: ["angle", "speed"])


@dataclass
class PowerSystemCase:
    name: str = "case"
    base_mva: float = 100.0
    frequency_hz: float = 50.0
    buses: list[Bus] = field(default_factory=list)
    branches: list[Branch] = field(default_factory=list)
    generators: list[Generator] = field(default_factory=list)
    loads: list[Load] = field(default_factory=list)
    neural_devices: list[NeuralDevice] = field(default_factory=list)

    # -- indexing helpers ---------------------------------------------------

    def bus_index(self) -> dict[int, int]:
        """Map bus id -> position in self.buses."""
        return {b.id: i for i, b in enumerate(self.buses)}

    def n_buses(self) -> int:
        return len(self.buses)

    def branch_label(self, k: int) -> str:
        br = self.branches[k]
        return f"{br.from_bus}-{br.to_bus}#{br.circuit}"

    def find_branch(self, from_bus: int, to_bus: int, circuit: int | None = None) -> int:
        hits = [
            k
            for k, br in enumerate(self.branches)
            if {br.from_bus, br.to_bus} == {from_bus, to_bus}
            and (circuit is None or br.circuit == circuit)
        ]
        if not hits:
            raise UnknownComponent(f"no branch {from_bus}-{to_bus}")
        if len(hits) > 1:
            raise UnknownComponent(
                f"branch {from_bus}-{to_bus} is ambiguous; give a circuit id "
                f"(candidates: {[self.branch_label(k) for k in hits]})"
            )
        return hits[0]

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Raise ValidationError listing every violation, not just the first."""
        problems = []
        ids = [b.id for b in self.buses]
        known = set(ids)
        if len(known) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            problems.append(f"duplicate bus ids {dupes}")
        for b in self.buses:
            if b.type not in BUS_TYPES:
                problems.append(f"bus {b.id}: unknown type {b.type!r}")
        for k, br in enumerate(self.branches):
            for end in (br.from_bus, br.to_bus):
                if end not in known:
                    problems.append(f"branch {k}: unknown bus {end}")
            if br.from_bus == br.to_bus:
                problems.append(f"branch {k}: both ends on bus {br.from_bus}")
            if abs(complex(br.r, br.x)) == 0.0:
                problems.append(f"branch {k} ({self.branch_label(k)}): zero impedance")
            if br.tap <= 0:
                problems.append(f"branch {k}: tap ratio must be positive")
        for g, gen in enumerate(self.generators):
            if gen.bus not in known:
                problems.append(f"generator {g}: unknown bus {gen.bus}")
            if gen.xdp <= 0:
                problems.append(f"generator {g}: x'd must be > 0, got {gen.xdp}")
            if gen.h <= 0:
                problems.append(f"generator {g}: inertia must be > 0, got {gen.h}")
            if gen.qmin > gen.qmax:
                problems.append(f"generator {g}: qmin > qmax")
            if gen.pmin > gen.pmax:
                problems.append(f"generator {g}: pmin > pmax")
        for l, load in enumerate(self.loads):
            if load.bus not in known:
                problems.append(f"load {l}: unknown bus {load.bus}")
            if load.pmin > load.pmax:
                problems.append(f"load {l}: pmin > pmax")
            if load.qmin > load.qmax:
                problems.append(f"load {l}: qmin > qmax")
        slack_buses = {g.bus for g in self.generators if g.slack and g.status}
        if not slack_buses:
            problems.append("no in-service slack generator")
        for b in self.buses:
            if b.type == "Slack" and b.id not in slack_buses:
                problems.append(f"bus {b.id} typed Slack but hosts no slack generator")
        for bus in slack_buses:
            typ = next(b.type for b in self.buses if b.id == bus)
            if typ != "Slack":
                problems.append(f"slack generator on bus {bus}, but bus typed {typ}")
        for nd in self.neural_devices:
            if not 0 <= nd.generator < len(self.generators):
                problems.append(f"neural device references generator {nd.generator}")
        if problems:
            raise ValidationError(problems)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "buses": [asdict(b) for b in self.buses],
            "branches": [asdict(br) for br in self.branches],
            "generators": [asdict(g) for g in self.generators],
            "loads": [asdict(l) for l in self.loads],
            "neural_devices": [asdict(n) for n in self.neural_devices],
            "config": {"frequency_hz": self.frequency_hz},
        }

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<dict>") -> "PowerSystemCase":
        def build(section, factory, klass):
            out = []
            for i, rec in enumerate(doc.get(section, [])):
                try:
                    out.append(factory(rec))
                except (TypeError, KeyError) as exc:
                    raise ParseError(
                        f"{source}: {section}[{i}]: bad {klass} record: {exc}"
                    ) from exc
            return out

        if not isinstance(doc, dict):
            raise ParseError(f"{source}: top level must be a JSON object")
        config = doc.get("config", {})
        case = cls(
            name=doc.get("name", "case"),
            base_mva=float(doc.get("base_mva", 100.0)),
            frequency_hz=float(config.get("frequency_hz", 50.0)),
            buses=build("buses", lambda r: Bus(**r), "bus"),
            branches=build("branches", lambda r: Branch(**r), "branch"),
            generators=build("generators", lambda r: Generator(**r), "generator"),
            loads=build("loads", lambda r: Load(**r), "load"),
            neural_devices=build(
                "neural_devices", lambda r: NeuralDevice(**r), "neural device"
            ),
        )
        case.validate()
        return case

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PowerSystemCase":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ParseError(f"case file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(doc, source=str(path))

    def copy(self) -> "PowerSystemCase":
        return PowerSystemCase.from_dict(self.to_dict(), source=f"copy of {self.name}")


def load_bundled(name: str) -> PowerSystemCase:
    """Load one of the case files shipped with the package (e.g. 'ieee39')."""
    from importlib import resources

    ref = resources.files("swingbus").joinpath(f"data/{name}.json")
    with resources.as_file(ref) as path:
        return PowerSystemCase.load(path)
