"""Operating-point sampling, contingency sampling, and the batch driver.

The step-wise scheme draws load powers uniformly inside their limits, then
redraws generator dispatch until the slack units can cover the remaining
balance (their limit window brackets the load total), then draws generator
voltage setpoints and keeps the draw only when the power flow converges.

Every random draw comes from a counter-keyed generator seeded by
(seed, domain, index), so results are reproducible and independent of worker
scheduling: the saved set is the first N converged attempts in attempt order
no matter how many workers scanned them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .case import PowerSystemCase
from .dynamics import SimulationConfig, simulate
from .errors import EngineError, InfeasibleSpec, NoBranches
from .network import FaultEvent
from .powerflow import PfOptions, PowerFlowSolution, solve_power_flow

SHARD_SIZE = 500
GEN_REDRAW_CAP = 1000
LOAD_REDRAW_CAP = 100


def keyed_rng(seed: int, domain: int, *indices: int) -> np.random.Generator:
    """Counter-keyed generator: stateless per (seed, domain, indices)."""
    ss = np.random.SeedSequence(entropy=(int(seed), int(domain), *map(int, indices)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SamplerSpec:
    count: int
    seed: int = 0
    load_p_range: np.ndarray | None = None  # (n_load, 2)
    load_q_range: np.ndarray | None = None
    gen_p_range: np.ndarray | None = None   # (n_nonslack_gen, 2)
    v_range: tuple[float, float] = (0.95, 1.10)
    t_clear_range: tuple[float, float] = (0.06, 0.50)
    fault_start: float = 0.0

    @classmethod
    def from_case(cls, case: PowerSystemCase, count: int, seed: int = 0,
                  gen_band: tuple[float, float] = (0.9, 1.1),
                  **overrides) -> "SamplerSpec":
        """Default ranges: load limits from the case records; generator
        dispatch inside gen_band times the base dispatch, clipped to the
        unit limits (the raw unit limits make the slack window essentially
        unreachable on stressed systems)."""
        load_p = np.array([[l.pmin, l.pmax] for l in case.loads])
        load_q = np.array([[l.qmin, l.qmax] for l in case.loads])
        gens = [g for g in case.generators if g.status and not g.slack]
        gen_p = np.array([
            [max(g.pmin, gen_band[0] * g.p), min(g.pmax, gen_band[1] * g.p)]
            for g in gens
        ])
        spec = cls(count=count, seed=seed, load_p_range=load_p,
                   load_q_range=load_q, gen_p_range=gen_p, **overrides)
        spec.check_feasible(case)
        return spec

    def check_feasible(self, case: PowerSystemCase):
        slack_max = sum(g.pmax for g in case.generators if g.slack and g.status)
        slack_min = sum(g.pmin for g in case.generators if g.slack and g.status)
        if self.count < 0:
            raise InfeasibleSpec("sample count must be >= 0")
        lo_loads = float(self.load_p_range[:, 0].sum())
        hi_loads = float(self.load_p_range[:, 1].sum())
        lo_gens = float(self.gen_p_range[:, 0].sum())
        hi_gens = float(self.gen_p_range[:, 1].sum())
        if lo_loads >= hi_gens + slack_max:
            raise InfeasibleSpec(
                f"minimum load {lo_loads:.3f} exceeds maximum generation "
                f"{hi_gens + slack_max:.3f}")
        if hi_loads <= lo_gens + slack_min:
            raise InfeasibleSpec(
                f"maximum load {hi_loads:.3f} below minimum generation "
                f"{lo_gens + slack_min:.3f}")

    def to_jsonable(self) -> dict:
        doc = asdict(self)
        for key in ("load_p_range", "load_q_range", "gen_p_range"):
            if doc[key] is not None:
                doc[key] = np.asarray(doc[key]).tolist()
        return doc


@dataclass
class SampleRecord:
    index: int
    attempt: int
    pd: np.ndarray
    qd: np.ndarray
    pg: np.ndarray
    vg: np.ndarray
    iterations: int
    max_mismatch: float
    slack_p: float
    solution: PowerFlowSolution | None = field(default=None, repr=False)
    contingency: FaultEvent | None = None
    label: str | None = None


def apply_operating_point(case: PowerSystemCase, pd, qd, pg, vg) -> None:
    """Write sampled vectors onto the case in place."""
    for load, p, q in zip(case.loads, pd, qd):
        load.p = float(p)
        load.q = float(q)
    j = 0
    for gen in case.generators:
        if gen.status and not gen.slack:
            gen.p = float(pg[j])
            gen.v = float(vg[j])
            j += 1
    # bus-hosted voltage data stays consistent via the generators themselves


def draw_operating_point(spec: SamplerSpec, slack_min: float,
                         slack_max: float, attempt: int):
    """One attempt of the step-wise scheme; returns vectors or None."""
    rng = keyed_rng(spec.seed, 0, attempt)
    for _ in range(LOAD_REDRAW_CAP):
        pd = rng.uniform(spec.load_p_range[:, 0], spec.load_p_range[:, 1])
        qd = rng.uniform(spec.load_q_range[:, 0], spec.load_q_range[:, 1])
        total_d = float(pd.sum())
        for _ in range(GEN_REDRAW_CAP):
            pg = rng.uniform(spec.gen_p_range[:, 0], spec.gen_p_range[:, 1])
            total_g = float(pg.sum())
            if total_g + slack_min < total_d < total_g + slack_max:
                vg = rng.uniform(spec.v_range[0], spec.v_range[1],
                                 size=spec.gen_p_range.shape[0])
                return pd, qd, pg, vg
    return None


def _solve_attempt(case: PowerSystemCase, spec: SamplerSpec,
                   attempt: int) -> SampleRecord | None:
    slack_min = sum(g.pmin for g in case.generators if g.slack and g.status)
    slack_max = sum(g.pmax for g in case.generators if g.slack and g.status)
    draw = draw_operating_point(spec, slack_min, slack_max, attempt)
    if draw is None:
        return None
    pd, qd, pg, vg = draw
    work = case.copy()
    apply_operating_point(work, pd, qd, pg, vg)
    sol = solve_power_flow(work, PfOptions())
    if not sol.converged:
        return None
    slack_rows = [i for i, g in enumerate(work.generators)
                  if g.slack and g.status]
    return SampleRecord(
        index=-1, attempt=attempt, pd=pd, qd=qd, pg=pg, vg=vg,
        iterations=sol.iterations, max_mismatch=sol.max_mismatch,
        slack_p=float(sum(sol.gen_p[i] for i in slack_rows)),
        solution=sol,
    )


def sample_power_flow_cases(case: PowerSystemCase, spec: SamplerSpec):
    """Yield converged operating points until the requested count is reached."""
    spec.check_feasible(case)
    saved = 0
    attempt = 0
    while saved < spec.count:
        rec = _solve_attempt(case, spec, attempt)
        attempt += 1
        if rec is not None:
            rec.index = saved
            yield rec
            saved += 1


def sample_contingency(case: PowerSystemCase,
                       rng: np.random.Generator,
                       t_clear_range=(0.06, 0.50),
                       fault_start=0.0) -> FaultEvent:
    """Uniform branch, uniform location, uniform clearing time."""
    in_service = [k for k, br in enumerate(case.branches) if br.status]
    if not in_service:
        raise NoBranches("no in-service branch to fault")
    branch = in_service[int(rng.integers(0, len(in_service)))]
    lam = float(rng.uniform(0.0, 1.0))
    t_clear = float(rng.uniform(t_clear_range[0], t_clear_range[1]))
    return FaultEvent(branch=branch, location=lam,
                      t_on=fault_start, t_clear=fault_start + t_clear)


# -- parallel batch driver ---------------------------------------------------

_WORKER = {}


def _init_worker(case_doc, spec, sim_config):
    _WORKER["case"] = PowerSystemCase.from_dict(case_doc)
    _WORKER["spec"] = spec
    _WORKER["config"] = sim_config


def _attempt_task(attempt: int):
    rec = _solve_attempt(_WORKER["case"], _WORKER["spec"], attempt)
    if rec is None:
        return None
    rec.solution = None  # keep worker -> parent transfers lean
    return rec


def _simulation_task(args):
    i, j, pd, qd, pg, vg = args
    case = _WORKER["case"]
    spec = _WORKER["spec"]
    work = case.copy()
    apply_operating_point(work, pd, qd, pg, vg)
    sol = solve_power_flow(work)
    rng = keyed_rng(spec.seed, 1, i, j)
    try:
        fault = sample_contingency(work, rng, spec.t_clear_range,
                                   spec.fault_start)
        res = simulate(work, sol, fault, _WORKER["config"])
        return (i, j, fault.branch, fault.location, fault.t_on,
                fault.t_clear, res.label, res.max_separation_deg, "")
    except EngineError as exc:
        return (i, j, -1, 0.0, 0.0, 0.0, "failed", 0.0,
                f"{type(exc).__name__}: {exc}")


def _run_tasks(tasks, task_fn, workers, init_args, chunksize=1):
    if workers <= 1:
        _init_worker(*init_args)
        return [task_fn(t) for t in tasks]
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    with ctx.Pool(workers, initializer=_init_worker,
                  initargs=init_args) as pool:
        return pool.map(task_fn, tasks, chunksize=chunksize)


def collect_operating_points(case: PowerSystemCase, spec: SamplerSpec,
                             workers: int = 1,
                             sim_config: SimulationConfig | None = None):
    """First N converged attempts in attempt order, any worker count."""
    spec.check_feasible(case)
    init_args = (case.to_dict(), spec, sim_config or SimulationConfig())
    found: list[SampleRecord] = []
    next_attempt = 0
    block = max(16, workers * 8)
    attempts_scanned = 0
    while len(found) < spec.count:
        attempts = list(range(next_attempt, next_attempt + block))
        results = _run_tasks(attempts, _attempt_task, workers, init_args)
        for a, rec in zip(attempts, results):
            if rec is not None and len(found) < spec.count:
                rec.index = len(found)
                attempts_scanned = a + 1
                found.append(rec)
        next_attempt += block
        if next_attempt > max(100, 1000 * max(spec.count, 1)):
            raise InfeasibleSpec(
                f"scanned {next_attempt} attempts but saved only "
                f"{len(found)}/{spec.count}")
    return found, attempts_scanned


def _fmt(x) -> str:
    return repr(float(x))


def generate_dataset(case: PowerSystemCase, spec: SamplerSpec,
                     contingencies_per_point: int, workers: int,
                     out_dir, sim_config: SimulationConfig | None = None) -> dict:
    """Sample N operating points, run the contingency batch, write shards.

    Output is a set of CSV shards plus a manifest; identical for any worker
    count. Failed simulations are flagged in place, never dropped.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    sim_config = sim_config or SimulationConfig()
    records, attempts_used = collect_operating_points(
        case, spec, workers, sim_config)

    tasks = [(r.index, j, r.pd, r.qd, r.pg, r.vg)
             for r in records for j in range(contingencies_per_point)]
    init_args = (case.to_dict(), spec, sim_config)
    sims = _run_tasks(tasks, _simulation_task, workers, init_args,
                      chunksize=4)
    sims.sort(key=lambda row: (row[0], row[1]))

    shard_files = []
    n_loads = len(case.loads)
    n_gens = spec.gen_p_range.shape[0]
    sample_header = (
        ["sample_index", "attempt", "iterations", "max_mismatch", "slack_p"]
        + [f"pd_{i}" for i in range(n_loads)]
        + [f"qd_{i}" for i in range(n_loads)]
        + [f"pg_{i}" for i in range(n_gens)]
        + [f"vg_{i}" for i in range(n_gens)]
    )
    for s in range(0, len(records), SHARD_SIZE):
        name = f"samples_{s // SHARD_SIZE:04d}.csv"
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(sample_header)
            for r in records[s:s + SHARD_SIZE]:
                w.writerow([r.index, r.attempt, r.iterations,
                            _fmt(r.max_mismatch), _fmt(r.slack_p)]
                           + [_fmt(v) for v in r.pd]
                           + [_fmt(v) for v in r.qd]
                           + [_fmt(v) for v in r.pg]
                           + [_fmt(v) for v in r.vg])
        shard_files.append(name)

    sim_header = ["sample_index", "contingency_index", "branch", "location",
                  "t_on", "t_clear", "label", "max_separation_deg", "error"]
    for s in range(0, len(sims), SHARD_SIZE):
        name = f"sims_{s // SHARD_SIZE:04d}.csv"
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(sim_header)
            for row in sims[s:s + SHARD_SIZE]:
                i, j, br, lam, t0, t1, label, sep, err = row
                w.writerow([i, j, br, _fmt(lam), _fmt(t0), _fmt(t1),
                            label, _fmt(sep), err])
        shard_files.append(name)

    label_counts = {}
    n_failed = 0
    for row in sims:
        label = row[6]
        if label == "failed":
            n_failed += 1
        else:
            label_counts[label] = label_counts.get(label, 0) + 1

    digest_doc = {
        "case": case.to_dict(),
        "spec": spec.to_jsonable(),
        "contingencies_per_point": contingencies_per_point,
        "sim": {"step": sim_config.step, "horizon": sim_config.horizon,
                "tolerance": sim_config.tolerance,
                "max_inner_iterations": sim_config.max_inner_iterations},
    }
    config_digest = hashlib.sha256(
        json.dumps(digest_doc, sort_keys=True).encode()).hexdigest()

    manifest = {
        "seed": spec.seed,
        "n_requested": spec.count,
        "n_saved": len(records),
        "n_failed": n_failed,
        "attempts_scanned": attempts_used,
        "label_counts": label_counts,
        "config_digest": config_digest,
        "shard_files": shard_files,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest
