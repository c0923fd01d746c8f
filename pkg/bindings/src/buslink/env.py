"""Gym-style environment shell around a bound engine session.

Actions are active-power setpoint deltas on the non-slack generators; the
reward couples quadratic generation cost with static violations (voltage
band, slack limits, clipping) and one verification transient simulation per
step. Training algorithms live outside this package; the shell only provides
reset/step and the space metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ActionOutOfBounds
from .session import load_case


@dataclass
class RewardSpec:
    """Cost and penalty shaping; the default is negative quadratic cost minus
    a large penalty per violation unit."""

    cost_c2: float = 0.01
    cost_c1: float = 1.0
    cost_c0: float = 0.0
    violation_penalty: float = 100.0
    vm_limits: tuple[float, float] = (0.94, 1.06)
    action_limit: float = 0.5          # max |dP| per step, pu
    clip_actions: bool = True          # False: raise ActionOutOfBounds
    verify_dynamics: bool = True
    verification_fault: tuple | None = None  # default: first branch, mid-line
    sim_horizon: float = 3.0
    sim_step: float = 0.01


class StabilityConstrainedDispatchEnv:
    """reset() -> obs; step(dP) -> (obs, reward, done, info)."""

    def __init__(self, case_path, reward_spec: RewardSpec | None = None,
                 check_version: bool = True):
        self.case_path = str(case_path)
        self.spec = reward_spec or RewardSpec()
        self.check_version = check_version
        self.session = None
        self._gen_rows = []
        self._load_rows = []
        self.reset()

    # -- spaces ---------------------------------------------------------------

    @property
    def action_space(self) -> dict:
        n = len(self._gen_rows)
        return {
            "shape": (n,),
            "low": np.full(n, -self.spec.action_limit),
            "high": np.full(n, self.spec.action_limit),
            "description": "active-power setpoint deltas of non-slack "
                           "generators, pu",
        }

    @property
    def observation_space(self) -> dict:
        return {
            "shape": (self._obs_len,),
            "description": "gen P setpoints, gen V setpoints, load P, "
                           "load Q, bus |V|, bus angle",
        }

    # -- helpers ---------------------------------------------------------------

    def _scan_components(self):
        counts = self.session.component_counts()
        self._gen_rows = [
            g for g in range(counts["generators"])
            if self.session.get_parameter("generator", g, "status")
            and not self.session.get_parameter("generator", g, "slack")
        ]
        self._slack_rows = [
            g for g in range(counts["generators"])
            if self.session.get_parameter("generator", g, "status")
            and self.session.get_parameter("generator", g, "slack")
        ]
        self._load_rows = list(range(counts["loads"]))

    def _observation(self) -> np.ndarray:
        pg = [self.session.get_parameter("generator", g, "p")
              for g in self._gen_rows]
        vg = [self.session.get_parameter("generator", g, "v")
              for g in self._gen_rows]
        pl = [self.session.get_parameter("load", l, "p")
              for l in self._load_rows]
        ql = [self.session.get_parameter("load", l, "q")
              for l in self._load_rows]
        vm, va = self.session.bus_voltages()
        obs = np.concatenate([pg, vg, pl, ql, vm, va]).astype(np.float64)
        self._obs_len = obs.shape[0]
        return obs

    def _default_fault(self):
        if self.spec.verification_fault is not None:
            return self.spec.verification_fault
        return (0, 0.5, 0.0, 0.1)

    def _cost(self) -> float:
        p, _ = self.session.generator_output()
        s = self.spec
        return float(np.sum(s.cost_c2 * p * p + s.cost_c1 * np.abs(p)
                            + s.cost_c0))

    # -- gym protocol ---------------------------------------------------------

    def reset(self) -> np.ndarray:
        self.session = load_case(self.case_path, self.check_version)
        self._scan_components()
        pf = self.session.solve_power_flow()
        if not pf["converged"]:
            raise RuntimeError("base case power flow does not converge")
        obs = self._observation()
        self._last_obs = obs
        return obs

    def step(self, action):
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (len(self._gen_rows),):
            raise ActionOutOfBounds(
                f"action shape {action.shape} != ({len(self._gen_rows)},)")
        limit = self.spec.action_limit
        if not self.spec.clip_actions and np.any(np.abs(action) > limit):
            raise ActionOutOfBounds(
                f"|action| exceeds the {limit} pu step limit")

        clipped_amount = 0.0
        stepped = np.clip(action, -limit, limit)
        clipped_amount += float(np.sum(np.abs(action - stepped)))
        for g, delta in zip(self._gen_rows, stepped):
            p = self.session.get_parameter("generator", g, "p")
            pmin = self.session.get_parameter("generator", g, "pmin")
            pmax = self.session.get_parameter("generator", g, "pmax")
            target = p + float(delta)
            bounded = min(max(target, pmin), pmax)
            clipped_amount += abs(target - bounded)
            if not self.spec.clip_actions and bounded != target:
                raise ActionOutOfBounds(
                    f"generator {g} setpoint {target:.4f} outside "
                    f"[{pmin}, {pmax}]")
            self.session.set_parameter("generator", g, "p", bounded)

        pf = self.session.solve_power_flow()
        info = {"clipped": clipped_amount > 0.0,
                "penalties": {"action_clipped": clipped_amount}}
        if not pf["converged"]:
            info["penalties"]["diverged"] = 1.0
            reward = -self.spec.violation_penalty * (1.0 + clipped_amount)
            info["cost"] = float("nan")
            # observation stays at the last solved point; flag the episode
            return self._last_obs, reward, True, info

        vm, _ = self.session.bus_voltages()
        lo, hi = self.spec.vm_limits
        vm_violation = float(np.sum(np.maximum(vm - hi, 0.0)
                                    + np.maximum(lo - vm, 0.0)))
        info["penalties"]["voltage"] = vm_violation

        slack_violation = 0.0
        p_out, _ = self.session.generator_output()
        for g in self._slack_rows:
            pmin = self.session.get_parameter("generator", g, "pmin")
            pmax = self.session.get_parameter("generator", g, "pmax")
            slack_violation += max(p_out[g] - pmax, 0.0) \
                + max(pmin - p_out[g], 0.0)
        info["penalties"]["slack_limit"] = slack_violation

        unstable = 0.0
        if self.spec.verify_dynamics:
            summary = self.session.run_simulation(
                self._default_fault(), step=self.spec.sim_step,
                horizon=self.spec.sim_horizon)
            info["label"] = summary["label"]
            info["max_separation_deg"] = summary["max_separation_deg"]
            unstable = 1.0 if summary["label"] == "unstable" else 0.0
            info["penalties"]["unstable"] = unstable

        cost = self._cost()
        info["cost"] = cost
        total_violation = (clipped_amount + vm_violation + slack_violation
                           + unstable)
        reward = -cost - self.spec.violation_penalty * total_violation
        obs = self._observation()
        self._last_obs = obs
        return obs, reward, False, info


def make_env(case_path, reward_spec: RewardSpec | None = None,
             check_version: bool = True) -> StabilityConstrainedDispatchEnv:
    """Build the environment shell for a case file."""
    return StabilityConstrainedDispatchEnv(case_path, reward_spec,
                                           check_version)
