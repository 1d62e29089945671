"""Ground-truth simulator for compiled scenarios.

A plant owns a hidden assignment of every scenario random variable
(terrain classes, activity redo outcomes), sampled from a seeded
generator at construction or pinned by explicit overrides.  Stepping the
plant resolves stochastic branches against that assignment, so re-running
with the same seed reproduces the trace exactly.
"""
from __future__ import annotations

import random

from ..errors import InadmissibleActionError, InvalidConfigError
from ..shm import SensorObservation
from .compiler import CompiledScenario


def resolve_overrides(compiled: CompiledScenario, overrides) -> dict:
    """Expand CLI-style name=value pairs into random-variable assignments.

    Names are either scenario-declared aliases (e.g. terrain=difficult-both)
    or raw random-variable names (e.g. terrain:left=difficult).
    """
    out = {}
    aliases = compiled.spec.override_aliases
    for name, value in (overrides or {}).items():
        if name in aliases:
            expansion = aliases[name].get(str(value))
            if expansion is None:
                raise InvalidConfigError(
                    f"override {name!r} has no variant {value!r}; "
                    f"choose from {sorted(aliases[name])}"
                )
            out.update(expansion)
        elif name in compiled.rv_defs:
            if str(value) not in compiled.rv_defs[name]:
                raise InvalidConfigError(
                    f"{name!r} cannot be {value!r}; "
                    f"choose from {sorted(compiled.rv_defs[name])}"
                )
            out[name] = str(value)
        else:
            raise InvalidConfigError(
                f"unknown ground-truth variable {name!r}; declared: "
                f"{sorted(set(compiled.rv_defs) | set(aliases))}"
            )
    return out


class Plant:
    """Executes actions against one sampled ground truth."""

    def __init__(self, compiled: CompiledScenario, seed: int = 0, overrides=None):
        self.compiled = compiled
        self.seed = seed
        rng = random.Random(seed)
        self.assignments = {}
        for rv in sorted(compiled.rv_defs):
            dist = compiled.rv_defs[rv]
            roll = rng.random()
            acc = 0.0
            chosen = None
            for value, p in dist.items():
                acc += p
                if roll < acc:
                    chosen = value
                    break
            self.assignments[rv] = chosen if chosen is not None else value
        self.assignments.update(resolve_overrides(compiled, overrides))
        self.state = compiled.initial_state

    @property
    def problem(self):
        return self.compiled.problem

    def is_terminal(self) -> bool:
        return self.problem.is_terminal(self.state)

    def observe(self) -> SensorObservation:
        ch = self.compiled.channels(self.state)
        return SensorObservation(channels=ch, timestamp=ch["time_h"])

    def step(self, action: int):
        """Execute an action; returns (observation, realized reward)."""
        s = self.state
        self.problem.require_admissible(s, action)
        chosen = None
        for s2, p, assign in self.compiled.branches[(s, action)]:
            if all(self.assignments.get(rv) == val for rv, val in assign.items()):
                if chosen is not None:
                    raise InvalidConfigError(
                        "ambiguous branch resolution; ground truth underdetermined"
                    )
                chosen = s2
        if chosen is None:
            raise InadmissibleActionError(
                "no transition branch consistent with the ground truth"
            )
        reward = self.problem.rewards[(s, action)] + self.problem.transition_rewards.get(
            (s, action, chosen), 0.0
        )
        self.state = chosen
        return self.observe(), reward
