"""The operational loop: estimate, select, act, observe, update.

A policy provider proposes an action for the current belief; a separate
safety layer (SER) can override it whenever its membership predicate
holds.  The loop runs against a plant, updates the belief by Bayes rule
after every observation, and stops once belief mass on the terminal set
crosses a threshold, a step cap is hit, or the provider has no action
left to offer.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Mapping

from .errors import ImpossibleObservationError, InvalidConfigError, ModelError
from .model import (
    Policy,
    Problem,
    ValueTable,
    belief_update,
    point_mass,
    q_value,
    validate_belief,
    value_iterate,
)

_TOL = 1e-9


def most_likely_state(belief) -> int:
    """Belief argmax; ties go to the lowest state index."""
    best, best_p = 0, -1.0
    for s, p in enumerate(belief):
        if p > best_p + _TOL:
            best, best_p = s, p
    return best


def belief_summary(problem: Problem, belief, top: int = 3):
    """The ``top`` most likely states as (label, probability) pairs."""
    ranked = sorted(
        ((p, s) for s, p in enumerate(belief) if p > _TOL),
        key=lambda x: (-x[0], x[1]),
    )
    return [(problem.state_labels[s], round(p, 9)) for p, s in ranked[:top]]


def observation_index(observation) -> int:
    """The observation-alphabet index carried by a plant observation."""
    ch = observation.channels
    if "observation_index" in ch:
        return ch["observation_index"]
    if "state_index" in ch:
        return ch["state_index"]
    raise InvalidConfigError(
        "observation carries neither observation_index nor state_index"
    )


class OfflinePolicyProvider:
    """Looks actions up in a fixed table at the most likely state."""

    def __init__(self, policy):
        self.policy = policy.actions if isinstance(policy, Policy) else dict(policy)

    def decide(self, problem: Problem, belief, observation, step: int):
        return self.policy.get(most_likely_state(belief))


class OnlineExpectimaxProvider:
    """Greedy one-step lookahead against optimal utilities.

    Utilities are computed once by value iteration and cached; each query
    maximizes the belief-weighted action value over the actions
    admissible everywhere in the belief support.  Ties break toward the
    lowest action index.
    """

    def __init__(self, problem: Problem, horizon: int = None):
        self.problem = problem
        self.table: ValueTable = value_iterate(problem, horizon=horizon)

    def decide(self, problem: Problem, belief, observation, step: int):
        support = [s for s, p in enumerate(belief) if p > _TOL]
        acts = set(problem.admissible[support[0]])
        for s in support[1:]:
            acts &= set(problem.admissible[s])
        if not acts:
            return None
        best, best_q = None, -math.inf
        for a in sorted(acts):
            q = sum(
                belief[s] * q_value(problem, s, a, self.table.values)
                for s in support
            )
            if q > best_q + 1e-12:
                best, best_q = a, q
        return best


@dataclass(frozen=True)
class SerPolicy:
    """Safety override: a membership predicate plus a response table.

    ``member`` is either a collection of state indices or a callable over
    observation channels (which of the two a scenario uses is part of its
    configuration).  ``actions`` must name a response for every state the
    predicate can hold in; ``safe_set`` are the states where the response
    chain is allowed to stand down.
    """

    member: object
    actions: Mapping
    safe_set: frozenset = frozenset()
    step_bound: int = None

    def triggered(self, state: int, channels: Mapping) -> bool:
        if callable(self.member):
            return bool(self.member(channels))
        return state in self.member


def arbitrate(state: int, channels: Mapping, ser, provider_action):
    """(action, provider tag): the safety layer wins whenever it triggers."""
    if ser is not None and ser.triggered(state, channels):
        action = ser.actions.get(state)
        if action is None:
            raise ModelError(
                f"safety predicate holds at state {state} but no response is defined"
            )
        return action, "SER"
    return provider_action, "HADM"


@dataclass
class SerReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_ser(problem: Problem, ser: SerPolicy) -> SerReport:
    """Exhaustively check the safety policy offline.

    From every state the policy covers, executing its actions must reach
    the safe set (or a terminal state) along every stochastic branch,
    without cycles and within the step bound.  Findings are reported, not
    raised.
    """
    report = SerReport()
    members = set(ser.actions) if callable(ser.member) else set(ser.member)
    bound = ser.step_bound if ser.step_bound is not None else problem.n_states

    for s in sorted(members):
        if s in ser.safe_set or problem.is_terminal(s):
            continue
        if ser.actions.get(s) is None:
            report.violations.append(
                f"no response defined for covered state {problem.state_labels[s]!r}"
            )

    seen_cycles = set()
    # depth[state] = worst-case steps still needed to reach safety, or None
    # while unresolved.
    resolved = {}

    def chase(s, path):
        if s in ser.safe_set or problem.is_terminal(s):
            return 0
        if s in resolved:
            return resolved[s]
        if s in path:
            cycle = tuple(sorted(set(path[path.index(s):])))
            if cycle not in seen_cycles:
                seen_cycles.add(cycle)
                labels = ", ".join(repr(problem.state_labels[x]) for x in cycle)
                report.violations.append(
                    f"response cycle never reaches the safe set: {labels}"
                )
            return None
        a = ser.actions.get(s)
        if a is None:
            if s not in members:
                report.violations.append(
                    f"no response defined for reachable state "
                    f"{problem.state_labels[s]!r}"
                )
            resolved[s] = None
            return None
        if a not in problem.admissible[s]:
            report.violations.append(
                f"response {problem.action_labels[a]!r} is inadmissible at "
                f"state {problem.state_labels[s]!r}"
            )
            resolved[s] = None
            return None
        worst = 0
        for s2, p in problem.transitions[(s, a)]:
            if p <= 0.0:
                continue
            d = chase(s2, path + [s])
            if d is None:
                resolved[s] = None
                return None
            worst = max(worst, d)
        resolved[s] = worst + 1
        return worst + 1

    for s in sorted(members):
        d = chase(s, [])
        if d is not None and d > bound:
            report.violations.append(
                f"safety takes {d} steps from {problem.state_labels[s]!r}, "
                f"exceeding the bound of {bound}"
            )
    return report


@dataclass
class LoopRecord:
    step: int
    belief: list  # [(state label, probability), ...] before acting
    action: str
    provider: str  # HADM | SER
    observation: dict
    reward: float
    cumulative: float


@dataclass
class LoopTrace:
    records: list = field(default_factory=list)
    terminal: bool = False
    terminal_label: str = None
    truncated: bool = False
    aborted: str = None  # diagnostic when the belief update failed
    total: float = 0.0

    def actions(self):
        return [r.action for r in self.records]

    def write_jsonl(self, fh: IO):
        for r in self.records:
            fh.write(
                json.dumps(
                    {
                        "step": r.step,
                        "belief": r.belief,
                        "action": r.action,
                        "provider": r.provider,
                        "observation": r.observation,
                        "reward": r.reward,
                        "cumulative": r.cumulative,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
        fh.write(
            json.dumps(
                {
                    "terminal": self.terminal,
                    "terminal_label": self.terminal_label,
                    "truncated": self.truncated,
                    "aborted": self.aborted,
                    "total": self.total,
                },
                sort_keys=True,
            )
            + "\n"
        )

    def write_csv(self, fh: IO):
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "most_likely", "action", "provider", "reward", "cumulative"]
        )
        for r in self.records:
            top = r.belief[0][0] if r.belief else ""
            writer.writerow(
                [r.step, top, r.action, r.provider, repr(r.reward), repr(r.cumulative)]
            )

    def to_table(self) -> str:
        lines = ["step  provider  action                reward      cumulative"]
        for r in self.records:
            lines.append(
                f"{r.step:<5d} {r.provider:<9s} {r.action:<21s} "
                f"{r.reward:<11g} {r.cumulative:g}"
            )
        if self.terminal:
            lines.append(f"terminal: {self.terminal_label}")
        if self.truncated:
            lines.append("truncated: no further action available")
        if self.aborted:
            lines.append(f"aborted: {self.aborted}")
        lines.append(f"total reward: {self.total:g}")
        return "\n".join(lines)


def run_loop(
    plant,
    problem: Problem,
    provider,
    ser: SerPolicy = None,
    b0=None,
    max_steps: int = 10000,
    terminal_belief: float = 0.999,
) -> LoopTrace:
    """Execute the loop until the terminal set is believed reached.

    ``plant`` must expose observe() and step(action) -> (observation,
    reward).  The belief starts at ``b0`` (default: point mass on the
    plant's current state) and is Bayes-updated after every step.  An
    impossible observation aborts with the diagnostic recorded on the
    trace; a provider returning None (and no safety override) truncates.
    """
    if b0 is None:
        b0 = point_mass(problem.n_states, plant.state)
    validate_belief(b0)
    b = tuple(b0)
    obs = plant.observe()
    trace = LoopTrace()

    for step in range(max_steps + 1):
        term_mass = sum(p for s, p in enumerate(b) if problem.is_terminal(s))
        if term_mass >= terminal_belief:
            trace.terminal = True
            trace.terminal_label = problem.state_labels[most_likely_state(b)]
            return trace
        if step == max_steps:
            break
        s_hat = most_likely_state(b)
        proposed = provider.decide(problem, b, obs, step)
        action, tag = arbitrate(s_hat, obs.channels, ser, proposed)
        if action is None:
            break
        summary = belief_summary(problem, b)
        obs, reward = plant.step(action)
        try:
            b = belief_update(problem, b, action, observation_index(obs))
        except ImpossibleObservationError as exc:
            trace.aborted = str(exc)
            return trace
        trace.total += reward
        trace.records.append(
            LoopRecord(
                step=step,
                belief=summary,
                action=problem.action_labels[action],
                provider=tag,
                observation=dict(obs.channels),
                reward=reward,
                cumulative=trace.total,
            )
        )
    trace.truncated = True
    trace.terminal_label = problem.state_labels[most_likely_state(b)]
    return trace
