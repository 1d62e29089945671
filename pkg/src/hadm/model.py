"""Finite decision problems and their solvers.

Holds the generic substrate used by every scenario: tabular MDP/POMDP
definitions, expected-utility computation, policy evaluation, value
iteration, greedy policy extraction, Bayesian belief updates, and
open-loop vs. closed-loop evaluation of fixed behaviors.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence, Union

from .errors import (
    ImpossibleObservationError,
    InadmissibleActionError,
    IncompleteValueTableError,
    InvalidConfigError,
    ModelError,
    NotDeterministicError,
)

PROB_TOL = 1e-9

# A transition/observation row: ((index, probability), ...)
Row = tuple

Belief = tuple


def _check_row(row, n, what):
    total = 0.0
    for idx, p in row:
        if not (0 <= idx < n):
            raise ModelError(f"{what}: index {idx} out of range")
        if p < -PROB_TOL or p > 1 + PROB_TOL:
            raise ModelError(f"{what}: probability {p} outside [0, 1]")
        total += p
    if abs(total - 1.0) > PROB_TOL:
        raise ModelError(f"{what}: probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class Problem:
    """A finite decision problem.

    ``rewards`` maps admissible (state, action) pairs to immediate reward.
    ``transition_rewards`` optionally adds a successor-dependent term,
    received (and discounted) on arrival; it is how scenario compilers
    attach branch-dependent energy costs and terminal bonuses.
    Observation rows are keyed by (successor, action).  Instances are
    validated on construction and immutable afterwards.
    """

    state_labels: tuple
    action_labels: tuple
    admissible: tuple  # per state: tuple of action indices
    transitions: Mapping  # (s, a) -> ((s', p), ...)
    rewards: Mapping  # (s, a) -> float
    terminal: frozenset = frozenset()
    gamma: float = 1.0
    horizon: int = None
    transition_rewards: Mapping = field(default_factory=dict)
    observation_labels: tuple = None
    observations: Mapping = None  # (s', a) -> ((o, p), ...)

    def __post_init__(self):
        n = len(self.state_labels)
        if n < 1:
            raise ModelError("state space must be non-empty")
        if len(self.admissible) != n:
            raise ModelError("admissible action list length != state count")
        if not (0.0 <= self.gamma <= 1.0):
            raise ModelError(f"gamma {self.gamma} outside [0, 1]")
        if self.gamma == 1.0 and self.horizon is None:
            raise ModelError("gamma = 1 requires a bounded horizon")
        if not self.terminal <= set(range(n)):
            raise ModelError("terminal set is not a subset of the state space")
        for s in range(n):
            acts = self.admissible[s]
            if s in self.terminal:
                if len(acts) != 1:
                    raise ModelError(f"terminal state {s} must have exactly one action")
            elif len(acts) < 1:
                raise ModelError(f"non-terminal state {s} has no admissible action")
            for a in acts:
                if not (0 <= a < len(self.action_labels)):
                    raise ModelError(f"action index {a} out of range at state {s}")
                row = self.transitions.get((s, a))
                if row is None:
                    raise ModelError(f"missing transition row for ({s}, {a})")
                _check_row(row, n, f"T({s},{a},.)")
                if s in self.terminal and (len(row) != 1 or row[0][0] != s):
                    raise ModelError(f"terminal state {s} must self-loop")
                r = self.rewards.get((s, a))
                if r is None or not math.isfinite(r):
                    raise ModelError(f"reward undefined or non-finite for ({s}, {a})")
        if self.observations is not None:
            if self.observation_labels is None:
                raise ModelError("observations given without an observation alphabet")
            n_obs = len(self.observation_labels)
            for key, row in self.observations.items():
                _check_row(row, n_obs, f"O{key}")

    @property
    def n_states(self):
        return len(self.state_labels)

    def actions_at(self, s):
        return self.admissible[s]

    def is_terminal(self, s):
        return s in self.terminal

    def require_admissible(self, s, a):
        if a not in self.admissible[s]:
            raise InadmissibleActionError(
                f"action {self.action_labels[a]!r} not admissible in "
                f"state {self.state_labels[s]!r}"
            )


@dataclass
class ValueTable:
    """State utilities plus solver metadata."""

    values: dict
    iterations: int = 0
    residual: float = math.inf
    residual_history: list = field(default_factory=list)

    def __getitem__(self, s):
        return self.values[s]

    def get(self, s, default=None):
        return self.values.get(s, default)

    def write_csv(self, problem: Problem, fh: IO):
        writer = csv.writer(fh)
        writer.writerow(["state", "value"])
        for s in sorted(self.values):
            writer.writerow([problem.state_labels[s], repr(self.values[s])])


@dataclass
class Policy:
    """Tabular state -> action map with argmax tie metadata."""

    actions: dict
    ties: dict = field(default_factory=dict)

    def __getitem__(self, s):
        return self.actions[s]

    def write_csv(self, problem: Problem, fh: IO):
        writer = csv.writer(fh)
        writer.writerow(["state", "action"])
        for s in sorted(self.actions):
            writer.writerow(
                [problem.state_labels[s], problem.action_labels[self.actions[s]]]
            )


Plan = Sequence


def point_mass(n_states: int, s: int) -> Belief:
    return tuple(1.0 if i == s else 0.0 for i in range(n_states))


def validate_belief(b: Belief):
    if any(p < -PROB_TOL for p in b):
        raise ModelError("belief has a negative entry")
    if abs(sum(b) - 1.0) > PROB_TOL:
        raise ModelError(f"belief sums to {sum(b)}, expected 1")


def expected_utility(problem: Problem, s: int, a: int, u) -> float:
    """Expected utility of (s, a): sum over successors of T(s,a,s') * u(s')."""
    problem.require_admissible(s, a)
    values = u.values if isinstance(u, ValueTable) else u
    total = 0.0
    for s2, p in problem.transitions[(s, a)]:
        if s2 not in values:
            raise IncompleteValueTableError(
                f"no value for successor {problem.state_labels[s2]!r}"
            )
        total += p * values[s2]
    return total


def q_value(problem: Problem, s: int, a: int, values: Mapping) -> float:
    """One-step lookahead: R(s,a) + gamma * sum T * (rho + u(s'))."""
    problem.require_admissible(s, a)
    acc = 0.0
    for s2, p in problem.transitions[(s, a)]:
        rho = problem.transition_rewards.get((s, a, s2), 0.0)
        u2 = values[s2] if s2 in values else _missing(problem, s2)
        acc += p * (rho + u2)
    return problem.rewards[(s, a)] + problem.gamma * acc


def _missing(problem, s2):
    raise IncompleteValueTableError(
        f"no value for successor {problem.state_labels[s2]!r}"
    )


def plan_utility(problem: Problem, s0: int, plan: Plan) -> float:
    """Cumulative reward of a fixed plan along a deterministic trajectory."""
    if problem.horizon is not None and len(plan) > problem.horizon + 1:
        raise InvalidConfigError("plan longer than horizon + 1")
    s, total = s0, 0.0
    for a in plan:
        problem.require_admissible(s, a)
        row = problem.transitions[(s, a)]
        if len(row) != 1:
            raise NotDeterministicError(
                f"stochastic transition at ({problem.state_labels[s]!r}, "
                f"{problem.action_labels[a]!r})"
            )
        s2 = row[0][0]
        total += problem.rewards[(s, a)] + problem.transition_rewards.get(
            (s, a, s2), 0.0
        )
        s = s2
    return total


def _normalize_level(problem, level):
    """Turn one policy level into state -> ((a, p), ...)."""
    if isinstance(level, Policy):
        level = level.actions
    out = {}
    for s in range(problem.n_states):
        if s in problem.terminal:
            out[s] = ((problem.admissible[s][0], 1.0),)
            continue
        choice = level.get(s)
        if choice is None:
            raise InvalidConfigError(
                f"policy undefined for non-terminal state {problem.state_labels[s]!r}"
            )
        if isinstance(choice, int):
            out[s] = ((choice, 1.0),)
        else:
            out[s] = tuple(choice)
    return out


def evaluate_policy(problem: Problem, pi, t: int) -> ValueTable:
    """Expected utility of executing ``pi`` for ``t`` steps (t+1 actions).

    ``pi`` may be a Policy, a state->action dict, a state->((a, p), ...)
    dict for stochastic policies, or a sequence of t+1 of these applied
    level by level (nonstationary).
    """
    if isinstance(pi, (list, tuple)) and pi and isinstance(
        pi[0], (dict, Policy)
    ):
        if len(pi) != t + 1:
            raise InvalidConfigError(f"need {t + 1} policy levels, got {len(pi)}")
        levels = [_normalize_level(problem, lv) for lv in pi]
    else:
        levels = [_normalize_level(problem, pi)] * (t + 1)

    u = None
    for level in reversed(levels):
        nxt = {}
        for s in range(problem.n_states):
            val = 0.0
            for a, pa in level[s]:
                problem.require_admissible(s, a)
                if u is None:
                    # Base of the recursion: the final action's reward,
                    # including any successor-dependent component.
                    q = problem.rewards[(s, a)] + problem.gamma * sum(
                        p * problem.transition_rewards.get((s, a, s2), 0.0)
                        for s2, p in problem.transitions[(s, a)]
                    )
                else:
                    q = q_value(problem, s, a, u)
                val += pa * q
            nxt[s] = val
        u = nxt
    return ValueTable(values=u, iterations=t + 1, residual=0.0)


def value_iterate(
    problem: Problem,
    horizon: int = None,
    epsilon: float = None,
    return_stages: bool = False,
):
    """Optimal utilities by value iteration.

    Stop either after a fixed number of sweeps (finite horizon) or when
    the sup-norm residual drops below ``epsilon`` (requires gamma < 1).
    Defaults to the problem horizon when set, otherwise epsilon = 1e-9.
    """
    if horizon is None and epsilon is None:
        if problem.horizon is not None:
            horizon = problem.horizon
        else:
            epsilon = 1e-9
    if epsilon is not None and horizon is None and problem.gamma >= 1.0:
        raise InvalidConfigError("residual stopping requires gamma < 1")

    history = []
    if horizon is not None:
        u = {}
        for s in range(problem.n_states):
            u[s] = max(
                problem.rewards[(s, a)]
                + problem.gamma
                * sum(
                    p * problem.transition_rewards.get((s, a, s2), 0.0)
                    for s2, p in problem.transitions[(s, a)]
                )
                for a in problem.admissible[s]
            )
        stages = [dict(u)]
        sweeps = 0
        residual = math.inf
        for _ in range(horizon):
            nxt = {
                s: max(q_value(problem, s, a, u) for a in problem.admissible[s])
                for s in range(problem.n_states)
            }
            residual = max(abs(nxt[s] - u[s]) for s in nxt)
            history.append(residual)
            u = nxt
            sweeps += 1
            if return_stages:
                stages.append(dict(u))
            elif residual == 0.0:
                break  # exact fixed point; further sweeps are identity
        table = ValueTable(u, iterations=sweeps, residual=residual,
                           residual_history=history)
        if return_stages:
            return table, stages
        return table

    u = {s: 0.0 for s in range(problem.n_states)}
    residual = math.inf
    sweeps = 0
    while residual > epsilon:
        nxt = {
            s: max(q_value(problem, s, a, u) for a in problem.admissible[s])
            for s in range(problem.n_states)
        }
        residual = max(abs(nxt[s] - u[s]) for s in nxt)
        history.append(residual)
        u = nxt
        sweeps += 1
        if sweeps > 10**6:
            raise InvalidConfigError("value iteration failed to converge")
    return ValueTable(u, iterations=sweeps, residual=residual,
                      residual_history=history)


def extract_policy(problem: Problem, u) -> Policy:
    """Greedy policy w.r.t. a value table; ties go to the lowest action index."""
    values = u.values if isinstance(u, ValueTable) else u
    actions, ties = {}, {}
    for s in range(problem.n_states):
        best, best_q = None, -math.inf
        tied = []
        for a in problem.admissible[s]:
            q = q_value(problem, s, a, values)
            if q > best_q + 1e-12:
                best, best_q, tied = a, q, [a]
            elif abs(q - best_q) <= 1e-12:
                tied.append(a)
        actions[s] = best
        if len(tied) > 1:
            ties[s] = tuple(tied)
    return Policy(actions=actions, ties=ties)


def extract_nonstationary(problem: Problem, stages) -> list:
    """Greedy per-level policies from value-iteration stages (latest first)."""
    out = []
    for k in range(len(stages) - 1, 0, -1):
        out.append(extract_policy(problem, stages[k - 1]))
    # Base level: maximize the immediate (final) reward.
    base = {}
    for s in range(problem.n_states):
        best, best_q = None, -math.inf
        for a in problem.admissible[s]:
            q = problem.rewards[(s, a)] + problem.gamma * sum(
                p * problem.transition_rewards.get((s, a, s2), 0.0)
                for s2, p in problem.transitions[(s, a)]
            )
            if q > best_q + 1e-12:
                best, best_q = a, q
        base[s] = best
    out.append(Policy(actions=base))
    return out


def belief_update(problem: Problem, b: Belief, a: int, o: int) -> Belief:
    """Bayes update: b'(s') proportional to O(s',a,o) * sum_s T(s,a,s') b(s)."""
    if problem.observations is None:
        raise InvalidConfigError("problem has no observation model")
    n = problem.n_states
    pred = [0.0] * n
    for s in range(n):
        if b[s] <= 0.0:
            continue
        problem.require_admissible(s, a)
        for s2, p in problem.transitions[(s, a)]:
            pred[s2] += p * b[s]
    post = [0.0] * n
    for s2 in range(n):
        if pred[s2] <= 0.0:
            continue
        row = problem.observations.get((s2, a), ())
        like = 0.0
        for oi, p in row:
            if oi == o:
                like += p
        post[s2] = like * pred[s2]
    z = sum(post)
    if z <= 0.0:
        raise ImpossibleObservationError(
            f"observation {problem.observation_labels[o]!r} has zero probability "
            f"after action {problem.action_labels[a]!r}"
        )
    return tuple(x / z for x in post)


def _behavior_next(problem, behavior, s, plan_pos):
    """Action distribution at s for a plan / policy / 'uniform' behavior."""
    if behavior == "uniform" or behavior is None:
        acts = problem.admissible[s]
        return [(a, 1.0 / len(acts)) for a in acts], plan_pos
    if isinstance(behavior, Policy):
        behavior = behavior.actions
    if isinstance(behavior, Mapping):
        choice = behavior.get(s, "uniform")
        if choice == "uniform":
            acts = problem.admissible[s]
            return [(a, 1.0 / len(acts)) for a in acts], plan_pos
        if isinstance(choice, int):
            return [(choice, 1.0)], plan_pos
        return list(choice), plan_pos
    # Plan: a fixed action sequence.
    if plan_pos >= len(behavior):
        return None, plan_pos
    return [(behavior[plan_pos], 1.0)], plan_pos + 1


def open_loop_expectation(problem: Problem, s0: int, behavior, horizon: int = None):
    """Expected cumulative reward of a fixed behavior, with no
    observation-conditioned branching, plus the full scenario list.

    ``behavior`` is a plan (sequence of action indices), a policy mapping
    (missing states fall back to uniform-random), or "uniform".  Returns
    (expectation, [(probability, total reward), ...]).
    """
    if horizon is None:
        horizon = problem.horizon
    if horizon is None:
        raise InvalidConfigError("open-loop enumeration needs a finite horizon")

    leaves = []

    def recurse(s, depth, prob, total, disc, plan_pos):
        if problem.is_terminal(s) or depth > horizon:
            leaves.append((prob, total))
            return
        dist, nxt_pos = _behavior_next(problem, behavior, s, plan_pos)
        if dist is None:  # plan exhausted
            leaves.append((prob, total))
            return
        for a, pa in dist:
            if pa <= 0.0:
                continue
            problem.require_admissible(s, a)
            r = problem.rewards[(s, a)]
            for s2, p in problem.transitions[(s, a)]:
                if p <= 0.0:
                    continue
                rho = problem.transition_rewards.get((s, a, s2), 0.0)
                recurse(
                    s2,
                    depth + 1,
                    prob * pa * p,
                    total + disc * (r + problem.gamma * rho),
                    disc * problem.gamma,
                    nxt_pos,
                )

    recurse(s0, 0, 1.0, 0.0, 1.0, 0)
    merged = {}
    for prob, total in leaves:
        key = round(total, 9)
        merged[key] = merged.get(key, 0.0) + prob
    scenarios = sorted(((p, t) for t, p in merged.items()), key=lambda x: -x[1])
    expected = sum(p * t for p, t in leaves)
    return expected, scenarios


def closed_loop_value(problem: Problem, s0: int, horizon: int = None) -> float:
    """Expected cumulative reward when actions condition on everything
    observed so far, by exhaustive expectimax.

    Fully observable problems (no observation model) recurse over states
    and the result equals value iteration at s0; otherwise the recursion
    runs over beliefs reachable under the observation model.
    """
    if horizon is None:
        horizon = problem.horizon
    if horizon is None:
        raise InvalidConfigError("closed-loop evaluation needs a finite horizon")
    levels = horizon + 1

    if problem.observations is None:
        memo = {}

        def value(s, lv):
            if lv == 0 or problem.is_terminal(s):
                return 0.0
            key = (s, lv)
            if key in memo:
                return memo[key]
            best = -math.inf
            for a in problem.admissible[s]:
                acc = 0.0
                for s2, p in problem.transitions[(s, a)]:
                    rho = problem.transition_rewards.get((s, a, s2), 0.0)
                    acc += p * (rho + value(s2, lv - 1))
                best = max(best, problem.rewards[(s, a)] + problem.gamma * acc)
            memo[key] = best
            return best

        return value(s0, levels)

    memo = {}

    def belief_value(b, lv):
        support = [s for s in range(problem.n_states) if b[s] > PROB_TOL]
        if lv == 0 or all(problem.is_terminal(s) for s in support):
            return 0.0
        key = (tuple(round(x, 12) for x in b), lv)
        if key in memo:
            return memo[key]
        acts = set(problem.admissible[support[0]])
        for s in support[1:]:
            acts &= set(problem.admissible[s])
        if not acts:
            raise ModelError("no action admissible across the belief support")
        best = -math.inf
        for a in sorted(acts):
            imm = sum(b[s] * problem.rewards[(s, a)] for s in support)
            hop = sum(
                b[s] * p * problem.transition_rewards.get((s, a, s2), 0.0)
                for s in support
                for s2, p in problem.transitions[(s, a)]
            )
            # Probability of each observation under (b, a).
            obs_p = {}
            for s in support:
                for s2, p in problem.transitions[(s, a)]:
                    for o, po in problem.observations.get((s2, a), ()):
                        obs_p[o] = obs_p.get(o, 0.0) + b[s] * p * po
            future = 0.0
            for o in sorted(obs_p):
                if obs_p[o] <= PROB_TOL:
                    continue
                b2 = belief_update(problem, b, a, o)
                future += obs_p[o] * belief_value(b2, lv - 1)
            best = max(best, imm + problem.gamma * (hop + future))
        memo[key] = best
        return best

    return belief_value(point_mass(problem.n_states, s0), levels)


def identity_observation_model(n_states: int, n_actions: int):
    """Perfect observability: the observation names the successor state."""
    return {
        (s, a): ((s, 1.0),) for s in range(n_states) for a in range(n_actions)
    }
