"""Named mission-execution strategies over compiled scenarios.

Four strategies share one provider interface:

* ``hadm``: online greedy lookahead against optimal utilities of the
  unified decision problem.
* ``shm-baseline``: the separated pipeline; follows the nominal plan,
  runs detection/diagnosis/prognosis on every observation, applies
  mitigation rules, and aborts when operational constraints block the
  plan.  Deliberately myopic.
* ``phm-commit``: evaluates each declared route open-loop once, commits
  to the best, and never revisits the choice.
* ``fixed-plan``: executes the nominal plan verbatim.
"""
from __future__ import annotations

import itertools
import random

from .errors import EscalationRequired, InvalidConfigError
from .loop import OnlineExpectimaxProvider, most_likely_state, run_loop
from .rover.compiler import CompiledScenario
from .rover.plant import Plant
from .shm import (
    DiagnosisRule,
    FaultDetector,
    MitigationRule,
    ThresholdPredicate,
    diagnose,
    phm_route_choice,
    prognose_fault,
    select_recovery,
)


class HadmProvider(OnlineExpectimaxProvider):
    def __init__(self, compiled: CompiledScenario, seed: int = 0):
        super().__init__(compiled.problem)

    @staticmethod
    def applicable(spec) -> bool:
        return spec.kind == "rover"


class FixedPlanProvider:
    """Plays the nominal plan action by action, then stops."""

    def __init__(self, compiled: CompiledScenario, seed: int = 0):
        if not compiled.spec.nominal_plan:
            raise InvalidConfigError("scenario declares no nominal plan")
        self.compiled = compiled
        self.plan = [compiled.action(lbl) for lbl in compiled.spec.nominal_plan]
        self.pos = 0

    @staticmethod
    def applicable(spec) -> bool:
        return spec.kind == "rover" and bool(spec.nominal_plan)

    def decide(self, problem, belief, observation, step):
        if self.pos >= len(self.plan):
            return None
        a = self.plan[self.pos]
        if a not in problem.admissible[most_likely_state(belief)]:
            return None
        self.pos += 1
        return a


class PhmCommitProvider:
    """Commits once to the route with the best open-loop expectation.

    Interior decisions a route leaves open ("uniform") are drawn from a
    seeded generator.  With ``recommit_each_step`` the route comparison is
    re-run from the current position every step; committed moves already
    taken are sunk, so re-running cannot switch branches, which is the
    point the comparison strategy exists to make.
    """

    def __init__(self, compiled: CompiledScenario, seed: int = 0,
                 recommit_each_step: bool = False):
        if not compiled.spec.routes:
            raise InvalidConfigError("scenario declares no routes")
        self.compiled = compiled
        self.rng = random.Random(seed)
        self.recommit_each_step = recommit_each_step
        self.route_id = None
        self.expectations = None

    @staticmethod
    def applicable(spec) -> bool:
        return spec.kind == "rover" and bool(spec.routes)

    def _commit(self, problem):
        policies = {
            r.id: self.compiled.route_policy(r.id) for r in self.compiled.spec.routes
        }
        self.route_id, self.expectations = phm_route_choice(problem, policies)

    def decide(self, problem, belief, observation, step):
        if self.route_id is None or self.recommit_each_step:
            chosen = self.route_id
            self._commit(problem)
            if chosen is not None:
                # A committed branch stays committed between re-runs.
                self.route_id = chosen
        route = None
        for r in self.compiled.spec.routes:
            if r.id == self.route_id:
                route = r
        s = most_likely_state(belief)
        move = route.moves.get(self.compiled.states[s].position)
        if move is None:
            return None
        if move == "uniform":
            return self.rng.choice(sorted(problem.admissible[s]))
        a = self.compiled.action(move)
        return a if a in problem.admissible[s] else None


class ShmBaselineProvider:
    """The separated pipeline driven by the scenario's rule tables.

    Every observation runs detection; fired predicates are diagnosed,
    each descriptor is prognosed by linear extrapolation, and the
    matching mitigation is applied.  Operational constraints attached to
    a mitigation persist (the component stays marked faulty); when they
    block the next planned move, execution switches to the abort plan.
    All pipeline activity is logged in ``events`` for inspection.
    """

    def __init__(self, compiled: CompiledScenario, seed: int = 0):
        self.compiled = compiled
        spec = compiled.spec
        rules = spec.shm_rules or {}
        self.detector = FaultDetector(
            predicates=tuple(
                ThresholdPredicate(
                    channel=d["channel"], op=d["op"], limit=d["limit"],
                    when=d.get("when"),
                )
                for d in rules.get("detectors", ())
            )
        )
        self.diagnosis_rules = tuple(
            DiagnosisRule(
                channel=d["channel"], component=d["component"], mode=d["mode"],
                parameters=d.get("parameters", {}),
                probability=d.get("probability", 1.0),
            )
            for d in rules.get("diagnosis", ())
        )
        self.mitigations = tuple(
            MitigationRule(
                fault_mode=m["fault_mode"], action=m["action"],
                constraints=m.get("constraints", {}),
                priority=m.get("priority", 0),
                mark_faulty=m.get("mark_faulty"),
            )
            for m in rules.get("mitigations", ())
        )
        self.min_probability = rules.get("min_probability", 0.0)
        self.plan = [compiled.action(lbl) for lbl in spec.nominal_plan]
        self.pos = 0
        self.allowed_grades = None
        self.faulty = set()
        self.cooling = False
        self.aborting = False
        self.events = []

    @staticmethod
    def applicable(spec) -> bool:
        return spec.kind == "rover" and bool(spec.nominal_plan)

    def _cool_action(self, problem, s):
        spec = self.compiled.spec
        if spec.actions.cool_grid_h is None:
            return None
        a = self.compiled.action(f"cool:{round(spec.actions.cool_grid_h, 6)}h")
        return a if a in problem.admissible[s] else None

    def _run_pipeline(self, problem, s, observation, step):
        fired = self.detector.fired(observation)
        if not fired:
            return None
        descriptors = diagnose(self.diagnosis_rules, observation, fired)
        ruls = [prognose_fault(d, observation) for d in descriptors]
        known = [r for r in ruls if r is not None]
        rul_hours = min(known) if known else None
        event = {
            "step": step,
            "modes": [d.mode for d in descriptors],
            "rul_hours": rul_hours,
        }
        try:
            action_label, constraints = select_recovery(
                descriptors, rul_hours, self.mitigations, self.min_probability
            )
        except EscalationRequired as exc:
            event["escalation"] = str(exc)
            self.events.append(event)
            return None
        event["recovery"] = action_label
        event["constraints"] = constraints
        self.events.append(event)
        for rule in self.mitigations:
            if rule.action == action_label and rule.mark_faulty:
                self.faulty.add(rule.mark_faulty)
        if "grades" in constraints:
            self.allowed_grades = tuple(constraints["grades"])
        if action_label == "stop_and_cool_down":
            self.cooling = True
            return self._cool_action(problem, s)
        a = self.compiled.action(action_label)
        return a if a in problem.admissible[s] else None

    def decide(self, problem, belief, observation, step):
        spec = self.compiled.spec
        s = most_likely_state(belief)
        if self.cooling:
            temp = observation.get("motor_temp_c")
            if temp is not None and temp > spec.thermal.nominal_c + 1e-9:
                return self._cool_action(problem, s)
            self.cooling = False
        recovery = self._run_pipeline(problem, s, observation, step)
        if recovery is not None:
            return recovery
        position = self.compiled.states[s].position
        if self.aborting:
            move = spec.abort_plan.get(position)
            if move is None:
                return None
            a = self.compiled.action(move)
            return a if a in problem.admissible[s] else None
        if self.pos >= len(self.plan):
            return None
        a = self.plan[self.pos]
        label = problem.action_labels[a]
        if label.startswith("drive:") and self.allowed_grades is not None:
            seg = spec.segment(label.split(":", 1)[1])
            if seg.grade not in self.allowed_grades:
                self.aborting = True
                return self.decide(problem, belief, observation, step)
        if label.startswith("science:"):
            # Hold the plan position until the activity is observed done.
            act_id = label.split(":", 1)[1]
            if observation.get(f"science:{act_id}") == "done":
                self.pos += 1
                return self.decide(problem, belief, observation, step)
            return a if a in problem.admissible[s] else None
        if a not in problem.admissible[s]:
            return None
        self.pos += 1
        return a


STRATEGIES = {
    "hadm": HadmProvider,
    "shm-baseline": ShmBaselineProvider,
    "phm-commit": PhmCommitProvider,
    "fixed-plan": FixedPlanProvider,
}


def make_provider(name: str, compiled: CompiledScenario, seed: int = 0):
    if name not in STRATEGIES:
        raise InvalidConfigError(
            f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}"
        )
    return STRATEGIES[name](compiled, seed=seed)


def applicable_strategies(spec) -> list:
    return [n for n, cls in STRATEGIES.items() if cls.applicable(spec)]


def analytic_expectation(
    compiled: CompiledScenario, strategy: str, overrides=None
) -> float:
    """Exact expected cumulative reward of a strategy by enumerating
    every ground-truth assignment and replaying the (deterministic per
    assignment) strategy against each.  Pinned variables keep their
    pinned value instead of being enumerated."""
    from .rover.plant import resolve_overrides

    pinned = resolve_overrides(compiled, overrides)
    rvs = sorted(compiled.rv_defs)
    choices = [
        [(pinned[rv], 1.0)] if rv in pinned
        else sorted(compiled.rv_defs[rv].items())
        for rv in rvs
    ]
    total = 0.0
    for combo in itertools.product(*choices) if rvs else [()]:
        prob = 1.0
        overrides = {}
        for rv, (value, p) in zip(rvs, combo):
            prob *= p
            overrides[rv] = value
        if prob <= 0.0:
            continue
        plant = Plant(compiled, seed=0, overrides=overrides)
        provider = make_provider(strategy, compiled, seed=0)
        trace = run_loop(plant, compiled.problem, provider)
        total += prob * trace.total
    return total
