"""Compile a rover scenario into a finite decision problem.

Time is event-driven: a state is taken at segment/activity boundaries
and carries position, mission time, battery charge, motor temperature,
activity status, and the terrain classes revealed so far.  Stochastic
branches (terrain reveals, activity redo outcomes) are tagged with the
scenario random variable they resolve, which is what lets a plant pin
them to a hidden ground truth.

Branch-dependent energy costs and terminal values are attached as
successor-dependent transition rewards, so realized per-step rewards
match the executed branch exactly.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from ..errors import InvalidConfigError, ResourceLimitError
from ..model import Problem, identity_observation_model
from .spec import ScenarioSpec

_TOL = 1e-9

OK = "ok"
COMPLETE = "complete"
STRANDED = "stranded"
MOTOR_FAILURE = "motor_failure"
DEADLINE_MISSED = "deadline_missed"
STUCK = "stuck"

TERMINAL_STATUSES = (COMPLETE, STRANDED, MOTOR_FAILURE, DEADLINE_MISSED, STUCK)


def _round(x):
    return round(x, 6)


@dataclass(frozen=True)
class RoverState:
    """One compiled state: every component named, all units explicit."""

    position: str
    time_h: float = 0.0
    battery_wh: float = None
    temp_c: float = None
    science: tuple = ()  # ((activity id, "todo"|"redo"|"done"), ...)
    terrain: tuple = ()  # ((region id, class or None), ...)
    status: str = OK

    def science_status(self, act_id):
        for aid, st in self.science:
            if aid == act_id:
                return st
        raise InvalidConfigError(f"unknown activity {act_id!r}")

    def terrain_class(self, region_id):
        for rid, cls in self.terrain:
            if rid == region_id:
                return cls
        raise InvalidConfigError(f"unknown region {region_id!r}")

    def replace(self, **kw):
        data = {
            "position": self.position,
            "time_h": self.time_h,
            "battery_wh": self.battery_wh,
            "temp_c": self.temp_c,
            "science": self.science,
            "terrain": self.terrain,
            "status": self.status,
        }
        data.update(kw)
        return RoverState(**data)

    def with_science(self, act_id, new_status):
        return self.replace(
            science=tuple(
                (aid, new_status if aid == act_id else st) for aid, st in self.science
            )
        )

    def with_terrain(self, region_id, cls):
        return self.replace(
            terrain=tuple(
                (rid, cls if rid == region_id else c) for rid, c in self.terrain
            )
        )

    def label(self):
        parts = [self.position, f"t={_round(self.time_h)}"]
        if self.battery_wh is not None:
            parts.append(f"b={_round(self.battery_wh)}")
        if self.temp_c is not None:
            parts.append(f"T={_round(self.temp_c)}")
        for aid, st in self.science:
            parts.append(f"{aid}={st}")
        for rid, cls in self.terrain:
            parts.append(f"{rid}={cls or '?'}")
        if self.status != OK:
            parts.append(self.status)
        return "|".join(parts)

    def components(self):
        """Named state-vector components with unit-bearing names."""
        out = [("waypoint", self.position), ("time_h", _round(self.time_h))]
        if self.battery_wh is not None:
            out.append(("battery_wh", _round(self.battery_wh)))
        if self.temp_c is not None:
            out.append(("motor_temp_c", _round(self.temp_c)))
        for aid, st in self.science:
            out.append((f"science:{aid}", st))
        for rid, cls in self.terrain:
            out.append((f"terrain:{rid}", cls))
        out.append(("status", self.status))
        return out


@dataclass(frozen=True)
class _Branch:
    state: RoverState
    prob: float
    assign: Mapping  # rv name -> value ("" when deterministic)
    energy_wh: float = 0.0


@dataclass
class CompiledScenario:
    """A scenario compiled to a Problem plus the labeling metadata."""

    spec: ScenarioSpec
    problem: Problem
    states: list
    index: dict  # RoverState -> state index
    initial_state: int
    rv_defs: dict  # rv name -> {value: probability}
    branches: dict  # (s, a) -> ((s2, p, {rv: value}), ...)
    action_index: dict  # action label -> action index

    def action(self, label: str) -> int:
        if label not in self.action_index:
            raise InvalidConfigError(f"unknown action {label!r}")
        return self.action_index[label]

    def state_vector(self, s: int):
        return self.states[s].components()

    def channels(self, s: int) -> dict:
        """Observation channels exposed by the plant for state ``s``."""
        st = self.states[s]
        ch = dict(st.components())
        ch["state_index"] = s
        ch["at_charge_point"] = (
            st.status == OK and self.spec.waypoint(st.position).charge_point
        )
        return ch

    def route_policy(self, route_id: str):
        """(start state, partial state->action policy) for a declared route."""
        route = None
        for r in self.spec.routes:
            if r.id == route_id:
                route = r
        if route is None:
            raise InvalidConfigError(f"unknown route {route_id!r}")
        policy = {}
        for s, st in enumerate(self.states):
            if st.status != OK:
                continue
            move = route.moves.get(st.position)
            if move is None:
                continue
            if move == "uniform":
                policy[s] = "uniform"
            else:
                a = self.action(move)
                if a in self.problem.admissible[s]:
                    policy[s] = a
        return self.initial_state, policy


def _sun_pieces(power, t0, duration):
    """Split [t0, t0+duration] at the sunlight boundary: [(hours, in_sun)]."""
    if power is None:
        return [(duration, False)]
    end = t0 + duration
    sun_until = power.sunlight_until_h
    if end <= sun_until:
        return [(duration, True)]
    if t0 >= sun_until:
        return [(duration, False)]
    return [(sun_until - t0, True), (end - sun_until, False)]


def _integrate_battery(spec, battery, t0, duration, net_of):
    """Advance the battery over one action; returns (final, stranded)."""
    if battery is None:
        return None, False
    cap = spec.battery.capacity_wh
    b = battery
    stranded = False
    for hours, in_sun in _sun_pieces(spec.power, t0, duration):
        b += net_of(in_sun) * hours
        if b < -_TOL:
            stranded = True
        elif b > cap:
            b = cap
    return _round(b), stranded


class _Compiler:
    def __init__(self, spec: ScenarioSpec, max_states: int):
        if spec.kind != "rover" or spec.mission is None:
            raise InvalidConfigError("only rover scenarios with a mission compile")
        self.spec = spec
        self.max_states = max_states
        self.rv_defs = {}
        self.action_labels = []
        for seg in spec.segments:
            self.action_labels.append(f"drive:{seg.id}")
        for act in spec.activities:
            self.action_labels.append(f"science:{act.id}")
        if spec.actions.allow_charge:
            self.action_labels.append("charge_to_full")
        if spec.actions.cool_grid_h is not None:
            self.action_labels.append(f"cool:{_round(spec.actions.cool_grid_h)}h")
        self.action_labels.append("stay")
        self.action_index = {a: i for i, a in enumerate(self.action_labels)}

    def initial_state(self) -> RoverState:
        spec = self.spec
        st = RoverState(
            position=spec.mission.start,
            time_h=0.0,
            battery_wh=spec.battery.initial_wh if spec.battery else None,
            temp_c=spec.thermal.nominal_c if spec.thermal else None,
            science=tuple((a.id, "todo") for a in spec.activities),
            terrain=tuple((r.id, None) for r in spec.regions),
        )
        return self._settle(st)

    def _settle(self, st: RoverState) -> RoverState:
        """Apply completion/deadline classification to a fresh state."""
        if st.status != OK:
            return st
        m = self.spec.mission
        done = all(st.science_status(a) == "done" for a in m.require_activities)
        if st.position == m.goal and done:
            if m.deadline_h is None or st.time_h <= m.deadline_h + _TOL:
                return st.replace(status=COMPLETE)
        if m.deadline_h is not None and st.time_h >= m.deadline_h - _TOL:
            return st.replace(status=DEADLINE_MISSED)
        return st

    def terminal_value(self, st: RoverState) -> float:
        rc = self.spec.reward
        if st.status == COMPLETE:
            v = rc.complete_bonus
            if rc.terminal_battery:
                v += st.battery_wh
            if rc.time_margin_bonus:
                v += self.spec.mission.deadline_h - st.time_h
            return v
        if st.status == STRANDED:
            v = rc.stranded_penalty
            if rc.terminal_battery:
                v += st.battery_wh
            return v
        if st.status == MOTOR_FAILURE:
            return rc.motor_failure_penalty
        if st.status == DEADLINE_MISSED:
            return rc.deadline_missed_penalty
        if st.status == STUCK:
            # Dead ends with the mission incomplete collect nothing.
            return 0.0
        raise InvalidConfigError(f"no terminal value for status {st.status!r}")

    # Action expansion ----------------------------------------------------

    def admissible_actions(self, st: RoverState):
        spec = self.spec
        out = []
        if st.status != OK:
            return [self.action_index["stay"]]
        for seg in spec.segments:
            if seg.frm == st.position:
                out.append(self.action_index[f"drive:{seg.id}"])
        for act in spec.activities:
            if act.waypoint == st.position and st.science_status(act.id) != "done":
                out.append(self.action_index[f"science:{act.id}"])
        if spec.actions.allow_charge and spec.battery and spec.battery.charge_rate_w:
            wp = spec.waypoint(st.position)
            if wp.charge_point and st.battery_wh < spec.battery.capacity_wh - _TOL:
                duration = (
                    spec.battery.capacity_wh - st.battery_wh
                ) / spec.battery.charge_rate_w
                end = st.time_h + duration
                in_sun = spec.power is None or end <= spec.power.sunlight_until_h
                if in_sun:
                    out.append(self.action_index["charge_to_full"])
        if spec.actions.cool_grid_h is not None:
            out.append(
                self.action_index[f"cool:{_round(spec.actions.cool_grid_h)}h"]
            )
        return out

    def expand(self, st: RoverState, a: int):
        label = self.action_labels[a]
        if label == "stay":
            return [_Branch(st, 1.0, {})]
        if label.startswith("drive:"):
            return self._drive(st, self.spec.segment(label.split(":", 1)[1]))
        if label.startswith("science:"):
            return self._science(st, self.spec.activity(label.split(":", 1)[1]))
        if label == "charge_to_full":
            return self._charge(st)
        if label.startswith("cool:"):
            return self._cool(st)
        raise InvalidConfigError(f"unknown action label {label!r}")

    def _terrain_branches(self, st, seg):
        """(probability, class, rv assignment, state-with-reveal) per branch."""
        if seg.terrain is not None or seg.region is None:
            return [(1.0, seg.terrain, {}, st)]
        cls = st.terrain_class(seg.region)
        if cls is not None:
            return [(1.0, cls, {}, st)]
        rv = f"terrain:{seg.region}"
        region = self.spec.region(seg.region)
        self.rv_defs.setdefault(rv, dict(region.classes))
        return [
            (p, c, {rv: c}, st.with_terrain(seg.region, c))
            for c, p in region.classes.items()
        ]

    def _drive(self, st, seg):
        spec = self.spec
        out = []
        for prob, cls, assign, revealed in self._terrain_branches(st, seg):
            nxt = revealed.replace(
                position=seg.to, time_h=_round(st.time_h + seg.duration_h)
            )
            energy = 0.0
            stranded = False
            if seg.energy_wh is not None:
                if cls not in seg.energy_wh:
                    raise InvalidConfigError(
                        f"segment {seg.id!r} has no energy for terrain {cls!r}"
                    )
                energy = seg.energy_wh[cls]
                if st.battery_wh is not None:
                    b = _round(st.battery_wh - energy)
                    stranded = b < -_TOL
                    nxt = nxt.replace(battery_wh=b)
            elif st.battery_wh is not None:
                b, stranded = _integrate_battery(
                    spec,
                    st.battery_wh,
                    st.time_h,
                    seg.duration_h,
                    lambda in_sun: _net(spec, "drive", in_sun),
                )
                nxt = nxt.replace(battery_wh=b)
            if st.temp_c is not None and seg.heats_motor:
                t2 = st.temp_c + spec.thermal.heat_rate_c_per_h * seg.duration_h
                nxt = nxt.replace(temp_c=_round(t2))
                if t2 >= spec.thermal.limit_c - _TOL:
                    nxt = nxt.replace(status=MOTOR_FAILURE)
            if stranded and nxt.status == OK:
                nxt = nxt.replace(status=STRANDED)
            out.append(_Branch(self._settle(nxt), prob, assign, energy))
        return out

    def _science(self, st, act):
        spec = self.spec
        status = st.science_status(act.id)
        t2 = _round(st.time_h + act.duration_h)
        b, stranded = _integrate_battery(
            spec,
            st.battery_wh,
            st.time_h,
            act.duration_h,
            lambda in_sun: _net(spec, act.id, in_sun),
        )
        base = st.replace(time_h=t2, battery_wh=b)
        if stranded:
            base = base.replace(status=STRANDED)
        if status == "redo" or act.redo_prob <= 0.0:
            nxt = base.with_science(act.id, "done")
            return [_Branch(self._settle(nxt), 1.0, {}, 0.0)]
        rv = f"redo:{act.id}"
        self.rv_defs.setdefault(
            rv, {"false": 1.0 - act.redo_prob, "true": act.redo_prob}
        )
        ok = self._settle(base.with_science(act.id, "done"))
        redo = self._settle(base.with_science(act.id, "redo"))
        return [
            _Branch(ok, 1.0 - act.redo_prob, {rv: "false"}, 0.0),
            _Branch(redo, act.redo_prob, {rv: "true"}, 0.0),
        ]

    def _charge(self, st):
        spec = self.spec
        duration = (
            spec.battery.capacity_wh - st.battery_wh
        ) / spec.battery.charge_rate_w
        nxt = st.replace(
            time_h=_round(st.time_h + duration),
            battery_wh=spec.battery.capacity_wh,
        )
        return [_Branch(self._settle(nxt), 1.0, {})]

    def _cool(self, st):
        spec = self.spec
        d = spec.actions.cool_grid_h
        nxt = st.replace(time_h=_round(st.time_h + d))
        if st.temp_c is not None:
            t2 = max(
                spec.thermal.nominal_c,
                st.temp_c - spec.thermal.cool_rate_c_per_h * d,
            )
            nxt = nxt.replace(temp_c=_round(t2))
        if st.battery_wh is not None and spec.power is not None:
            b, stranded = _integrate_battery(
                spec, st.battery_wh, st.time_h, d,
                lambda in_sun: _net(spec, "idle", in_sun),
            )
            nxt = nxt.replace(battery_wh=b)
            if stranded:
                nxt = nxt.replace(status=STRANDED)
        return [_Branch(self._settle(nxt), 1.0, {})]


def _net(spec, activity, in_sun):
    p = spec.power
    if p is None:
        return 0.0
    solar = p.solar_w if in_sun else 0.0
    heater = 0.0 if in_sun else p.heater_w
    if activity == "drive":
        return solar - p.drive_w - heater
    if activity == "idle":
        return solar - heater
    return solar - spec.activity(activity).load_w - heater


def compile_scenario(spec: ScenarioSpec, max_states: int = 10**6) -> CompiledScenario:
    """Compile a scenario into a validated Problem by forward reachability."""
    comp = _Compiler(spec, max_states)

    def finalize(st):
        # A dead end with the mission incomplete absorbs as "stuck".
        if st.status == OK and not comp.admissible_actions(st):
            return st.replace(status=STUCK)
        return st

    s0 = finalize(comp.initial_state())
    states = [s0]
    index = {s0: 0}
    queue = deque([0])
    admissible = {}
    transitions = {}
    rewards = {}
    transition_rewards = {}
    branches = {}
    terminal = set()

    while queue:
        s = queue.popleft()
        st = states[s]
        acts = comp.admissible_actions(st)
        if st.status != OK:
            terminal.add(s)
        admissible[s] = tuple(acts)
        for a in acts:
            rows = []
            tagged = []
            for br in comp.expand(st, a):
                s2_state = finalize(br.state)
                if s2_state not in index:
                    if len(states) >= max_states:
                        raise ResourceLimitError(
                            f"compiled state count exceeded {max_states} "
                            f"(growing dimension near {s2_state.label()!r})"
                        )
                    index[s2_state] = len(states)
                    states.append(s2_state)
                    queue.append(index[s2_state])
                s2 = index[s2_state]
                rho = 0.0
                if spec.reward.step_energy:
                    rho -= br.energy_wh
                if s2_state.status != OK and st.status == OK:
                    rho += comp.terminal_value(s2_state)
                if rho != 0.0:
                    transition_rewards[(s, a, s2)] = rho
                rows.append((s2, br.prob))
                tagged.append((s2, br.prob, dict(br.assign)))
            transitions[(s, a)] = tuple(rows)
            rewards[(s, a)] = 0.0
            branches[(s, a)] = tuple(tagged)

    n = len(states)
    labels = tuple(st.label() for st in states)
    adm = tuple(admissible[s] for s in range(n))
    problem = Problem(
        state_labels=labels,
        action_labels=tuple(comp.action_labels),
        admissible=adm,
        transitions=transitions,
        rewards=rewards,
        terminal=frozenset(terminal),
        gamma=1.0,
        horizon=n,
        transition_rewards=transition_rewards,
        observation_labels=labels,
        observations=identity_observation_model(n, len(comp.action_labels)),
    )
    return CompiledScenario(
        spec=spec,
        problem=problem,
        states=states,
        index=index,
        initial_state=0,
        rv_defs=comp.rv_defs,
        branches=branches,
        action_index=comp.action_index,
    )
