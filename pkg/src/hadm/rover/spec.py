"""Declarative rover scenarios: schema, loading, and unit helpers.

A scenario is a JSON document (built-ins go through the same loader)
describing a waypoint graph with terrain regions, activities, power and
battery budgets, thermal limits, deadlines, reward shaping, routes for
the commit-once comparison strategy, nominal/abort plans, and the
baseline health-management rule tables.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import jsonschema

from ..errors import InvalidConfigError

PROB_TOL = 1e-9

_number = {"type": "number"}
_string = {"type": "string"}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "kind"],
    "additionalProperties": False,
    "properties": {
        "name": _string,
        "kind": {"enum": ["rover", "prognostics"]},
        "comments": {"type": "array", "items": _string},
        "waypoints": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "additionalProperties": False,
                "properties": {
                    "id": _string,
                    "name": _string,
                    "charge_point": {"type": "boolean"},
                },
            },
        },
        "regions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "classes"],
                "additionalProperties": False,
                "properties": {
                    "id": _string,
                    "classes": {
                        "type": "object",
                        "additionalProperties": _number,
                        "minProperties": 1,
                    },
                },
            },
        },
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "from", "to"],
                "additionalProperties": False,
                "properties": {
                    "id": _string,
                    "from": _string,
                    "to": _string,
                    "duration_h": _number,
                    "region": _string,
                    "terrain": _string,
                    "energy_wh": {"type": "object", "additionalProperties": _number},
                    "grade": {"enum": ["flat", "uphill", "downhill"]},
                    "heats_motor": {"type": "boolean"},
                },
            },
        },
        "activities": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "waypoint", "duration_h"],
                "additionalProperties": False,
                "properties": {
                    "id": _string,
                    "waypoint": _string,
                    "duration_h": _number,
                    "load_w": _number,
                    "redo_prob": _number,
                },
            },
        },
        "power": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "solar_w": _number,
                "heater_w": _number,
                "drive_w": _number,
                "sunlight_until_h": _number,
            },
        },
        "battery": {
            "type": ["object", "null"],
            "required": ["capacity_wh", "initial_wh"],
            "additionalProperties": False,
            "properties": {
                "capacity_wh": _number,
                "initial_wh": _number,
                "charge_rate_w": _number,
            },
        },
        "thermal": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "nominal_c": _number,
                "heat_rate_c_per_h": _number,
                "cool_rate_c_per_h": _number,
                "limit_c": _number,
            },
        },
        "mission": {
            "type": "object",
            "required": ["start", "goal"],
            "additionalProperties": False,
            "properties": {
                "start": _string,
                "goal": _string,
                "require_activities": {"type": "array", "items": _string},
                "deadline_h": {"type": ["number", "null"]},
            },
        },
        "reward": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "step_energy": {"type": "boolean"},
                "terminal_battery": {"type": "boolean"},
                "time_margin_bonus": {"type": "boolean"},
                "complete_bonus": _number,
                "stranded_penalty": _number,
                "motor_failure_penalty": _number,
                "deadline_missed_penalty": _number,
            },
        },
        "actions": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "allow_charge": {"type": "boolean"},
                "cool_grid_h": {"type": ["number", "null"]},
            },
        },
        "routes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "moves"],
                "additionalProperties": False,
                "properties": {
                    "id": _string,
                    "moves": {"type": "object", "additionalProperties": _string},
                },
            },
        },
        "nominal_plan": {"type": "array", "items": _string},
        "abort_plan": {"type": "object", "additionalProperties": _string},
        "shm_rules": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "detectors": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["channel", "op", "limit"],
                        "additionalProperties": False,
                        "properties": {
                            "channel": _string,
                            "op": {"enum": [">", ">=", "<", "<=", "==", "!="]},
                            "limit": _number,
                            "when": {"type": "object"},
                        },
                    },
                },
                "diagnosis": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["channel", "component", "mode"],
                        "additionalProperties": False,
                        "properties": {
                            "channel": _string,
                            "component": _string,
                            "mode": _string,
                            "parameters": {"type": "object"},
                            "probability": _number,
                        },
                    },
                },
                "mitigations": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["fault_mode", "action"],
                        "additionalProperties": False,
                        "properties": {
                            "fault_mode": _string,
                            "action": _string,
                            "constraints": {"type": "object"},
                            "priority": {"type": "integer"},
                            "mark_faulty": _string,
                        },
                    },
                },
                "min_probability": _number,
            },
        },
        "degradation": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "s0": _number,
                "rate_nominal": _number,
                "p_high": _number,
                "epsilon": _number,
                "horizon": {"type": "integer"},
                "sigma_max": _number,
                "h_min": _number,
            },
        },
        "override_aliases": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": {"type": "object"},
            },
        },
    },
}


@dataclass(frozen=True)
class Waypoint:
    id: str
    name: str = ""
    charge_point: bool = False


@dataclass(frozen=True)
class Region:
    id: str
    classes: Mapping  # terrain class -> probability


@dataclass(frozen=True)
class Segment:
    id: str
    frm: str
    to: str
    duration_h: float = 1.0
    region: str = None
    terrain: str = None
    energy_wh: Mapping = None  # terrain class -> Wh
    grade: str = "flat"
    heats_motor: bool = False


@dataclass(frozen=True)
class Activity:
    id: str
    waypoint: str
    duration_h: float
    load_w: float = 0.0
    redo_prob: float = 0.0


@dataclass(frozen=True)
class PowerConfig:
    solar_w: float = 0.0
    heater_w: float = 0.0
    drive_w: float = 0.0
    sunlight_until_h: float = float("inf")


@dataclass(frozen=True)
class BatteryConfig:
    capacity_wh: float
    initial_wh: float
    charge_rate_w: float = 0.0


@dataclass(frozen=True)
class ThermalConfig:
    nominal_c: float = 20.0
    heat_rate_c_per_h: float = 0.0
    cool_rate_c_per_h: float = 0.0
    limit_c: float = float("inf")


@dataclass(frozen=True)
class Mission:
    start: str
    goal: str
    require_activities: tuple = ()
    deadline_h: float = None


@dataclass(frozen=True)
class RewardConfig:
    step_energy: bool = False
    terminal_battery: bool = False
    time_margin_bonus: bool = False
    complete_bonus: float = 0.0
    stranded_penalty: float = 0.0
    motor_failure_penalty: float = -1e6
    deadline_missed_penalty: float = 0.0


@dataclass(frozen=True)
class ActionConfig:
    allow_charge: bool = False
    cool_grid_h: float = None


@dataclass(frozen=True)
class Route:
    id: str
    moves: Mapping  # waypoint -> action label, or "uniform"


@dataclass(frozen=True)
class DegradationSection:
    s0: float = 1.0
    rate_nominal: float = 0.05
    p_high: float = 0.0
    epsilon: float = 0.0
    horizon: int = 100
    sigma_max: float = None
    h_min: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    kind: str
    waypoints: tuple = ()
    regions: tuple = ()
    segments: tuple = ()
    activities: tuple = ()
    power: PowerConfig = None
    battery: BatteryConfig = None
    thermal: ThermalConfig = None
    mission: Mission = None
    reward: RewardConfig = RewardConfig()
    actions: ActionConfig = ActionConfig()
    routes: tuple = ()
    nominal_plan: tuple = ()
    abort_plan: Mapping = field(default_factory=dict)
    shm_rules: Mapping = field(default_factory=dict)
    degradation: DegradationSection = None
    override_aliases: Mapping = field(default_factory=dict)
    comments: tuple = ()

    def waypoint(self, wp_id):
        for wp in self.waypoints:
            if wp.id == wp_id:
                return wp
        raise InvalidConfigError(f"unknown waypoint {wp_id!r}")

    def region(self, region_id):
        for r in self.regions:
            if r.id == region_id:
                return r
        raise InvalidConfigError(f"unknown region {region_id!r}")

    def segment(self, seg_id):
        for s in self.segments:
            if s.id == seg_id:
                return s
        raise InvalidConfigError(f"unknown segment {seg_id!r}")

    def activity(self, act_id):
        for a in self.activities:
            if a.id == act_id:
                return a
        raise InvalidConfigError(f"unknown activity {act_id!r}")


def validate_scenario_dict(doc: dict):
    """Schema-validate a scenario document, reporting the failing path."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            path = "$" + "".join(
                f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
            )
            lines.append(f"{path}: {err.message}")
        raise InvalidConfigError("invalid scenario file:\n" + "\n".join(lines))


def load_scenario(doc: dict) -> ScenarioSpec:
    """Build a validated ScenarioSpec from a scenario document."""
    validate_scenario_dict(doc)
    regions = tuple(Region(r["id"], dict(r["classes"])) for r in doc.get("regions", ()))
    for r in regions:
        total = sum(r.classes.values())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidConfigError(
                f"region {r.id!r} terrain probabilities sum to {total}"
            )
    battery = None
    if doc.get("battery"):
        battery = BatteryConfig(**doc["battery"])
        if battery.capacity_wh <= 0 or battery.initial_wh < 0:
            raise InvalidConfigError("battery capacity/initial must be positive")
        if battery.initial_wh > battery.capacity_wh:
            raise InvalidConfigError("initial charge exceeds capacity")
    segments = tuple(
        Segment(
            id=s["id"],
            frm=s["from"],
            to=s["to"],
            duration_h=s.get("duration_h", 1.0),
            region=s.get("region"),
            terrain=s.get("terrain"),
            energy_wh=s.get("energy_wh"),
            grade=s.get("grade", "flat"),
            heats_motor=s.get("heats_motor", False),
        )
        for s in doc.get("segments", ())
    )
    spec = ScenarioSpec(
        name=doc["name"],
        kind=doc["kind"],
        waypoints=tuple(
            Waypoint(w["id"], w.get("name", ""), w.get("charge_point", False))
            for w in doc.get("waypoints", ())
        ),
        regions=regions,
        segments=segments,
        activities=tuple(
            Activity(
                a["id"],
                a["waypoint"],
                a["duration_h"],
                a.get("load_w", 0.0),
                a.get("redo_prob", 0.0),
            )
            for a in doc.get("activities", ())
        ),
        power=PowerConfig(**doc["power"]) if doc.get("power") else None,
        battery=battery,
        thermal=ThermalConfig(**doc["thermal"]) if doc.get("thermal") else None,
        mission=Mission(
            start=doc["mission"]["start"],
            goal=doc["mission"]["goal"],
            require_activities=tuple(doc["mission"].get("require_activities", ())),
            deadline_h=doc["mission"].get("deadline_h"),
        )
        if doc.get("mission")
        else None,
        reward=RewardConfig(**doc.get("reward", {})),
        actions=ActionConfig(**doc.get("actions", {})),
        routes=tuple(
            Route(r["id"], dict(r["moves"])) for r in doc.get("routes", ())
        ),
        nominal_plan=tuple(doc.get("nominal_plan", ())),
        abort_plan=dict(doc.get("abort_plan", {})),
        shm_rules=doc.get("shm_rules", {}),
        degradation=DegradationSection(**doc["degradation"])
        if doc.get("degradation")
        else None,
        override_aliases=doc.get("override_aliases", {}),
        comments=tuple(doc.get("comments", ())),
    )
    _cross_check(spec)
    return spec


def _cross_check(spec: ScenarioSpec):
    wp_ids = {w.id for w in spec.waypoints}
    for seg in spec.segments:
        if seg.frm not in wp_ids or seg.to not in wp_ids:
            raise InvalidConfigError(f"segment {seg.id!r} references unknown waypoint")
        if seg.region is not None:
            spec.region(seg.region)
        if seg.region is None and seg.terrain is None and seg.energy_wh:
            raise InvalidConfigError(
                f"segment {seg.id!r} has energies but neither region nor fixed terrain"
            )
    for act in spec.activities:
        if act.waypoint not in wp_ids:
            raise InvalidConfigError(f"activity {act.id!r} references unknown waypoint")
        if not (0.0 <= act.redo_prob <= 1.0):
            raise InvalidConfigError(f"activity {act.id!r} redo probability invalid")
    if spec.mission is not None:
        if spec.mission.start not in wp_ids or spec.mission.goal not in wp_ids:
            raise InvalidConfigError("mission start/goal not declared as waypoints")
        for act_id in spec.mission.require_activities:
            spec.activity(act_id)


def load_scenario_file(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"{path}: not valid JSON ({exc})") from exc
    return load_scenario(doc)


def net_power(spec: ScenarioSpec, activity: str, in_sunlight: bool) -> float:
    """Net battery power (W) for 'drive', 'idle', or a declared activity id."""
    if spec.power is None:
        raise InvalidConfigError("scenario has no power configuration")
    p = spec.power
    solar = p.solar_w if in_sunlight else 0.0
    heater = 0.0 if in_sunlight else p.heater_w
    if activity == "drive":
        return solar - p.drive_w - heater
    if activity == "idle":
        return solar - heater
    act = spec.activity(activity)
    return solar - act.load_w - heater


def motor_temp_after(
    spec: ScenarioSpec, temp0: float, drive_h: float, cool_h: float
) -> float:
    """Temperature after driving then cooling, floored at nominal."""
    if spec.thermal is None:
        raise InvalidConfigError("scenario has no thermal configuration")
    if drive_h < 0 or cool_h < 0:
        raise InvalidConfigError("durations must be non-negative")
    t = temp0 + spec.thermal.heat_rate_c_per_h * drive_h
    t -= spec.thermal.cool_rate_c_per_h * cool_h
    return max(spec.thermal.nominal_c, t)
