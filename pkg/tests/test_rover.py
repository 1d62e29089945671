"""Rover domain tests: scenario loading, compilation, plant simulation."""
import json

import pytest

from hadm.errors import InadmissibleActionError, InvalidConfigError, ResourceLimitError
from hadm.model import value_iterate
from hadm.rover import (
    COMPLETE,
    MOTOR_FAILURE,
    STRANDED,
    STUCK,
    Plant,
    builtin_scenario,
    builtin_scenario_dict,
    compile_scenario,
    export_builtin,
    load_scenario,
    motor_temp_after,
    net_power,
    resolve_overrides,
    validate_scenario_dict,
)


@pytest.fixture(scope="module")
def crater():
    return compile_scenario(builtin_scenario(2))


@pytest.fixture(scope="module")
def recharge():
    return compile_scenario(builtin_scenario(3))


@pytest.fixture(scope="module")
def hill():
    return compile_scenario(builtin_scenario(4))


class TestScenarioLoading:
    def test_builtin_round_trip(self):
        for n in range(1, 5):
            doc = json.loads(export_builtin(n))
            assert load_scenario(doc) == builtin_scenario(n)

    def test_schema_violation_reports_path(self):
        with pytest.raises(InvalidConfigError) as err:
            validate_scenario_dict({"name": 1})
        assert "$.name" in str(err.value)
        assert "kind" in str(err.value)

    def test_unknown_waypoint_rejected(self):
        doc = builtin_scenario_dict(2)
        doc["segments"][0]["to"] = "nowhere"
        with pytest.raises(InvalidConfigError):
            load_scenario(doc)

    def test_region_probabilities_must_normalize(self):
        doc = builtin_scenario_dict(2)
        doc["regions"][0]["classes"] = {"difficult": 0.4, "moderate": 0.4}
        with pytest.raises(InvalidConfigError):
            load_scenario(doc)

    def test_initial_charge_bounded_by_capacity(self):
        doc = builtin_scenario_dict(2)
        doc["battery"]["initial_wh"] = 5000
        with pytest.raises(InvalidConfigError):
            load_scenario(doc)


class TestEnergyAndThermalModels:
    def test_net_power_table(self):
        spec = builtin_scenario(3)
        assert net_power(spec, "drive", in_sunlight=True) == -50.0
        assert net_power(spec, "sci1", in_sunlight=True) == 50.0
        assert net_power(spec, "drive", in_sunlight=False) == -450.0
        assert net_power(spec, "sci1", in_sunlight=False) == -350.0
        assert net_power(spec, "idle", in_sunlight=True) == 250.0
        assert net_power(spec, "idle", in_sunlight=False) == -150.0

    def test_motor_temperature_model(self):
        spec = builtin_scenario(4)
        assert motor_temp_after(spec, 20.0, drive_h=2.0, cool_h=0.0) == 60.0
        assert motor_temp_after(spec, 60.0, drive_h=0.0, cool_h=1.0) == 20.0
        # Cooling never goes below nominal.
        assert motor_temp_after(spec, 40.0, drive_h=0.0, cool_h=5.0) == 20.0


class TestCompilation:
    def test_crater_shape(self, crater):
        p = crater.problem
        assert p.n_states == 13
        assert p.gamma == 1.0
        root = crater.initial_state
        labels = [p.action_labels[a] for a in p.admissible[root]]
        assert labels == ["drive:L1", "drive:R1"]

    def test_terrain_reveal_probabilities(self, crater):
        p = crater.problem
        root = crater.initial_state
        a = crater.action("drive:L1")
        probs = sorted(pr for _, pr in p.transitions[(root, a)])
        assert probs == [0.4, 0.6]

    def test_branch_energy_in_transition_rewards(self, crater):
        p = crater.problem
        root = crater.initial_state
        a = crater.action("drive:L1")
        energies = sorted(
            -p.transition_rewards[(root, a, s2)] for s2, _ in p.transitions[(root, a)]
        )
        assert energies == [300.0, 600.0]

    def test_rv_definitions(self, crater):
        assert crater.rv_defs == {
            "terrain:left": {"difficult": 0.4, "moderate": 0.6},
            "terrain:right": {"difficult": 0.5, "moderate": 0.5},
        }

    def test_terminal_states_absorb(self, crater):
        p = crater.problem
        for s in p.terminal:
            assert p.transitions[(s, p.admissible[s][0])] == ((s, 1.0),)

    def test_battery_clamps_at_capacity(self, recharge):
        # Charging always ends exactly at capacity.
        for st in recharge.states:
            if st.battery_wh is not None and st.status == "ok":
                assert st.battery_wh <= recharge.spec.battery.capacity_wh

    def test_stranded_keeps_deficit(self, crater):
        deficits = [
            st.battery_wh for st in crater.states if st.status == STRANDED
        ]
        assert deficits and all(b < 0 for b in deficits)

    def test_stuck_state_is_worth_nothing(self, recharge):
        p = recharge.problem
        table = value_iterate(p)
        for s, st in enumerate(recharge.states):
            if st.status == STUCK:
                assert table[s] == 0.0
                for (s0, a, s2), rho in p.transition_rewards.items():
                    if s2 == s and recharge.states[s0].status == "ok":
                        assert rho == 0.0

    def test_motor_failure_reachable_and_penalized(self, hill):
        p = hill.problem
        failures = [s for s, st in enumerate(hill.states)
                    if st.status == MOTOR_FAILURE]
        assert failures
        penalties = {
            rho
            for (s0, a, s2), rho in p.transition_rewards.items()
            if s2 in failures and hill.states[s0].status == "ok"
        }
        assert penalties == {-1000000.0}

    def test_three_consecutive_climbs_overheat(self, hill):
        up = [hill.action(f"drive:up{i}") for i in range(3)]
        plant = Plant(hill, seed=0)
        for a in up[:2]:
            plant.step(a)
        obs, reward = plant.step(up[2])
        assert obs.channels["status"] == MOTOR_FAILURE
        assert reward == -1000000.0

    def test_state_cap_enforced(self):
        with pytest.raises(ResourceLimitError):
            compile_scenario(builtin_scenario(4), max_states=10)

    def test_prognostics_scenario_does_not_compile(self):
        with pytest.raises(InvalidConfigError):
            compile_scenario(builtin_scenario(1))


class TestPlant:
    def test_same_seed_same_ground_truth(self, crater):
        a = Plant(crater, seed=5)
        b = Plant(crater, seed=5)
        assert a.assignments == b.assignments

    def test_sampling_frequencies_match_declared(self, crater):
        count = 0
        n = 2000
        for seed in range(n):
            if Plant(crater, seed=seed).assignments["terrain:left"] == "difficult":
                count += 1
        assert abs(count / n - 0.4) < 0.05

    def test_override_alias_expansion(self, crater):
        got = resolve_overrides(crater, {"terrain": "difficult-both"})
        assert got == {"terrain:left": "difficult", "terrain:right": "difficult"}

    def test_raw_variable_override(self, crater):
        plant = Plant(crater, seed=0, overrides={"terrain:left": "moderate"})
        assert plant.assignments["terrain:left"] == "moderate"

    def test_unknown_override_rejected(self, crater):
        with pytest.raises(InvalidConfigError):
            Plant(crater, seed=0, overrides={"weather": "sunny"})

    def test_unknown_variant_rejected(self, crater):
        with pytest.raises(InvalidConfigError):
            Plant(crater, seed=0, overrides={"terrain": "muddy"})

    def test_step_follows_pinned_branch(self, crater):
        plant = Plant(crater, seed=0, overrides={"terrain": "difficult-both"})
        obs, reward = plant.step(crater.action("drive:L1"))
        assert obs.channels["terrain:left"] == "difficult"
        assert reward == -600.0
        obs, reward = plant.step(crater.action("drive:L2"))
        assert obs.channels["status"] == STRANDED
        assert obs.channels["battery_wh"] == -100.0
        # The stranding branch also pays the terminal penalty/bonus (none
        # here beyond the energy itself).
        assert reward == -600.0

    def test_moderate_ground_truth_completes_left(self, crater):
        plant = Plant(crater, seed=0, overrides={"terrain": "moderate-both"})
        plant.step(crater.action("drive:L1"))
        obs, _ = plant.step(crater.action("drive:L2"))
        assert obs.channels["status"] == COMPLETE
        assert obs.channels["battery_wh"] == 500.0

    def test_inadmissible_action_rejected(self, crater):
        plant = Plant(crater, seed=0)
        with pytest.raises(InadmissibleActionError):
            plant.step(crater.action("drive:D1"))

    def test_charge_timeline(self, recharge):
        plant = Plant(recharge, seed=0)
        obs, _ = plant.step(recharge.action("charge_to_full"))
        assert obs.channels["battery_wh"] == 1500
        assert obs.channels["time_h"] == 4.0

    def test_redo_override_timeline(self, recharge):
        plant = Plant(recharge, seed=0, overrides={"redo": "true"})
        plant.step(recharge.action("drive:d01"))
        obs, _ = plant.step(recharge.action("science:sci1"))
        assert obs.channels["science:sci1"] == "redo"
        obs, _ = plant.step(recharge.action("science:sci1"))
        assert obs.channels["science:sci1"] == "done"
        assert obs.channels["battery_wh"] == 500.0  # 300 + 2 * 100

    def test_observation_matches_compiled_state(self, crater):
        plant = Plant(crater, seed=3)
        obs = plant.observe()
        assert obs.channels["state_index"] == plant.state
        assert obs.channels["waypoint"] == "wp0"
        assert obs.channels["battery_wh"] == 1100
