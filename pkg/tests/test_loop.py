"""Operational loop tests: arbitration, safety validation, trace replay."""
import io
import json
import math
import statistics

import pytest

from hadm.errors import ModelError
from hadm.loop import (
    OfflinePolicyProvider,
    OnlineExpectimaxProvider,
    SerPolicy,
    arbitrate,
    run_loop,
    validate_ser,
)
from hadm.model import extract_policy, point_mass, value_iterate
from hadm.rover import Plant, builtin_scenario, compile_scenario
from hadm.strategies import make_provider


@pytest.fixture(scope="module")
def crater():
    return compile_scenario(builtin_scenario(2))


@pytest.fixture(scope="module")
def hill():
    return compile_scenario(builtin_scenario(4))


class TestArbitration:
    def test_ser_wins_when_triggered(self):
        ser = SerPolicy(member={3}, actions={3: 7})
        assert arbitrate(3, {}, ser, 1) == (7, "SER")

    def test_provider_when_not_triggered(self):
        ser = SerPolicy(member={3}, actions={3: 7})
        assert arbitrate(2, {}, ser, 1) == (1, "HADM")

    def test_channel_predicate(self):
        ser = SerPolicy(member=lambda ch: ch.get("solar_flare", False),
                        actions={0: 9})
        assert arbitrate(0, {"solar_flare": True}, ser, 1) == (9, "SER")
        assert arbitrate(0, {"solar_flare": False}, ser, 1) == (1, "HADM")

    def test_undefined_response_is_hard_fault(self):
        ser = SerPolicy(member={3}, actions={})
        with pytest.raises(ModelError):
            arbitrate(3, {}, ser, 1)

    def test_no_ser_passes_through(self):
        assert arbitrate(0, {}, None, 5) == (5, "HADM")


class TestSerValidation:
    def test_correct_chain_is_clean(self, hill):
        p = hill.problem
        # From any overheated state, cooling once reaches nominal.
        hot = {s for s, st in enumerate(hill.states)
               if st.status == "ok" and st.temp_c and st.temp_c >= 60}
        cool = hill.action("cool:1h")
        safe = frozenset(
            s for s, st in enumerate(hill.states)
            if st.temp_c is None or st.temp_c <= 20 or st.status != "ok"
        )
        ser = SerPolicy(member=hot, actions={s: cool for s in hot}, safe_set=safe)
        report = validate_ser(p, ser)
        assert report.ok

    def test_empty_membership_trivially_valid(self, hill):
        report = validate_ser(hill.problem, SerPolicy(member=set(), actions={}))
        assert report.ok

    def test_missing_response_flagged(self, hill):
        hot = sorted(
            s for s, st in enumerate(hill.states)
            if st.status == "ok" and st.temp_c and st.temp_c >= 60
        )
        ser = SerPolicy(member=set(hot), actions={})
        report = validate_ser(hill.problem, ser)
        assert not report.ok
        assert any("no response defined" in v for v in report.violations)

    def test_cycle_flagged_with_state_names(self, crater):
        # A response that ping-pongs between wp2 and wp3 never parks.
        p = crater.problem
        by_label = {st.position: s for s, st in enumerate(crater.states)
                    if st.status == "ok"}
        # Build a two-state toy cycle on the crater graph: the detour
        # segment runs wp2 -> wp3 -> wp4, so force a self-referencing pair
        # through inadmissible structure instead: use a dedicated problem.
        from hadm.model import Problem

        q = Problem(
            state_labels=("a", "b", "safe"),
            action_labels=("swap", "park"),
            admissible=((0, 1), (0,), (0,)),
            transitions={
                (0, 0): ((1, 1.0),),
                (0, 1): ((2, 1.0),),
                (1, 0): ((0, 1.0),),
                (2, 0): ((2, 1.0),),
            },
            rewards={(0, 0): 0.0, (0, 1): 0.0, (1, 0): 0.0, (2, 0): 0.0},
            terminal=frozenset({2}),
            horizon=5,
        )
        ser = SerPolicy(member={0}, actions={0: 0, 1: 0}, safe_set=frozenset({2}))
        report = validate_ser(q, ser)
        assert not report.ok
        assert any("cycle" in v and "'a'" in v and "'b'" in v
                   for v in report.violations)
        # The fixed response parks immediately.
        good = SerPolicy(member={0}, actions={0: 1}, safe_set=frozenset({2}))
        assert validate_ser(q, good).ok

    def test_inadmissible_response_flagged(self, crater):
        p = crater.problem
        root = crater.initial_state
        bad = crater.action("drive:D1")  # not available at wp0
        ser = SerPolicy(member={root}, actions={root: bad})
        report = validate_ser(p, ser)
        assert any("inadmissible" in v for v in report.violations)

    def test_step_bound_enforced(self, hill):
        p = hill.problem
        # Cooling from 60 takes one step; a bound of zero must trip.
        hot = {s for s, st in enumerate(hill.states)
               if st.status == "ok" and st.temp_c == 60}
        cool = hill.action("cool:1h")
        safe = frozenset(
            s for s, st in enumerate(hill.states)
            if st.temp_c is None or st.temp_c <= 20 or st.status != "ok"
        )
        ser = SerPolicy(member=hot, actions={s: cool for s in hot},
                        safe_set=safe, step_bound=0)
        report = validate_ser(p, ser)
        assert any("exceeding the bound" in v for v in report.violations)


class TestRunLoop:
    def test_terminal_start_gives_empty_trace(self, crater):
        p = crater.problem
        terminal = next(iter(p.terminal))
        plant = Plant(crater, seed=0)
        trace = run_loop(plant, p, OnlineExpectimaxProvider(p),
                         b0=point_mass(p.n_states, terminal))
        assert trace.records == []
        assert trace.terminal

    def test_replay_determinism(self, crater):
        def one():
            plant = Plant(crater, seed=17)
            provider = make_provider("hadm", crater, seed=17)
            trace = run_loop(plant, crater.problem, provider)
            buf = io.StringIO()
            trace.write_jsonl(buf)
            return buf.getvalue()

        assert one() == one()

    def test_trace_replay_reproduces_observations_and_rewards(self, crater):
        plant = Plant(crater, seed=23)
        provider = make_provider("hadm", crater, seed=23)
        trace = run_loop(plant, crater.problem, provider)
        replay = Plant(crater, seed=23)
        for record in trace.records:
            action = crater.action(record.action)
            obs, reward = replay.step(action)
            assert dict(obs.channels) == record.observation
            assert reward == record.reward

    def test_ser_override_completeness(self, hill):
        # Inject a safety condition: any motor at or above 60 must cool.
        p = hill.problem
        hot = {s for s, st in enumerate(hill.states)
               if st.status == "ok" and st.temp_c and st.temp_c >= 60}
        cool = hill.action("cool:1h")
        ser = SerPolicy(member=hot, actions={s: cool for s in hot})
        plant = Plant(hill, seed=0)
        provider = make_provider("hadm", hill, seed=0)
        trace = run_loop(plant, p, provider, ser=ser)
        assert trace.records
        replay = Plant(hill, seed=0)
        for record in trace.records:
            pre = replay.state
            expected_tag = "SER" if pre in hot else "HADM"
            assert record.provider == expected_tag
            if pre in hot:
                assert record.action == "cool:1h"
            replay.step(hill.action(record.action))
        # The safety layer never lets the motor overheat.
        assert all(r.observation["motor_temp_c"] < 80 for r in trace.records)

    def test_step_cap_truncates(self, hill):
        class Idler:
            def decide(self, problem, belief, observation, step):
                return hill.action("cool:1h")

        plant = Plant(hill, seed=0)
        trace = run_loop(plant, hill.problem, Idler(), max_steps=3)
        assert trace.truncated
        assert len(trace.records) == 3

    def test_offline_policy_mean_matches_root_value(self, crater):
        p = crater.problem
        table = value_iterate(p)
        policy = extract_policy(p, table)
        totals = []
        n = 10000
        for i in range(n):
            plant = Plant(crater, seed=i)
            trace = run_loop(plant, p, OfflinePolicyProvider(policy))
            assert trace.terminal
            totals.append(trace.total)
        mean = sum(totals) / n
        se = statistics.stdev(totals) / math.sqrt(n)
        assert abs(mean - table[crater.initial_state]) <= 3 * se

    def test_cumulative_rewards_consistent(self, crater):
        plant = Plant(crater, seed=2)
        trace = run_loop(plant, crater.problem, make_provider("hadm", crater))
        running = 0.0
        for r in trace.records:
            running += r.reward
            assert r.cumulative == pytest.approx(running)
        assert trace.total == pytest.approx(running)

    def test_table_and_csv_serializations(self, crater):
        plant = Plant(crater, seed=2)
        trace = run_loop(plant, crater.problem, make_provider("hadm", crater))
        text = trace.to_table()
        assert "total reward" in text
        buf = io.StringIO()
        trace.write_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].startswith("step,")
        assert len(lines) == 1 + len(trace.records)
