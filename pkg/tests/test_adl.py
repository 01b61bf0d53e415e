import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import kettle_trace_oracle
from wristsim import adl
from wristsim.adl import DoorEvent as E, DoorState as S, KettleOutcome as KO
from wristsim.errors import DomainError, SimulationTimeout, StateError


def random_tilts(rng, n):
    return rng.uniform(15, 32) + rng.normal(0, 3, n)


def replay(tilts):
    it = iter(tilts)
    return lambda state, params: float(next(it))


class TestKettle:
    def test_flow(self):
        p = adl.KettleParams()
        assert adl.kettle_flow(10.0, p) == 0.0
        assert adl.kettle_flow(30.0, p) == pytest.approx(0.2)

    def test_outcomes_match_cumulative_oracle(self):
        p = adl.KettleParams(dt_s=0.05)
        rng = np.random.default_rng(11)
        seen = set()
        for _ in range(500):
            tilts = random_tilts(rng, 410)
            res = adl.run_kettle(replay(tilts), p)
            outcome, steps = kettle_trace_oracle(tilts, p)
            assert (res.outcome, len(res.log)) == (outcome, steps)
            seen.add(outcome)
        assert seen == {o.value for o in (KO.SUCCESS, KO.OVERFILLED, KO.UNDERFILLED)}

    @given(st.lists(st.floats(0, 60), min_size=400, max_size=400))
    def test_partition(self, tilts):
        p = adl.KettleParams(dt_s=0.05)
        res = adl.run_kettle(replay(tilts), p)
        fill = res.log[-1].fill
        low, high = p.target_band
        flags = {KO.OVERFILLED.value: fill > high,
                 KO.SUCCESS.value: low <= fill <= high and res.log[-1].t_s >= p.time_limit_s - 1e-9,
                 KO.UNDERFILLED.value: fill < low}
        assert sum(flags.values()) == 1 and flags[res.outcome]
        assert res.success == (res.outcome == KO.SUCCESS.value)
        assert (res.completion_time_s is not None) == res.success

    def test_step_after_finish(self):
        p = adl.KettleParams()
        done = adl.KettleState(0.95, 3.0, KO.OVERFILLED)
        with pytest.raises(StateError):
            adl.kettle_step(done, p, 0.0, 0.01)

    def test_completion_is_last_flow_time(self):
        res = adl.run_kettle(adl.PourController(pour_tilt_deg=28.0, stop_fill=0.75), adl.KettleParams())
        assert res.success
        last_pour = max(r.t_s for r in res.log if float(r.input) > 20.0)
        assert res.completion_time_s == pytest.approx(last_pour)

    def test_bad_params(self):
        with pytest.raises(DomainError):
            adl.KettleParams(target_band=(0.9, 0.7))


class TestDoor:
    def test_total(self):
        for s, e in itertools.product(S, E):
            assert adl.door_transition(s, e) in S

    def test_unlisted_pairs_are_self_loops(self):
        for s, e in itertools.product(S, E):
            if (s, e) not in adl.DOOR_TRANSITIONS:
                assert adl.door_transition(s, e) is s
        assert all(adl.door_transition(s, E.ROTATE_BACK) is s for s in S)

    def test_open_state_absorbing(self):
        assert all(adl.door_transition(S.DOOR_OPEN, e) is S.DOOR_OPEN for e in E)

    def test_optimal_sequence(self):
        s = S.START
        for e in adl.OPTIMAL_DOOR_SEQUENCE:
            s = adl.door_transition(s, e)
        assert s is S.DOOR_OPEN and len(adl.OPTIMAL_DOOR_SEQUENCE) == 11

    def test_shortest_path_is_optimal(self):
        frontier, depth, seen = {S.START}, 0, {S.START}
        while S.DOOR_OPEN not in frontier:
            frontier = {adl.door_transition(s, e) for s in frontier for e in E} - seen
            seen |= frontier
            depth += 1
        assert depth == len(adl.OPTIMAL_DOOR_SEQUENCE)

    def test_deadbolt_required_exhaustive_short(self):
        for n in range(1, 9):
            for seq in itertools.product(list(E), repeat=n):
                s, unlocked = S.START, False
                for e in seq:
                    s = adl.door_transition(s, e)
                    unlocked |= s is S.DEADBOLT_UNLOCKED
                assert unlocked or s is not S.DOOR_OPEN

    def test_scripted_controller_timing(self):
        res = adl.run_door(adl.ScriptedDoorController(action_time_s=2.5), adl.DoorParams(),
                           np.random.default_rng(0))
        assert res.success and res.completion_time_s == pytest.approx(27.5)

    def test_slips_cost_time(self):
        ctl = adl.ScriptedDoorController(1.0, 0.4)
        times = [adl.run_door(ctl, adl.DoorParams(), np.random.default_rng(i)).completion_time_s
                 for i in range(20)]
        assert min(times) >= 11.0 and max(times) > 11.0

    def test_timeout(self):
        with pytest.raises(SimulationTimeout):
            adl.run_door(lambda s, r: (E.ROTATE_BACK, 1.0), adl.DoorParams(timeout_s=5.0),
                         np.random.default_rng(0))

    def test_rotation_events(self):
        assert adl.rotation_event(10.0, 31.0) is E.ROTATE
        assert adl.rotation_event(-10.0, -35.0) is E.ROTATE
        assert adl.rotation_event(40.0, 5.0) is E.ROTATE_BACK
        assert adl.rotation_event(40.0, 50.0) is None

    def test_log_csv(self, tmp_path):
        import csv

        res = adl.run_door(adl.ScriptedDoorController(), adl.DoorParams(), np.random.default_rng(0))
        adl.write_adl_log(res, tmp_path / "d.csv")
        rows = list(csv.DictReader(open(tmp_path / "d.csv")))
        assert rows[-1]["state"] == "DoorOpen" and float(rows[-1]["t_s"]) == res.completion_time_s

    def test_run_adl_dispatch(self):
        assert adl.run_adl("door", adl.ScriptedDoorController()).success
        assert adl.run_adl(adl.AdlKind.KETTLE, adl.PourController()).kind is adl.AdlKind.KETTLE
