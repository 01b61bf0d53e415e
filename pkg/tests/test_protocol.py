import csv
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wristsim import protocol as pr
from wristsim.core_types import read_participants
from wristsim.errors import DomainError, FeatureError
from wristsim.plant import Trajectory
from wristsim.protocol import BlockKind as B
from wristsim.psychophysics import Channel, ObserverModel

PROFILE = pr.ParticipantProfile(1, 55.0, -55.9, 0.0)


class TestOrdering:
    @given(st.integers(0, 500), st.integers(0, 50))
    def test_structure(self, idx, seed):
        order = pr.counterbalance_order(idx, seed)
        assert sorted(order) == sorted(B)
        assert order[0] is B.GAUGE_MATCH
        assert order[3] in pr.ADL_BLOCKS
        assert set(order[4:6]) & set(pr.ADL_BLOCKS)
        assert all(k in pr.PSYCHOMETRIC for k in order[1:3] + order[6:])

    @pytest.mark.parametrize("seed", [0, 1, 7])
    def test_psychometric_slots_balanced(self, seed):
        slots = Counter()
        for idx in range(5):
            psych = [k for k in pr.counterbalance_order(idx, seed) if k in pr.PSYCHOMETRIC]
            slots.update(enumerate(psych))
        assert set(slots.values()) == {1} and len(slots) == 25

    def test_adl_order_alternates(self):
        firsts = [pr.counterbalance_order(i)[3] for i in range(4)]
        assert Counter(firsts) == {B.KETTLE_ADL: 2, B.DOOR_ADL: 2}

    def test_negative_index(self):
        with pytest.raises(DomainError):
            pr.counterbalance_order(-1)


class TestFeatures:
    def test_steady_state_uses_last_still_window(self):
        t = np.arange(0, 3, 0.001)
        angle = np.where(t < 1.0, 0.0, np.where(t < 1.5, 40 * (t - 1.0), 20.0))
        traj = Trajectory.from_samples(t, angle)
        assert pr.steady_state_angle(traj) == pytest.approx(20.0)

    def test_steady_state_needs_window(self):
        t = np.arange(0, 1, 0.001)
        with pytest.raises(FeatureError):
            pr.steady_state_angle(Trajectory.from_samples(t, 30 * t))

    def test_linear_ramp_rate(self):
        t = np.arange(0, 2, 0.001)
        angle = np.clip(45.0 * (t - 0.3), 0, 30)
        assert pr.ramp_midrange_rate(Trajectory.from_samples(t, angle)) == pytest.approx(45.0, rel=1e-6)

    def test_smoothstep_rate_fraction(self):
        # independent: invert the cubic on a fine grid
        u = np.linspace(0, 1, 2_000_001)
        s = u * u * (3 - 2 * u)
        span = u[np.searchsorted(s, 0.8)] - u[np.searchsorted(s, 0.2)]
        assert pr.smoothstep_midrange_fraction() == pytest.approx(span, abs=1e-5)
        t = np.arange(0, 1.5, 0.0005)
        angle = 10 + 30 * np.clip(t, 0, 1) ** 2 * (3 - 2 * np.clip(t, 0, 1))
        rate = pr.ramp_midrange_rate(Trajectory.from_samples(t, angle))
        assert rate == pytest.approx(0.6 * 30 / pr.smoothstep_midrange_fraction(), rel=1e-4)

    def test_falling_ramp_rejected(self):
        t = np.arange(0, 1, 0.01)
        with pytest.raises(FeatureError):
            pr.ramp_midrange_rate(Trajectory.from_samples(t, -t))


class TestRange:
    def test_measure_crom(self):
        assert pr.measure_crom(58.0, -60.5) == (pytest.approx(-1.25), 118.5)
        assert pr.measure_crom(58.0, -60.5, 2.0) == (2.0, 118.5)
        with pytest.raises(DomainError):
            pr.measure_crom(-5.0, 5.0)

    def test_gauge_targets_inside_range(self):
        cfg = pr.SessionConfig()
        p = pr.ParticipantProfile(1, 70.0, -50.0)
        tg = pr.gauge_targets(p, 20, cfg)
        assert len(tg) == 20 and tg.max() <= 58.0 and tg.min() >= -50.0 + 0.05 * 120


class TestBlocks:
    def test_gauge_noiseless(self, rng):
        res = pr.run_gauge_block(PROFILE, ObserverModel(), rng)
        assert res.complete and len(res.trial_records) == 20
        assert res.measure <= 0.5
        assert all(abs(r.actual - r.target) < 0.5 for r in res.trial_records)

    @pytest.mark.parametrize("kind", pr.DISCRIMINATION)
    def test_discrimination_completes(self, kind, rng):
        res = pr.run_discrimination_block(kind, PROFILE, ObserverModel(), rng)
        assert res.complete and res.staircase.terminated in ("reversals", "max_trials")
        assert len(res.staircase.reversal_deltas) >= 4
        assert res.measure == res.jnd.jnd_abs
        for trial in res.trial_records:
            ref, cmp_ = sorted(trial.intervals, key=lambda iv: iv.role != "reference")
            assert cmp_.commanded - ref.commanded == pytest.approx(trial.delta)
            assert cmp_.onset_s - ref.hold_end_s == pytest.approx(1.75, abs=2e-3) or \
                ref.onset_s - cmp_.hold_end_s == pytest.approx(1.75, abs=2e-3)

    def test_breaches_end_block_at_cap(self, rng):
        cfg = pr.SessionConfig(max_ignored=3)
        res = pr.run_discrimination_block(B.TORQUE_DISCRIM, PROFILE, ObserverModel(hold_noise_sd=40.0),
                                          rng, cfg)
        assert not res.complete and res.measure is None
        assert res.ignored_trials == 3

    @pytest.mark.parametrize("kind", pr.ADJUSTMENT)
    def test_adjustment_error_tracks_bias(self, kind, rng):
        biased = ObserverModel(repro_bias_pos=2.0, repro_bias_vel=2.0)
        res = pr.run_adjustment_block(kind, PROFILE, biased, rng)
        assert res.measure == pytest.approx(2.0, abs=0.1)
        clean = pr.run_adjustment_block(kind, PROFILE, ObserverModel(), rng)
        assert clean.measure < 0.3

    def test_adl_blocks(self, rng):
        door = pr.run_adl_block(B.DOOR_ADL, ObserverModel(action_time_s=2.0), rng)
        assert door.measure == pytest.approx(22.0)
        kettle = pr.run_adl_block(B.KETTLE_ADL, ObserverModel(), rng)
        assert kettle.complete and 4.0 < kettle.measure < 12.0
        with pytest.raises(DomainError):
            pr.run_adl_block(B.GAUGE_MATCH, ObserverModel(), rng)

    def test_block_invariant(self):
        with pytest.raises(DomainError):
            pr.BlockResult(B.GAUGE_MATCH, None, [], True)


class TestSession:
    def test_deterministic_and_written(self, tmp_path):
        a = pr.run_session(PROFILE, ObserverModel(), None, np.random.default_rng(9))
        b = pr.run_session(PROFILE, ObserverModel(), None, np.random.default_rng(9))
        assert a.record == b.record and not a.errors
        d = pr.write_session(a, tmp_path / "s")
        assert read_participants(d / "participant.csv") == [a.record]
        blocks = list(csv.DictReader(open(d / "blocks.csv")))
        assert [r["kind"] for r in blocks] == [k.value for k in a.order]
        for r in blocks:
            assert float(r["measure"]) == a.blocks[B(r["kind"])].measure
        traces = sorted(p.name for p in d.glob("*_staircase.csv"))
        assert len(traces) == 3

    def test_weber_consistent_record(self):
        from wristsim.core_types import validate_participant

        s = pr.run_session(PROFILE, ObserverModel(), None, np.random.default_rng(2))
        assert validate_participant(s.record) == []

    def test_population_heterogeneous(self):
        pop = pr.make_population(11, np.random.default_rng(0))
        assert [p.pid for p, _ in pop] == list(range(1, 12))
        assert len({o.velocity.sigma for _, o in pop}) == 11
        assert all(p.pron_limit_deg < 60 and p.sup_limit_deg > -60 for p, _ in pop)


class TestMonteCarlo:
    def test_same_seed_same_summary(self):
        a = pr.discrimination_montecarlo(B.VEL_DISCRIM, PROFILE, ObserverModel(), 8, seed=4)
        b = pr.discrimination_montecarlo(B.VEL_DISCRIM, PROFILE, ObserverModel(), 8, seed=4)
        assert a == b

    def test_workers_match_serial(self):
        a = pr.discrimination_montecarlo(B.POS_DISCRIM, PROFILE, ObserverModel(), 6, seed=1)
        b = pr.discrimination_montecarlo(B.POS_DISCRIM, PROFILE, ObserverModel(), 6, seed=1, workers=2)
        assert a == b

    def test_tiny_noise_sits_at_floor(self):
        obs = ObserverModel(position=Channel(1e-6, 0.0), velocity=Channel(1e-6, 0.0),
                            torque=Channel(1e-6, 0.0))
        for kind, floor in ((B.POS_DISCRIM, 1.51), (B.VEL_DISCRIM, 0.5), (B.TORQUE_DISCRIM, 5.0)):
            s = pr.discrimination_montecarlo(kind, PROFILE, obs, 3, seed=0)
            assert s.median_jnd == floor and s.q25 == s.q75 == floor
