"""Acceptance suite.

One test per acceptance criterion, each at its stated tolerance, printing a
single PASS line on completion (run with ``pytest tests/test_acceptance.py
-v -s`` to see them).  Expected values are computed by independent oracles
defined here or in the module test files, never by the code under test.
"""

import math
import time

import numpy as np
import pytest

from exoteleop import config
from exoteleop.calibration import JointCalibration, JointConstraint, map_encoder_to_joint
from exoteleop.clock import VirtualClock
from exoteleop.collision import Capsule, capsule_distance
from exoteleop.control_loop import LoopConfig, ScriptedEncoderSource, constant_script
from exoteleop.core import DEFAULT_ENCODER_RESOLUTION_RAD
from exoteleop.metrics import score_gather_balls, score_curtained_shelf
from exoteleop.policy import (
    DatasetAssembly,
    EnsembleBuffer,
    build_database,
    knn_weighted_chunk,
    run_policy,
)
from exoteleop.recorder import read_demo, replay, write_demo
from exoteleop.simulator import DualArmSim
from exoteleop.worlds import STAGE_NAMES

from conftest import scripted_gather_demo, scripted_wild_demo
from test_collision import brute_force_segment_distance
from test_metrics import synthetic_world
from test_policy import brute_force_knn

RES = DEFAULT_ENCODER_RESOLUTION_RAD


def report(name: str, detail: str):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


class TestEq1Conformance:
    def test_eq1_conformance(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        cases = 10_000
        for _ in range(cases):
            lo, hi = np.sort(rng.uniform(-3.0, 3.0, 2))
            if hi - lo < 1e-6:
                hi = lo + 1e-6
            cal = JointCalibration(
                q_c=float(rng.uniform(lo, hi)),
                p_c=int(rng.integers(-5000, 5000)),
                k=float(rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])),
                q_min=float(lo),
                q_max=float(hi),
            )
            constraint = None
            c_lo, c_hi = lo, hi
            if rng.uniform() < 0.5:
                c_lo, c_hi = np.sort(rng.uniform(lo, hi, 2))
                if c_hi - c_lo < 1e-9:
                    c_hi = min(hi, c_lo + 1e-9)
                constraint = JointConstraint(q_t_min=float(c_lo), q_t_max=float(c_hi))
            p1, p2 = sorted(rng.integers(-100_000, 100_000, 2))
            q1 = map_encoder_to_joint(cal, int(p1), RES, constraint)
            q2 = map_encoder_to_joint(cal, int(p2), RES, constraint)
            lo_active, hi_active = (c_lo, c_hi) if constraint else (lo, hi)
            assert lo_active <= q1 <= hi_active
            assert lo_active <= q2 <= hi_active
            if cal.k > 0:
                assert q2 >= q1  # non-decreasing in p
            else:
                assert q2 <= q1  # non-increasing in p
        # Hand-computed example: 500 ticks * 0.08 deg = 40 deg.
        cal = JointCalibration(q_c=0.0, p_c=1000, k=1.0, q_min=-math.pi, q_max=math.pi)
        q = map_encoder_to_joint(cal, 1500, RES)
        assert abs(q - math.radians(40.0)) < 1e-12
        assert abs(q - 0.6981317) < 1e-6
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0
        report("eq1-conformance", f"{cases} fuzz cases, example to 1e-12, {elapsed:.2f}s")


class TestProtocolCadence:
    def test_teleop_300_steps(self, model, cal, gather_cfg):
        counts = []
        for _ in range(2):
            sim = DualArmSim(model, gather_cfg, seed=1)
            ticks = [e.p_c for e in cal.left.joints] + [cal.left.gripper.p_closed]
            ticks += [e.p_c for e in cal.right.joints] + [cal.right.gripper.p_closed]
            src = ScriptedEncoderSource(constant_script(ticks, 60.0))
            stats, _ = run_teleop(src, cal, sim)
            counts.append(stats.ticks_executed)
        assert counts == [300, 300]
        report("protocol-cadence-teleop", "60 s at 5 Hz = exactly 300 ticks, twice")

    def test_shelf_session_policy_steps(self, model, cal, shelf_cfg):
        from conftest import scripted_shelf_session

        demo, _, _ = scripted_shelf_session(model, cal, shelf_cfg, seed=1, duration_s=80.0)
        db = build_database(DatasetAssembly(pretrain=[], finetune=[demo]), target_hz=5.0)
        steps = []
        for _ in range(2):
            sim = DualArmSim(model, shelf_cfg, seed=1)
            result = run_policy(
                db, sim, LoopConfig(control_rate_hz=5.0), k=1, duration_s=120.0,
                model=model, action_period=int(shelf_cfg.get("action_period", 2)),
                clock=VirtualClock(), record=False,
            )
            steps.append(result.policy_steps)
            assert result.stats.ticks_executed == 600
        assert steps[0] == steps[1] == 300
        assert steps[0] <= 400
        report(
            "protocol-cadence-shelf",
            f"120 s session, {steps[0]} policy steps <= 400, exact across runs",
        )


def run_teleop(src, cal, sim):
    from exoteleop.control_loop import run_teleop_session

    return run_teleop_session(
        src, cal, sim, LoopConfig(control_rate_hz=5.0), 60.0, clock=VirtualClock()
    )


class TestRecordReplayDeterminism:
    def test_record_replay_bits(self, model, cal, gather_cfg, tmp_path):
        t0 = time.perf_counter()
        demo, original, _ = scripted_gather_demo(model, cal, gather_cfg, seed=11)
        p1 = tmp_path / "a.demo"
        p2 = tmp_path / "b.demo"
        write_demo(demo, p1)
        loaded = read_demo(p1)
        write_demo(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        sim = DualArmSim(model, gather_cfg, seed=11)
        replay(loaded, sim, clock=VirtualClock())
        assert sim.snapshot().digest() == original.digest()
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0
        report(
            "record-replay-determinism",
            f"bit-identical final state, byte-identical file, {elapsed:.2f}s",
        )


class TestMetricsConformance:
    def test_metrics_conformance(self):
        # Hand-constructed end states: the half-ball rule and thresholds.
        snap = synthetic_world(35, 20, right_on_edge=1)
        res = score_gather_balls(snap, [], 60.0)
        assert res.completion_left == 0.875
        assert res.completion_right == 0.5125
        assert res.completion_overall == 0.69375
        assert res.success_at[0.4] is True
        assert res.success_at[0.6] is True
        assert res.success_at[0.8] is False
        full = score_gather_balls(synthetic_world(40, 40), [], 60.0)
        assert full.completion_overall == 1.0 and all(full.success_at.values())
        empty = score_gather_balls(synthetic_world(0, 0), [], 60.0)
        assert empty.completion_overall == 0.0 and not any(empty.success_at.values())

        rng = np.random.default_rng(7)
        for _ in range(1000):
            snap = synthetic_world(
                int(rng.integers(0, 41)), int(rng.integers(0, 41)),
                right_on_edge=int(rng.integers(0, 4)),
            )
            res = score_gather_balls(snap, [], 60.0)
            assert res.success_at[0.4] >= res.success_at[0.6] >= res.success_at[0.8]
            n_stages = int(rng.integers(0, 6))
            flags = {name: i < n_stages for i, name in enumerate(STAGE_NAMES)}
            shelf = score_curtained_shelf(
                {"type": "curtained_shelf", "stage_flags": flags}, [], 120.0
            )
            values = [shelf.stage_flags[n] for n in STAGE_NAMES]
            assert all(not (b and not a) for a, b in zip(values, values[1:]))
        report("metrics-conformance", "half-ball rule exact, 1000 fuzzed trials monotone")


class TestKnnOracle:
    def test_knn_oracle_equivalence(self):
        rng = np.random.default_rng(99)
        dbs = 100
        for _ in range(dbs):
            n = int(rng.integers(21, 1001))
            d = int(rng.integers(2, 10))
            feats = rng.normal(size=(n, d))
            chunks = rng.normal(size=(n, 4, 3))
            domains = (rng.uniform(size=n) < 0.4).astype(np.uint8)
            query = rng.normal(size=d)
            for k in (1, 5, 20):
                mine = knn_weighted_chunk(feats, chunks, domains, query, k, domain_weight=3.0)
                ref = brute_force_knn(feats, chunks, domains, query, k, domain_weight=3.0)
                assert np.array_equal(mine, ref) or np.allclose(mine, ref, atol=0, rtol=0)
        # Inverse-distance example: distances 1 and 3, actions 0 and 4 -> 1.0.
        feats = np.array([[1.0], [3.0]])
        chunks = np.array([[[0.0]], [[4.0]]])
        out = knn_weighted_chunk(
            feats, chunks, np.zeros(2, dtype=np.uint8), np.array([0.0]), k=2, eps=0.0
        )
        assert abs(out[0, 0] - 1.0) < 1e-12
        report("knn-oracle", f"{dbs} random databases, k in {{1,5,20}}, exact")


class TestTemporalEnsemble:
    def test_temporal_ensemble(self):
        buf = EnsembleBuffer(k_ens=0.01, horizon=5)
        buf.step(np.full((5, 1), 3.0))
        buf.step(np.full((5, 1), 2.0))
        out = buf.step(np.full((5, 1), 1.0))
        expected = (1 + 2 * math.exp(-0.01) + 3 * math.exp(-0.02)) / (
            1 + math.exp(-0.01) + math.exp(-0.02)
        )
        assert abs(out[0] - expected) < 1e-12
        assert abs(out[0] - 1.99333) < 1e-5

        # k = 0 reduces to the plain mean of the contributors, exactly.
        buf = EnsembleBuffer(k_ens=0.0, horizon=3)
        buf.step(np.full((3, 1), 6.0))
        buf.step(np.full((3, 1), 0.0))
        out = buf.step(np.full((3, 1), 3.0))
        assert out[0] == (6.0 + 0.0 + 3.0) / 3.0

        rng = np.random.default_rng(123)
        for _ in range(10_000):
            h = int(rng.integers(1, 6))
            buf = EnsembleBuffer(k_ens=float(rng.uniform(0.0, 0.3)), horizon=h)
            for _ in range(int(rng.integers(1, 8))):
                chunk = rng.normal(size=(h, 2))
                contributors = [c[a] for a, c in buf._chunks] + [chunk[0]]
                fused = buf.step(chunk)
                lo = np.min(contributors, axis=0)
                hi = np.max(contributors, axis=0)
                assert np.all(fused >= lo - 1e-12) and np.all(fused <= hi + 1e-12)
        report("temporal-ensemble", "hand example to 1e-5, 10000 fuzzed buffers convex")


class TestSelfImitation:
    def test_self_imitation_regression(self, model, cal, gather_cfg):
        t0 = time.perf_counter()
        seeds = [1, 2, 3, 4, 5]
        demos = []
        scripted_scores = []
        for seed in seeds:
            demo, state, _ = scripted_gather_demo(model, cal, gather_cfg, seed=seed)
            demos.append(demo)
            scripted_scores.append(
                score_gather_balls(state.world_snapshot, state.collision_events, 60.0)
                .completion_overall
            )
        db = build_database(DatasetAssembly(pretrain=[], finetune=demos), target_hz=5.0)
        policy_scores = []
        for seed in seeds:  # 5 trials, within the 10-trial budget
            sim = DualArmSim(model, gather_cfg, seed=seed)
            result = run_policy(
                db, sim, LoopConfig(control_rate_hz=5.0), k=1, duration_s=60.0,
                model=model, clock=VirtualClock(), record=False,
            )
            state = result.final_state
            trial = score_gather_balls(state.world_snapshot, state.collision_events, 60.0)
            assert not trial.collided, "self-imitation must be collision-free"
            policy_scores.append(trial.completion_overall)
        ratio = np.mean(policy_scores) / np.mean(scripted_scores)
        assert ratio >= 0.9
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        report(
            "self-imitation",
            f"policy {np.mean(policy_scores):.3f} vs scripted {np.mean(scripted_scores):.3f} "
            f"(ratio {ratio:.3f} >= 0.9), zero collisions, {elapsed:.1f}s",
        )


class TestTwoStageBenefit:
    def test_two_stage_benefit(self, model, cal, gather_cfg):
        seeds = list(range(31, 41))  # 10 seeded trials

        def teleop(seed, arms):
            return scripted_gather_demo(model, cal, gather_cfg, seed=seed, arms=arms)[0]

        tds_left = [teleop(101, ("left",)), teleop(102, ("left",))]
        tds_both = [teleop(103, ("right", "left")), teleop(104, ("right", "left"))]
        itws = [scripted_wild_demo(model, cal, seed=s)[0] for s in range(20)]

        def mean_completion(pretrain, finetune):
            db = build_database(DatasetAssembly(pretrain=pretrain, finetune=finetune))
            scores = []
            for seed in seeds:
                sim = DualArmSim(model, gather_cfg, seed=seed)
                result = run_policy(
                    db, sim, LoopConfig(control_rate_hz=5.0), k=5, duration_s=60.0,
                    model=model, domain_weight=3.0, clock=VirtualClock(), record=False,
                )
                state = result.final_state
                scores.append(
                    score_gather_balls(state.world_snapshot, state.collision_events, 60.0)
                    .completion_overall
                )
            return float(np.mean(scores))

        td_only_left = mean_completion([], tds_left)
        mixed_left = mean_completion(itws, tds_left)
        td_only_both = mean_completion([], tds_both)
        mixed_both = mean_completion(itws, tds_both)

        assert mixed_both >= td_only_both - 1e-12, "adding ITW demos must not reduce completion"
        assert mixed_left > td_only_left, (
            "ITW demos must add the uncovered arm's strategy when teleop demos are one-armed"
        )
        report(
            "two-stage-benefit",
            f"left-only TDs {td_only_left:.3f} -> {mixed_left:.3f} with ITW; "
            f"both-arm TDs {td_only_both:.3f} -> {mixed_both:.3f}",
        )


class TestCollisionOracle:
    def test_collision_oracle(self):
        rng = np.random.default_rng(55)
        pairs = 100
        signs_seen = set()
        for _ in range(pairs):
            a1 = rng.uniform(-0.5, 0.5, 3)
            b1 = a1 + rng.uniform(-0.6, 0.6, 3)
            a2 = rng.uniform(-0.5, 0.5, 3)
            b2 = a2 + rng.uniform(-0.6, 0.6, 3)
            r1 = float(rng.uniform(0.02, 0.25))
            r2 = float(rng.uniform(0.02, 0.25))
            c1 = Capsule(a=a1, b=b1, radius=r1)
            c2 = Capsule(a=a2, b=b2, radius=r2)
            analytic = capsule_distance(c1, c2)
            brute = brute_force_segment_distance(a1, b1, a2, b2) - r1 - r2
            assert abs(analytic - brute) <= 1e-6
            if abs(analytic) > 1e-6:
                assert (analytic < 0) == (brute < 0)
                signs_seen.add(analytic < 0)
        assert signs_seen == {True, False}, "sample must exercise both signs"
        report("collision-oracle", f"{pairs} random pairs, |analytic-brute| <= 1e-6")
