import math

import numpy as np
import pytest

from helpers import (
    DT,
    N_FUTURE,
    car_following_scene,
    const_agent,
    const_agent_at_split,
    brake_primitive,
    library,
    scenario,
    straight_primitive,
)
from scenesift.counterfactuals import GeneratorKind
from scenesift.errors import DataError
from scenesift.prediction import ReferencePredictor
from scenesift.scenario import ScenarioSet, canonical_segment
from scenesift.surprise import (
    SurpriseConfig,
    batch_rules,
    batch_score,
    load_scores,
    rule_scores,
    save_scores,
    stable_seed,
    surprise,
    ttc,
    ttce,
)

# length = width = sqrt(2) makes the bounding-box half-diagonal exactly 1
DISC1 = math.sqrt(2.0)


def _seg(agents, **kw):
    return canonical_segment(scenario(agents, **kw))


class TestTtc:
    def test_head_on_two_seconds(self):
        # gap 22 m center to center, closing 10 m/s, contact radius 1+1
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 10.0, length=DISC1, width=DISC1),
            const_agent_at_split("lead", 22.0, 0.0, 0.0, 0.0, length=DISC1, width=DISC1),
        ])
        assert ttc(seg) == pytest.approx(2.0, abs=1e-9)

    def test_parallel_same_velocity_sentinel(self):
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 10.0),
            const_agent_at_split("side", 0.0, 6.0, 0.0, 10.0),
        ])
        assert ttc(seg) == pytest.approx(4.0 + DT)

    def test_receding_agent_sentinel(self):
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 5.0),
            const_agent_at_split("front", 30.0, 0.0, 0.0, 15.0),
        ])
        assert ttc(seg) == pytest.approx(4.0 + DT)

    def test_already_touching_zero(self):
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 10.0),
            const_agent_at_split("other", 1.0, 0.0, 0.0, 0.0),
        ])
        assert ttc(seg) == 0.0

    def test_contact_beyond_horizon_sentinel(self):
        # closing 1 m/s over a 22 m gap: contact at 20 s >> 4 s horizon
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 1.0, length=DISC1, width=DISC1),
            const_agent_at_split("lead", 22.0, 0.0, 0.0, 0.0, length=DISC1, width=DISC1),
        ])
        assert ttc(seg) == pytest.approx(4.0 + DT)


class TestTtce:
    def test_crossing_argmin_at_1_5(self):
        # relative motion: p=(15,3), v=(-10,0) -> closest approach at 1.5 s
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 0.0, length=DISC1, width=DISC1),
            const_agent_at_split("crosser", 15.0, 3.0, math.pi, 10.0,
                                 length=DISC1, width=DISC1),
        ])
        assert ttce(seg) == pytest.approx(1.5, abs=1e-6)

    def test_constant_distance_earliest_argmin(self):
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 10.0),
            const_agent_at_split("side", 0.0, 6.0, 0.0, 10.0),
        ])
        assert ttce(seg) == 0.0

    def test_argmin_clamped_to_horizon(self):
        # closing slowly: unclamped argmin at 30/4 = 7.5 s, horizon 4 s
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 2.0),
            const_agent_at_split("front", 30.0, 0.0, math.pi, 2.0),
        ])
        assert ttce(seg) == pytest.approx(4.0)


class TestRuleScores:
    def test_single_stationary_agent(self):
        seg = _seg([const_agent("ego", 0.0, 0.0, 0.0, 0.0)])
        rules = rule_scores(seg)
        assert rules["rule-vel"] == 0.0
        assert rules["rule-acc"] == 0.0
        assert rules["rule-num"] == 0.0

    def test_pair_three_meters_apart(self):
        seg = _seg([
            const_agent("ego", 0.0, 0.0, 0.0, 10.0),
            const_agent("side", 0.0, 3.0, 0.0, 10.0),
        ])
        rules = rule_scores(seg)
        assert rules["rule-num"] == 1.0
        assert rules["rule-dist"] == pytest.approx(-3.0)

    def test_ttc_orientation(self):
        seg = _seg([
            const_agent_at_split("ego", 0.0, 0.0, 0.0, 10.0, length=DISC1, width=DISC1),
            const_agent_at_split("lead", 22.0, 0.0, 0.0, 0.0, length=DISC1, width=DISC1),
        ])
        assert rule_scores(seg)["rule-ttc"] == pytest.approx(-2.0, abs=1e-9)

    def test_max_velocity_over_all_agents(self):
        seg = _seg([
            const_agent("ego", 0.0, 0.0, 0.0, 3.0),
            const_agent("fast", 50.0, 50.0, 0.0, 17.5),
        ])
        assert rule_scores(seg)["rule-vel"] == pytest.approx(17.5)

    def test_lane_deviation_zero_when_following(self):
        from helpers import straight_lane

        seg = canonical_segment(scenario(
            [const_agent("ego", 0.0, 0.0, 0.0, 10.0)], lanes=[straight_lane()]))
        assert rule_scores(seg)["rule-lane"] == pytest.approx(0.0, abs=1e-9)

    def test_prediction_error_none_without_predictor(self):
        seg = _seg([const_agent("ego", 0.0, 0.0, 0.0, 5.0)])
        assert rule_scores(seg, predictor=None)["rule-err"] == 0.0

    def test_prediction_error_zero_for_perfect_cv(self):
        seg = _seg([const_agent("ego", 0.0, 0.0, 0.0, 5.0)])
        err = rule_scores(seg, predictor=ReferencePredictor())["rule-err"]
        assert err == pytest.approx(0.0, abs=1e-9)

    def test_all_eight_rules_present(self):
        seg = _seg([const_agent("ego", 0.0, 0.0, 0.0, 5.0)])
        assert sorted(rule_scores(seg)) == sorted([
            "rule-vel", "rule-acc", "rule-dist", "rule-num",
            "rule-ttc", "rule-ttce", "rule-lane", "rule-err",
        ])


class TestStableSeed:
    def test_deterministic(self):
        assert stable_seed("a", 1, "b") == stable_seed("a", 1, "b")

    def test_sensitive_to_parts(self):
        assert stable_seed("a", 1) != stable_seed("a", 2)
        assert stable_seed("a") != stable_seed("b")


def _lib():
    return library(
        straight_primitive("st", 10, 10.0, DT),
        brake_primitive("br", 10, 10.0, dt=DT),
    )


class TestSurprise:
    def test_identical_generators_exact_zero(self):
        seg = canonical_segment(car_following_scene())
        cfg = SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                             counterfactual=GeneratorKind.FUT_NONE, metric="W2")
        result = surprise(seg, cfg, lib=None, predictor=ReferencePredictor())
        assert result.score == 0.0

    def test_identical_generators_zero_for_every_metric(self):
        seg = canonical_segment(car_following_scene())
        for metric in ("L2", "KLD", "W2"):
            cfg = SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                                 counterfactual=GeneratorKind.FUT_NONE, metric=metric)
            result = surprise(seg, cfg, lib=None, predictor=ReferencePredictor())
            assert result.score == 0.0, metric

    def test_follower_beats_distant_bystander(self):
        # gap 26: the braking-history variant stops the lead, flipping the
        # follower's conflict state; 45 m keeps the bystander out of range
        seg = canonical_segment(car_following_scene(gap=26.0, bystander_at=45.0))
        cfg = SurpriseConfig(nominal=GeneratorKind.HIST_PRIM,
                             counterfactual=GeneratorKind.HIST_PRIM, metric="W2")
        result = surprise(seg, cfg, lib=_lib(), predictor=ReferencePredictor())
        assert result.per_agent["follower"] > 0.0
        assert result.per_agent["bystander"] == 0.0

    def test_histrmv_vs_futnone_positive_for_follower(self):
        seg = canonical_segment(car_following_scene(gap=12.0))
        cfg = SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                             counterfactual=GeneratorKind.HIST_RMV, metric="W2")
        result = surprise(seg, cfg, lib=None, predictor=ReferencePredictor())
        assert result.per_agent["follower"] > 0.0

    def test_scores_nonnegative(self):
        seg = canonical_segment(car_following_scene(gap=12.0))
        for metric in ("L2", "KLD", "W2"):
            cfg = SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                                 counterfactual=GeneratorKind.HIST_PRIM,
                                 metric=metric, kld_samples=500)
            result = surprise(seg, cfg, lib=_lib(), predictor=ReferencePredictor())
            assert result.score >= 0.0

    def test_translation_invariance(self):
        base = car_following_scene(gap=12.0)
        moved = car_following_scene(gap=12.0)
        for agent in moved.agents:
            agent.states = [
                None if s is None else type(s)(
                    t=s.t, x=s.x + 500.0, y=s.y - 250.0,
                    heading=s.heading, vx=s.vx, vy=s.vy)
                for s in agent.states
            ]
        cfg = SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                             counterfactual=GeneratorKind.HIST_PRIM, metric="W2")
        r1 = surprise(canonical_segment(base), cfg, lib=_lib(),
                      predictor=ReferencePredictor())
        r2 = surprise(canonical_segment(moved), cfg, lib=_lib(),
                      predictor=ReferencePredictor())
        assert r1.score == pytest.approx(r2.score, rel=1e-9, abs=1e-9)

    def test_deterministic(self):
        seg = canonical_segment(car_following_scene(gap=12.0))
        cfg = SurpriseConfig(nominal=GeneratorKind.HIST_PRIM,
                             counterfactual=GeneratorKind.HIST_PRIM, metric="W2")
        r1 = surprise(seg, cfg, lib=_lib(), predictor=ReferencePredictor())
        r2 = surprise(seg, cfg, lib=_lib(), predictor=ReferencePredictor())
        assert r1.score == r2.score
        assert r1.per_agent == r2.per_agent

    def test_config_validation(self):
        with pytest.raises(DataError):
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.FUT_NONE, metric="XX")
        with pytest.raises(DataError):
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.FUT_NONE, metric="W2", K=0)
        with pytest.raises(DataError):
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.FUT_NONE, metric="W2",
                           agent_aggregation="median")


class TestBatchScore:
    def _data(self):
        return ScenarioSet([
            car_following_scene(gap=12.0, scenario_id="near"),
            car_following_scene(gap=26.0, scenario_id="far"),
        ])

    def test_rows_per_scenario_times_config(self):
        cfgs = [
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.HIST_RMV, metric="W2",
                           label="sp-rmv"),
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.FUT_CVM, metric="W2",
                           label="sp-cvm"),
        ]
        table = batch_score(self._data(), cfgs, predictor=ReferencePredictor())
        assert len(table.rows) == 4
        assert [r.scenario_id for r in table.rows[:2]] == ["near", "near"]

    def test_partial_failure_keeps_other_rows(self):
        # HistPrim with an empty-horizon library fails per scenario
        cfgs = [
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.HIST_PRIM, metric="W2",
                           label="sp-prim"),
            SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                           counterfactual=GeneratorKind.HIST_RMV, metric="W2",
                           label="sp-rmv"),
        ]
        bad_lib = library(straight_primitive("short", 3, 10.0, DT))
        table = batch_score(self._data(), cfgs, lib=bad_lib,
                            predictor=ReferencePredictor())
        assert len(table.rows) == 2  # the rmv rows survive
        assert {r.metric for r in table.rows} == {"sp-rmv"}
        assert len(table.diagnostics) == 2

    def test_rerun_identical(self):
        cfgs = [SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                               counterfactual=GeneratorKind.HIST_RMV, metric="W2")]
        t1 = batch_score(self._data(), cfgs, predictor=ReferencePredictor())
        t2 = batch_score(self._data(), cfgs, predictor=ReferencePredictor())
        assert [(r.scenario_id, r.metric, r.score) for r in t1.rows] == \
            [(r.scenario_id, r.metric, r.score) for r in t2.rows]

    def test_batch_rules_covers_all(self):
        table = batch_rules(self._data(), predictor=ReferencePredictor())
        assert len(table.rows) == 2 * 8
        for row in table.rows:
            assert math.isfinite(row.score)


class TestScoreTableIO:
    def test_round_trip(self, tmp_path):
        data = ScenarioSet([car_following_scene(gap=12.0, scenario_id="s1")])
        cfgs = [SurpriseConfig(nominal=GeneratorKind.FUT_NONE,
                               counterfactual=GeneratorKind.HIST_RMV, metric="W2")]
        table = batch_score(data, cfgs, predictor=ReferencePredictor())
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_scores(table, p1)
        save_scores(load_scores(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "scenario_id,metric,score,orientation"

    def test_load_missing_file_errors(self, tmp_path):
        with pytest.raises(DataError):
            load_scores(tmp_path / "nope.csv")
