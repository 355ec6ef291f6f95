import dataclasses
import json

import pytest

from rearrange2d import cli, scenario
from rearrange2d.grids import GridSpec
from rearrange2d.motion import MotionPlan, Path, PickPlacePair, Subgoal
from rearrange2d.planner import (
    ConfigError,
    Metrics,
    PlannerConfig,
    count_metrics,
    gen_motion_plan,
    plan_rearrangement,
    replay_plans,
    serialize_result,
)
from rearrange2d.world import Pose2, verify_placements

from conftest import goal_obj, obstacle, robot, scene, wall


class TestPlannerConfig:
    def test_defaults(self):
        cfg = PlannerConfig()
        assert cfg.grid_n == 64
        assert cfg.c0 == 25.0
        assert cfg.time_limit == 120.0
        assert cfg.tol is None
        assert cfg.refine and not cfg.random_sequence

    def test_merged_rejects_unknown(self):
        with pytest.raises(ConfigError):
            PlannerConfig().merged({"frobnicate": 1})

    def test_merged_type_checks(self):
        cfg = PlannerConfig().merged({"c0": 30, "refine": False, "tol": None})
        assert cfg.c0 == 30.0 and cfg.refine is False and cfg.tol is None
        with pytest.raises(ConfigError):
            PlannerConfig().merged({"refine": 1})
        with pytest.raises(ConfigError):
            PlannerConfig().merged({"grid_n": 3.5})
        with pytest.raises(ConfigError):
            PlannerConfig().merged({"c0": "fast"})

    def test_layering_order(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text('{"c0": 10, "beam_width": 9}')
        cfg = PlannerConfig.from_layers(
            file=str(f), env={"REARRANGE2D_C0": "15"}, cli={"c0": 20}
        )
        assert cfg.c0 == 20.0
        assert cfg.beam_width == 9
        cfg2 = PlannerConfig.from_layers(file=str(f), env={"REARRANGE2D_C0": "15"})
        assert cfg2.c0 == 15.0
        cfg3 = PlannerConfig.from_layers(file=str(f), env={})
        assert cfg3.c0 == 10.0

    def test_env_parsing(self):
        cfg = PlannerConfig.from_layers(
            env={
                "REARRANGE2D_REFINE": "off",
                "REARRANGE2D_RANDOM_SEQUENCE": "1",
                "REARRANGE2D_TOL": "none",
                "REARRANGE2D_SEED": "12",
                "PATH": "/usr/bin",
            }
        )
        assert cfg.refine is False
        assert cfg.random_sequence is True
        assert cfg.tol is None
        assert cfg.seed == 12

    def test_env_errors(self):
        with pytest.raises(ConfigError):
            PlannerConfig.from_layers(env={"REARRANGE2D_NOPE": "1"})
        with pytest.raises(ConfigError):
            PlannerConfig.from_layers(env={"REARRANGE2D_REFINE": "maybe"})
        with pytest.raises(ConfigError):
            PlannerConfig.from_layers(env={"REARRANGE2D_SEED": "1.5"})

    def test_bad_file(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text("{broken")
        with pytest.raises(ConfigError):
            PlannerConfig.from_layers(file=str(f))
        f.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            PlannerConfig.from_layers(file=str(f))


def _toy_plan():
    pick = Path((Pose2(0, 0), Pose2(3, 4)))
    place = Path((Pose2(3, 4), Pose2(3, 10)))
    sg = Subgoal(Pose2(3, 4.5), Pose2(3, 4.2), "S")
    pair = PickPlacePair(pick, place, (Pose2(3, 4.5), Pose2(3, 10.5)), sg, (0.0, -0.5))
    return MotionPlan("x", (pair,))


def test_count_metrics():
    plan = _toy_plan()
    m = count_metrics([plan, plan], failures=2, regenerations=1)
    assert m.pnp == 2
    assert m.replanning == 3
    assert m.travel_distance == pytest.approx(2 * (5.0 + 6.0))
    assert m.wall_time == 0.0


class TestGenMotionPlan:
    def test_direct_transport(self):
        sc = scene(
            [robot(1, 1), goal_obj("g1", 3, 3), obstacle("b1", 6, 2)],
            {"g1": Pose2(8.0, 8.0)},
        )
        out = gen_motion_plan(sc, "g1", PlannerConfig(), seed=0)
        assert out.success
        assert out.scene.body("g1").pose == Pose2(8.0, 8.0)
        assert out.relocated == ()
        assert all(p.object_id == "g1" for p in out.plans)

    def test_relocation_inserted(self):
        sc = scene(
            [
                robot(2.0, 5.0),
                wall("wn", 5.0, 7.9, 0.4, 4.2),
                wall("ws", 5.0, 2.1, 0.4, 4.2),
                goal_obj("g1", 3.0, 5.0),
                obstacle("b1", 5.0, 5.0),
            ],
            {"g1": Pose2(8.0, 5.0)},
        )
        out = gen_motion_plan(sc, "g1", PlannerConfig(), seed=0)
        assert out.success
        assert "b1" in out.relocated
        assert out.plans[-1].object_id == "g1"
        assert out.plans[0].purpose == "relocation"
        assert out.scene.body("g1").pose == Pose2(8.0, 5.0)

    def test_no_route(self):
        sc = scene(
            [robot(1, 5), goal_obj("g1", 3, 5), wall("bar", 6, 5, 0.4, 10.0)],
            {"g1": Pose2(8, 5)},
        )
        out = gen_motion_plan(sc, "g1", PlannerConfig(), seed=0)
        assert not out.success
        assert out.reason == "no route past the walls"


class TestPlanRearrangement:
    def test_success_simple(self, simple_scene):
        res = plan_rearrangement(simple_scene)
        assert res.status == "success"
        assert res.sequence == ("g1",)
        assert res.metrics.pnp >= 1
        assert verify_placements(res.scene, 0.15) == {"g1"}
        bad, _ = replay_plans(simple_scene, res.plans)
        assert bad == []

    def test_multi_object(self):
        sc = scene(
            [robot(1, 1), goal_obj("a", 3, 3), goal_obj("b", 3, 7)],
            {"a": Pose2(8, 3), "b": Pose2(8, 7)},
        )
        res = plan_rearrangement(sc)
        assert res.status == "success"
        assert sorted(res.sequence) == ["a", "b"]
        assert verify_placements(res.scene, 0.15) == {"a", "b"}

    def test_infeasible(self):
        sc = scene(
            [robot(1, 5), goal_obj("g1", 3, 5), wall("bar", 6, 5, 0.4, 10.0)],
            {"g1": Pose2(8, 5)},
        )
        res = plan_rearrangement(sc)
        assert res.status == "infeasible"

    def test_timeout(self, simple_scene):
        res = plan_rearrangement(simple_scene, PlannerConfig(time_limit=0.0))
        assert res.status == "timeout"

    @pytest.mark.parametrize(
        "flag", ["random_sequence", "static_sequence", "euclidean_only"]
    )
    def test_sequencer_variants_still_solve(self, flag):
        sc = scene(
            [robot(1, 1), goal_obj("a", 3, 3), goal_obj("b", 3, 7)],
            {"a": Pose2(8, 3), "b": Pose2(8, 7)},
        )
        res = plan_rearrangement(sc, PlannerConfig(**{flag: True}))
        assert res.status == "success"
        assert verify_placements(res.scene, 0.15) == {"a", "b"}


class TestSerializeResult:
    def test_deterministic_bytes(self, simple_scene):
        r1 = plan_rearrangement(simple_scene)
        r2 = plan_rearrangement(simple_scene)
        b1 = json.dumps(serialize_result(r1), sort_keys=True)
        b2 = json.dumps(serialize_result(r2), sort_keys=True)
        assert b1 == b2

    def test_no_wall_clock_fields(self, simple_scene):
        res = plan_rearrangement(simple_scene)
        payload = serialize_result(res)

        def keys(d):
            if isinstance(d, dict):
                for k, v in d.items():
                    yield k
                    yield from keys(v)
            elif isinstance(d, list):
                for v in d:
                    yield from keys(v)

        assert all("time" not in k for k in keys(payload))

    def test_shape(self, simple_scene):
        res = plan_rearrangement(simple_scene)
        payload = serialize_result(res)
        assert payload["status"] == "success"
        assert payload["sequence"] == ["g1"]
        assert "robot" in payload["final_poses"]
        assert payload["plans"]
        pair = payload["plans"][-1]["pairs"][0]
        assert set(pair) == {"side", "robot_offset", "pick", "place", "object_path"}


class TestReplayPlans:
    def test_detects_offset_drift(self, simple_scene):
        res = plan_rearrangement(simple_scene)
        plan = res.plans[-1]
        pair = plan.pairs[-1]
        wps = list(pair.place.waypoints)
        wps[-1] = Pose2(wps[-1].x + 0.5, wps[-1].y)
        tampered = dataclasses.replace(
            plan,
            pairs=plan.pairs[:-1]
            + (dataclasses.replace(pair, place=Path(tuple(wps))),),
        )
        bad, _ = replay_plans(simple_scene, res.plans[:-1] + (tampered,))
        assert any("drift" in b for b in bad)

    def test_detects_broken_continuity(self, simple_scene):
        res = plan_rearrangement(simple_scene)
        plan = res.plans[0]
        pair = plan.pairs[0]
        wps = (Pose2(0.5, 0.5),) + pair.pick.waypoints[1:]
        tampered = dataclasses.replace(
            plan,
            pairs=(dataclasses.replace(pair, pick=Path(wps)),) + plan.pairs[1:],
        )
        bad, _ = replay_plans(simple_scene, (tampered,) + res.plans[1:])
        assert any("does not start at the robot pose" in b for b in bad)

    def test_detects_collision(self):
        # a straight transport through an obstacle the planner never saw
        sc = scene(
            [robot(1, 5), goal_obj("g1", 3, 5), obstacle("rock", 5.5, 5)],
            {"g1": Pose2(8, 5)},
        )
        pick = Path((Pose2(1, 5), Pose2(2.5, 5)))
        place = Path((Pose2(2.5, 5), Pose2(7.5, 5)))
        sg = Subgoal(Pose2(8, 5), Pose2(7.7, 5), "W")
        pair = PickPlacePair(pick, place, (Pose2(3, 5), Pose2(8, 5)), sg, (-0.5, 0.0))
        bad, _ = replay_plans(sc, (MotionPlan("g1", (pair,)),))
        assert any("collides" in b for b in bad)


class TestCli:
    def _write_scene(self, tmp_path, sc, name="scene.json"):
        p = tmp_path / name
        scenario.save_scene(sc, p)
        return str(p)

    def test_gen_round_trip(self, tmp_path, capsys):
        out = tmp_path / "gen.json"
        rc = cli.main(["gen", "four_blocks", "--out", str(out)])
        assert rc == 0
        sc = scenario.load_scene(out)
        assert len(sc.goals) == 4

    def test_gen_m_block(self, capsys):
        rc = cli.main(["gen", "m-block", "--m", "2", "--seed", "3"])
        assert rc == 0
        data = json.loads(capsys.readouterr().out)
        assert len(data["movables"]) == 2

    def test_plan_success(self, tmp_path, capsys, simple_scene):
        path = self._write_scene(tmp_path, simple_scene)
        out = tmp_path / "result.json"
        rc = cli.main(["plan", path, "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["status"] == "success"

    def test_plan_failure_exit_code(self, tmp_path):
        sc = scene(
            [robot(1, 5), goal_obj("g1", 3, 5), wall("bar", 6, 5, 0.4, 10.0)],
            {"g1": Pose2(8, 5)},
        )
        path = self._write_scene(tmp_path, sc)
        rc = cli.main(["plan", path, "--out", str(path) + ".out"])
        assert rc == 1

    def test_bad_input_exit_code(self, tmp_path, capsys):
        assert cli.main(["plan", str(tmp_path / "missing.json")]) == 2
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        assert cli.main(["plan", str(p)]) == 2

    def test_bad_config_exit_code(self, tmp_path, capsys, simple_scene):
        path = self._write_scene(tmp_path, simple_scene)
        assert cli.main(["plan", path, "--set", "frobnicate=1"]) == 2
        assert cli.main(["plan", path, "--set", "no_equals_sign"]) == 2

    def test_seed_shorthand(self, tmp_path, capsys, simple_scene):
        path = self._write_scene(tmp_path, simple_scene)
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        assert cli.main(["plan", path, "--seed", "7", "--out", str(out1)]) == 0
        assert cli.main(["plan", path, "--set", "seed=7", "--out", str(out2)]) == 0
        assert out1.read_text() == out2.read_text()

    def test_bench_csv(self, tmp_path, capsys):
        out = tmp_path / "rows.csv"
        rc = cli.main(["bench", "--suite", "four_blocks", "--seeds", "1", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("scenario,seed,status")

    def test_render(self, tmp_path, capsys, simple_scene):
        path = self._write_scene(tmp_path, simple_scene)
        svg = tmp_path / "scene.svg"
        rc = cli.main(["render", path, "--out", str(svg)])
        assert rc == 0
        assert svg.read_text().lstrip().startswith("<svg")

    def test_plan_svg_output(self, tmp_path, capsys, simple_scene):
        path = self._write_scene(tmp_path, simple_scene)
        svg = tmp_path / "final.svg"
        rc = cli.main(
            ["plan", path, "--out", str(tmp_path / "r.json"), "--svg", str(svg)]
        )
        assert rc == 0
        assert svg.exists()
