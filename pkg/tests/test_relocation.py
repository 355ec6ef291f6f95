import math

import pytest

from rearrange2d import guided_search as gs
from rearrange2d.grids import GridSpec, rasterize_gom, reachability
from rearrange2d.world import Pose2, Rect, collides, rect_at, rects_overlap

from conftest import goal_obj, obstacle, robot, scene, wall


def _gap_scene(blocker=True):
    """Vertical wall with a 1.6 tall gap at (5, 5); g1 must pass through."""
    bodies = [
        robot(2.0, 5.0),
        wall("wn", 5.0, 7.9, 0.4, 4.2),
        wall("ws", 5.0, 2.1, 0.4, 4.2),
        goal_obj("g1", 3.0, 5.0),
    ]
    if blocker:
        bodies.append(obstacle("b1", 5.0, 5.0))
    return scene(bodies, {"g1": Pose2(8.0, 5.0)})


def _two_lane_scene():
    """Wide corridor with two staggered blockers leaving opposite gaps."""
    bodies = [
        robot(2.0, 5.0),
        wall("wn", 5.0, 7.0, 8.0, 2.0),
        wall("ws", 5.0, 3.0, 8.0, 2.0),
        goal_obj("g1", 8.0, 5.0),
        obstacle("A", 4.0, 4.5),
        obstacle("B", 6.0, 5.5),
    ]
    return scene(bodies, {"g1": Pose2(8.5, 5.0)})


class TestTaskBuilders:
    def test_pick_task(self, simple_scene):
        spec = GridSpec.from_scene(simple_scene)
        t = gs.pick_task(simple_scene, "g1", Pose2(8.0, 2.0), 0, spec)
        assert t.kind == "pick"
        assert t.object_id == "g1"
        assert t.waypoints[0] == simple_scene.robot.pose
        assert t.waypoints[-1] == Pose2(8.0, 2.0)
        assert t.cells
        assert t.cells[0] in spec.cells_of_rect(rect_at(simple_scene.robot.pose, 0.4, 0.4))

    def test_place_task(self, simple_scene):
        spec = GridSpec.from_scene(simple_scene)
        wps = (Pose2(3.0, 3.0), Pose2(8.0, 3.0))
        t = gs.place_task(simple_scene, "g1", wps, spec)
        assert t.kind == "place"
        assert t.waypoints == wps
        start_cells = spec.cells_of_rect(rect_at(Pose2(3.0, 3.0), 0.6, 0.6))
        assert start_cells <= set(t.cells)


class TestFindColliding:
    def test_order_and_exclusions(self):
        sc = _two_lane_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.pick_task(sc, "g1", Pose2(7.5, 5.0), 0, spec)
        hits = gs.find_colliding(sc, t, spec)
        assert hits == ["A", "B"]

    def test_off_route_ignored(self, simple_scene):
        spec = GridSpec.from_scene(simple_scene)
        t = gs.place_task(simple_scene, "g1", (Pose2(3, 3), Pose2(3, 8)), spec)
        assert gs.find_colliding(simple_scene, t, spec) == []

    def test_task_object_never_reported(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        hits = gs.find_colliding(sc, t, spec)
        assert "g1" not in hits
        assert hits == ["b1"]


class TestTaskFeasible:
    def test_place_blocked_then_unblocked(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        assert not gs.task_feasible(sc, t, frozenset(), spec)
        assert gs.task_feasible(sc, t, frozenset({"b1"}), spec)

    def test_pick_uses_grid_detours(self):
        sc = _two_lane_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.pick_task(sc, "g1", Pose2(7.5, 5.0), 0, spec)
        # the staggered blockers leave a zigzag for the robot
        assert gs.task_feasible(sc, t, frozenset(), spec)

    def test_statics_block_regardless(self):
        sc = _gap_scene(blocker=False)
        sealed = scene(
            list(sc.bodies) + [wall("cap", 5.0, 5.0, 0.4, 1.8)],
            dict(sc.goals),
        )
        spec = GridSpec.from_scene(sealed)
        t = gs.place_task(sealed, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        assert not gs.task_feasible(sealed, t, frozenset(), spec)


class TestSelectCritical:
    def test_single_blocker(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        crit = gs.select_critical(sc, t, gs.find_colliding(sc, t, spec), spec=spec)
        assert crit == ("b1",)

    def test_skip_count_walks_the_subsets(self):
        sc = _two_lane_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.pick_task(sc, "g1", Pose2(7.5, 5.0), 0, spec)
        cols = gs.find_colliding(sc, t, spec)
        # a zigzag already exists, so every subset including the empty
        # detour case is feasible; subsets come in cardinality order
        assert gs.select_critical(sc, t, cols, 0, spec=spec) == ("A",)
        assert gs.select_critical(sc, t, cols, 1, spec=spec) == ("B",)
        assert gs.select_critical(sc, t, cols, 2, spec=spec) == ("A", "B")
        assert gs.select_critical(sc, t, cols, 3, spec=spec) is None

    def test_none_when_statics_block(self):
        sc = _gap_scene()
        sealed = scene(
            list(sc.bodies) + [wall("cap", 6.5, 5.0, 0.4, 10.0)],
            dict(sc.goals),
        )
        spec = GridSpec.from_scene(sealed)
        t = gs.place_task(sealed, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        cols = gs.find_colliding(sealed, t, spec)
        assert gs.select_critical(sealed, t, cols, spec=spec) is None

    def test_prefixes_beyond_cap(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        crit = gs.select_critical(
            sc, t, gs.find_colliding(sc, t, spec), spec=spec, cardinality_cap=0
        )
        assert crit == ("b1",)


class TestScores:
    def test_score_scene_counts_free_reachable_mass(self, empty_scene):
        spec = GridSpec.from_scene(empty_scene)
        gom = rasterize_gom(empty_scene, [(5, 5), (6, 5)], spec)
        reach = reachability(empty_scene, gom)
        # the border ring of cell centers puts the 0.4 robot outside the
        # workspace, so the reachable interior is 62x62; the two interior
        # task cells count 3.0 instead of 1.0
        assert gs.score_scene(gom, reach) == pytest.approx(62 * 62 + 2 * 2.0)

    def test_score_node(self):
        assert gs.score_node(10.0, 0, 25.0) == pytest.approx(35.0)
        assert gs.score_node(10.0, 3, 25.0) == pytest.approx(10.0 + 25.0 / 2.0)
        assert gs.score_node(10.0, 4, 25.0, literal=True) == pytest.approx(60.0)
        assert gs.score_node(10.0, 0, 25.0, literal=True) == pytest.approx(10.0)

    def test_weight_objects(self):
        sc = scene(
            [robot(1, 1), obstacle("big", 4, 4, w=1.0, h=1.0), obstacle("small", 7, 7, w=0.5, h=0.5)]
        )
        w = gs.weight_objects(sc, ("big", "small"))
        assert w["big"] == pytest.approx(1.0)
        assert w["small"] == pytest.approx(0.25)

    def test_decay_weight(self):
        w = {"a": 0.8, "b": 0.08}
        out = gs.decay_weight(w, "a")
        assert out["a"] == pytest.approx(0.4)
        assert w["a"] == 0.8
        floored = gs.decay_weight(w, "b")
        assert floored["b"] == pytest.approx(0.05)
        assert gs.decay_weight(w, "zz") == w


class TestGenRelocationPoints:
    def test_candidates_are_valid(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        pts = gs.gen_relocation_points(sc, "b1", 8, spec=spec)
        assert 0 < len(pts) <= 8
        goal_rect = rect_at(sc.goal_of("g1"), 0.6, 0.6)
        for p in pts:
            assert not collides(sc, "b1", p)
            assert not rects_overlap(rect_at(p, 0.6, 0.6), goal_rect)

    def test_ranked_by_clearance(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        from rearrange2d.grids import edt, occupancy_mask

        clearance = edt(occupancy_mask(sc, spec, exclude=frozenset({"b1"}))).cells
        pts = gs.gen_relocation_points(sc, "b1", 8, spec=spec)
        cls = [clearance[spec.cell_of(p)[1], spec.cell_of(p)[0]] for p in pts]
        assert all(a >= b - 1e-9 for a, b in zip(cls, cls[1:]))
        assert all(c >= 2.0 for c in cls)

    def test_avoid_cells(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        base = gs.gen_relocation_points(sc, "b1", 4, spec=spec)
        avoid = frozenset(
            c for p in base for c in spec.cells_of_rect(rect_at(p, 0.6, 0.6))
        )
        rest = gs.gen_relocation_points(sc, "b1", 4, spec=spec, avoid_cells=avoid)
        for p in rest:
            assert spec.cells_of_rect(rect_at(p, 0.6, 0.6)).isdisjoint(avoid)

    def test_window_retry_when_cramped(self):
        # slab right above the object starves the near window at high
        # clearance demands; the retry window reaches open floor
        sc = scene(
            [robot(1, 1), obstacle("o", 5, 5), wall("slab", 5, 6.75, 3.0, 2.5)]
        )
        spec = GridSpec.from_scene(sc)
        near = gs.gen_relocation_points(sc, "o", 6, spec=spec, clearance_min=10.0)
        assert near
        # every survivor sits outside the 1.5x window
        hx = 1.5 * 0.6
        assert all(
            abs(p.x - 5.0) > hx + 1e-9 or abs(p.y - 5.0) > hx + 1e-9 for p in near
        )

    def test_deterministic(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        a = gs.gen_relocation_points(sc, "b1", 6, spec=spec)
        b = gs.gen_relocation_points(sc, "b1", 6, spec=spec)
        assert a == b


class TestExpandCrit:
    def test_highest_count_wins(self):
        sc = scene([robot(1, 1), obstacle("a", 3, 3), obstacle("b", 5, 5)])
        assert gs.expand_crit(sc, (), {"a": 3, "b": 1}) == "a"

    def test_tie_prefers_larger_then_smaller_id(self):
        sc = scene(
            [robot(1, 1), obstacle("a", 3, 3, w=0.5, h=0.5), obstacle("b", 5, 5)]
        )
        assert gs.expand_crit(sc, (), {"a": 2, "b": 2}) == "b"
        sc2 = scene([robot(1, 1), obstacle("a", 3, 3), obstacle("b", 5, 5)])
        assert gs.expand_crit(sc2, (), {"a": 2, "b": 2}) == "a"

    def test_filters(self):
        sc = scene([robot(1, 1), obstacle("a", 3, 3), obstacle("b", 5, 5)])
        assert gs.expand_crit(sc, ("a",), {"a": 5, "b": 0}) is None
        assert gs.expand_crit(sc, (), {"gone": 4}) is None


class TestPlanRelocation:
    def test_moves_object(self, simple_scene):
        spec = GridSpec.from_scene(simple_scene)
        out = gs.plan_relocation(simple_scene, "b1", Pose2(6.0, 8.5), 0, spec=spec)
        assert out is not None
        plan, after = out
        assert plan.purpose == "relocation"
        assert plan.object_id == "b1"
        assert after.body("b1").pose == Pose2(6.0, 8.5)
        assert after.robot.pose == plan.pairs[-1].place.waypoints[-1]

    def test_unreachable_object_fails(self):
        cx = 5.0
        sc = scene(
            [
                robot(1, 1),
                obstacle("o", cx, cx),
                wall("wl", cx - 0.65, cx, 0.5, 1.8),
                wall("wr", cx + 0.65, cx, 0.5, 1.8),
                wall("wb", cx, cx - 0.65, 1.8, 0.5),
                wall("wt", cx, cx + 0.65, 1.8, 0.5),
            ]
        )
        assert gs.plan_relocation(sc, "o", Pose2(8, 8), 0) is None


class TestSearchRelocations:
    def test_unblocks_gap(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        res = gs.search_relocations(sc, t, seed=0, spec=spec)
        assert res.success
        assert res.plans
        assert res.trace["initial_crit"] == ["b1"]
        assert gs.task_feasible(res.scene, t, frozenset(), spec)
        # the blocker really moved off the gap
        assert res.scene.body("b1").pose != Pose2(5.0, 5.0)
        assert res.iterations >= 1

    def test_trivially_feasible(self, simple_scene):
        spec = GridSpec.from_scene(simple_scene)
        t = gs.place_task(simple_scene, "g1", (Pose2(3, 3), Pose2(3, 8)), spec)
        res = gs.search_relocations(simple_scene, t, seed=0, spec=spec)
        assert res.success
        assert res.plans == ()
        assert res.iterations == 0

    def test_statics_blocked_reports_reason(self):
        sc = _gap_scene(blocker=False)
        sealed = scene(
            list(sc.bodies) + [wall("cap", 5.0, 5.0, 0.4, 1.8)],
            dict(sc.goals),
        )
        spec = GridSpec.from_scene(sealed)
        t = gs.place_task(sealed, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        res = gs.search_relocations(sealed, t, seed=0, spec=spec)
        assert not res.success
        assert res.reason == "blocked by statics"

    def test_deterministic(self):
        sc = _gap_scene()
        spec = GridSpec.from_scene(sc)
        t = gs.place_task(sc, "g1", (Pose2(3, 5), Pose2(8, 5)), spec)
        r1 = gs.search_relocations(sc, t, seed=4, spec=spec)
        r2 = gs.search_relocations(sc, t, seed=4, spec=spec)
        assert r1.success == r2.success
        assert [p.object_id for p in r1.plans] == [p.object_id for p in r2.plans]
        assert r1.scene.body("b1").pose == r2.scene.body("b1").pose
