"""Motion planning: Bi-RRT paths, grasp configurations, pick-and-place chains.

The robot is a translating square that attaches flush to one of an
object's four faces; a pick is an attach event, a place a detach.  Object
transport legs follow the object's placement path; free relocations plan
with the compound (robot + object) footprint.
"""
from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, replace

from . import grids
from .grids import GridSpec
from .world import Pose2, Rect, Scene, footprint_collides, segment_hits_rect

SIDES = ("N", "E", "S", "W")
_SIDE_DIR = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}


def robot_parts(scene: Scene):
    rs = scene.robot.w
    return ((0.0, 0.0, rs, rs),)


def side_offset(side: str, ow: float, oh: float, rs: float) -> tuple[float, float]:
    """Robot-center offset from the object center for a flush side grasp."""
    dx, dy = _SIDE_DIR[side]
    return (dx * (ow + rs) / 2.0, dy * (oh + rs) / 2.0)


def contact_point(side: str, pose: Pose2, ow: float, oh: float) -> Pose2:
    dx, dy = _SIDE_DIR[side]
    return Pose2(pose.x + dx * ow / 2.0, pose.y + dy * oh / 2.0)


def compound_parts(side: str, ow: float, oh: float, rs: float):
    """Object + attached robot, in the object's reference frame."""
    rx, ry = side_offset(side, ow, oh, rs)
    return ((0.0, 0.0, ow, oh), (rx, ry, rs, rs))


@dataclass(frozen=True)
class Path:
    waypoints: tuple[Pose2, ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("a path needs at least 2 waypoints")

    @property
    def length(self) -> float:
        return sum(a.dist(b) for a, b in zip(self.waypoints, self.waypoints[1:]))


@dataclass(frozen=True)
class ObjectPath:
    object_id: str
    waypoints: tuple[Pose2, ...]

    @property
    def length(self) -> float:
        return sum(a.dist(b) for a, b in zip(self.waypoints, self.waypoints[1:]))


@dataclass(frozen=True)
class Subgoal:
    object_pose: Pose2
    contact_point: Pose2
    grasp_side: str
    # object poses the transport leg must pass through before object_pose
    # (the placement-path geometry between this subgoal and the previous one)
    via: tuple[Pose2, ...] = ()


@dataclass(frozen=True)
class PickPlacePair:
    pick: Path                      # robot alone, ends at the grasp pose
    place: Path                     # robot poses while rigidly attached
    object_waypoints: tuple[Pose2, ...]
    subgoal: Subgoal
    robot_offset: tuple[float, float]   # robot center minus object center


@dataclass(frozen=True)
class MotionPlan:
    object_id: str
    pairs: tuple[PickPlacePair, ...]
    purpose: str = "goal"           # "goal" or "relocation"

    @property
    def pnp_count(self) -> int:
        return len(self.pairs)

    @property
    def travel_distance(self) -> float:
        return sum(p.pick.length + p.place.length for p in self.pairs)


class SubgoalBlocked(Exception):
    """No grasp side admits a required transport leg."""

    def __init__(self, leg: int, pose: Pose2):
        super().__init__(f"no feasible grasp side for leg {leg} at ({pose.x:.3f}, {pose.y:.3f})")
        self.leg = leg
        self.pose = pose


class InfeasibleLeg(Exception):
    """A pick or place leg could not be planned in the current scene."""

    def __init__(self, kind: str, object_id: str, leg: int, side: str, start: Pose2, goal: Pose2):
        super().__init__(f"{kind} leg {leg} ({side}) infeasible for {object_id}")
        self.kind = kind
        self.object_id = object_id
        self.leg = leg
        self.side = side
        self.start = start
        self.goal = goal


def _normalize_parts(footprint):
    if isinstance(footprint, (tuple, list)) and len(footprint) == 2 and all(
        isinstance(v, (int, float)) for v in footprint
    ):
        return ((0.0, 0.0, float(footprint[0]), float(footprint[1])),)
    return tuple(tuple(p) for p in footprint)


def _inflated_obstacles(scene: Scene, parts, ignore):
    """Per part, each live obstacle inflated by the part's half extents.

    A part translating along a segment hits a body exactly when the part
    center segment, shifted by the part offset, enters the inflated rect.
    """
    out = []
    for dx, dy, w, h in parts:
        rects = []
        for body in scene.bodies:
            if body.id in ignore:
                continue
            r = body.rect()
            rects.append(Rect(r.xmin - w / 2, r.ymin - h / 2, r.xmax + w / 2, r.ymax + h / 2))
        out.append((dx, dy, rects))
    return out


def sweep_clear(scene: Scene, parts, poses, ignore=frozenset()) -> bool:
    """Exact swept collision test for a footprint along a polyline.

    Vertex poses are checked for containment and overlap; between
    vertices the swept-rectangle test is exact, so clearance does not
    depend on any sampling resolution.
    """
    pts = list(poses)
    if not pts:
        return True
    for p in pts:
        if footprint_collides(scene, parts, p, ignore):
            return False
    obstacles = _inflated_obstacles(scene, parts, ignore)
    for a, b in zip(pts, pts[1:]):
        if a.dist(b) < 1e-12:
            continue
        for dx, dy, rects in obstacles:
            a2 = Pose2(a.x + dx, a.y + dy)
            b2 = Pose2(b.x + dx, b.y + dy)
            for r in rects:
                if segment_hits_rect(a2, b2, r):
                    return False
    return True


def birrt(
    scene: Scene,
    footprint,
    start: Pose2,
    goal: Pose2,
    seed: int,
    max_iters: int = 5000,
    *,
    ignore=frozenset(),
    step: float | None = None,
    goal_bias: float = 0.1,
    shortcut_attempts: int = 100,
    spec: GridSpec | None = None,
    precheck: bool = True,
) -> Path | None:
    """Bi-directional RRT over a translating footprint, with shortcut smoothing.

    Deterministic for a fixed seed.  A grid connectivity precheck rejects
    disconnected queries quickly; if sampling exhausts max_iters while the
    grid still shows a route, the grid path is used as a fallback so narrow
    but feasible corridors do not read as infeasible.
    """
    parts = _normalize_parts(footprint)
    if step is None:
        step = 0.5 * scene.robot.w

    def blocked(p: Pose2) -> bool:
        return footprint_collides(scene, parts, p, ignore)

    obstacles = _inflated_obstacles(scene, parts, ignore)

    def edge_free(a: Pose2, b: Pose2) -> bool:
        # endpoints are vetted by blocked(); the segment test is exact, so
        # workspace containment follows from endpoint containment
        if blocked(b):
            return False
        for dx, dy, rects in obstacles:
            a2 = Pose2(a.x + dx, a.y + dy)
            b2 = Pose2(b.x + dx, b.y + dy)
            for r in rects:
                if segment_hits_rect(a2, b2, r):
                    return False
        return True

    if blocked(start) or blocked(goal):
        return None
    if start.dist(goal) < 1e-12:
        return Path((start, goal))
    if edge_free(start, goal):
        return Path((start, goal))

    free = None
    if precheck or spec is not None:
        if spec is None:
            spec = GridSpec.from_scene(scene)
        free = grids.fit_mask_parts(scene, spec, parts, ignore)
        if precheck and not grids.grid_connected(free, spec.cell_of(start), spec.cell_of(goal)):
            return None

    rng = random.Random(seed)
    ws = scene.workspace

    ta_nodes, ta_parent = [start], [-1]
    tb_nodes, tb_parent = [goal], [-1]

    def nearest(nodes, q):
        best, best_d = 0, nodes[0].dist(q)
        for i in range(1, len(nodes)):
            d = nodes[i].dist(q)
            if d < best_d:
                best, best_d = i, d
        return best

    def extend(nodes, parents, q):
        """One step from the nearest node toward q; returns new index or -1."""
        i = nearest(nodes, q)
        a = nodes[i]
        d = a.dist(q)
        if d < 1e-12:
            return -1
        t = min(1.0, step / d)
        b = Pose2(a.x + (q.x - a.x) * t, a.y + (q.y - a.y) * t)
        if not edge_free(a, b):
            return -1
        nodes.append(b)
        parents.append(i)
        return len(nodes) - 1

    def connect(nodes, parents, q):
        last = -1
        while True:
            i = extend(nodes, parents, q)
            if i < 0:
                return last
            last = i
            if nodes[i].dist(q) < 1e-9:
                return i

    bridge = None  # (index in ta, index in tb)
    swapped = False
    for _ in range(max_iters):
        if rng.random() < goal_bias:
            q = tb_nodes[0] if not swapped else ta_nodes[0]
        else:
            q = Pose2(rng.uniform(ws.xmin, ws.xmax), rng.uniform(ws.ymin, ws.ymax))
        a_nodes, a_par = (ta_nodes, ta_parent) if not swapped else (tb_nodes, tb_parent)
        b_nodes, b_par = (tb_nodes, tb_parent) if not swapped else (ta_nodes, ta_parent)
        i = extend(a_nodes, a_par, q)
        if i >= 0:
            j = connect(b_nodes, b_par, a_nodes[i])
            if j >= 0 and b_nodes[j].dist(a_nodes[i]) < 1e-9:
                bridge = (i, j) if not swapped else (j, i)
                break
        swapped = not swapped

    if bridge is None:
        # sampling failed; fall back to the grid route when one exists
        if free is None:
            return None
        cells = grids.grid_path(free, spec.cell_of(start), spec.cell_of(goal))
        if cells is None:
            return None
        wps = [start] + [spec.center(c) for c in cells] + [goal]
        dedup = [wps[0]]
        for p in wps[1:]:
            if p.dist(dedup[-1]) > 1e-12:
                dedup.append(p)
        if len(dedup) < 2:
            dedup.append(goal)
        for a, b in zip(dedup, dedup[1:]):
            if not edge_free(a, b):
                return None
        waypoints = dedup
    else:
        ia, ib = bridge
        left = []
        while ia >= 0:
            left.append(ta_nodes[ia])
            ia = ta_parent[ia]
        left.reverse()
        right = []
        while ib >= 0:
            right.append(tb_nodes[ib])
            ib = tb_parent[ib]
        waypoints = left + right
        if waypoints[-1] is not goal:
            waypoints[-1] = goal
        waypoints[0] = start

    for _ in range(shortcut_attempts):
        if len(waypoints) <= 2:
            break
        i = rng.randrange(0, len(waypoints) - 1)
        j = rng.randrange(0, len(waypoints) - 1)
        if abs(i - j) < 2:
            continue
        i, j = min(i, j), max(i, j)
        if edge_free(waypoints[i], waypoints[j]):
            waypoints = waypoints[: i + 1] + waypoints[j:]
    return Path(tuple(waypoints))


def grasp_pose(object_pose: Pose2, side: str, ow: float, oh: float, rs: float) -> Pose2:
    dx, dy = side_offset(side, ow, oh, rs)
    return Pose2(object_pose.x + dx, object_pose.y + dy)


def solve_pick_config(
    scene: Scene, object_id: str, preferred_side: str | None = None, ignore=frozenset()
) -> Subgoal | None:
    """Pick a grasp side whose flush robot pose is collision-free.

    Sides are tried in order of proximity to the robot's current position
    (the preferred side first when given); None when all four are blocked.
    """
    body = scene.body(object_id)
    robot = scene.robot
    order = sorted(
        SIDES,
        key=lambda s: (robot.pose.dist(grasp_pose(body.pose, s, body.w, body.h, robot.w)), s),
    )
    if preferred_side is not None:
        order = [preferred_side] + [s for s in order if s != preferred_side]
    for side in order:
        gp = grasp_pose(body.pose, side, body.w, body.h, robot.w)
        if not footprint_collides(scene, robot_parts(scene), gp, ignore | {robot.id}):
            return Subgoal(body.pose, contact_point(side, body.pose, body.w, body.h), side)
    return None


def plan_object_path(
    scene: Scene,
    object_id: str,
    target: Pose2,
    seed: int,
    *,
    max_iters: int = 5000,
    step: float | None = None,
    shortcut_attempts: int = 100,
    spec: GridSpec | None = None,
) -> ObjectPath | None:
    """Plan the object footprint alone against statics (auxiliary scene)."""
    if not scene.workspace.contains_point(target):
        return None
    body = scene.body(object_id)
    aux = scene.statics_only(keep=object_id)
    path = birrt(
        aux,
        (body.w, body.h),
        body.pose,
        target,
        seed,
        max_iters,
        ignore=frozenset({object_id, aux.robot.id}),
        step=step if step is not None else 0.5 * scene.robot.w,
        shortcut_attempts=shortcut_attempts,
        spec=spec,
    )
    if path is None:
        return None
    return ObjectPath(object_id, path.waypoints)


def _arc_interp(pts, arcs, s: float) -> Pose2:
    if s <= 0:
        return pts[0]
    if s >= arcs[-1]:
        return pts[-1]
    for i in range(1, len(arcs)):
        if s <= arcs[i]:
            seg = arcs[i] - arcs[i - 1]
            t = 0.0 if seg <= 0 else (s - arcs[i - 1]) / seg
            a, b = pts[i - 1], pts[i]
            return Pose2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
    return pts[-1]


def _leg_side_ok(scene: Scene, side: str, ow: float, oh: float, rs: float, poly, ignore) -> bool:
    gp = grasp_pose(poly[0], side, ow, oh, rs)
    if footprint_collides(scene, ((0.0, 0.0, rs, rs),), gp, ignore):
        return False
    return sweep_clear(scene, compound_parts(side, ow, oh, rs), poly, ignore)


def assign_leg_side(
    scene: Scene,
    poly,
    ow: float,
    oh: float,
    rs: float,
    prev_side: str | None,
    ignore=frozenset(),
) -> str | None:
    """Grasp side for one transport leg: keep the previous side when it
    still works, otherwise push from behind the dominant motion direction,
    otherwise any side that admits the sweep."""
    dx = poly[-1].x - poly[0].x
    dy = poly[-1].y - poly[0].y
    if abs(dx) >= abs(dy):
        push = "W" if dx >= 0 else "E"
    else:
        push = "S" if dy >= 0 else "N"
    order = []
    if prev_side is not None:
        order.append(prev_side)
    for s in (push,) + tuple(s for s in SIDES if s != push):
        if s not in order:
            order.append(s)
    for side in order:
        if _leg_side_ok(scene, side, ow, oh, rs, poly, ignore):
            return side
    return None


def select_subgoals(
    mu: ObjectPath,
    scene: Scene,
    *,
    kappa: float = 2.0,
    delta_min: float | None = None,
    delta_max: float | None = None,
    spec: GridSpec | None = None,
) -> list[Subgoal]:
    """Sample subgoals along mu, densely where static clearance is low.

    The first subgoal is the initial grasp at mu's start; the last is mu's
    endpoint.  Each subgoal carries the leg's grasp side and the mu
    geometry (via points) between it and its predecessor.
    """
    if not mu.waypoints:
        raise ValueError("empty object path")
    robot = scene.robot
    rs = robot.w
    if delta_min is None:
        delta_min = 0.5 * rs
    if delta_max is None:
        delta_max = 4.0 * rs
    if spec is None:
        spec = GridSpec.from_scene(scene)
    body = scene.body(mu.object_id)
    statics = scene.statics_only()
    occ = grids.occupancy_mask(statics, spec)
    clearance = grids.edt(occ).cells * spec.resolution

    pts = list(mu.waypoints)
    arcs = [0.0]
    for a, b in zip(pts, pts[1:]):
        arcs.append(arcs[-1] + a.dist(b))
    total = arcs[-1]

    stops = [0.0]
    cur = 0.0
    while cur < total - 1e-9:
        p = _arc_interp(pts, arcs, cur)
        cx, cy = spec.cell_of(p)
        step = max(delta_min, min(kappa * float(clearance[cy, cx]), delta_max))
        cur = min(cur + step, total)
        stops.append(cur)

    # grasp sides per leg, checked against statics only; movable blockage
    # is discovered at planning time and handed to the relocation search
    ignore = frozenset({mu.object_id, robot.id})
    subgoals: list[Subgoal] = []
    prev_side: str | None = None
    for k in range(len(stops)):
        pose = _arc_interp(pts, arcs, stops[k])
        if k == 0:
            if len(stops) > 1:
                via0 = tuple(pts[i] for i in range(len(pts)) if 1e-9 < arcs[i] < stops[1] - 1e-9)
                poly_next = [pose, *via0, _arc_interp(pts, arcs, stops[1])]
            else:
                poly_next = [pose, pose]
            side = assign_leg_side(statics, poly_next, body.w, body.h, rs, None, ignore)
            if side is None:
                raise SubgoalBlocked(0, pose)
            subgoals.append(Subgoal(pose, contact_point(side, pose, body.w, body.h), side))
            prev_side = side
            continue
        lo, hi = stops[k - 1], stops[k]
        via = tuple(
            pts[i] for i in range(len(pts)) if lo + 1e-9 < arcs[i] < hi - 1e-9
        )
        poly = [subgoals[-1].object_pose, *via, pose]
        side = assign_leg_side(statics, poly, body.w, body.h, rs, prev_side, ignore)
        if side is None:
            raise SubgoalBlocked(k, pose)
        subgoals.append(Subgoal(pose, contact_point(side, pose, body.w, body.h), side, via))
        prev_side = side
    if len(subgoals) == 1:
        # zero-length path: the single subgoal is the endpoint
        return subgoals
    return subgoals


def _local_cp(sg: Subgoal, body) -> tuple[float, float]:
    return (sg.contact_point.x - sg.object_pose.x, sg.contact_point.y - sg.object_pose.y)


def refine_subgoals(
    subgoals: list[Subgoal],
    scene: Scene,
    epsilon: float,
    *,
    object_id: str | None = None,
) -> list[Subgoal]:
    """Merge consecutive legs whose contact points (object frame) are
    within epsilon, when the combined sweep stays collision-free.

    Dropped subgoals become via points of the surviving leg, so the
    object still follows the same geometry but is released fewer times.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if len(subgoals) <= 2:
        return list(subgoals)
    if object_id is None:
        # infer from any movable at the first subgoal pose
        for b in scene.movables:
            if b.pose.dist(subgoals[0].object_pose) < 1e-9:
                object_id = b.id
                break
    if object_id is None:
        raise ValueError("cannot infer the transported object")
    body = scene.body(object_id)
    rs = scene.robot.w
    ignore = frozenset({object_id, scene.robot.id})

    out = list(subgoals)
    merged = True
    while merged:
        merged = False
        for k in range(1, len(out) - 1):
            a, b = out[k], out[k + 1]
            ca, cb = _local_cp(a, body), _local_cp(b, body)
            if math.hypot(ca[0] - cb[0], ca[1] - cb[1]) >= epsilon:
                continue
            poly = [out[k - 1].object_pose, *a.via, a.object_pose, *b.via, b.object_pose]
            if not _leg_side_ok(scene, b.grasp_side, body.w, body.h, rs, poly, ignore):
                continue
            out[k + 1] = replace(b, via=a.via + (a.object_pose,) + b.via)
            del out[k]
            merged = True
            break
    return out


def plan_pick_place(
    scene: Scene,
    object_id: str,
    subgoals: list[Subgoal],
    robot_start: Pose2 | None = None,
    seed: int = 0,
    *,
    max_iters: int = 5000,
    shortcut_attempts: int = 100,
    spec: GridSpec | None = None,
    purpose: str = "goal",
) -> tuple[MotionPlan, Scene]:
    """Chain pick and place legs through the subgoal list.

    Raises InfeasibleLeg when a leg cannot be planned with any usable
    grasp side (the relocation search consumes that), SubgoalBlocked when
    even the statics forbid every side.
    """
    if not subgoals:
        raise ValueError("no subgoals")
    body = scene.body(object_id)
    robot = scene.robot
    rs = robot.w
    if robot_start is None:
        robot_start = robot.pose
    cur_scene = scene
    cur_robot = robot_start
    pairs: list[PickPlacePair] = []

    for k in range(1, len(subgoals)):
        prev, cur = subgoals[k - 1], subgoals[k]
        poly_obj = (prev.object_pose, *cur.via, cur.object_pose)
        # side preference: the planned side, then the side already grasped
        sides = [cur.grasp_side]
        if pairs and pairs[-1].subgoal.grasp_side not in sides:
            sides.append(pairs[-1].subgoal.grasp_side)
        for s in SIDES:
            if s not in sides:
                sides.append(s)

        chosen = None
        last_fail = None
        for side in sides:
            off = side_offset(side, body.w, body.h, rs)
            gp = Pose2(prev.object_pose.x + off[0], prev.object_pose.y + off[1])
            if footprint_collides(cur_scene, robot_parts(cur_scene), gp, frozenset({robot.id})):
                last_fail = ("pick", side, cur_robot, gp)
                continue
            # settle the transport route first: a hopeless place leg should
            # not cost a full pick plan (the compound query fast-fails on
            # its grid precheck when a blocker cuts the route)
            parts = compound_parts(side, body.w, body.h, rs)
            ignore = frozenset({object_id, robot.id})
            if sweep_clear(cur_scene, parts, poly_obj, ignore):
                obj_wps = poly_obj
            elif cur.via:
                last_fail = ("place", side, prev.object_pose, cur.object_pose)
                continue
            else:
                free_leg = birrt(
                    cur_scene,
                    parts,
                    prev.object_pose,
                    cur.object_pose,
                    _mix_seed(seed, k, side, 1),
                    max_iters,
                    ignore=ignore,
                    step=0.5 * rs,
                    shortcut_attempts=shortcut_attempts,
                    spec=spec,
                )
                if free_leg is None:
                    last_fail = ("place", side, prev.object_pose, cur.object_pose)
                    continue
                obj_wps = free_leg.waypoints
            pick = birrt(
                cur_scene,
                (rs, rs),
                cur_robot,
                gp,
                _mix_seed(seed, k, side, 0),
                max_iters,
                ignore=frozenset({robot.id}),
                shortcut_attempts=shortcut_attempts,
                spec=spec,
            )
            if pick is None:
                last_fail = ("pick", side, cur_robot, gp)
                continue
            chosen = (side, off, gp, pick, obj_wps)
            break

        if chosen is None:
            kind, side, start, goal = last_fail if last_fail else ("pick", cur.grasp_side, cur_robot, prev.object_pose)
            raise InfeasibleLeg(kind, object_id, k, side, start, goal)

        side, off, gp, pick, obj_wps = chosen
        place_wps = (gp,) + tuple(Pose2(p.x + off[0], p.y + off[1]) for p in obj_wps[1:])
        sg = cur if side == cur.grasp_side else replace(
            cur, grasp_side=side, contact_point=contact_point(side, cur.object_pose, body.w, body.h)
        )
        pairs.append(
            PickPlacePair(
                pick=pick,
                place=Path(place_wps),
                object_waypoints=tuple(obj_wps),
                subgoal=sg,
                robot_offset=off,
            )
        )
        cur_robot = place_wps[-1]
        cur_scene = cur_scene.with_pose(object_id, cur.object_pose).with_pose(robot.id, cur_robot)

    return MotionPlan(object_id, tuple(pairs), purpose), cur_scene


def _mix_seed(seed: int, *parts) -> int:
    tag = f"{seed}:" + ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(tag.encode()).digest()[:4], "big")
