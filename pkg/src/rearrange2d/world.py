"""Geometric world model: rectangular bodies in a planar workspace.

All bodies are axis-aligned rectangles addressed by center pose.  The robot
is a translating square; rotation is not modeled, so every collision test
reduces to interval arithmetic on the two axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

# Interiors closer than this are considered overlapping; flush contact
# (shared edge) is not a collision.
EPS = 1e-9

KIND_WALL = "static-wall"
KIND_OBSTACLE = "movable-obstacle"
KIND_GOAL = "goal-object"
KIND_ROBOT = "robot"

MOVABLE_KINDS = (KIND_OBSTACLE, KIND_GOAL)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float

    def dist(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its corner bounds."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains_rect(self, other: "Rect") -> bool:
        return (
            other.xmin >= self.xmin - EPS
            and other.ymin >= self.ymin - EPS
            and other.xmax <= self.xmax + EPS
            and other.ymax <= self.ymax + EPS
        )

    def contains_point(self, p: Pose2) -> bool:
        return self.xmin - EPS <= p.x <= self.xmax + EPS and self.ymin - EPS <= p.y <= self.ymax + EPS


def rect_at(pose: Pose2, w: float, h: float) -> Rect:
    return Rect(pose.x - w / 2.0, pose.y - h / 2.0, pose.x + w / 2.0, pose.y + h / 2.0)


def rects_overlap(a: Rect, b: Rect) -> bool:
    """True iff the interiors of a and b overlap (flush contact excluded)."""
    return (
        min(a.xmax, b.xmax) - max(a.xmin, b.xmin) > EPS
        and min(a.ymax, b.ymax) - max(a.ymin, b.ymin) > EPS
    )


@dataclass(frozen=True)
class Body:
    id: str
    w: float
    h: float
    kind: str
    pose: Pose2

    def rect(self, pose: Pose2 | None = None) -> Rect:
        return rect_at(pose if pose is not None else self.pose, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def min_side(self) -> float:
        return min(self.w, self.h)


class SceneError(ValueError):
    """Raised for malformed scenes or queries about unknown bodies."""


@dataclass(frozen=True)
class Scene:
    """Immutable world state.  Successor states are built, never mutated."""

    workspace: Rect
    bodies: tuple[Body, ...]
    goals: dict[str, Pose2] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        ids = [b.id for b in self.bodies]
        if len(set(ids)) != len(ids):
            raise SceneError("duplicate body ids")
        if sum(1 for b in self.bodies if b.kind == KIND_ROBOT) != 1:
            raise SceneError("scene must contain exactly one robot")
        for b in self.bodies:
            if b.w <= 0 or b.h <= 0:
                raise SceneError(f"body {b.id!r} has non-positive extent")
        by_id = {b.id: b for b in self.bodies}
        for gid in self.goals:
            if gid not in by_id or by_id[gid].kind != KIND_GOAL:
                raise SceneError(f"goal assigned to non-goal body {gid!r}")
        object.__setattr__(self, "_by_id", by_id)

    # -- lookups ----------------------------------------------------------

    def body(self, body_id: str) -> Body:
        try:
            return self._by_id[body_id]
        except KeyError:
            raise SceneError(f"unknown body id {body_id!r}") from None

    def has_body(self, body_id: str) -> bool:
        return body_id in self._by_id

    @property
    def robot(self) -> Body:
        for b in self.bodies:
            if b.kind == KIND_ROBOT:
                return b
        raise SceneError("no robot in scene")

    @property
    def walls(self) -> tuple[Body, ...]:
        return tuple(b for b in self.bodies if b.kind == KIND_WALL)

    @property
    def movables(self) -> tuple[Body, ...]:
        return tuple(b for b in self.bodies if b.kind in MOVABLE_KINDS)

    def goal_of(self, body_id: str) -> Pose2:
        try:
            return self.goals[body_id]
        except KeyError:
            raise SceneError(f"no goal for body {body_id!r}") from None

    # -- successors -------------------------------------------------------

    def with_pose(self, body_id: str, pose: Pose2) -> "Scene":
        self.body(body_id)
        bodies = tuple(replace(b, pose=pose) if b.id == body_id else b for b in self.bodies)
        return Scene(self.workspace, bodies, self.goals, self.rng_seed)

    def without(self, ids) -> "Scene":
        drop = set(ids)
        if KIND_ROBOT in {self.body(i).kind for i in drop}:
            raise SceneError("cannot remove the robot")
        bodies = tuple(b for b in self.bodies if b.id not in drop)
        goals = {k: v for k, v in self.goals.items() if k not in drop}
        return Scene(self.workspace, bodies, goals, self.rng_seed)

    def statics_only(self, keep: str | None = None) -> "Scene":
        """Walls and the robot only; optionally keep one movable body."""
        bodies = tuple(
            b for b in self.bodies if b.kind == KIND_WALL or b.kind == KIND_ROBOT or b.id == keep
        )
        goals = {k: v for k, v in self.goals.items() if k == keep}
        return Scene(self.workspace, bodies, goals, self.rng_seed)

    def validate(self) -> list[str]:
        """Scene-invariant audit; returns a list of violation messages."""
        problems = []
        for b in self.bodies:
            if not self.workspace.contains_rect(b.rect()):
                problems.append(f"{b.id} outside workspace")
        non_robot = [b for b in self.bodies if b.kind != KIND_ROBOT]
        for i, a in enumerate(non_robot):
            for b in non_robot[i + 1 :]:
                if rects_overlap(a.rect(), b.rect()):
                    problems.append(f"{a.id} overlaps {b.id}")
        for gid, gp in self.goals.items():
            body = self.body(gid)
            if not self.workspace.contains_rect(rect_at(gp, body.w, body.h)):
                problems.append(f"goal of {gid} outside workspace")
        return problems


def collides(scene: Scene, body_id: str, pose: Pose2, ignore=frozenset()) -> bool:
    """Does body_id placed at pose hit the boundary, a wall, or another body?

    The queried body itself is never counted; ids in ignore are skipped
    (walls cannot be ignored).
    """
    body = scene.body(body_id)
    r = rect_at(pose, body.w, body.h)
    if not scene.workspace.contains_rect(r):
        return True
    for other in scene.bodies:
        if other.id == body_id:
            continue
        if other.kind != KIND_WALL and other.id in ignore:
            continue
        if rects_overlap(r, other.rect()):
            return True
    return False


def footprint_collides(scene: Scene, parts, pose: Pose2, ignore=frozenset()) -> bool:
    """Collision test for a rigid multi-rectangle footprint at a reference pose.

    parts: iterable of (dx, dy, w, h) offsets relative to the reference pose.
    """
    for dx, dy, w, h in parts:
        r = rect_at(Pose2(pose.x + dx, pose.y + dy), w, h)
        if not scene.workspace.contains_rect(r):
            return True
        for other in scene.bodies:
            if other.id in ignore:
                continue
            if rects_overlap(r, other.rect()):
                return True
    return False


def segment_hits_rect(a: Pose2, b: Pose2, r: Rect) -> bool:
    """Does the segment a-b pass through the rect's interior?

    Liang-Barsky clip; boundary contact does not count as a hit, matching
    the open-interval overlap convention used everywhere else.
    """
    t0, t1 = 0.0, 1.0
    dx, dy = b.x - a.x, b.y - a.y
    for p, q in (
        (-dx, a.x - r.xmin),
        (dx, r.xmax - a.x),
        (-dy, a.y - r.ymin),
        (dy, r.ymax - a.y),
    ):
        if abs(p) < 1e-12:
            if q <= EPS:
                return False
        else:
            t = q / p
            if p < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
    return t1 - t0 > 1e-9


def verify_placements(scene: Scene, tol: float) -> set[str]:
    """Goal objects currently within tol (center distance) of their goal."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    placed = set()
    for gid, goal in scene.goals.items():
        if scene.body(gid).pose.dist(goal) <= tol:
            placed.add(gid)
    return placed


def default_tolerance(scene: Scene) -> float:
    """Placement tolerance: a quarter of the smallest movable side."""
    sides = [b.min_side for b in scene.movables]
    if not sides:
        return 0.1
    return 0.25 * min(sides)
