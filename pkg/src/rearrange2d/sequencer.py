"""Placement ordering: dependency graph, cycle resolution, sequence search.

Goal objects constrain each other two ways: an object sitting on another's
route should move first (weak), and an object whose route crosses another's
goal must move before that goal is filled (strong).  Cycles among those
constraints are broken by discarding the most contested edges, then the
remaining precedence feeds an open-path sequencing problem whose costs can
be lazily upgraded from straight-line to planned path lengths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import motion
from .grids import GridSpec
from .world import EPS, Pose2, Rect, Scene, rect_at, segment_hits_rect
from .motion import ObjectPath, _mix_seed

WEAK = "weak"
STRONG = "strong"


class SequenceInfeasible(Exception):
    """A goal object has no statics-only route to its goal."""


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    strength: str   # WEAK or STRONG; src is ordered before dst


@dataclass(frozen=True)
class Cycle:
    vertices: tuple[str, ...]           # rotation fixed: smallest vertex first
    edges: tuple[Edge, ...]             # all parallel edges along the hops


@dataclass(frozen=True)
class CycleLedger:
    cycles: tuple[Cycle, ...]
    truncated: bool = False


@dataclass
class DependencyGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    paths: dict[str, ObjectPath] = field(default_factory=dict)

    def without_edge(self, e: Edge) -> "DependencyGraph":
        return DependencyGraph(self.vertices, tuple(x for x in self.edges if x != e), self.paths)


def path_crosses_rect(mu: ObjectPath, footprint_rect: Rect, w: float, h: float) -> bool:
    """Does a w x h footprint moving along mu overlap footprint_rect?

    Equivalent to testing mu's centerline against the rect inflated by the
    footprint half-extents (swept-rectangle vs rectangle).
    """
    inflated = Rect(
        footprint_rect.xmin - w / 2.0,
        footprint_rect.ymin - h / 2.0,
        footprint_rect.xmax + w / 2.0,
        footprint_rect.ymax + h / 2.0,
    )
    pts = mu.waypoints
    if len(pts) == 1:
        p = pts[0]
        return (
            inflated.xmin + EPS < p.x < inflated.xmax - EPS
            and inflated.ymin + EPS < p.y < inflated.ymax - EPS
        )
    return any(segment_hits_rect(a, b, inflated) for a, b in zip(pts, pts[1:]))


def build_dependency_graph(
    scene: Scene,
    *,
    unplaced=None,
    tol: float | None = None,
    seed: int = 0,
    spec: GridSpec | None = None,
    rrt_max_iters: int = 5000,
) -> DependencyGraph:
    """Precedence edges among the goal objects still away from their goals.

    Each object's statics-only route mu is planned once; weak edge j -> i
    when mu_i crosses j's current footprint, strong edge i -> j when mu_i
    crosses j's goal footprint.  Raises SequenceInfeasible when some object
    has no route even with every movable removed.
    """
    from .world import verify_placements, default_tolerance

    if tol is None:
        tol = default_tolerance(scene)
    if unplaced is None:
        placed = verify_placements(scene, tol)
        unplaced = tuple(sorted(set(scene.goals) - placed))
    else:
        unplaced = tuple(sorted(unplaced))

    paths: dict[str, ObjectPath] = {}
    for oid in unplaced:
        mu = motion.plan_object_path(
            scene, oid, scene.goal_of(oid), _mix_seed(seed, "mu", oid),
            max_iters=rrt_max_iters, spec=spec,
        )
        if mu is None:
            raise SequenceInfeasible(f"{oid} has no route to its goal past the walls")
        paths[oid] = mu

    edges: set[Edge] = set()
    for oi in unplaced:
        bi = scene.body(oi)
        mu = paths[oi]
        for oj in unplaced:
            if oj == oi:
                continue
            bj = scene.body(oj)
            if path_crosses_rect(mu, bj.rect(), bi.w, bi.h):
                edges.add(Edge(oj, oi, WEAK))
            goal_rect = rect_at(scene.goal_of(oj), bj.w, bj.h)
            if path_crosses_rect(mu, goal_rect, bi.w, bi.h):
                edges.add(Edge(oi, oj, STRONG))
    return DependencyGraph(unplaced, tuple(sorted(edges)), paths)


def enumerate_cycles(graph: DependencyGraph, cap: int = 10000) -> CycleLedger:
    """All simple directed cycles, each reported once with its smallest
    vertex first.  Parallel edges between the same ordered pair collapse
    for enumeration but are all attached to the reported cycle."""
    pair_edges: dict[tuple[str, str], list[Edge]] = {}
    for e in graph.edges:
        pair_edges.setdefault((e.src, e.dst), []).append(e)
    adj: dict[str, list[str]] = {v: [] for v in graph.vertices}
    for (s, d) in sorted(pair_edges):
        if s in adj and d in adj:
            adj[s].append(d)

    cycles: list[Cycle] = []
    truncated = False

    def attach(path: tuple[str, ...]) -> Cycle:
        es: list[Edge] = []
        for k in range(len(path)):
            es.extend(pair_edges[(path[k], path[(k + 1) % len(path)])])
        return Cycle(path, tuple(es))

    for s in graph.vertices:
        if truncated:
            break
        stack = [(s, iter(adj[s]))]
        onpath = {s}
        path = [s]
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                if w == s:
                    cycles.append(attach(tuple(path)))
                    if len(cycles) >= cap:
                        truncated = True
                        stack = []
                        advanced = True
                        break
                    continue
                if w <= s or w in onpath:
                    continue
                stack.append((w, iter(adj[w])))
                onpath.add(w)
                path.append(w)
                advanced = True
                break
            if not advanced:
                stack.pop()
                onpath.discard(v)
                if path:
                    path.pop()
    return CycleLedger(tuple(cycles), truncated)


def topo_order(vertices, edges) -> list[str] | None:
    """Kahn's algorithm with lexicographic tie-breaking; None if cyclic."""
    indeg = {v: 0 for v in vertices}
    out: dict[str, list[str]] = {v: [] for v in vertices}
    for e in edges:
        out[e.src].append(e.dst)
        indeg[e.dst] += 1
    ready = sorted(v for v in vertices if indeg[v] == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        changed = False
        for w in sorted(out[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
                changed = True
        if changed:
            ready.sort()
    return order if len(order) == len(vertices) else None


@dataclass(frozen=True)
class BreakResult:
    graph: DependencyGraph
    removed: tuple[Edge, ...]
    ledgers: tuple[CycleLedger, ...]


def break_cycles(graph: DependencyGraph, cap: int = 10000, greedy: bool = False) -> BreakResult:
    """Delete edges until acyclic, most-contested first.

    Normally cycle frequencies are recomputed after each removal; greedy
    mode keeps the frequencies from the first enumeration (cheaper, can
    remove more edges than needed).  Ties prefer weak edges, then sources
    shedding the least net out-degree, then lexicographic order.
    """
    cur = graph
    removed: list[Edge] = []
    ledgers: list[CycleLedger] = []

    def pick(freq: dict[Edge, int], edges) -> Edge:
        out_deg: dict[str, int] = {}
        in_deg: dict[str, int] = {}
        for e in edges:
            out_deg[e.src] = out_deg.get(e.src, 0) + 1
            in_deg[e.dst] = in_deg.get(e.dst, 0) + 1
        return min(
            (e for e in freq),
            key=lambda e: (
                -freq[e],
                0 if e.strength == WEAK else 1,
                out_deg.get(e.src, 0) - in_deg.get(e.src, 0),
                e,
            ),
        )

    if greedy:
        ledger = enumerate_cycles(cur, cap)
        ledgers.append(ledger)
        freq: dict[Edge, int] = {}
        for c in ledger.cycles:
            for e in c.edges:
                freq[e] = freq.get(e, 0) + 1
        while topo_order(cur.vertices, cur.edges) is None:
            live = {e: f for e, f in freq.items() if e in cur.edges}
            if not live:
                # stale frequencies exhausted (truncation); fall back
                rest = break_cycles(cur, cap, greedy=False)
                return BreakResult(
                    rest.graph,
                    tuple(removed) + rest.removed,
                    tuple(ledgers) + rest.ledgers,
                )
            e = pick(live, cur.edges)
            cur = cur.without_edge(e)
            removed.append(e)
        return BreakResult(cur, tuple(removed), tuple(ledgers))

    while True:
        ledger = enumerate_cycles(cur, cap)
        ledgers.append(ledger)
        if not ledger.cycles:
            if topo_order(cur.vertices, cur.edges) is None:
                raise RuntimeError("cycle enumeration missed a cycle")
            return BreakResult(cur, tuple(removed), tuple(ledgers))
        freq = {}
        for c in ledger.cycles:
            for e in c.edges:
                freq[e] = freq.get(e, 0) + 1
        e = pick(freq, cur.edges)
        cur = cur.without_edge(e)
        removed.append(e)


def to_dot(graph: DependencyGraph) -> str:
    lines = ["digraph precedence {"]
    for v in graph.vertices:
        lines.append(f'  "{v}";')
    for e in graph.edges:
        style = "dashed" if e.strength == WEAK else "solid"
        lines.append(f'  "{e.src}" -> "{e.dst}" [style={style}, label="{e.strength}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class CostMatrix:
    """Open-path costs: start[j] from the robot's pose to object j, and
    between[i, j] from i's goal to object j.  exact flags mark entries
    already upgraded to planned path lengths."""

    ids: tuple[str, ...]
    start: np.ndarray
    between: np.ndarray
    start_exact: np.ndarray
    between_exact: np.ndarray

    @classmethod
    def euclidean(cls, scene: Scene, ids) -> "CostMatrix":
        ids = tuple(ids)
        n = len(ids)
        start = np.zeros(n)
        between = np.full((n, n), math.inf)
        robot = scene.robot
        for j, oj in enumerate(ids):
            start[j] = robot.pose.dist(scene.body(oj).pose)
            for i, oi in enumerate(ids):
                if i != j:
                    between[i, j] = scene.goal_of(oi).dist(scene.body(oj).pose)
        return cls(ids, start, between, np.zeros(n, dtype=bool), np.zeros((n, n), dtype=bool))

    def order_cost(self, order) -> float:
        idx = {o: k for k, o in enumerate(self.ids)}
        seq = [idx[o] for o in order]
        if not seq:
            return 0.0
        total = float(self.start[seq[0]])
        for a, b in zip(seq, seq[1:]):
            total += float(self.between[a, b])
        return total


@dataclass(frozen=True)
class PlacementSequence:
    order: tuple[str, ...]
    cost: float


def _respects(order, pred: dict[int, set[int]]) -> bool:
    seen: set[int] = set()
    for v in order:
        if not pred[v] <= seen:
            return False
        seen.add(v)
    return True


def solve_patsp(
    costs: CostMatrix,
    precedence=(),
    *,
    exact_limit: int = 12,
    warm=None,
) -> PlacementSequence:
    """Minimum-cost visit order starting from the robot, no return leg,
    honoring before/after pairs.  Exact branch and bound up to exact_limit
    objects, greedy insertion with local improvement beyond."""
    ids = costs.ids
    n = len(ids)
    if n == 0:
        return PlacementSequence((), 0.0)
    idx = {o: k for k, o in enumerate(ids)}
    pred: dict[int, set[int]] = {k: set() for k in range(n)}
    for a, b in precedence:
        if a in idx and b in idx:
            pred[idx[b]].add(idx[a])
    if topo_order(ids, tuple(Edge(ids[a], ids[b], WEAK) for b in pred for a in pred[b])) is None:
        raise ValueError("precedence constraints are cyclic")

    start = costs.start
    between = costs.between

    def greedy() -> list[int]:
        left = set(range(n))
        seq: list[int] = []
        cur = -1
        while left:
            ready = sorted(j for j in left if pred[j] <= set(seq))
            if cur < 0:
                j = min(ready, key=lambda j: (start[j], j))
            else:
                j = min(ready, key=lambda j: (between[cur, j], j))
            seq.append(j)
            left.discard(j)
            cur = j
        return seq

    def seq_cost(seq) -> float:
        c = float(start[seq[0]])
        for a, b in zip(seq, seq[1:]):
            c += float(between[a, b])
        return c

    best = None
    if warm is not None:
        w = [idx[o] for o in warm if o in idx]
        if len(w) == n and _respects(w, pred):
            best = (seq_cost(w), w)
    g = greedy()
    if best is None or seq_cost(g) < best[0]:
        best = (seq_cost(g), g)

    if n <= exact_limit:
        # admissible bound: every unvisited object still needs one incoming leg
        min_in = np.zeros(n)
        for j in range(n):
            cands = [start[j]] + [between[i, j] for i in range(n) if i != j]
            finite = [c for c in cands if math.isfinite(c)]
            min_in[j] = min(finite) if finite else 0.0

        best_cost, best_seq = best

        def dfs(seq: list[int], used: set[int], cost: float):
            nonlocal best_cost, best_seq
            if len(seq) == n:
                if cost < best_cost - 1e-12:
                    best_cost, best_seq = cost, list(seq)
                return
            bound = cost + sum(min_in[j] for j in range(n) if j not in used)
            if bound >= best_cost - 1e-12:
                return
            cur = seq[-1] if seq else -1
            ready = [j for j in range(n) if j not in used and pred[j] <= used]
            step = (lambda j: float(start[j])) if cur < 0 else (lambda j: float(between[cur, j]))
            for j in sorted(ready, key=lambda j: (step(j), j)):
                seq.append(j)
                used.add(j)
                dfs(seq, used, cost + step(j))
                used.discard(j)
                seq.pop()

        dfs([], set(), 0.0)
        best = (best_cost, best_seq)
    else:
        cost, seq = best
        improved = True
        while improved:
            improved = False
            # relocate moves keep precedence easy to re-check
            for i in range(n):
                for k in range(n):
                    if k == i:
                        continue
                    cand = seq[:i] + seq[i + 1 :]
                    cand = cand[:k] + [seq[i]] + cand[k:]
                    if not _respects(cand, pred):
                        continue
                    c = seq_cost(cand)
                    if c < cost - 1e-9:
                        cost, seq = c, cand
                        improved = True
                        break
                if improved:
                    break
        best = (cost, seq)

    cost, seq = best
    return PlacementSequence(tuple(ids[j] for j in seq), float(cost))


@dataclass
class SequencerCaches:
    lengths: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    failures: int = 0


def _leg_key(a: Pose2, b: Pose2) -> tuple:
    return (round(a.x, 9), round(a.y, 9), round(b.x, 9), round(b.y, 9))


def lazy_refine(
    costs: CostMatrix,
    scene: Scene,
    seed: int,
    *,
    precedence=(),
    rounds: int = 5,
    spec: GridSpec | None = None,
    caches: SequencerCaches | None = None,
    rrt_max_iters: int = 5000,
) -> tuple[PlacementSequence, int]:
    """Upgrade the incumbent order's legs to planned robot path lengths,
    re-solving after each batch, until the incumbent stops changing or the
    round budget runs out.

    Planned lengths can only exceed the straight-line seeds, so once an
    incumbent survives with every leg upgraded it is optimal under costs
    at least as large as any competitor's true costs.
    """
    if caches is None:
        caches = SequencerCaches()
    statics = scene.statics_only()
    robot = scene.robot
    rparts = (robot.w, robot.h)
    idx = {o: k for k, o in enumerate(costs.ids)}

    def planned_length(a: Pose2, b: Pose2) -> float | None:
        key = _leg_key(a, b)
        if key in caches.lengths:
            caches.hits += 1
            return caches.lengths[key]
        caches.misses += 1
        path = motion.birrt(
            statics,
            rparts,
            a,
            b,
            _mix_seed(seed, "lazy", key),
            rrt_max_iters,
            ignore=frozenset({robot.id}),
            spec=spec,
        )
        length = None if path is None else path.length
        caches.lengths[key] = length
        return length

    incumbent = solve_patsp(costs, precedence)
    used_rounds = 0
    for _ in range(rounds):
        used_rounds += 1
        changed = False
        legs = []
        if incumbent.order:
            j0 = idx[incumbent.order[0]]
            if not costs.start_exact[j0]:
                legs.append(("start", j0, robot.pose, scene.body(incumbent.order[0]).pose))
            for oa, ob in zip(incumbent.order, incumbent.order[1:]):
                i, j = idx[oa], idx[ob]
                if not costs.between_exact[i, j]:
                    legs.append(("between", (i, j), scene.goal_of(oa), scene.body(ob).pose))
        for kind, where, a, b in legs:
            length = planned_length(a, b)
            if length is None:
                caches.failures += 1
                length = a.dist(b)  # keep the lower bound, mark settled
            if kind == "start":
                costs.start[where] = length
                costs.start_exact[where] = True
            else:
                costs.between[where] = length
                costs.between_exact[where] = True
            changed = True
        if not changed:
            break
        incumbent = solve_patsp(costs, precedence, warm=incumbent.order)
    return PlacementSequence(incumbent.order, costs.order_cost(incumbent.order)), used_rounds
