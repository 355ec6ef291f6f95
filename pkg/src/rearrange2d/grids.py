"""Raster transforms over the scene: occupancy, reachability, clearance.

The workspace is discretized into a fixed grid (64x64 by default).  Arrays
are indexed [iy, ix]; cell sets use (ix, iy) tuples.  Cell values follow
the convention: occupancy 0 = blocked, alpha_m = free, beta_m = task cell;
reachability alpha_r = reachable, beta_r = not.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .world import EPS, Pose2, Rect, Scene, KIND_ROBOT

ALPHA_M = 1.0
BETA_M = 3.0
ALPHA_R = 1.0
BETA_R = 0.0

DEFAULT_GRID_N = 64


@dataclass(frozen=True)
class GridSpec:
    origin: Pose2          # workspace min corner
    nx: int
    ny: int
    cell_w: float
    cell_h: float

    @classmethod
    def from_scene(cls, scene: Scene, n: int = DEFAULT_GRID_N) -> "GridSpec":
        ws = scene.workspace
        return cls(Pose2(ws.xmin, ws.ymin), n, n, ws.width / n, ws.height / n)

    @property
    def resolution(self) -> float:
        return max(self.cell_w, self.cell_h)

    def cell_of(self, p: Pose2) -> tuple[int, int]:
        ix = int((p.x - self.origin.x) / self.cell_w)
        iy = int((p.y - self.origin.y) / self.cell_h)
        return (min(max(ix, 0), self.nx - 1), min(max(iy, 0), self.ny - 1))

    def center(self, cell: tuple[int, int]) -> Pose2:
        ix, iy = cell
        return Pose2(
            self.origin.x + (ix + 0.5) * self.cell_w,
            self.origin.y + (iy + 0.5) * self.cell_h,
        )

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.nx and 0 <= cell[1] < self.ny

    def rect_cells(self, r: Rect) -> tuple[int, int, int, int]:
        """Inclusive (ix0, ix1, iy0, iy1) of cells whose interior overlaps r.

        Flush contact with a cell edge does not count as overlap; returns
        an empty range (ix0 > ix1) when r misses the grid entirely.
        """
        ix0 = int(math.floor((r.xmin - self.origin.x) / self.cell_w + 1e-9))
        ix1 = int(math.ceil((r.xmax - self.origin.x) / self.cell_w - 1e-9)) - 1
        iy0 = int(math.floor((r.ymin - self.origin.y) / self.cell_h + 1e-9))
        iy1 = int(math.ceil((r.ymax - self.origin.y) / self.cell_h - 1e-9)) - 1
        return (max(ix0, 0), min(ix1, self.nx - 1), max(iy0, 0), min(iy1, self.ny - 1))

    def cells_of_rect(self, r: Rect) -> set[tuple[int, int]]:
        ix0, ix1, iy0, iy1 = self.rect_cells(r)
        return {(ix, iy) for ix in range(ix0, ix1 + 1) for iy in range(iy0, iy1 + 1)}


@dataclass
class OccupancyMatrix:
    cells: np.ndarray      # (ny, nx) float
    resolution: float
    origin: Pose2
    spec: GridSpec
    clamped_task_cells: int = 0


@dataclass
class ReachabilityMatrix:
    cells: np.ndarray      # (ny, nx) float, alpha_r / beta_r
    spec: GridSpec
    degenerate: bool = False


@dataclass
class ClearanceMap:
    cells: np.ndarray      # (ny, nx) float, distances in cells


def occupancy_mask(scene: Scene, spec: GridSpec, exclude=frozenset()) -> np.ndarray:
    """Boolean (ny, nx) mask, True where a wall or a body covers the cell.

    The robot is never rasterized; ids in exclude are skipped.
    """
    occ = np.zeros((spec.ny, spec.nx), dtype=bool)
    for b in scene.bodies:
        if b.kind == KIND_ROBOT or b.id in exclude:
            continue
        ix0, ix1, iy0, iy1 = spec.rect_cells(b.rect())
        if ix0 <= ix1 and iy0 <= iy1:
            occ[iy0 : iy1 + 1, ix0 : ix1 + 1] = True
    return occ


def rasterize_gom(
    scene: Scene,
    task_cells,
    spec: GridSpec | None = None,
    alpha_m: float = ALPHA_M,
    beta_m: float = BETA_M,
) -> OccupancyMatrix:
    """Global occupancy: 0 on occupied cells, alpha_m free, beta_m on free task cells."""
    if spec is None:
        spec = GridSpec.from_scene(scene)
    occ = occupancy_mask(scene, spec)
    cells = np.where(occ, 0.0, alpha_m)
    clamped = 0
    for c in task_cells:
        if not spec.in_bounds(c):
            clamped += 1
            continue
        ix, iy = c
        if not occ[iy, ix]:
            cells[iy, ix] = beta_m
    return OccupancyMatrix(cells, spec.resolution, spec.origin, spec, clamped)


def _part_fit(scene: Scene, spec: GridSpec, dx: float, dy: float, w: float, h: float, ignore) -> np.ndarray:
    """Reference cells whose center puts one offset part collision-free."""
    free = np.zeros((spec.ny, spec.nx), dtype=bool)
    ws = scene.workspace
    # reference centers keeping the part inside the workspace
    x0 = ws.xmin + w / 2.0 - dx - EPS
    x1 = ws.xmax - w / 2.0 - dx + EPS
    y0 = ws.ymin + h / 2.0 - dy - EPS
    y1 = ws.ymax - h / 2.0 - dy + EPS
    ix0 = int(math.ceil((x0 - spec.origin.x) / spec.cell_w - 0.5))
    ix1 = int(math.floor((x1 - spec.origin.x) / spec.cell_w - 0.5))
    iy0 = int(math.ceil((y0 - spec.origin.y) / spec.cell_h - 0.5))
    iy1 = int(math.floor((y1 - spec.origin.y) / spec.cell_h - 0.5))
    ix0, ix1 = max(ix0, 0), min(ix1, spec.nx - 1)
    iy0, iy1 = max(iy0, 0), min(iy1, spec.ny - 1)
    if ix0 > ix1 or iy0 > iy1:
        return free
    free[iy0 : iy1 + 1, ix0 : ix1 + 1] = True
    for b in scene.bodies:
        if b.kind == KIND_ROBOT or b.id in ignore:
            continue
        r = b.rect()
        # colliding reference centers: open interval inflated by half-extents
        bx0 = int(math.floor((r.xmin - w / 2.0 - dx - spec.origin.x) / spec.cell_w - 0.5 + 1e-9)) + 1
        bx1 = int(math.ceil((r.xmax + w / 2.0 - dx - spec.origin.x) / spec.cell_w - 0.5 - 1e-9)) - 1
        by0 = int(math.floor((r.ymin - h / 2.0 - dy - spec.origin.y) / spec.cell_h - 0.5 + 1e-9)) + 1
        by1 = int(math.ceil((r.ymax + h / 2.0 - dy - spec.origin.y) / spec.cell_h - 0.5 - 1e-9)) - 1
        bx0, bx1 = max(bx0, 0), min(bx1, spec.nx - 1)
        by0, by1 = max(by0, 0), min(by1, spec.ny - 1)
        if bx0 <= bx1 and by0 <= by1:
            free[by0 : by1 + 1, bx0 : bx1 + 1] = False
    return free


def fit_mask(scene: Scene, spec: GridSpec, w: float, h: float, ignore=frozenset()) -> np.ndarray:
    """Cells whose center admits a w x h footprint collision-free.

    Exact interval geometry against body rectangles (not a rasterized
    dilation), so narrow passages keep their true sub-cell width.
    """
    return _part_fit(scene, spec, 0.0, 0.0, w, h, ignore)


def fit_mask_parts(scene: Scene, spec: GridSpec, parts, ignore=frozenset()) -> np.ndarray:
    """fit_mask for a multi-rect footprint: all parts must fit at once."""
    free = None
    for dx, dy, w, h in parts:
        m = _part_fit(scene, spec, dx, dy, w, h, ignore)
        free = m if free is None else (free & m)
    if free is None:
        raise ValueError("empty footprint")
    return free


def reachability(
    scene: Scene,
    gom: OccupancyMatrix,
    alpha_r: float = ALPHA_R,
    beta_r: float = BETA_R,
) -> ReachabilityMatrix:
    """Flood fill (4-connected) over cells where the robot footprint fits."""
    spec = gom.spec
    robot = scene.robot
    free = fit_mask(scene, spec, robot.w, robot.h)
    rc0 = spec.cell_of(robot.pose)
    cells = np.full((spec.ny, spec.nx), beta_r)
    # the pose right after a place is flush against the object, which the
    # cell-center fit test rejects; seed from the nearest free cell
    rc = snap_to_free(free, rc0, radius=2)
    if rc is None:
        cells[rc0[1], rc0[0]] = alpha_r
        return ReachabilityMatrix(cells, spec, degenerate=True)
    labels, _ = ndimage.label(free)  # default structure is 4-connected
    cells[labels == labels[rc[1], rc[0]]] = alpha_r
    cells[rc0[1], rc0[0]] = alpha_r
    return ReachabilityMatrix(cells, spec)


def reachable_mask(scene: Scene, spec: GridSpec, w: float, h: float, seed: Pose2, ignore=frozenset()) -> np.ndarray:
    """Boolean mask of cells reachable by a w x h footprint from seed (4-connected)."""
    free = fit_mask(scene, spec, w, h, ignore)
    sc = snap_to_free(free, spec.cell_of(seed), radius=2)
    out = np.zeros_like(free)
    if sc is None:
        return out
    labels, _ = ndimage.label(free)
    out[labels == labels[sc[1], sc[0]]] = True
    return out


def edt(local: np.ndarray) -> ClearanceMap:
    """Exact Euclidean distance (in cells) to the nearest occupied cell.

    Input is a binary grid, nonzero = occupied.  An all-free grid treats
    the boundary as occupied so clearance stays finite.
    """
    occ = np.asarray(local).astype(bool)
    if occ.size == 0:
        raise ValueError("empty grid")
    if occ.any():
        return ClearanceMap(ndimage.distance_transform_edt(~occ))
    padded = np.pad(~occ, 1, constant_values=False)
    return ClearanceMap(ndimage.distance_transform_edt(padded)[1:-1, 1:-1])


def swept_cells(spec: GridSpec, parts, poses, step: float | None = None) -> list[tuple[int, int]]:
    """Cells covered by a multi-rect footprint swept along a polyline.

    parts: (dx, dy, w, h) offsets from the reference pose.  Returns cells
    ordered by first coverage along the sweep.
    """
    if step is None:
        step = 0.5 * min(spec.cell_w, spec.cell_h)
    seen: dict[tuple[int, int], int] = {}
    order = 0

    def stamp(p: Pose2):
        nonlocal order
        for dx, dy, w, h in parts:
            r = Rect(p.x + dx - w / 2, p.y + dy - h / 2, p.x + dx + w / 2, p.y + dy + h / 2)
            ix0, ix1, iy0, iy1 = spec.rect_cells(r)
            for iy in range(iy0, iy1 + 1):
                for ix in range(ix0, ix1 + 1):
                    if (ix, iy) not in seen:
                        seen[(ix, iy)] = order
                        order += 1

    pts = list(poses)
    if not pts:
        return []
    stamp(pts[0])
    for a, b in zip(pts, pts[1:]):
        d = a.dist(b)
        n = max(1, int(math.ceil(d / step)))
        for k in range(1, n + 1):
            t = k / n
            stamp(Pose2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t))
    return sorted(seen, key=seen.get)


NEIGH4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
NEIGH8 = NEIGH4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def snap_to_free(free: np.ndarray, cell: tuple[int, int], radius: int = 1) -> tuple[int, int] | None:
    """cell if free, else the nearest free cell within a small window."""
    ix, iy = cell
    ny, nx = free.shape
    if 0 <= ix < nx and 0 <= iy < ny and free[iy, ix]:
        return cell
    best = None
    best_d = None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            jx, jy = ix + dx, iy + dy
            if 0 <= jx < nx and 0 <= jy < ny and free[jy, jx]:
                d = dx * dx + dy * dy
                if best_d is None or d < best_d or (d == best_d and (jx, jy) < best):
                    best, best_d = (jx, jy), d
    return best


def grid_connected(free: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """4-connected reachability between two cells over the free mask."""
    a = snap_to_free(free, a, radius=2)
    b = snap_to_free(free, b, radius=2)
    if a is None or b is None:
        return False
    labels, _ = ndimage.label(free)
    return labels[a[1], a[0]] == labels[b[1], b[0]]


def grid_path(free: np.ndarray, a, b, diag: bool = False) -> list[tuple[int, int]] | None:
    """Shortest cell path a -> b; BFS when diag is False, Dijkstra otherwise."""
    a = snap_to_free(free, a, radius=2)
    b = snap_to_free(free, b, radius=2)
    if a is None or b is None:
        return None
    ny, nx = free.shape
    prev: dict[tuple[int, int], tuple[int, int] | None] = {a: None}
    if not diag:
        q = deque([a])
        while q:
            cur = q.popleft()
            if cur == b:
                break
            for dx, dy in NEIGH4:
                nxt = (cur[0] + dx, cur[1] + dy)
                if 0 <= nxt[0] < nx and 0 <= nxt[1] < ny and free[nxt[1], nxt[0]] and nxt not in prev:
                    prev[nxt] = cur
                    q.append(nxt)
    else:
        dist = {a: 0.0}
        heap = [(0.0, a)]
        while heap:
            d, cur = heapq.heappop(heap)
            if cur == b:
                break
            if d > dist.get(cur, math.inf):
                continue
            for dx, dy in NEIGH8:
                nxt = (cur[0] + dx, cur[1] + dy)
                if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny and free[nxt[1], nxt[0]]):
                    continue
                if dx and dy:
                    # no corner cutting through blocked orthogonal neighbors
                    if not (free[cur[1], cur[0] + dx] and free[cur[1] + dy, cur[0]]):
                        continue
                    nd = d + math.sqrt(2.0)
                else:
                    nd = d + 1.0
                if nd < dist.get(nxt, math.inf) - 1e-12:
                    dist[nxt] = nd
                    prev[nxt] = cur
                    heapq.heappush(heap, (nd, nxt))
    if b not in prev:
        return None
    path = [b]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def grid_path_length(spec: GridSpec, path) -> float:
    total = 0.0
    for c, n in zip(path, path[1:]):
        total += math.hypot((n[0] - c[0]) * spec.cell_w, (n[1] - c[1]) * spec.cell_h)
    return total
