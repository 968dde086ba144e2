"""Hexagonal cell lattice with relay stations on the cell boundaries.

Cells are pointy-top hexagons laid out in an axial-coordinate spiral around
cell 0.  Every unique geometric edge carries exactly one relay station, so a
border between two cells is served by a single shared relay.  Edge slot ``j``
of a cell joins ``vertices[j]`` and ``vertices[(j + 1) % 6]``; vertex ``j``
sits at angle ``30 + 60 * j`` degrees, so slot ``j`` faces the neighbour at
``60 + 60 * j`` degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "SameCellError",
    "Point",
    "HexCell",
    "Edge",
    "HexGrid",
    "build_grid",
    "cell_of",
    "locate",
    "boundary_intersection",
    "candidate_relays",
    "candidate_relays_batch",
]

SQRT3 = math.sqrt(3.0)
REL_TOL = 1e-9

# axial neighbour steps, walked in this order when tracing a ring
_AXIAL_DIRS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))
_VERTEX_ANGLES = np.deg2rad(30.0 + 60.0 * np.arange(6))
_NORMAL_ANGLES = np.deg2rad(60.0 + 60.0 * np.arange(6))
# outward unit normals of the six edge slots, shape (6, 2)
NORMALS = np.column_stack([np.cos(_NORMAL_ANGLES), np.sin(_NORMAL_ANGLES)])


class GeometryError(ValueError):
    """A geometric query was called outside its preconditions."""


class SameCellError(GeometryError):
    """Source and destination share a cell; no relay is needed."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class HexCell:
    id: int
    center: Point
    radius: float
    vertices: tuple[Point, ...]
    edge_ids: tuple[int, ...]

    @property
    def apothem(self) -> float:
        return self.radius * SQRT3 / 2.0


@dataclass(frozen=True)
class Edge:
    id: int
    endpoints: tuple[Point, Point]
    cells: tuple[int, ...]
    relay_id: int

    @property
    def midpoint(self) -> Point:
        a, b = self.endpoints
        return Point((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)


@dataclass(frozen=True)
class HexGrid:
    """Immutable cell patch.

    The tuples of dataclasses are the public view; the numpy arrays mirror
    them for vectorised queries and are read-only.
    """

    radius: float
    cells: tuple[HexCell, ...]
    edges: tuple[Edge, ...]
    centers: np.ndarray = field(repr=False)      # (n_cells, 2)
    cell_edges: np.ndarray = field(repr=False)   # (n_cells, 6) edge ids
    edge_points: np.ndarray = field(repr=False)  # (n_edges, 2, 2)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_relays(self) -> int:
        return len(self.edges)

    @property
    def base_stations(self) -> tuple[Point, ...]:
        """One base station per cell, at the cell center."""
        return tuple(c.center for c in self.cells)

    @property
    def tol(self) -> float:
        return REL_TOL * self.radius

    def neighbours(self, cell_id: int) -> list[int]:
        out = set()
        for eid in self.cells[cell_id].edge_ids:
            out.update(self.edges[eid].cells)
        out.discard(cell_id)
        return sorted(out)


def _spiral(n: int):
    """First ``n`` axial coordinates of the hex spiral around the origin."""
    coords = [(0, 0)]
    k = 1
    while len(coords) < n:
        q, r = _AXIAL_DIRS[4][0] * k, _AXIAL_DIRS[4][1] * k
        for side in range(6):
            dq, dr = _AXIAL_DIRS[side]
            for _ in range(k):
                coords.append((q, r))
                q, r = q + dq, r + dr
        k += 1
    return coords[:n]


def build_grid(n_cells: int, radius: float = 1.0) -> HexGrid:
    """Build a connected spiral patch of ``n_cells`` pointy-top hexagons.

    Edges shared by two cells are merged by endpoint matching, and each unique
    edge gets one relay whose id equals the edge id.
    """
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValueError(f"n_cells must be a positive integer, got {n_cells!r}")
    if not (radius > 0 and math.isfinite(radius)):
        raise ValueError(f"radius must be positive, got {radius!r}")
    n_cells = int(n_cells)
    tol = REL_TOL * radius

    centers = np.array(
        [(radius * SQRT3 * (q + r / 2.0), radius * 1.5 * r) for q, r in _spiral(n_cells)]
    )
    offsets = radius * np.column_stack([np.cos(_VERTEX_ANGLES), np.sin(_VERTEX_ANGLES)])

    edge_pts: list[np.ndarray] = []
    edge_cells: list[list[int]] = []
    cell_edges = np.empty((n_cells, 6), dtype=np.int64)
    for c in range(n_cells):
        verts = centers[c] + offsets
        for j in range(6):
            a, b = verts[j], verts[(j + 1) % 6]
            match = -1
            if edge_pts:
                pts = np.asarray(edge_pts)
                same = (np.abs(pts[:, 0] - a).max(axis=1) <= tol) & (
                    np.abs(pts[:, 1] - b).max(axis=1) <= tol
                )
                flipped = (np.abs(pts[:, 0] - b).max(axis=1) <= tol) & (
                    np.abs(pts[:, 1] - a).max(axis=1) <= tol
                )
                hits = np.flatnonzero(same | flipped)
                if hits.size:
                    match = int(hits[0])
            if match < 0:
                match = len(edge_pts)
                edge_pts.append(np.array([a, b]))
                edge_cells.append([])
            edge_cells[match].append(c)
            cell_edges[c, j] = match

    cells = tuple(
        HexCell(
            id=c,
            center=Point(*centers[c]),
            radius=float(radius),
            vertices=tuple(Point(*v) for v in centers[c] + offsets),
            edge_ids=tuple(int(e) for e in cell_edges[c]),
        )
        for c in range(n_cells)
    )
    edges = tuple(
        Edge(
            id=e,
            endpoints=(Point(*pts[0]), Point(*pts[1])),
            cells=tuple(edge_cells[e]),
            relay_id=e,
        )
        for e, pts in enumerate(edge_pts)
    )
    edge_points = np.asarray(edge_pts, dtype=float).reshape(-1, 2, 2)
    for arr in (centers, cell_edges, edge_points):
        arr.setflags(write=False)
    return HexGrid(
        radius=float(radius),
        cells=cells,
        edges=edges,
        centers=centers,
        cell_edges=cell_edges,
        edge_points=edge_points,
    )


def _normal_offsets(grid: HexGrid, pts: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Projection of ``pts - center`` on the six outward normals, shape (N, 6)."""
    rel = pts - grid.centers[cells]
    return rel @ NORMALS.T


def locate(grid: HexGrid, pts: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Vectorised :func:`cell_of`; returns ``-1`` for points outside the patch."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    apothem = grid.radius * SQRT3 / 2.0
    out = np.full(len(pts), -1, dtype=np.int64)
    for lo in range(0, len(pts), chunk):
        block = pts[lo:lo + chunk]
        rel = block[:, None, :] - grid.centers[None, :, :]
        inside = ((rel @ NORMALS.T) <= apothem + grid.tol).all(axis=2)
        hit = inside.any(axis=1)
        out[lo:lo + chunk] = np.where(hit, inside.argmax(axis=1), -1)
    return out


def cell_of(grid: HexGrid, q: Point) -> int | None:
    """Cell containing ``q``; boundary points go to the lowest cell id."""
    cid = int(locate(grid, np.array([[q.x, q.y]]))[0])
    return None if cid < 0 else cid


def _exit_slots(grid, src, cells, dst):
    """Edge slot through which each segment leaves its cell, plus the exit point.

    Uses the half-plane form of the convex hexagon: the exit parameter is the
    smallest ``t`` at which the segment reaches one of the edge lines it is
    heading towards.  Vertex ties go to the lower edge id.
    """
    apothem = grid.radius * SQRT3 / 2.0
    d = dst - src
    dn = d @ NORMALS.T
    slack = apothem - _normal_offsets(grid, src, cells)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dn > 0, slack / dn, np.inf)
    t_min = t.min(axis=1)
    length = np.hypot(d[:, 0], d[:, 1])
    tied = (t - t_min[:, None]) * length[:, None] <= grid.tol
    ids = np.where(tied, grid.cell_edges[cells], np.iinfo(np.int64).max)
    slot = ids.argmin(axis=1)
    p = src + t_min[:, None] * d
    return slot, p


def boundary_intersection(cell: HexCell, src: Point, dst: Point) -> tuple[int, Point]:
    """Edge of ``cell`` crossed by the segment ``src -> dst`` and the crossing point.

    Raises:
        GeometryError: if ``src`` is not strictly inside ``cell`` or ``dst``
            is strictly inside it.
    """
    apothem = cell.apothem
    tol = REL_TOL * cell.radius
    c = cell.center.as_array()
    s, e = src.as_array(), dst.as_array()
    if ((s - c) @ NORMALS.T).max() >= apothem - tol:
        raise GeometryError("src must lie strictly inside the cell")
    if ((e - c) @ NORMALS.T).max() < apothem - tol:
        raise GeometryError("dst must lie outside the cell")

    d = e - s
    dn = NORMALS @ d
    slack = apothem - NORMALS @ (s - c)
    t = np.full(6, np.inf)
    ahead = dn > 0
    t[ahead] = slack[ahead] / dn[ahead]
    t_min = t.min()
    tied = [j for j in range(6) if (t[j] - t_min) * math.hypot(*d) <= tol]
    slot = min(tied, key=lambda j: cell.edge_ids[j])
    p = s + t_min * d
    return cell.edge_ids[slot], Point(float(p[0]), float(p[1]))


def _ring_candidates(edge_ring, slot: int) -> list[int]:
    return [int(edge_ring[slot]), int(edge_ring[(slot - 1) % 6]), int(edge_ring[(slot + 1) % 6])]


def candidate_relays(grid: HexGrid, src: Point, dst: Point) -> list[int]:
    """The three relays an initiator at ``src`` should query to reach ``dst``.

    Returns the relay on the crossed edge first, then the relays on the two
    edges next to it around the source cell (previous slot, next slot).

    Raises:
        GeometryError: ``src`` lies outside the grid.
        SameCellError: ``dst`` is inside the source cell.
    """
    src_cell = cell_of(grid, src)
    if src_cell is None:
        raise GeometryError("src is outside the grid")
    if cell_of(grid, dst) == src_cell:
        raise SameCellError(f"src and dst both in cell {src_cell}")
    cell = grid.cells[src_cell]
    edge_id, _ = boundary_intersection(cell, src, dst)
    slot = cell.edge_ids.index(edge_id)
    return [grid.edges[e].relay_id for e in _ring_candidates(cell.edge_ids, slot)]


def candidate_relays_batch(grid: HexGrid, src: np.ndarray, src_cells: np.ndarray,
                           dst: np.ndarray) -> np.ndarray:
    """Candidate triples for many (src, dst) pairs at once, shape (N, 3).

    ``src_cells`` must already hold the cell of each source point and every
    ``dst`` must lie outside its source cell.  Relay ids equal edge ids.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    src_cells = np.asarray(src_cells, dtype=np.int64)
    if len(src) == 0:
        return np.empty((0, 3), dtype=np.int64)
    slot, _ = _exit_slots(grid, src, src_cells, dst)
    ring = grid.cell_edges[src_cells]
    rows = np.arange(len(src))
    return np.column_stack([
        ring[rows, slot],
        ring[rows, (slot - 1) % 6],
        ring[rows, (slot + 1) % 6],
    ]).astype(np.int64)
