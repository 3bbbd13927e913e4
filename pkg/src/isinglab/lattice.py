"""Discrete domain construction: lattice approximations of planar shapes.

A shape (axis-aligned square, disk, or simple polygon) with two marked
boundary points is approximated at mesh ``delta`` by the set of lattice
vertices strictly inside it.  The vertex boundary is everything outside
adjacent to the inside; walking the edge of the union-of-cells hull splits it
into the two marked arcs used for mixed boundary conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from matplotlib.path import Path as _MplPath
from scipy import ndimage

DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class EmptyInterior(ValueError):
    """No lattice vertex falls strictly inside the shape at this mesh."""


class DisconnectedInterior(ValueError):
    """The strictly-inside vertex set is not 4-connected."""


class MarksCollide(ValueError):
    """Both marked points round to the same boundary vertex at this mesh."""


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class ShapeSpec:
    """Continuum shape with two marked boundary points ``a`` and ``b``."""

    kind: str
    a: complex
    b: complex
    corner: complex = 0j
    side: float = 1.0
    center: complex = 0j
    radius: float = 1.0
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in ("square", "disk", "polygon"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.a == self.b:
            raise ValueError("marked points must differ")
        for mark, name in ((self.a, "a"), (self.b, "b")):
            d = self.boundary_distance(mark)
            if d > 1e-6 * max(1.0, self.diameter()):
                raise ValueError(f"marked point {name}={mark} is not on the shape boundary (dist {d:.3g})")

    # -- constructors ------------------------------------------------------
    @classmethod
    def square(cls, corner: complex, side: float, a: complex, b: complex) -> "ShapeSpec":
        return cls(kind="square", a=a, b=b, corner=corner, side=float(side))

    @classmethod
    def disk(cls, center: complex, radius: float, a: complex, b: complex) -> "ShapeSpec":
        return cls(kind="disk", a=a, b=b, center=center, radius=float(radius))

    @classmethod
    def polygon(cls, vertices: Sequence[complex], a: complex, b: complex) -> "ShapeSpec":
        verts = tuple(complex(v) for v in vertices)
        if len(verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        # normalize to counterclockwise orientation
        area = 0.0
        for k in range(len(verts)):
            z0, z1 = verts[k], verts[(k + 1) % len(verts)]
            area += z0.real * z1.imag - z1.real * z0.imag
        if abs(area) < 1e-14:
            raise ValueError("degenerate polygon")
        if area < 0:
            verts = tuple(reversed(verts))
        return cls(kind="polygon", a=a, b=b, vertices=verts)

    # -- geometry ----------------------------------------------------------
    def bbox(self):
        """(xmin, xmax, ymin, ymax) of the shape."""
        if self.kind == "square":
            return (
                self.corner.real,
                self.corner.real + self.side,
                self.corner.imag,
                self.corner.imag + self.side,
            )
        if self.kind == "disk":
            return (
                self.center.real - self.radius,
                self.center.real + self.radius,
                self.center.imag - self.radius,
                self.center.imag + self.radius,
            )
        xs = [v.real for v in self.vertices]
        ys = [v.imag for v in self.vertices]
        return (min(xs), max(xs), min(ys), max(ys))

    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bbox()
        return float(np.hypot(x1 - x0, y1 - y0))

    def strictly_inside(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask over complex ``points`` strictly interior to the shape."""
        z = np.asarray(points, dtype=complex)
        eps = 1e-9 * max(1.0, self.diameter())
        if self.kind == "square":
            x0, x1, y0, y1 = self.bbox()
            return (
                (z.real > x0 + eps)
                & (z.real < x1 - eps)
                & (z.imag > y0 + eps)
                & (z.imag < y1 - eps)
            )
        if self.kind == "disk":
            return np.abs(z - self.center) < self.radius - eps
        # closed=True consumes the last vertex as the close marker, so repeat
        # the first vertex explicitly to keep every polygon corner.
        ring = list(self.vertices) + [self.vertices[0]]
        path = _MplPath([(v.real, v.imag) for v in ring], closed=True)
        pts = np.column_stack([z.real.ravel(), z.imag.ravel()])
        # vertices are stored ccw, so a negative radius shrinks the region
        mask = path.contains_points(pts, radius=-2 * eps)
        return mask.reshape(z.shape)

    def boundary_distance(self, point: complex) -> float:
        """Euclidean distance from ``point`` to the shape boundary."""
        z = complex(point)
        if self.kind == "square":
            x0, x1, y0, y1 = self.bbox()
            dx = max(x0 - z.real, 0.0, z.real - x1)
            dy = max(y0 - z.imag, 0.0, z.imag - y1)
            if dx > 0 or dy > 0:
                return float(np.hypot(dx, dy))
            return float(min(z.real - x0, x1 - z.real, z.imag - y0, y1 - z.imag))
        if self.kind == "disk":
            return float(abs(abs(z - self.center) - self.radius))
        best = np.inf
        n = len(self.vertices)
        for k in range(n):
            p, q = self.vertices[k], self.vertices[(k + 1) % n]
            best = min(best, _segment_distance(z, p, q))
        return float(best)


def _segment_distance(z: complex, p: complex, q: complex) -> float:
    d = q - p
    t = ((z - p).real * d.real + (z - p).imag * d.imag) / (abs(d) ** 2)
    t = min(1.0, max(0.0, t))
    return abs(z - (p + t * d))


# ---------------------------------------------------------------------------
# discrete domain


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Lattice approximation at mesh ``delta`` with ordered boundary arcs.

    Vertices are stored as integer pairs (i, j) standing for the point
    (i*delta, j*delta); membership tests are exact integer comparisons.
    ``arc_minus`` runs counterclockwise from the mark near ``a`` to the mark
    near ``b``; ``arc_plus`` is the complementary (clockwise) piece.
    """

    delta: float
    interior: np.ndarray  # (n, 2) int64, lexicographically sorted
    boundary: np.ndarray  # (m, 2) int64, lexicographically sorted
    arc_minus: np.ndarray  # (k, 2) int64, traversal order, starts at a_mark
    arc_plus: np.ndarray  # (m-k, 2) int64, traversal order, starts at b_mark
    a_mark: tuple
    b_mark: tuple
    bounding_radius: float
    shape: ShapeSpec | None = field(default=None, repr=False)
    # grid caches (offset + padded code/id grids), derived data only:
    _origin: tuple = field(default=(0, 0), repr=False)
    _code: np.ndarray = field(default=None, repr=False)  # 0 out, 1 interior, 2 boundary
    _interior_id: np.ndarray = field(default=None, repr=False)
    _boundary_id: np.ndarray = field(default=None, repr=False)
    _circuit_v: np.ndarray = field(default=None, repr=False)
    _circuit_w: np.ndarray = field(default=None, repr=False)

    # -- counts ------------------------------------------------------------
    @property
    def n_interior(self) -> int:
        return int(self.interior.shape[0])

    @property
    def n_boundary(self) -> int:
        return int(self.boundary.shape[0])

    # -- coordinates -------------------------------------------------------
    def positions(self, ij: np.ndarray | None = None) -> np.ndarray:
        """Continuum positions of vertex rows (defaults to the interior)."""
        pts = self.interior if ij is None else np.asarray(ij)
        return self.delta * (pts[..., 0] + 1j * pts[..., 1])

    def grid_index(self, ij: np.ndarray) -> tuple:
        ij = np.asarray(ij, dtype=np.int64)
        return ij[..., 0] - self._origin[0], ij[..., 1] - self._origin[1]

    def code_at(self, ij: np.ndarray) -> np.ndarray:
        gi, gj = self.grid_index(ij)
        return self._code[gi, gj]

    def interior_index_of(self, ij: np.ndarray) -> np.ndarray:
        """Row indices into ``interior`` (-1 when not an interior vertex)."""
        gi, gj = self.grid_index(ij)
        return self._interior_id[gi, gj]

    def boundary_index_of(self, ij: np.ndarray) -> np.ndarray:
        gi, gj = self.grid_index(ij)
        return self._boundary_id[gi, gj]

    def interior_set(self) -> frozenset:
        return frozenset(map(tuple, self.interior.tolist()))

    def boundary_set(self) -> frozenset:
        return frozenset(map(tuple, self.boundary.tolist()))


def build_domain(shape: ShapeSpec, delta: float) -> DiscreteDomain:
    """Construct the mesh-``delta`` approximation of ``shape``.

    Raises EmptyInterior / DisconnectedInterior when the mesh is too coarse,
    and checks that the union-of-cells hull is simply connected.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x0, x1, y0, y1 = shape.bbox()
    i_lo, i_hi = int(np.floor(x0 / delta)) - 1, int(np.ceil(x1 / delta)) + 1
    j_lo, j_hi = int(np.floor(y0 / delta)) - 1, int(np.ceil(y1 / delta)) + 1
    ii, jj = np.meshgrid(
        np.arange(i_lo, i_hi + 1, dtype=np.int64),
        np.arange(j_lo, j_hi + 1, dtype=np.int64),
        indexing="ij",
    )
    inside = shape.strictly_inside(delta * (ii + 1j * jj))
    if not inside.any():
        raise EmptyInterior(f"no interior vertex at delta={delta}")

    labels, n_comp = ndimage.label(inside, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if n_comp != 1:
        raise DisconnectedInterior(f"interior splits into {n_comp} components at delta={delta}")

    # pad the working grid by 2 so neighbor lookups never leave the array
    origin = (i_lo - 2, j_lo - 2)
    nx, ny = inside.shape[0] + 4, inside.shape[1] + 4
    code = np.zeros((nx, ny), dtype=np.int8)
    code[2:-2, 2:-2][inside] = 1

    int_mask = code == 1
    bdry_mask = np.zeros_like(int_mask)
    for di, dj in DIRS:
        bdry_mask |= np.roll(np.roll(int_mask, di, axis=0), dj, axis=1)
    bdry_mask &= ~int_mask
    code[bdry_mask] = 2

    gi, gj = np.nonzero(int_mask)
    interior = np.column_stack([gi + origin[0], gj + origin[1]]).astype(np.int64)
    order = np.lexsort((interior[:, 1], interior[:, 0]))
    interior = interior[order]
    bi, bj = np.nonzero(bdry_mask)
    boundary = np.column_stack([bi + origin[0], bj + origin[1]]).astype(np.int64)
    order = np.lexsort((boundary[:, 1], boundary[:, 0]))
    boundary = boundary[order]

    interior_id = np.full((nx, ny), -1, dtype=np.int32)
    interior_id[interior[:, 0] - origin[0], interior[:, 1] - origin[1]] = np.arange(len(interior), dtype=np.int32)
    boundary_id = np.full((nx, ny), -1, dtype=np.int32)
    boundary_id[boundary[:, 0] - origin[0], boundary[:, 1] - origin[1]] = np.arange(len(boundary), dtype=np.int32)

    _check_hull_simply_connected(int_mask)
    circuit_v, circuit_w = _hull_circuit(int_mask, origin)

    # marks: nearest boundary vertex, ties by lexicographic vertex order
    bpos = delta * (boundary[:, 0] + 1j * boundary[:, 1])
    a_mark = _nearest_vertex(boundary, bpos, shape.a)
    b_mark = _nearest_vertex(boundary, bpos, shape.b)
    if a_mark == b_mark:
        raise MarksCollide(f"marks {shape.a} and {shape.b} both round to {a_mark} at delta={delta}")

    arc_minus, arc_plus = _split_arcs(circuit_w, a_mark, b_mark, len(boundary))

    int_pos = delta * (interior[:, 0] + 1j * interior[:, 1])
    bounding_radius = float(np.abs(int_pos).max() + delta) if len(int_pos) else delta

    return DiscreteDomain(
        delta=float(delta),
        interior=interior,
        boundary=boundary,
        arc_minus=arc_minus,
        arc_plus=arc_plus,
        a_mark=a_mark,
        b_mark=b_mark,
        bounding_radius=bounding_radius,
        shape=shape,
        _origin=origin,
        _code=code,
        _interior_id=interior_id,
        _boundary_id=boundary_id,
        _circuit_v=circuit_v,
        _circuit_w=circuit_w,
    )


def _nearest_vertex(vertices: np.ndarray, positions: np.ndarray, target: complex) -> tuple:
    d = np.abs(positions - target)
    best = np.flatnonzero(d == d.min())
    # rows are lexicographically sorted already, so the first hit wins ties
    k = best[0]
    return (int(vertices[k, 0]), int(vertices[k, 1]))


def _check_hull_simply_connected(int_mask: np.ndarray) -> None:
    """Euler check V - E + F = 2 on the closed-cell complex of the hull."""
    gi, gj = np.nonzero(int_mask)
    # cell (i, j) has corners (i, j), (i+1, j), (i, j+1), (i+1, j+1) in corner coords
    corners = set()
    edges = set()
    for i, j in zip(gi.tolist(), gj.tolist()):
        c = ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))
        corners.update(c)
        for k in range(4):
            p, q = c[k], c[(k + 1) % 4]
            edges.add((p, q) if p <= q else (q, p))
    V, E, F = len(corners), len(edges), len(gi) + 1
    if V - E + F != 2:
        raise ValueError(
            f"union-of-cells hull is not simply connected (V-E+F = {V - E + F}, expected 2)"
        )


def _hull_circuit(int_mask: np.ndarray, origin: tuple):
    """Counterclockwise walk of the hull edge, interior kept on the left.

    Returns the per-step crossing pairs (v interior, w exterior vertex) in
    traversal order.  Segment endpoints live on the half-integer corner grid
    (doubled coordinates).
    """
    nx, ny = int_mask.shape
    segs = {}  # start point -> list of (end point, v, w)
    gi, gj = np.nonzero(int_mask)
    for i, j in zip(gi.tolist(), gj.tolist()):
        I, J = 2 * i, 2 * j  # doubled grid coords of v
        for (di, dj), (s, e) in (
            ((1, 0), ((I + 1, J - 1), (I + 1, J + 1))),   # east face, heading +y
            ((0, 1), ((I + 1, J + 1), (I - 1, J + 1))),   # north face, heading -x
            ((-1, 0), ((I - 1, J + 1), (I - 1, J - 1))),  # west face, heading -y
            ((0, -1), ((I - 1, J - 1), (I + 1, J - 1))),  # south face, heading +x
        ):
            if not int_mask[i + di, j + dj]:
                segs.setdefault(s, []).append((e, (i, j), (i + di, j + dj)))

    n_total = sum(len(v) for v in segs.values())
    start = min(segs)
    seg0 = min(segs[start])
    used = set()
    circuit = []
    point, entry = start, seg0
    while True:
        end, v, w = entry
        used.add((point, end))
        circuit.append((v, w))
        # choose continuation: sharpest clockwise turn first (handles pinches)
        nxt_choices = [c for c in segs.get(end, ()) if (end, c[0]) not in used]
        if not nxt_choices:
            break
        d_in = (end[0] - point[0], end[1] - point[1])
        right = (d_in[1], -d_in[0])  # clockwise rotation
        left = (-d_in[1], d_in[0])

        def _rank(choice):
            d_out = (choice[0][0] - end[0], choice[0][1] - end[1])
            if d_out == right:
                return 0
            if d_out == d_in:
                return 1
            if d_out == left:
                return 2
            return 3

        entry = min(nxt_choices, key=_rank)
        point = end
    if len(circuit) != n_total:
        raise ValueError("hull edge walk did not close over every face; domain is pinched into pieces")

    v_arr = np.array([c[0] for c in circuit], dtype=np.int64)
    w_arr = np.array([c[1] for c in circuit], dtype=np.int64)
    v_arr += np.array(origin, dtype=np.int64)
    w_arr += np.array(origin, dtype=np.int64)
    return v_arr, w_arr


def _split_arcs(circuit_w: np.ndarray, a_mark: tuple, b_mark: tuple, n_boundary: int):
    """Partition boundary vertices into the two arcs along the hull walk."""
    w_list = [tuple(r) for r in circuit_w.tolist()]
    m = len(w_list)
    # collapse consecutive repeats (cyclically) to a vertex cycle
    cyc = [w_list[k] for k in range(m) if w_list[k] != w_list[(k - 1) % m]]
    if not cyc:  # single boundary vertex domain is impossible, but stay safe
        cyc = [w_list[0]]
    p_a = cyc.index(a_mark)
    cyc = cyc[p_a:] + cyc[:p_a]
    p_b = cyc.index(b_mark)
    if p_b == 0:
        raise MarksCollide("marks coincide on the boundary cycle")
    arc_minus, arc_plus, seen = [], [], set()
    for k, w in enumerate(cyc):
        if w in seen:
            continue
        seen.add(w)
        (arc_minus if k < p_b else arc_plus).append(w)
    if len(arc_minus) + len(arc_plus) != n_boundary:
        raise ValueError("arc split does not cover the boundary")
    return np.array(arc_minus, dtype=np.int64), np.array(arc_plus, dtype=np.int64)


# ---------------------------------------------------------------------------
# queries


def arc_neighborhood(domain: DiscreteDomain, side: str, eta: float) -> np.ndarray:
    """Interior vertices within Euclidean ``eta`` of the chosen arc.

    Returns rows of ``domain.interior`` (a (k, 2) int array).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if side not in ("minus", "plus"):
        raise ValueError("side must be 'minus' or 'plus'")
    arc = domain.arc_minus if side == "minus" else domain.arc_plus
    if len(arc) == 0:
        return np.empty((0, 2), dtype=np.int64)
    from scipy.spatial import cKDTree

    arc_xy = domain.delta * arc.astype(float)
    int_xy = domain.delta * domain.interior.astype(float)
    tree = cKDTree(arc_xy)
    d, _ = tree.query(int_xy, k=1)
    return domain.interior[d <= eta]


# ---------------------------------------------------------------------------
# external interfaces: key-value config + CSV listing


def parse_shape_config(text: str):
    """Read a key-value domain description; returns (ShapeSpec, delta or None).

    Recognized keys: shape, delta, a, b, corner, side, center, radius,
    vertices (semicolon-separated x,y pairs).  '#' starts a comment.
    """
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, val = line.split("=", 1)
        kv[key.strip().lower()] = val.strip()

    def _cplx(s: str) -> complex:
        x, y = s.split(",")
        return complex(float(x), float(y))

    kind = kv.get("shape")
    if kind is None:
        raise ValueError("config missing 'shape'")
    a, b = _cplx(kv["a"]), _cplx(kv["b"])
    if kind == "square":
        spec = ShapeSpec.square(_cplx(kv.get("corner", "0,0")), float(kv.get("side", "1")), a, b)
    elif kind == "disk":
        spec = ShapeSpec.disk(_cplx(kv.get("center", "0,0")), float(kv.get("radius", "1")), a, b)
    elif kind == "polygon":
        verts = [_cplx(p) for p in kv["vertices"].split(";") if p.strip()]
        spec = ShapeSpec.polygon(verts, a, b)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    delta = float(kv["delta"]) if "delta" in kv else None
    return spec, delta


def load_domain(path: str, delta: float | None = None) -> DiscreteDomain:
    with open(path, "r", encoding="utf-8") as fh:
        spec, d = parse_shape_config(fh.read())
    if delta is None:
        delta = d
    if delta is None:
        raise ValueError("mesh delta given neither in config nor as argument")
    return build_domain(spec, delta)


def domain_to_csv(domain: DiscreteDomain, path: str) -> None:
    """Write a vertex/arc listing (one row per vertex) for debugging."""
    minus_order = {tuple(r): k for k, r in enumerate(domain.arc_minus.tolist())}
    plus_order = {tuple(r): k for k, r in enumerate(domain.arc_plus.tolist())}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,j,x,y,role,arc_order\n")
        for i, j in domain.interior.tolist():
            fh.write(f"{i},{j},{i * domain.delta},{j * domain.delta},interior,-1\n")
        for i, j in domain.boundary.tolist():
            if (i, j) in minus_order:
                role, order = "arc_minus", minus_order[(i, j)]
            else:
                role, order = "arc_plus", plus_order[(i, j)]
            fh.write(f"{i},{j},{i * domain.delta},{j * domain.delta},{role},{order}\n")
