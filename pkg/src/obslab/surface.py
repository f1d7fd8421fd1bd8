"""Meshes for two compact surfaces and smoothed control regions on them.

Two fundamental domains are supported, both triangulated in a flat chart and
glued along their boundary:

* a square ``[0, L)^2`` with opposite sides identified (flat torus),
* the regular hyperbolic octagon in the Poincare disk with opposite sides
  identified (the genus-2 surface of constant curvature -1).

The metric enters only through a per-vertex conformal weight: 1 on the torus,
``4 / (1 - |z|^2)^2`` on the disk.  All vertex fields (eigenmodes, region
weights) are functions on the quotient; chart vertices that are glued together
carry identical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DegenerateTriangle, EmptyRegion, InvalidResolution

# Octagon constants for the {8,8} tiling: interior angle 2*pi/8, circumradius
# R with cosh R = cot(pi/8)^2, apothem b with cosh b = cot(pi/8).
_COT_PI_8 = 1.0 + np.sqrt(2.0)
_VERTEX_CHART_RADIUS = 2.0 ** -0.25          # tanh(R/2)
_PAIRING_SIGMA = np.sqrt(2.0 + 2.0 * np.sqrt(2.0)) / _COT_PI_8   # tanh(b)

_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangulated fundamental domain with boundary identifications.

    Attributes
    ----------
    surface_kind : str
        ``"torus"`` or ``"bolza"``.
    vertices : (nv, 2) float array
        Chart coordinates, including duplicated boundary vertices.
    triangles : (nt, 3) int array
        Counterclockwise triangles indexing ``vertices``.
    conformal_weight : (nv,) float array
        Riemannian area density relative to the chart.
    identifications : (nv,) int array
        Chart index of each vertex's representative; fixed points are
        interior vertices or class representatives.
    quotient_index : (nv,) int array
        Dense class index in ``0..n_quotient-1`` for every chart vertex.
    quotient_reps : (n_quotient,) int array
        Chart index of the representative of each class.
    area : float
        Riemannian area of the discrete surface (linear-interpolated weight).
    torus_length : float or None
        Period L for the torus chart, None for the octagon.
    """

    surface_kind: str
    vertices: np.ndarray
    triangles: np.ndarray
    conformal_weight: np.ndarray
    identifications: np.ndarray
    quotient_index: np.ndarray
    quotient_reps: np.ndarray
    area: float
    torus_length: Optional[float] = None

    def __post_init__(self):
        for name in ("vertices", "triangles", "conformal_weight",
                     "identifications", "quotient_index", "quotient_reps"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_quotient(self) -> int:
        return self.quotient_reps.shape[0]

    def to_quotient(self, chart_values: np.ndarray) -> np.ndarray:
        """Restrict a per-chart-vertex field to one value per quotient class."""
        return np.asarray(chart_values)[..., self.quotient_reps]

    def to_chart(self, quotient_values: np.ndarray) -> np.ndarray:
        """Expand a per-class field back to every chart vertex."""
        return np.asarray(quotient_values)[..., self.quotient_index]


def chart_triangle_areas(mesh_or_vertices, triangles=None) -> np.ndarray:
    """Signed chart areas of all triangles (positive for ccw orientation)."""
    if triangles is None:
        verts, triangles = mesh_or_vertices.vertices, mesh_or_vertices.triangles
    else:
        verts = mesh_or_vertices
    p0 = verts[triangles[:, 0]]
    e1 = verts[triangles[:, 1]] - p0
    e2 = verts[triangles[:, 2]] - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def vertex_measures(mesh: SurfaceMesh) -> np.ndarray:
    """Lumped Riemannian measure of each quotient vertex.

    Entry q is the integral of the hat function of class q against the
    linear-interpolated conformal weight; the entries sum to ``mesh.area``.
    """
    areas = chart_triangle_areas(mesh)
    w = mesh.conformal_weight[mesh.triangles]          # (nt, 3)
    # exact integral of phi_i * (linear weight) over one triangle:
    # A * (2 w_i + w_j + w_k) / 12
    contrib = (areas[:, None] / 12.0) * (2.0 * w + np.roll(w, 1, axis=1)
                                         + np.roll(w, 2, axis=1))
    lumped = np.zeros(mesh.n_quotient)
    np.add.at(lumped, mesh.quotient_index[mesh.triangles], contrib)
    return lumped


def euler_characteristic(mesh: SurfaceMesh) -> int:
    """V - E + F of the glued surface (edges counted on the quotient)."""
    tris = mesh.triangles
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if counts.max() > 2:
        raise DegenerateTriangle("an edge is shared by more than two triangles")
    n_boundary = int(np.sum(counts == 1))
    if n_boundary % 2 != 0:
        raise DegenerateTriangle("boundary edges do not pair up")
    n_edges = (len(uniq) - n_boundary) + n_boundary // 2
    return mesh.n_quotient - n_edges + mesh.n_triangles


def _canonical_reps(n: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Union-find over identification pairs; representative = min chart index."""
    parent = np.arange(n)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(v) for v in range(n)])


def _build_mesh(kind, verts, tris, weight, pairs, torus_length=None):
    reps = _canonical_reps(len(verts), pairs)
    quotient_reps, quotient_index = np.unique(reps, return_inverse=True)
    verts = np.asarray(verts, dtype=float)
    tris = np.asarray(tris, dtype=np.int64)
    areas = chart_triangle_areas(verts, tris)
    if np.any(areas <= 1e-14 * areas.max()):
        raise DegenerateTriangle("triangle with non-positive chart area")
    w = np.asarray(weight, dtype=float)[tris]
    area = float(np.sum(areas * w.mean(axis=1)))
    return SurfaceMesh(
        surface_kind=kind,
        vertices=verts,
        triangles=tris,
        conformal_weight=np.asarray(weight, dtype=float),
        identifications=reps,
        quotient_index=quotient_index,
        quotient_reps=quotient_reps,
        area=area,
        torus_length=torus_length,
    )


# ---------------------------------------------------------------------------
# torus


def build_torus(n: int, length: float = 1.0) -> SurfaceMesh:
    """Uniform n x n triangulated flat torus on ``[0, length)^2``.

    The chart holds an (n+1) x (n+1) grid; the last row and column are glued
    to the first, leaving n^2 distinct vertices and 2 n^2 triangles.

    Parameters
    ----------
    n : int
        Cells per side, at least 4.
    length : float
        Side length L of the square fundamental domain.
    """
    if n < 4:
        raise InvalidResolution(f"torus resolution n={n} is below the minimum of 4")
    if length <= 0:
        raise InvalidResolution("torus side length must be positive")
    h = length / n
    m = n + 1
    ix, iy = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    verts = np.column_stack([(ix * h).ravel(), (iy * h).ravel()])

    def vid(i, j):
        return j * m + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))

    pairs = []
    for k in range(m):
        pairs.append((vid(n, k), vid(0, k)))   # right edge -> left edge
        pairs.append((vid(k, n), vid(k, 0)))   # top edge -> bottom edge
    weight = np.ones(len(verts))
    return _build_mesh("torus", verts, tris, weight, pairs, torus_length=float(length))


# ---------------------------------------------------------------------------
# hyperbolic octagon


def disk_distance(z, w) -> np.ndarray:
    """Hyperbolic distance between points of the unit disk (complex arrays)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


def _hyp_midpoint(z1: complex, z2: complex) -> complex:
    """Midpoint of the geodesic segment [z1, z2] in the Poincare disk."""
    w = (z2 - z1) / (1.0 - np.conj(z1) * z2)
    t = abs(w)
    if t == 0.0:
        return z1
    rho = t / (1.0 + np.sqrt(1.0 - t * t))   # tanh(artanh(t)/2)
    m = w / t * rho
    return (m + z1) / (1.0 + np.conj(z1) * m)


def _pairing_mobius(i: int, invert: bool = False):
    """Side-pairing translation mapping octagon side i+4 onto side i.

    Hyperbolic translation by twice the apothem along the axis through the
    midpoints of the two sides (direction angle i*pi/4).
    """
    sigma = -_PAIRING_SIGMA if invert else _PAIRING_SIGMA
    phase = np.exp(1j * i * np.pi / 4.0)

    def apply(z):
        return (z + sigma * phase) / (sigma * np.conj(phase) * z + 1.0)

    return apply


def bolza_orbit(z0: complex, max_word: int = 2) -> np.ndarray:
    """Images of z0 under side-pairing words of length <= max_word.

    Enough neighbors for distance computations at the scales of interest
    (radii up to about the injectivity radius).
    """
    gens = [_pairing_mobius(i, inv) for i in range(4) for inv in (False, True)]
    points = {complex(round(z0.real, 12), round(z0.imag, 12)): complex(z0)}
    frontier = [complex(z0)]
    for _ in range(max_word):
        new_frontier = []
        for z in frontier:
            for g in gens:
                img = g(z)
                key = complex(round(img.real, 12), round(img.imag, 12))
                if key not in points:
                    points[key] = img
                    new_frontier.append(img)
        frontier = new_frontier
    return np.array(list(points.values()))


def build_bolza(refine: int) -> SurfaceMesh:
    """Triangulated regular hyperbolic octagon with opposite sides glued.

    The base mesh is the fan of 8 triangles from the center to the octagon
    vertices (all at chart radius 2^(-1/4)).  Each refinement level splits
    every triangle 4-way at hyperbolic edge midpoints, so boundary vertices
    stay on the geodesic sides and paired sides subdivide consistently.

    Parameters
    ----------
    refine : int
        Number of 4-way subdivision passes (0 gives 8 triangles).
    """
    if refine < 0:
        raise InvalidResolution("refine must be non-negative")
    if refine > 8:
        raise InvalidResolution("refine > 8 would exceed sensible mesh sizes")

    # chart positions as complex numbers; vertex j at angle (2j+1)*pi/8
    positions = [0j]
    sides: list[frozenset] = [frozenset()]
    for j in range(8):
        ang = (2 * j + 1) * np.pi / 8.0
        positions.append(_VERTEX_CHART_RADIUS * np.exp(1j * ang))
        # side i joins octagon vertices i-1 and i (midpoint direction i*pi/4)
        sides.append(frozenset({j, (j + 1) % 8}))
    tris = [(0, 1 + j, 1 + (j + 1) % 8) for j in range(8)]

    for _ in range(refine):
        midpoint_of: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            idx = midpoint_of.get(key)
            if idx is None:
                idx = len(positions)
                positions.append(_hyp_midpoint(positions[a], positions[b]))
                sides.append(sides[a] & sides[b])
                midpoint_of[key] = idx
            return idx

        next_tris = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
        tris = next_tris

    pos = np.array(positions)
    if np.abs(pos).max() >= 1.0:
        raise DegenerateTriangle("chart vertex outside the unit disk")
    verts = np.column_stack([pos.real, pos.imag])
    weight = 4.0 / (1.0 - np.abs(pos) ** 2) ** 2

    # glue side i+4 onto side i through the pairing translation
    side_members = [[v for v in range(len(pos)) if s in sides[v]] for s in range(8)]
    pairs = []
    for i in range(4):
        mapper = _pairing_mobius(i)
        target = np.array(side_members[i])
        target_pos = pos[target]
        for v in side_members[i + 4]:
            img = mapper(pos[v])
            dist = np.abs(target_pos - img)
            hit = int(np.argmin(dist))
            if dist[hit] > _MATCH_TOL:
                raise DegenerateTriangle(
                    f"side pairing mismatch: vertex {v} lands {dist[hit]:.2e} "
                    "away from the glued side")
            pairs.append((v, int(target[hit])))
    return _build_mesh("bolza", verts, tris, weight, pairs)


# ---------------------------------------------------------------------------
# control regions


@dataclass(frozen=True)
class RegionSpec:
    """Descriptor of a control region before rasterization.

    ``band`` is the width of the smooth transition ramp; None picks the
    default of 10% of the region diameter (0 means a sharp indicator).
    """

    kind: str
    center: Optional[tuple[float, float]] = None
    radius: Optional[float] = None
    axis: Optional[str] = None
    start: Optional[float] = None
    width: Optional[float] = None
    vertex_ids: Optional[tuple[int, ...]] = None
    band: Optional[float] = None

    @classmethod
    def full(cls) -> "RegionSpec":
        return cls(kind="full")

    @classmethod
    def ball(cls, center, radius, band=None) -> "RegionSpec":
        return cls(kind="ball", center=(float(center[0]), float(center[1])),
                   radius=float(radius), band=band)

    @classmethod
    def strip(cls, axis, start, width, band=None) -> "RegionSpec":
        names = {"x": "x", "y": "y", 0: "x", 1: "y", "0": "x", "1": "y"}
        if axis not in names:
            raise ConfigError(f"strip axis must be 'x' or 'y', got {axis!r}")
        return cls(kind="strip", axis=names[axis], start=float(start),
                   width=float(width), band=band)

    @classmethod
    def vertex_set(cls, vertex_ids, band=0.0) -> "RegionSpec":
        return cls(kind="vertices", vertex_ids=tuple(int(v) for v in vertex_ids),
                   band=band)

    def label(self) -> str:
        if self.kind == "full":
            return "full"
        if self.kind == "ball":
            return f"ball(c=({self.center[0]:g},{self.center[1]:g}),r={self.radius:g})"
        if self.kind == "strip":
            return f"strip({self.axis},{self.start:g},{self.width:g})"
        return f"vertices(n={len(self.vertex_ids)})"


@dataclass(frozen=True)
class ControlRegion:
    """Smoothed cutoff of a region: per-chart-vertex weights in [0, 1].

    Weights are 1 on the core, fall to 0 across the transition band through a
    C^2 quintic ramp, and are constant on identification classes.
    """

    mesh: SurfaceMesh
    spec: RegionSpec
    weights: np.ndarray           # (nv,) chart vertices
    support_area: float

    def __post_init__(self):
        self.weights.setflags(write=False)

    def quotient_weights(self) -> np.ndarray:
        return self.mesh.to_quotient(self.weights)


def _quintic_ramp(t: np.ndarray) -> np.ndarray:
    """C^2 monotone step: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _torus_point_distance(points: np.ndarray, center, length: float) -> np.ndarray:
    shifts = np.array([(dx, dy) for dx in (-length, 0.0, length)
                       for dy in (-length, 0.0, length)])
    diffs = points[:, None, :] - (np.asarray(center)[None, None, :] + shifts[None, :, :])
    return np.sqrt((diffs ** 2).sum(axis=2)).min(axis=1)


def _ball_weights(mesh, rep_points, center, radius, band):
    if mesh.surface_kind == "torus":
        d = _torus_point_distance(rep_points, np.asarray(center, dtype=float),
                                  mesh.torus_length)
    else:
        c = complex(center[0], center[1])
        if abs(c) >= 1.0:
            raise ConfigError("ball center must lie inside the unit disk")
        images = bolza_orbit(c)
        z = rep_points[:, 0] + 1j * rep_points[:, 1]
        d = disk_distance(z[:, None], images[None, :]).min(axis=1)
    if band == 0.0:
        return (d < radius).astype(float)
    return _quintic_ramp((radius - d) / band)


def _strip_weights(mesh, rep_points, axis, start, width, band):
    if mesh.surface_kind != "torus":
        raise ConfigError("strip regions are defined on the torus chart only")
    length = mesh.torus_length
    coord = rep_points[:, 0] if axis == "x" else rep_points[:, 1]
    xi = np.mod(coord - start, length)
    inside = xi < width
    edge = np.minimum(xi, width - xi)
    if band == 0.0:
        return inside.astype(float)
    return np.where(inside, _quintic_ramp(edge / band), 0.0)


def rasterize_region(mesh: SurfaceMesh, spec: RegionSpec) -> ControlRegion:
    """Evaluate a region descriptor into smoothed vertex weights.

    Weights are computed at class representatives and broadcast to the whole
    chart, so identified vertices agree exactly.  Raises EmptyRegion if no
    vertex gets positive weight, or if the mesh is too coarse for any vertex
    to reach the full weight 1.
    """
    rep_points = mesh.vertices[mesh.quotient_reps]

    if spec.kind == "full":
        w_rep = np.ones(mesh.n_quotient)
    elif spec.kind == "ball":
        if spec.radius is None or spec.radius <= 0:
            raise EmptyRegion("ball region with non-positive radius")
        band = 0.2 * spec.radius if spec.band is None else float(spec.band)
        w_rep = _ball_weights(mesh, rep_points, spec.center, spec.radius, band)
    elif spec.kind == "strip":
        if spec.width is None or spec.width <= 0:
            raise EmptyRegion("strip region with non-positive width")
        band = 0.1 * spec.width if spec.band is None else float(spec.band)
        w_rep = _strip_weights(mesh, rep_points, spec.axis, spec.start,
                               spec.width, band)
    elif spec.kind == "vertices":
        if not spec.vertex_ids:
            raise EmptyRegion("empty vertex list")
        band = 0.0 if spec.band is None else float(spec.band)
        seeds = mesh.quotient_index[list(spec.vertex_ids)]
        if band == 0.0:
            w_rep = np.zeros(mesh.n_quotient)
            w_rep[seeds] = 1.0
        else:
            seed_points = rep_points[seeds]
            if mesh.surface_kind == "torus":
                d = np.min([_torus_point_distance(rep_points, p, mesh.torus_length)
                            for p in seed_points], axis=0)
            else:
                z = rep_points[:, 0] + 1j * rep_points[:, 1]
                zs = seed_points[:, 0] + 1j * seed_points[:, 1]
                d = disk_distance(z[:, None], zs[None, :]).min(axis=1)
            w_rep = _quintic_ramp(1.0 - d / band)
    else:
        raise ConfigError(f"unknown region kind {spec.kind!r}")

    if w_rep.max() <= 0.0:
        raise EmptyRegion(f"region {spec.label()} has no vertex with positive weight")
    if w_rep.max() < 1.0:
        raise EmptyRegion(
            f"region {spec.label()} has no full-weight vertex; enlarge the "
            "region or refine the mesh")
    measures = vertex_measures(mesh)
    support_area = float(measures[w_rep > 0.0].sum())
    weights = mesh.to_chart(w_rep)
    return ControlRegion(mesh=mesh, spec=spec, weights=weights,
                         support_area=support_area)


# ---------------------------------------------------------------------------
# text formats


def fmt_float(x) -> str:
    """Shortest exact decimal form of a scalar (stable across NumPy versions)."""
    return repr(float(x))


def save_mesh(path, mesh: SurfaceMesh) -> None:
    """Write a mesh as plain text.

    Header ``surface kind nv nt area``, then nv ``x y weight`` lines, nt
    ``i j k`` triangle lines, and one ``boundary_index interior_index`` line
    per glued vertex.
    """
    with open(path, "w") as fh:
        fh.write(f"surface {mesh.surface_kind} {mesh.n_vertices} "
                 f"{mesh.n_triangles} {fmt_float(mesh.area)}\n")
        for (x, y), w in zip(mesh.vertices, mesh.conformal_weight):
            fh.write(f"{fmt_float(x)} {fmt_float(y)} {fmt_float(w)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for v, rep in enumerate(mesh.identifications):
            if rep != v:
                fh.write(f"{v} {rep}\n")


def load_mesh(path) -> SurfaceMesh:
    """Read a mesh written by save_mesh."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 5 or head[0] != "surface":
        raise ConfigError(f"{path}: not a mesh file")
    _tag, kind, nv, nt, _area = head
    nv, nt = int(nv), int(nt)
    verts, weight = [], []
    for ln in lines[1:1 + nv]:
        x, y, w = map(float, ln.split())
        verts.append((x, y))
        weight.append(w)
    tris = [tuple(map(int, ln.split())) for ln in lines[1 + nv:1 + nv + nt]]
    pairs = [tuple(map(int, ln.split())) for ln in lines[1 + nv + nt:]]
    length = None
    if kind == "torus":
        length = float(np.max(np.asarray(verts)[:, 0]))
    return _build_mesh(kind, verts, tris, weight, pairs, torus_length=length)


def save_region(path, region: ControlRegion) -> None:
    """Write region weights as ``vertex_index weight`` lines."""
    with open(path, "w") as fh:
        for v, w in enumerate(region.weights):
            fh.write(f"{v} {fmt_float(w)}\n")
