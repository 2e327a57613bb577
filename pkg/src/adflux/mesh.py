"""Structured triangulations of the unit square and their vertex-centered dual.

Each square cell is split along the lower-left to upper-right diagonal into
two counter-clockwise triangles.  The dual mesh attaches to every vertex a
control volume built from barycenter--edge-midpoint segments of the incident
triangles; each triangle is in turn partitioned into three quadrilaterals of
equal area, one per vertex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Segment:
    """Oriented segment with an outward unit normal."""

    a: np.ndarray
    b: np.ndarray
    normal: np.ndarray

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))


def _outward_normal(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Outward unit normal of the directed edge a->b of a CCW polygon."""
    t = b - a
    n = np.array([t[1], -t[0]])
    return n / np.hypot(*t)


@dataclass(eq=False)
class TriMesh:
    """Triangulation with vertex/element/boundary topology.

    vertices : (nv, 2) coordinates, triangles : (nt, 3) CCW vertex indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray = field(default=None)  # sorted indices
    vertex_to_elements: tuple = field(default=None)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if np.any(self.signed_areas <= 0.0):
            raise ValueError("all triangles must be counter-clockwise")
        if self.boundary_vertices is None:
            on = (
                (self.vertices[:, 0] == 0.0)
                | (self.vertices[:, 0] == 1.0)
                | (self.vertices[:, 1] == 0.0)
                | (self.vertices[:, 1] == 1.0)
            )
            self.boundary_vertices = np.flatnonzero(on)
        else:
            self.boundary_vertices = np.asarray(self.boundary_vertices, dtype=np.int64)
        if self.vertex_to_elements is None:
            v2e = [[] for _ in range(self.n_vertices)]
            for e, tri in enumerate(self.triangles):
                for z in tri:
                    v2e[z].append(e)
            self.vertex_to_elements = tuple(tuple(es) for es in v2e)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def element_points(self) -> np.ndarray:
        """(nt, 3, 2) vertex coordinates per element."""
        return self.vertices[self.triangles]

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def diameters(self) -> np.ndarray:
        """h_tau: longest edge of each element."""
        p = self.element_points
        d = np.stack(
            [
                np.hypot(*(p[:, 1] - p[:, 0]).T),
                np.hypot(*(p[:, 2] - p[:, 1]).T),
                np.hypot(*(p[:, 0] - p[:, 2]).T),
            ],
            axis=1,
        )
        return d.max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def p1_gradients(self) -> np.ndarray:
        """(nt, 3, 2) constant gradients of the three local basis functions."""
        p = self.element_points
        g = np.empty_like(p)
        two_a = 2.0 * self.signed_areas
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / two_a
            g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / two_a
        return g

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.element_points.mean(axis=1)

    @cached_property
    def dual(self) -> "DualSegments":
        return DualSegments.from_mesh(self)

    def barycentric(self, points: np.ndarray) -> np.ndarray:
        """Local P1 basis values at physical points of shape (nt, ..., 2).

        Returns an array of shape (nt, ..., 3).
        """
        p0 = self.element_points[:, 0]
        extra = points.ndim - 2
        p0 = p0.reshape((p0.shape[0],) + (1,) * extra + (2,))
        d = points - p0
        g = self.p1_gradients.reshape(
            (self.n_elements,) + (1,) * extra + (3, 2)
        )
        lam = np.einsum("...ki,...i->...k", g, d)
        lam[..., 0] += 1.0
        return lam


@dataclass(frozen=True)
class DualSegments:
    """Vectorized dual-mesh geometry for every element.

    For local vertex ``i`` of a CCW triangle with vertices p0, p1, p2,
    edge midpoints M_i = (p_i + p_{i+1}) / 2 and barycenter ``bc``, the
    quadrilateral t_i = [p_i, M_i, bc, M_{i-1}] carries two control-volume
    segments (M_i -> bc, bc -> M_{i-1}) and two element-boundary segments
    (p_i -> M_i, M_{i-1} -> p_i), all with outward normals w.r.t. t_i.
    """

    barycenters: np.ndarray  # (nt, 2)
    midpoints: np.ndarray  # (nt, 3, 2), M_i between local verts i, i+1
    quads: np.ndarray  # (nt, 3, 4, 2)
    cv_a: np.ndarray  # (nt, 3, 2, 2) segment start
    cv_b: np.ndarray  # (nt, 3, 2, 2) segment end
    cv_normals: np.ndarray  # (nt, 3, 2, 2) outward unit normals
    cv_lengths: np.ndarray  # (nt, 3, 2)
    bnd_a: np.ndarray  # (nt, 3, 2, 2)
    bnd_b: np.ndarray  # (nt, 3, 2, 2)
    bnd_normals: np.ndarray  # (nt, 3, 2, 2)
    bnd_lengths: np.ndarray  # (nt, 3, 2)
    sub_triangles: np.ndarray  # (nt, 3, 2, 3, 2) two sub-triangles per quad
    sub_areas: np.ndarray  # (nt, 3, 2)
    quad_areas: np.ndarray  # (nt, 3)

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "DualSegments":
        p = mesh.element_points
        bc = mesh.centroids
        mids = 0.5 * (p + np.roll(p, -1, axis=1))  # M_i = mid(p_i, p_{i+1})
        nt = mesh.n_elements

        quads = np.empty((nt, 3, 4, 2))
        cv_a = np.empty((nt, 3, 2, 2))
        cv_b = np.empty((nt, 3, 2, 2))
        bnd_a = np.empty((nt, 3, 2, 2))
        bnd_b = np.empty((nt, 3, 2, 2))
        subs = np.empty((nt, 3, 2, 3, 2))
        for i in range(3):
            im1 = (i - 1) % 3
            quads[:, i, 0] = p[:, i]
            quads[:, i, 1] = mids[:, i]
            quads[:, i, 2] = bc
            quads[:, i, 3] = mids[:, im1]
            cv_a[:, i, 0] = mids[:, i]
            cv_b[:, i, 0] = bc
            cv_a[:, i, 1] = bc
            cv_b[:, i, 1] = mids[:, im1]
            bnd_a[:, i, 0] = p[:, i]
            bnd_b[:, i, 0] = mids[:, i]
            bnd_a[:, i, 1] = mids[:, im1]
            bnd_b[:, i, 1] = p[:, i]
            subs[:, i, 0, 0] = p[:, i]
            subs[:, i, 0, 1] = mids[:, i]
            subs[:, i, 0, 2] = bc
            subs[:, i, 1, 0] = p[:, i]
            subs[:, i, 1, 1] = bc
            subs[:, i, 1, 2] = mids[:, im1]

        def norms(a, b):
            t = b - a
            length = np.hypot(t[..., 0], t[..., 1])
            n = np.stack([t[..., 1], -t[..., 0]], axis=-1) / length[..., None]
            return n, length

        cv_n, cv_len = norms(cv_a, cv_b)
        bnd_n, bnd_len = norms(bnd_a, bnd_b)

        e1 = subs[..., 1, :] - subs[..., 0, :]
        e2 = subs[..., 2, :] - subs[..., 0, :]
        sub_areas = 0.5 * np.abs(e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
        quad_areas = sub_areas.sum(axis=2)

        return cls(
            barycenters=bc,
            midpoints=mids,
            quads=quads,
            cv_a=cv_a,
            cv_b=cv_b,
            cv_normals=cv_n,
            cv_lengths=cv_len,
            bnd_a=bnd_a,
            bnd_b=bnd_b,
            bnd_normals=bnd_n,
            bnd_lengths=bnd_len,
            sub_triangles=subs,
            sub_areas=sub_areas,
            quad_areas=quad_areas,
        )


@dataclass(frozen=True)
class ElementSplit:
    """Barycenter/midpoint decomposition of one element."""

    element: int
    barycenter: np.ndarray
    edge_midpoints: np.ndarray  # (3, 2)
    quads: np.ndarray  # (3, 4, 2), quad i belongs to local vertex i
    cv_segments: tuple  # per local vertex: (Segment, Segment)
    boundary_segments: tuple  # per local vertex: (Segment, Segment)


def build_uniform_mesh(n: int) -> TriMesh:
    """Uniform n-by-n mesh of the unit square, two triangles per cell."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    e = 0
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris[e] = (v00, v10, v11)
            tris[e + 1] = (v00, v11, v01)
            e += 2
    return TriMesh(vertices=verts, triangles=tris)


def split_element(mesh: TriMesh, element: int) -> ElementSplit:
    """Quadrilateral split of one element with dual-segment normals."""
    if not 0 <= element < mesh.n_elements:
        raise IndexError(f"element index {element} out of range")
    d = mesh.dual
    cv = tuple(
        tuple(
            Segment(d.cv_a[element, i, s], d.cv_b[element, i, s], d.cv_normals[element, i, s])
            for s in range(2)
        )
        for i in range(3)
    )
    bnd = tuple(
        tuple(
            Segment(d.bnd_a[element, i, s], d.bnd_b[element, i, s], d.bnd_normals[element, i, s])
            for s in range(2)
        )
        for i in range(3)
    )
    return ElementSplit(
        element=element,
        barycenter=d.barycenters[element],
        edge_midpoints=d.midpoints[element],
        quads=d.quads[element],
        cv_segments=cv,
        boundary_segments=bnd,
    )


def control_volume_boundary(mesh: TriMesh, z: int) -> list:
    """Dual-mesh segments making up the interior part of the boundary of C^z."""
    segs = []
    for e in mesh.vertex_to_elements[z]:
        local = int(np.flatnonzero(mesh.triangles[e] == z)[0])
        split = split_element(mesh, e)
        segs.extend(split.cv_segments[local])
    return segs


def control_volume_area(mesh: TriMesh, z: int) -> float:
    """Area of C^z, summed from the incident quadrilaterals."""
    d = mesh.dual
    total = 0.0
    for e in mesh.vertex_to_elements[z]:
        local = int(np.flatnonzero(mesh.triangles[e] == z)[0])
        total += d.quad_areas[e, local]
    return total


def dump_mesh(mesh: TriMesh, path) -> None:
    """Plain-text dump: one line per vertex `v x y`, per triangle `t i j k`."""
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"t {i} {j} {k}\n")


def load_mesh(path) -> TriMesh:
    verts, tris = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                tris.append((int(parts[1]), int(parts[2]), int(parts[3])))
            else:
                raise ValueError(f"unrecognized mesh line: {line!r}")
    return TriMesh(vertices=np.array(verts), triangles=np.array(tris))
