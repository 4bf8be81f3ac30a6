"""Structured meshes for the solid and for structure base manifolds.

Reference hexahedron: [-1, 1]^3 with trilinear shape functions and the
vertex numbering

    node   (xi1, xi2, xi3)
    0      (-1, -1, -1)
    1      (+1, -1, -1)
    2      (+1, +1, -1)
    3      (-1, +1, -1)
    4      (-1, -1, +1)
    5      (+1, -1, +1)
    6      (+1, +1, +1)
    7      (-1, +1, +1)

This ordering is right-handed and matches the VTK_HEXAHEDRON convention
used by the exporters.  Boundary facets are stored as (element,
local_face) pairs; local faces are numbered

    0: xi1=-1   1: xi1=+1   2: xi2=-1   3: xi2=+1   4: xi3=-1   5: xi3=+1

with outward-oriented node loops.

Only axis-aligned structured grids are generated; all geometries handled
by this package are boxes.  Point location therefore has an exact
integer-arithmetic fast path, with a general per-element Newton search
kept as a cross-check.  Points that land exactly on a shared face resolve
to the lowest element index so that repeated runs assemble identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Corner coordinates of the reference hexahedron, canonical ordering.
HEX_REFERENCE_NODES = np.array(
    [
        [-1.0, -1.0, -1.0],
        [+1.0, -1.0, -1.0],
        [+1.0, +1.0, -1.0],
        [-1.0, +1.0, -1.0],
        [-1.0, -1.0, +1.0],
        [+1.0, -1.0, +1.0],
        [+1.0, +1.0, +1.0],
        [-1.0, +1.0, +1.0],
    ]
)

# Local faces: outward-oriented 4-node loops, numbered as in the module
# docstring.
HEX_FACES = np.array(
    [
        [0, 4, 7, 3],  # xi1 = -1
        [1, 2, 6, 5],  # xi1 = +1
        [0, 1, 5, 4],  # xi2 = -1
        [3, 7, 6, 2],  # xi2 = +1
        [0, 3, 2, 1],  # xi3 = -1
        [4, 5, 6, 7],  # xi3 = +1
    ]
)

XI_TOL = 1e-10


class PointNotFoundError(LookupError):
    """Raised when a point lies outside every element of the mesh."""


def hex8_shape(xi) -> np.ndarray:
    """Trilinear shape functions at reference coordinates xi.

    Accepts a single point (3,) or a batch (k, 3); returns (8,) or (k, 8).
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    pts = np.atleast_2d(xi)
    s = HEX_REFERENCE_NODES  # (8, 3) of +-1
    n = 0.125 * (1 + pts[:, None, 0] * s[:, 0]) \
        * (1 + pts[:, None, 1] * s[:, 1]) \
        * (1 + pts[:, None, 2] * s[:, 2])
    return n[0] if single else n


def hex8_shape_grad(xi) -> np.ndarray:
    """Gradients of the trilinear shape functions w.r.t. xi.

    Accepts (3,) or (k, 3); returns (8, 3) or (k, 8, 3).
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    pts = np.atleast_2d(xi)
    s = HEX_REFERENCE_NODES
    f1 = 1 + pts[:, None, 0] * s[:, 0]
    f2 = 1 + pts[:, None, 1] * s[:, 1]
    f3 = 1 + pts[:, None, 2] * s[:, 2]
    g = np.empty((pts.shape[0], 8, 3))
    g[:, :, 0] = 0.125 * s[:, 0] * f2 * f3
    g[:, :, 1] = 0.125 * s[:, 1] * f1 * f3
    g[:, :, 2] = 0.125 * s[:, 2] * f1 * f2
    return g[0] if single else g


def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


@dataclass
class LocalPoint:
    """A point expressed in element-local reference coordinates."""

    element_id: int
    xi: np.ndarray  # (3,) in [-1, 1]^3 up to XI_TOL


@dataclass
class SolidMesh:
    """Axis-aligned structured hexahedral grid.

    nodes      (n, 3) coordinates
    hexes      (m, 8) connectivity, canonical vertex order
    node_sets  named node-index arrays; canonical: xmin..zmax, all
    face_sets  named (element, local_face) arrays for boundary facets
    h          (3,) nominal element size per axis
    origin/divisions  structured-grid metadata enabling exact location
    """

    nodes: np.ndarray
    hexes: np.ndarray
    node_sets: dict[str, np.ndarray]
    face_sets: dict[str, np.ndarray]
    h: np.ndarray
    origin: np.ndarray = field(default=None)
    divisions: tuple[int, int, int] = field(default=None)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.hexes = np.ascontiguousarray(self.hexes, dtype=np.int64)
        self.h = np.asarray(self.h, dtype=float)
        for arr in (self.nodes, self.hexes, self.h):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_hexes(self) -> int:
        return self.hexes.shape[0]

    @property
    def structured(self) -> bool:
        return self.origin is not None and self.divisions is not None

    @property
    def extent(self) -> np.ndarray:
        return self.h * np.asarray(self.divisions, dtype=float)

    def element_coords(self, e: int) -> np.ndarray:
        return self.nodes[self.hexes[e]]

    def node_index(self, i: int, j: int, k: int) -> int:
        nx, ny, _ = self.divisions
        return i + (nx + 1) * (j + (ny + 1) * k)

    def isoparametric_map(self, local: LocalPoint) -> np.ndarray:
        """Map a local point back to physical space."""
        return hex8_shape(local.xi) @ self.element_coords(local.element_id)


def build_hex_grid(origin, extent, divisions) -> SolidMesh:
    """Generate a structured grid of (d1, d2, d3) hexahedra over a box.

    Nodes are ordered lexicographically with the first axis fastest;
    elements likewise.  Canonical face sets xmin/xmax/ymin/ymax/zmin/zmax
    collect the boundary facets of each box face, and node sets of the
    same names collect the nodes lying on those faces.
    """
    origin = np.asarray(origin, dtype=float)
    extent = np.asarray(extent, dtype=float)
    divisions = tuple(int(d) for d in divisions)
    if any(d < 1 for d in divisions):
        raise ValueError(f"divisions must all be >= 1, got {divisions}")
    if any(e <= 0 for e in extent):
        raise ValueError(f"extents must all be > 0, got {extent}")

    nx, ny, nz = divisions
    h = extent / np.array(divisions, dtype=float)
    xs = [origin[a] + h[a] * np.arange(divisions[a] + 1) for a in range(3)]
    X, Y, Z = np.meshgrid(xs[0], xs[1], xs[2], indexing="ij")
    # lexicographic, i fastest
    nodes = np.stack(
        [X.transpose(2, 1, 0).ravel(),
         Y.transpose(2, 1, 0).ravel(),
         Z.transpose(2, 1, 0).ravel()],
        axis=1,
    )

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    ii, jj, kk = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    ii = ii.transpose(2, 1, 0).ravel()
    jj = jj.transpose(2, 1, 0).ravel()
    kk = kk.transpose(2, 1, 0).ravel()
    hexes = np.stack(
        [
            nid(ii, jj, kk),
            nid(ii + 1, jj, kk),
            nid(ii + 1, jj + 1, kk),
            nid(ii, jj + 1, kk),
            nid(ii, jj, kk + 1),
            nid(ii + 1, jj, kk + 1),
            nid(ii + 1, jj + 1, kk + 1),
            nid(ii, jj + 1, kk + 1),
        ],
        axis=1,
    )

    def eid(i, j, k):
        return i + nx * (j + ny * k)

    face_sets = {}
    jf, kf = np.meshgrid(np.arange(ny), np.arange(nz), indexing="ij")
    jf, kf = jf.ravel(), kf.ravel()
    face_sets["xmin"] = np.stack([eid(0, jf, kf), np.zeros_like(jf)], axis=1)
    face_sets["xmax"] = np.stack([eid(nx - 1, jf, kf), np.full_like(jf, 1)], axis=1)
    if_, kf2 = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
    if_, kf2 = if_.ravel(), kf2.ravel()
    face_sets["ymin"] = np.stack([eid(if_, 0, kf2), np.full_like(if_, 2)], axis=1)
    face_sets["ymax"] = np.stack([eid(if_, ny - 1, kf2), np.full_like(if_, 3)], axis=1)
    if2, jf2 = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    if2, jf2 = if2.ravel(), jf2.ravel()
    face_sets["zmin"] = np.stack([eid(if2, jf2, 0), np.full_like(if2, 4)], axis=1)
    face_sets["zmax"] = np.stack([eid(if2, jf2, nz - 1), np.full_like(if2, 5)], axis=1)
    face_sets = {k: np.ascontiguousarray(v, dtype=np.int64) for k, v in face_sets.items()}

    gi = np.arange(nodes.shape[0])
    i_idx = gi % (nx + 1)
    j_idx = (gi // (nx + 1)) % (ny + 1)
    k_idx = gi // ((nx + 1) * (ny + 1))
    node_sets = {
        "xmin": gi[i_idx == 0],
        "xmax": gi[i_idx == nx],
        "ymin": gi[j_idx == 0],
        "ymax": gi[j_idx == ny],
        "zmin": gi[k_idx == 0],
        "zmax": gi[k_idx == nz],
        "all": gi,
    }

    return SolidMesh(
        nodes=nodes,
        hexes=hexes,
        node_sets=node_sets,
        face_sets=face_sets,
        h=h,
        origin=origin,
        divisions=divisions,
    )


def _structured_cells(mesh: SolidMesh, pts: np.ndarray, tol: float):
    """Integer-arithmetic cell lookup on a structured grid.

    Returns (cells (k,) or -1 outside, xi (k, 3)).  Points on shared
    faces resolve to the lower cell index per axis, hence the lowest
    element index overall.
    """
    t = (pts - mesh.origin) / mesh.h
    n = np.asarray(mesh.divisions)
    outside = np.any((t < -tol) | (t > n + tol), axis=1)
    cell_axis = np.clip(np.ceil(t).astype(np.int64) - 1, 0, n - 1)
    xi = 2.0 * (t - cell_axis) - 1.0
    nx, ny, _ = mesh.divisions
    cells = cell_axis[:, 0] + nx * (cell_axis[:, 1] + ny * cell_axis[:, 2])
    cells = np.where(outside, -1, cells)
    return cells, xi


def locate_points(mesh: SolidMesh, pts, tol: float = XI_TOL):
    """Locate many points at once; structured grids use the fast path.

    Returns (elements (k,), xi (k, 3)); element -1 flags points outside.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if mesh.structured:
        return _structured_cells(mesh, pts, tol)
    elems = np.empty(pts.shape[0], dtype=np.int64)
    xis = np.empty((pts.shape[0], 3))
    for i, x in enumerate(pts):
        try:
            lp = _locate_general(mesh, x, tol)
            elems[i], xis[i] = lp.element_id, lp.xi
        except PointNotFoundError:
            elems[i], xis[i] = -1, np.nan
    return elems, xis


def locate_point(mesh: SolidMesh, x, tol: float = XI_TOL) -> LocalPoint:
    """Find the element containing x and its reference coordinates.

    Ties at shared faces resolve to the lowest element index.  Raises
    PointNotFoundError when x lies outside the mesh by more than tol
    (relative to the element size); the caller decides whether that is
    fatal.
    """
    if mesh.n_hexes == 0:
        raise ValueError("mesh has no elements")
    x = np.asarray(x, dtype=float)
    if mesh.structured:
        cells, xi = _structured_cells(mesh, x[None, :], tol)
        if cells[0] < 0:
            raise PointNotFoundError(f"point {x} outside mesh")
        return LocalPoint(int(cells[0]), xi[0])
    return _locate_general(mesh, x, tol)


def _locate_general(mesh: SolidMesh, x: np.ndarray, tol: float) -> LocalPoint:
    """Scan elements in index order, inverting the trilinear map by Newton."""
    for e in range(mesh.n_hexes):
        coords = mesh.element_coords(e)
        lo, hi = coords.min(axis=0), coords.max(axis=0)
        pad = tol * (hi - lo + 1.0)
        if np.any(x < lo - pad) or np.any(x > hi + pad):
            continue
        xi = _invert_trilinear(coords, x)
        if xi is not None and np.max(np.abs(xi)) <= 1.0 + tol:
            return LocalPoint(e, xi)
    raise PointNotFoundError(f"point {x} outside mesh")


def _invert_trilinear(coords: np.ndarray, x: np.ndarray):
    xi = np.zeros(3)
    for _ in range(30):
        r = x - hex8_shape(xi) @ coords
        if np.linalg.norm(r) < 1e-14 * (1.0 + np.linalg.norm(x)):
            return xi
        jac = hex8_shape_grad(xi).T @ coords  # dx/dxi transposed blocks
        try:
            dxi = np.linalg.solve(jac.T, r)
        except np.linalg.LinAlgError:
            return None
        xi = xi + dxi
        if np.max(np.abs(xi)) > 3.0:
            return None
    return xi


@dataclass
class BaseMesh:
    """Mesh of a structure base manifold in base coordinates.

    dim 0: a single point (rigid bodies), no elements.
    dim 1: 2-node segments along the arclength coordinate.
    dim 2: 4-node rectangles, counterclockwise node loops.

    The affine placement used to embed the base in physical space is kept
    alongside the mesh when given at build time; the structure model is
    the authority on the frame actually used.
    """

    dim: int
    nodes: np.ndarray  # (n, dim) base coordinates sigma
    elements: np.ndarray  # (m, 2) or (m, 4); (0, 0) for dim 0
    h_base: np.ndarray  # (dim,) nominal element size
    frame: object = None

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(np.atleast_2d(self.nodes), dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        self.h_base = np.atleast_1d(np.asarray(self.h_base, dtype=float))
        if self.dim == 0 and (self.n_nodes != 1 or self.elements.size != 0):
            raise ValueError("dim-0 base mesh must have one node and no elements")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def span(self) -> np.ndarray:
        """(dim, 2) min/max of the base coordinates."""
        if self.dim == 0:
            return np.zeros((0, 2))
        return np.stack([self.nodes.min(axis=0), self.nodes.max(axis=0)], axis=1)


def check_frame_axes(axes) -> np.ndarray:
    """Validate a 3x3 matrix of frame axes (columns), returning it as float.

    Axes must be orthonormal within 1e-12 and right-handed.
    """
    axes = np.asarray(axes, dtype=float)
    if axes.shape != (3, 3):
        raise ValueError("frame axes must be a 3x3 matrix with axes as columns")
    if np.max(np.abs(axes.T @ axes - np.eye(3))) > 1e-12:
        raise ValueError("frame axes are not orthonormal")
    if np.linalg.det(axes) < 0:
        raise ValueError("frame axes must be right-handed")
    return axes


def build_base_mesh(kind: str, placement=None, extent=None, divisions=None) -> BaseMesh:
    """Generate the base manifold mesh of a structure.

    kind "point": a single node at sigma = () (rigid bodies).
    kind "line": segment [0, extent] split into `divisions` elements.
    kind "quad_grid": rectangle [0, e1] x [0, e2] split into (d1, d2)
    bilinear quads with positive orientation.

    `placement`, when given, is an affine frame (anything exposing
    .origin and .axes) validated here and stored on the mesh for the
    embedding.
    """
    if placement is not None:
        check_frame_axes(placement.axes)

    def _with_frame(bm: BaseMesh) -> BaseMesh:
        bm.frame = placement
        return bm

    if kind == "point":
        return _with_frame(
            BaseMesh(0, np.zeros((1, 0)), np.zeros((0, 0), dtype=np.int64), np.zeros(0))
        )
    if kind == "line":
        length = float(np.atleast_1d(extent)[0])
        n = int(np.atleast_1d(divisions)[0])
        if n < 1:
            raise ValueError("divisions must be >= 1")
        if length <= 0:
            raise ValueError("extent must be > 0")
        nodes = np.linspace(0.0, length, n + 1)[:, None]
        elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        return _with_frame(BaseMesh(1, nodes, elements, np.array([length / n])))
    if kind == "quad_grid":
        e1, e2 = (float(v) for v in extent)
        d1, d2 = (int(v) for v in divisions)
        if d1 < 1 or d2 < 1:
            raise ValueError("divisions must be >= 1")
        if e1 <= 0 or e2 <= 0:
            raise ValueError("extents must be > 0")
        s1 = np.linspace(0.0, e1, d1 + 1)
        s2 = np.linspace(0.0, e2, d2 + 1)
        S1, S2 = np.meshgrid(s1, s2, indexing="ij")
        nodes = np.stack([S1.T.ravel(), S2.T.ravel()], axis=1)  # first axis fastest

        def nid(i, j):
            return i + (d1 + 1) * j

        ii, jj = np.meshgrid(np.arange(d1), np.arange(d2), indexing="ij")
        ii, jj = ii.T.ravel(), jj.T.ravel()
        elements = np.stack(
            [nid(ii, jj), nid(ii + 1, jj), nid(ii + 1, jj + 1), nid(ii, jj + 1)],
            axis=1,
        )
        return _with_frame(BaseMesh(2, nodes, elements, np.array([e1 / d1, e2 / d2])))
    raise ValueError(f"unknown base mesh kind {kind!r}")
