"""Linearized 3D elasticity on trilinear hexahedra.

Element stiffness uses full 2x2x2 Gauss integration (all benchmarks have
zero Poisson ratio, so volumetric locking is not a concern).  Voigt
ordering is (11, 22, 33, 12, 23, 13) with engineering shear strains.
Dirichlet conditions are applied by row/column elimination with a
right-hand-side correction, which keeps coupled saddle systems symmetric.

Assembly is deterministic: element contributions are accumulated through
a canonical COO -> CSR conversion, independent of any scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import SolidMesh, gauss_1d, hex8_shape, hex8_shape_grad, locate_points


@dataclass(frozen=True)
class IsotropicMaterial:
    """Isotropic linear-elastic material."""

    E: float
    nu: float = 0.0

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def lame(self) -> tuple[float, float]:
        lam = self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))
        mu = self.E / (2 * (1 + self.nu))
        return lam, mu

    @property
    def shear_modulus(self) -> float:
        return self.E / (2 * (1 + self.nu))

    def voigt_matrix(self) -> np.ndarray:
        lam, mu = self.lame
        d = np.zeros((6, 6))
        d[:3, :3] = lam
        d[np.arange(3), np.arange(3)] += 2 * mu
        d[np.arange(3, 6), np.arange(3, 6)] = mu
        return d


def _gauss_3d(n: int = 2):
    p, w = gauss_1d(n)
    pts = np.array([[a, b, c] for c in p for b in p for a in p])
    wts = np.array([wa * wb * wc for wc in w for wb in w for wa in w])
    return pts, wts


def _b_matrix(grad: np.ndarray) -> np.ndarray:
    """Strain-displacement matrix (6 x 24) from shape gradients (8, 3)."""
    b = np.zeros((6, 24))
    for a in range(8):
        gx, gy, gz = grad[a]
        c = 3 * a
        b[0, c] = gx
        b[1, c + 1] = gy
        b[2, c + 2] = gz
        b[3, c] = gy
        b[3, c + 1] = gx
        b[4, c + 1] = gz
        b[4, c + 2] = gy
        b[5, c] = gz
        b[5, c + 2] = gx
    return b


def hex8_stiffness(coords, mat: IsotropicMaterial) -> np.ndarray:
    """24x24 stiffness of one hexahedron, 2x2x2 Gauss, symmetric by construction.

    DOF order is node-major (u0x, u0y, u0z, u1x, ...).  Raises on
    non-positive Jacobians (inverted elements).
    """
    coords = np.asarray(coords, dtype=float)
    d = mat.voigt_matrix()
    pts, wts = _gauss_3d(2)
    ke = np.zeros((24, 24))
    for xi, w in zip(pts, wts):
        dn = hex8_shape_grad(xi)  # (8, 3)
        jac = dn.T @ coords  # dx/dxi (rows: d/dxi_i of x)
        det = np.linalg.det(jac)
        if det <= 0:
            raise ValueError(f"inverted element: Jacobian determinant {det}")
        grad = dn @ np.linalg.inv(jac)  # spatial gradients (8, 3)
        b = _b_matrix(grad)
        ke += w * det * (b.T @ d @ b)
    return 0.5 * (ke + ke.T)


@dataclass
class DofMap:
    """Partition of solid displacement DOFs into free and prescribed.

    free_index[node, comp] is the position in the free vector, or -1 for
    prescribed DOFs whose value is found in fixed_values.
    """

    free_index: np.ndarray  # (n_nodes, 3) int
    fixed_values: np.ndarray  # (n_nodes, 3) float, meaningful where fixed

    @classmethod
    def build(cls, n_nodes: int, fixed: list[tuple[np.ndarray, list[int], float]]):
        """fixed: list of (node indices, components, value) triples."""
        is_fixed = np.zeros((n_nodes, 3), dtype=bool)
        values = np.zeros((n_nodes, 3))
        for nodes, comps, value in fixed:
            for c in comps:
                is_fixed[np.asarray(nodes, dtype=np.int64), c] = True
                values[np.asarray(nodes, dtype=np.int64), c] = value
        free_index = np.full((n_nodes, 3), -1, dtype=np.int64)
        free_flat = ~is_fixed.ravel()
        free_index.ravel()[free_flat] = np.arange(free_flat.sum())
        return cls(free_index=free_index, fixed_values=values)

    @property
    def n_nodes(self) -> int:
        return self.free_index.shape[0]

    @property
    def n_free(self) -> int:
        return int((self.free_index >= 0).sum())

    @property
    def free_flat(self) -> np.ndarray:
        """Boolean mask over the flattened (3n,) DOF vector."""
        return (self.free_index >= 0).ravel()

    @property
    def free_pairs(self) -> list[tuple[int, int]]:
        """Ordered (node, component) pairs of the free DOFs."""
        nodes, comps = np.nonzero(self.free_index >= 0)
        order = np.argsort(self.free_index[nodes, comps])
        return list(zip(nodes[order].tolist(), comps[order].tolist()))

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Free vector -> full (3n,) vector with prescribed values filled in."""
        full = self.fixed_values.ravel().copy()
        full[self.free_flat] = u_free
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.free_flat]


def _material_per_element(mesh: SolidMesh, mat):
    if isinstance(mat, IsotropicMaterial):
        return [mat] * mesh.n_hexes
    mats = list(mat)
    if len(mats) != mesh.n_hexes:
        raise ValueError("need one material per element")
    return mats


def assemble_solid_full(mesh: SolidMesh, mat) -> sp.csr_matrix:
    """Unconstrained stiffness over all 3n displacement DOFs.

    `mat` is a single material or a per-element sequence.  Structured
    grids share one element matrix per distinct material.
    """
    mats = _material_per_element(mesh, mat)
    keys = [(m.E, m.nu) for m in mats]
    unique = {}
    for k, m in zip(keys, mats):
        unique.setdefault(k, m)
    if mesh.structured:
        coords0 = mesh.element_coords(0)
        ke_by_key = {k: hex8_stiffness(coords0, m) for k, m in unique.items()}
        ke_all = np.stack([ke_by_key[k] for k in keys])
    else:
        ke_all = np.stack(
            [hex8_stiffness(mesh.element_coords(e), mats[e]) for e in range(mesh.n_hexes)]
        )
    edofs = (3 * mesh.hexes[:, :, None] + np.arange(3)).reshape(mesh.n_hexes, 24)
    rows = np.repeat(edofs, 24, axis=1).ravel()
    cols = np.tile(edofs, (1, 24)).ravel()
    k = sp.coo_matrix(
        (ke_all.ravel(), (rows, cols)), shape=(3 * mesh.n_nodes, 3 * mesh.n_nodes)
    ).tocsr()
    k.sum_duplicates()
    return k


def reduce_to_free(k_full: sp.spmatrix, dofmap: DofMap, f_full=None):
    """Restrict a full system to free DOFs, folding prescribed values.

    Returns (K_ff, f_free) where f_free includes the reaction correction
    -K_fc @ u_c.  With f_full None, a zero load is assumed.
    """
    free = dofmap.free_flat
    k_full = k_full.tocsr()
    k_ff = k_full[free][:, free]
    u_fix = dofmap.fixed_values.ravel().copy()
    u_fix[free] = 0.0
    f = np.zeros(k_full.shape[0]) if f_full is None else np.asarray(f_full, dtype=float)
    f_free = f[free] - k_full[free] @ u_fix
    return k_ff.tocsr(), f_free


def assemble_solid(mesh: SolidMesh, mat, dofmap: DofMap) -> sp.csr_matrix:
    """Stiffness restricted to free DOFs (prescribed values folded by caller)."""
    return reduce_to_free(assemble_solid_full(mesh, mat), dofmap)[0]


def traction_load(mesh: SolidMesh, face_set: str, traction) -> np.ndarray:
    """Consistent nodal loads for a surface traction on a named face set.

    `traction` maps position (3,) -> force density (3,).  2x2 Gauss per
    facet, exact for tractions of polynomial degree <= 3 per direction.
    Returns the full (3n,) load vector.
    """
    from .mesh import HEX_FACES

    facets = mesh.face_sets.get(face_set)
    if facets is None or len(facets) == 0:
        raise ValueError(f"face set {face_set!r} is empty or undefined")
    p, w = gauss_1d(2)
    f = np.zeros(3 * mesh.n_nodes)
    for elem, face in facets:
        loop = mesh.hexes[elem][HEX_FACES[face]]
        xq = mesh.nodes[loop]  # (4, 3) quad corners
        for a, wa in zip(p, w):
            for b, wb in zip(p, w):
                n = 0.25 * np.array(
                    [(1 - a) * (1 - b), (1 + a) * (1 - b), (1 + a) * (1 + b), (1 - a) * (1 + b)]
                )
                dna = 0.25 * np.array([-(1 - b), (1 - b), (1 + b), -(1 + b)])
                dnb = 0.25 * np.array([-(1 - a), -(1 + a), (1 + a), (1 - a)])
                x = n @ xq
                da = np.cross(dna @ xq, dnb @ xq)
                t = np.asarray(traction(x), dtype=float)
                scale = wa * wb * np.linalg.norm(da)
                for i, node in enumerate(loop):
                    f[3 * node: 3 * node + 3] += scale * n[i] * t
    return f


def solid_h1_gram(mesh: SolidMesh, ell: float | None = None) -> sp.csr_matrix:
    """Gram matrix of the length-weighted H1 product on the vector FE space.

    Integrand u.v + ell^2 Du.Dv; ell defaults to the domain diameter.
    Returned over all 3n DOFs (restrict with a DofMap as needed).
    """
    if ell is None:
        span = mesh.nodes.max(axis=0) - mesh.nodes.min(axis=0)
        ell = float(np.linalg.norm(span))
    if ell <= 0:
        raise ValueError("ell must be positive")
    pts, wts = _gauss_3d(2)

    def scalar_element(coords):
        m = np.zeros((8, 8))
        for xi, w in zip(pts, wts):
            dn = hex8_shape_grad(xi)
            jac = dn.T @ coords
            det = np.linalg.det(jac)
            grad = dn @ np.linalg.inv(jac)
            n = hex8_shape(xi)
            m += w * det * (np.outer(n, n) + ell**2 * (grad @ grad.T))
        return m

    if mesh.structured:
        me_all = np.broadcast_to(
            scalar_element(mesh.element_coords(0)), (mesh.n_hexes, 8, 8)
        )
    else:
        me_all = np.stack([scalar_element(mesh.element_coords(e)) for e in range(mesh.n_hexes)])
    rows = np.repeat(mesh.hexes, 8, axis=1).ravel()
    cols = np.tile(mesh.hexes, (1, 8)).ravel()
    scalar = sp.coo_matrix(
        (np.ascontiguousarray(me_all).ravel(), (rows, cols)),
        shape=(mesh.n_nodes, mesh.n_nodes),
    ).tocsr()
    return sp.kron(scalar, sp.eye(3), format="csr")


def eval_displacement(mesh: SolidMesh, u_full: np.ndarray, pts):
    """Evaluate the FE displacement field and its gradient at points.

    Returns (values (k, 3), gradients (k, 3, 3)) with gradients[i, r, c] =
    d u_r / d x_c.  Points outside the mesh raise.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    elems, xis = locate_points(mesh, pts)
    if np.any(elems < 0):
        bad = pts[elems < 0][0]
        from .mesh import PointNotFoundError

        raise PointNotFoundError(f"point {bad} outside mesh")
    u_nodes = np.asarray(u_full, dtype=float).reshape(-1, 3)
    n = hex8_shape(xis)  # (k, 8)
    dn = hex8_shape_grad(xis)  # (k, 8, 3)
    conn = mesh.hexes[elems]  # (k, 8)
    ue = u_nodes[conn]  # (k, 8, 3)
    xe = mesh.nodes[conn]
    vals = np.einsum("ka,kar->kr", n, ue)
    jac = np.einsum("kai,kar->kir", dn, xe)  # dx_r/dxi_i
    inv = np.linalg.inv(jac)
    grad_n = np.einsum("kai,kic->kac", dn, inv)  # dN_a/dx_c
    grads = np.einsum("kar,kac->krc", ue, grad_n)
    return vals, grads


def element_stress(mesh: SolidMesh, mat, u_full: np.ndarray) -> np.ndarray:
    """Element-averaged Cauchy stress in Voigt order, 2x2x2 Gauss average."""
    mats = _material_per_element(mesh, mat)
    pts, wts = _gauss_3d(2)
    u_nodes = np.asarray(u_full, dtype=float).reshape(-1, 3)
    out = np.zeros((mesh.n_hexes, 6))
    d_cache = {}
    n_all = hex8_shape(pts)
    dn_all = hex8_shape_grad(pts)
    for e in range(mesh.n_hexes):
        coords = mesh.element_coords(e)
        ue = u_nodes[mesh.hexes[e]]
        key = (mats[e].E, mats[e].nu)
        if key not in d_cache:
            d_cache[key] = mats[e].voigt_matrix()
        d = d_cache[key]
        acc = np.zeros(6)
        vol = 0.0
        for q, w in zip(range(len(wts)), wts):
            jac = dn_all[q].T @ coords
            det = np.linalg.det(jac)
            grad = dn_all[q] @ np.linalg.inv(jac)
            g = ue.T @ grad  # du_r/dx_c
            eps = np.array(
                [g[0, 0], g[1, 1], g[2, 2], g[0, 1] + g[1, 0], g[1, 2] + g[2, 1], g[0, 2] + g[2, 0]]
            )
            acc += w * det * (d @ eps)
            vol += w * det
        out[e] = acc / vol
    return out
