"""Tie operator between a solid and an embedded structure.

The constraint pairs a multiplier field (same ansatz as the structure
generalized displacements, restricted to the embedded base nodes) with
the difference between the structure displacement and the solid
displacement composed with the embedding, in the structural energy inner
product: value terms plus ell_c^2-weighted gradient terms, integrated by
a base x fiber quadrature.

Base points replicate the rule used for the structure stiffness
(midpoints for beams, 2x2 Gauss for shells, the single point for rigid
bodies); fiber points are tensor Gauss with a configurable count per
fiber axis.  Each quadrature point is located inside the solid once, at
build time; points falling outside the solid are dropped and their
weight excluded, so partially embedded structures are tied only over the
overlap region.

Gradients are contracted in frame columns (derivative along each frame
axis); since the embedding is an isometry this equals the full spatial
contraction.  Assembly order is canonical, so repeated assemblies are
bitwise identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import PointNotFoundError, SolidMesh, hex8_shape, hex8_shape_grad, locate_point
from .structures import GeneralizedField, StructureModel

logger = logging.getLogger(__name__)


@dataclass
class FiberQuadrature:
    """Flattened base x fiber quadrature with cached solid locations."""

    model: StructureModel
    base_elem: np.ndarray  # (k,) base element per point
    sigma: np.ndarray  # (k, base dim)
    xi: np.ndarray  # (k, fiber dim)
    weight: np.ndarray  # (k,) combined base x fiber weight
    solid_elem: np.ndarray  # (k,)
    solid_xi: np.ndarray  # (k, 3)
    x_global: np.ndarray  # (k, 3) embedded position (after any wrapping)
    shift: np.ndarray  # (k, 3) lattice shift applied by a periodic locator
    n_dropped: int

    @property
    def n_points(self) -> int:
        return self.base_elem.shape[0]

    @property
    def weight_sum(self) -> float:
        return float(self.weight.sum())

    def embedded_elements(self) -> np.ndarray:
        return np.unique(self.base_elem)


def build_fiber_quadrature(
    model: StructureModel,
    solid: SolidMesh,
    n_fiber: int,
    locator=None,
) -> FiberQuadrature:
    """Quadrature for the tie integrals of one structure.

    `locator` maps a global point to (element, xi, shift) or None when
    the point cannot be placed; the default locates in `solid` directly
    with zero shift.  A configuration with no embedded point at all is
    rejected.
    """
    if locator is None:

        def locator(x):
            try:
                lp = locate_point(solid, x)
            except PointNotFoundError:
                return None
            return lp.element_id, lp.xi, np.zeros(3)

    fib_pts, fib_wts = model.fiber.gauss(n_fiber)
    rows = {
        "base_elem": [], "sigma": [], "xi": [], "weight": [],
        "solid_elem": [], "solid_xi": [], "x_global": [], "shift": [],
    }
    n_dropped = 0
    for e, sigma, w_base in model.base_rule(model.coupling_base_points()):
        for xi, w_fib in zip(fib_pts, fib_wts):
            x = model.embed(sigma[None, :] if sigma.size else np.zeros((1, 0)), xi[None, :])
            x = np.atleast_2d(x)[0]
            hit = locator(x)
            if hit is None:
                n_dropped += 1
                continue
            elem, sxi, shift = hit
            rows["base_elem"].append(e)
            rows["sigma"].append(sigma)
            rows["xi"].append(xi)
            rows["weight"].append(w_base * w_fib)
            rows["solid_elem"].append(elem)
            rows["solid_xi"].append(sxi)
            rows["x_global"].append(x + np.asarray(shift, dtype=float))
            rows["shift"].append(shift)
    if not rows["weight"]:
        raise ValueError("structure has no quadrature point inside the solid")
    if n_dropped:
        logger.info(
            "fiber quadrature: dropped %d of %d points outside the solid",
            n_dropped, n_dropped + len(rows["weight"]),
        )
    return FiberQuadrature(
        model=model,
        base_elem=np.asarray(rows["base_elem"], dtype=np.int64),
        sigma=np.asarray(rows["sigma"], dtype=float).reshape(-1, model.base.dim),
        xi=np.asarray(rows["xi"], dtype=float).reshape(-1, model.fiber.dim),
        weight=np.asarray(rows["weight"], dtype=float),
        solid_elem=np.asarray(rows["solid_elem"], dtype=np.int64),
        solid_xi=np.asarray(rows["solid_xi"], dtype=float).reshape(-1, 3),
        x_global=np.asarray(rows["x_global"], dtype=float).reshape(-1, 3),
        shift=np.asarray(rows["shift"], dtype=float).reshape(-1, 3),
        n_dropped=n_dropped,
    )


@dataclass
class MultiplierSpace:
    """Multiplier DOF layout: structure layout restricted to embedded nodes."""

    node_row: np.ndarray  # (n_struct_nodes,) row-node index or -1
    dofs_per_node: int

    @classmethod
    def from_quadrature(cls, quad: FiberQuadrature) -> "MultiplierSpace":
        model = quad.model
        embedded = np.zeros(model.n_nodes, dtype=bool)
        if model.base.dim == 0:
            embedded[0] = True
        else:
            for e in quad.embedded_elements():
                embedded[model.base.elements[e]] = True
        node_row = np.full(model.n_nodes, -1, dtype=np.int64)
        node_row[embedded] = np.arange(int(embedded.sum()))
        return cls(node_row=node_row, dofs_per_node=model.dofs_per_node)

    @property
    def n_nodes(self) -> int:
        return int((self.node_row >= 0).sum())

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dofs_per_node

    def rows_for_nodes(self, nodes: np.ndarray) -> np.ndarray:
        """Flat multiplier DOF indices for the given structure nodes."""
        rn = self.node_row[nodes]
        if np.any(rn < 0):
            raise RuntimeError("quadrature touches a node outside the multiplier set")
        return (rn[:, None] * self.dofs_per_node + np.arange(self.dofs_per_node)).ravel()

    def translation_row_mask(self) -> np.ndarray:
        m = np.zeros(self.n_dofs, dtype=bool)
        d = self.dofs_per_node
        for n in range(self.n_nodes):
            m[n * d: n * d + 3] = True
        return m


@dataclass
class CouplingOperator:
    """Sparse tie matrix; rows multipliers, columns [structure | solid].

    Signs: + structure columns, - solid columns.  `g` collects pairings
    with known affine fields (zero except for strain-driven periodic
    cells), so the constraint reads B x = g.
    """

    B: sp.csr_matrix
    g: np.ndarray
    mult: MultiplierSpace
    n_struct: int
    n_solid: int  # full solid DOF count (3 * n_nodes)
    ell_c: float

    def split(self):
        return self.B[:, : self.n_struct], self.B[:, self.n_struct:]

    def restrict_solid(self, dofmap):
        """Columns restricted to [structure | free solid]; prescribed solid
        values fold into the constraint right-hand side."""
        b_struct, b_solid = self.split()
        free = dofmap.free_flat
        u_fix = dofmap.fixed_values.ravel().copy()
        u_fix[free] = 0.0
        # B_struct y + B_solid u = g  with  u = u_free + u_fix
        g = self.g - b_solid @ u_fix
        return sp.hstack([b_struct, b_solid[:, free]], format="csr"), g

    def drop_rotation_rows(self) -> "CouplingOperator":
        """Keep only translation-multiplier rows (rotation ties removed)."""
        keep = self.mult.translation_row_mask()
        return CouplingOperator(
            B=self.B[keep].tocsr(),
            g=self.g[keep],
            mult=self.mult,
            n_struct=self.n_struct,
            n_solid=self.n_solid,
            ell_c=self.ell_c,
        )


def _cross3(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _model_cross_cache(model: StructureModel):
    """Per-model constants: cross products of rotation axes with the
    fiber directions (the fiber-gradient columns of rotation DOFs)."""
    a = model.frame.axes
    return {
        (k, s): _cross3(model.theta_axes[:, k], a[:, s])
        for k in range(model.r)
        for s in model.fiber_slots
    }


def _structure_point_basis(model: StructureModel, sigma, xi, cross_cache=None):
    """Ansatz value matrix (3, nd) and gradient stack (9, nd) of the
    element basis at one quadrature point, frame-column gradients."""
    if cross_cache is None:
        cross_cache = _model_cross_cache(model)
    e = model.find_base_element(sigma) if model.base.dim else 0
    nodes, n, dn = model.base_basis(e, sigma)
    nn = len(nodes)
    d = model.dofs_per_node
    a = model.frame.axes
    xi_glob = a[:, list(model.fiber_slots)] @ xi
    v = np.zeros((3, nn * d))
    g = np.zeros((3, 3, nn * d))
    for idx in range(nn):
        c = idx * d
        for i in range(3):
            v[i, c + i] = n[idx]
            for bi, s in enumerate(model.base_slots):
                g[i, s, c + i] = dn[idx, bi]
        for k in range(model.r):
            ax = model.theta_axes[:, k]
            cross = _cross3(ax, xi_glob)
            v[:, c + 3 + k] = n[idx] * cross
            for bi, s in enumerate(model.base_slots):
                g[:, s, c + 3 + k] += dn[idx, bi] * cross
            for s in model.fiber_slots:
                g[:, s, c + 3 + k] += n[idx] * cross_cache[(k, s)]
    return nodes, v, g.reshape(9, nn * d)


def _solid_point_basis(solid: SolidMesh, elem: int, sxi, axes):
    """Value matrix (3, 24) and frame-column gradient stack (9, 24)."""
    conn = solid.hexes[elem]
    coords = solid.nodes[conn]
    n = hex8_shape(sxi)
    dn = hex8_shape_grad(sxi)
    jac = dn.T @ coords
    grad = dn @ np.linalg.inv(jac)  # (8, 3) spatial
    grad_frame = grad @ axes  # derivative along each frame axis
    v = np.zeros((3, 24))
    g = np.zeros((3, 3, 24))
    for a in range(8):
        c = 3 * a
        for i in range(3):
            v[i, c + i] = n[a]
            g[i, :, c + i] = grad_frame[a]
    return conn, v, g.reshape(9, 24)


def assemble_coupling(
    quad: FiberQuadrature,
    solid: SolidMesh,
    model: StructureModel,
    ell_c: float | None = None,
    affine_strain=None,
) -> CouplingOperator:
    """Assemble the tie operator from a prepared fiber quadrature.

    ell_c defaults to the structural characteristic length.  When
    `affine_strain` (3x3 macroscopic strain) is given, the known pairing
    with the affine fiber field strain @ xi lands in `g`; this carries
    strain-driven periodic cells where fluctuation fields are tied.
    """
    if ell_c is None:
        ell_c = model.ell
    mult = MultiplierSpace.from_quadrature(quad)
    a = model.frame.axes
    eps = None if affine_strain is None else np.asarray(affine_strain, dtype=float)
    rows, cols, vals = [], [], []
    g_vec = np.zeros(mult.n_dofs)
    n_struct = model.n_dofs
    n_solid = 3 * solid.n_nodes
    lc2 = ell_c**2
    cross_cache = _model_cross_cache(model)

    for q in range(quad.n_points):
        w = quad.weight[q]
        nodes, v_s, g_s = _structure_point_basis(model, quad.sigma[q], quad.xi[q], cross_cache)
        conn, v_u, g_u = _solid_point_basis(solid, int(quad.solid_elem[q]), quad.solid_xi[q], a)
        mrows = mult.rows_for_nodes(nodes)
        sdofs = (nodes[:, None] * model.dofs_per_node + np.arange(model.dofs_per_node)).ravel()
        udofs = (3 * conn[:, None] + np.arange(3)).ravel()

        blk_ss = w * (v_s.T @ v_s + lc2 * (g_s.T @ g_s))
        blk_su = -w * (v_s.T @ v_u + lc2 * (g_s.T @ g_u))
        rows.append(np.repeat(mrows, sdofs.size))
        cols.append(np.tile(sdofs, mrows.size))
        vals.append(blk_ss.ravel())
        rows.append(np.repeat(mrows, udofs.size))
        cols.append(np.tile(udofs + n_struct, mrows.size))
        vals.append(blk_su.ravel())

        if eps is not None:
            xi_glob = a[:, list(model.fiber_slots)] @ quad.xi[q]
            val = eps @ xi_glob
            grad = np.zeros((3, 3))
            for s in model.fiber_slots:
                grad[:, s] = eps @ a[:, s]
            g_vec[mrows] += w * (v_s.T @ val + lc2 * (g_s.T @ grad.reshape(9)))

    b = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mult.n_dofs, n_struct + n_solid),
    ).tocsr()
    b.sum_duplicates()
    return CouplingOperator(
        B=b, g=g_vec, mult=mult, n_struct=n_struct, n_solid=n_solid, ell_c=float(ell_c)
    )


def kernel_residual(op: CouplingOperator, x: np.ndarray) -> float:
    """Constraint defect |Bx - g|_inf normalized by |B|_inf |x|_inf."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.B.shape[1]:
        raise ValueError("solution vector does not match the coupling operator")
    r = op.B @ x - op.g
    scale = float(abs(op.B).max() * max(np.max(np.abs(x)), 1e-300))
    return float(np.max(np.abs(r)) / scale)


def coupled_field_vector(
    model: StructureModel, fld: GeneralizedField, u_full: np.ndarray
) -> np.ndarray:
    """Stack [structure; solid] in the coupling operator's column order."""
    return np.concatenate([fld.flat(), np.asarray(u_full, dtype=float).ravel()])
