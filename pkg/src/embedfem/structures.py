"""Reduced-dimensional structure models sharing one fiber-bundle form.

A structure occupies a box-like region of 3D space described by a base
manifold (point, segment, or rectangle) crossed with a fiber (the body
itself, a cross-section, or a thickness segment).  Its displacement is

    psi(sigma, xi) = Sigma(sigma) + theta(sigma) x xi

with Sigma the base translation field and theta a rotation field acting
linearly on the fiber offset.  Three variants are provided:

    kind     base dim  fiber dim  rotations r
    rigid    0         3          3
    beam     1         2          3   (Timoshenko)
    shell    2         1          2   (Mindlin, in-plane rotations)

Setting r=0 suppresses rotations entirely (translation-only models, used
by the stability experiments).

Conventions.  Embeddings are affine isometries: x = origin + A p, where
the columns of A are the frame axes and p stacks fiber and base
coordinates (beam p = (xi1, xi2, sigma); shell p = (sigma1, sigma2, xi);
rigid p = xi).  The embedding Jacobian is therefore identically 1 and is
never computed.  Translations Sigma are stored in global components;
rotations theta are stored in frame components (theta_global = A[:, :r]
theta for the shell, A theta otherwise).  Curved bases and non-isometric
embeddings are out of scope.

The energy inner product of two structure displacement fields reduces to
closed-form base-line integrals involving the fiber measure |F|, the
fiber second moments, and a constant rotation-coupling tensor; see
structural_gram.  These closed forms agree with brute-force base x fiber
quadrature of the defining volume integral, which the test suite checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import BaseMesh, check_frame_axes, gauss_1d
from .solid import IsotropicMaterial


class OutOfDomainError(ValueError):
    """Raised when a point does not belong to the structure volume."""


@dataclass(frozen=True)
class Frame:
    """Affine placement: x = origin + axes @ p, axes columns orthonormal."""

    origin: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "axes", check_frame_axes(self.axes))

    @classmethod
    def identity(cls, origin=(0.0, 0.0, 0.0)):
        return cls(np.asarray(origin, dtype=float), np.eye(3))

    @classmethod
    def from_axis(cls, origin, axis) -> "Frame":
        """Frame whose third axis is `axis`; the others chosen deterministically."""
        a3 = np.asarray(axis, dtype=float)
        a3 = a3 / np.linalg.norm(a3)
        seed = np.eye(3)[np.argmin(np.abs(a3))]
        a1 = np.cross(seed, a3)
        a1 /= np.linalg.norm(a1)
        a2 = np.cross(a3, a1)
        return cls(np.asarray(origin, dtype=float), np.stack([a1, a2, a3], axis=1))


@dataclass(frozen=True)
class FiberSpec:
    """Cross-sectional fiber: shape, measure, and second moments.

    i_f is the m x m tensor of second moments about the centroid,
    integral of xi (x) xi over the fiber; it is symmetric positive
    definite for every supported shape.
    """

    dim: int
    shape: str
    params: tuple
    measure: float
    i_f: np.ndarray

    @classmethod
    def segment(cls, t: float) -> "FiberSpec":
        return cls(1, "segment", (float(t),), float(t), np.array([[t**3 / 12.0]]))

    @classmethod
    def rectangle(cls, b: float, h: float) -> "FiberSpec":
        i = np.diag([b**3 * h / 12.0, b * h**3 / 12.0])
        return cls(2, "rectangle", (float(b), float(h)), float(b * h), i)

    @classmethod
    def circle(cls, r: float) -> "FiberSpec":
        i = np.eye(2) * (np.pi * r**4 / 4.0)
        return cls(2, "circle", (float(r),), float(np.pi * r**2), i)

    @classmethod
    def box(cls, a: float, b: float, c: float) -> "FiberSpec":
        v = a * b * c
        i = v / 12.0 * np.diag([a**2, b**2, c**2])
        return cls(3, "box", (float(a), float(b), float(c)), float(v), i)

    def __post_init__(self):
        if self.measure <= 0:
            raise ValueError("fiber measure must be positive")
        i = np.asarray(self.i_f, dtype=float)
        if np.any(np.linalg.eigvalsh(0.5 * (i + i.T)) <= 0):
            raise ValueError("fiber second-moment tensor must be SPD")

    def gauss(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Tensor quadrature on the fiber, n points per axis.

        Weights sum exactly to the fiber measure.  Circles use a polar
        rule with n radial points and max(2n, 4) equally spaced angles,
        exact for quadratic moments.
        """
        if n < 1:
            raise ValueError("need at least one fiber point per axis")
        p, w = gauss_1d(n)
        if self.shape == "segment":
            (t,) = self.params
            return (0.5 * t * p)[:, None], 0.5 * t * w
        if self.shape == "rectangle":
            b, h = self.params
            pts = np.array([[0.5 * b * a, 0.5 * h * c] for c in p for a in p])
            wts = np.array([wa * wc * 0.25 * b * h for wc in w for wa in w])
            return pts, wts
        if self.shape == "circle":
            (r,) = self.params
            n_ang = max(2 * n, 4)
            phi = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
            rho = r * np.sqrt(0.5 * (p + 1.0))
            pts = np.array([[rr * np.cos(a), rr * np.sin(a)] for a in phi for rr in rho])
            wts = np.array([np.pi * r**2 * wq / (2.0 * n_ang) for _ in phi for wq in w])
            return pts, wts
        if self.shape == "box":
            a, b, c = self.params
            pts = np.array(
                [[0.5 * a * x, 0.5 * b * y, 0.5 * c * z] for z in p for y in p for x in p]
            )
            wts = np.array(
                [wx * wy * wz * 0.125 * a * b * c for wz in w for wy in w for wx in w]
            )
            return pts, wts
        raise ValueError(f"unknown fiber shape {self.shape!r}")

    def contains(self, xi, tol: float = 1e-12) -> bool:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.shape == "segment":
            return abs(xi[0]) <= 0.5 * self.params[0] + tol
        if self.shape == "rectangle":
            b, h = self.params
            return abs(xi[0]) <= 0.5 * b + tol and abs(xi[1]) <= 0.5 * h + tol
        if self.shape == "circle":
            return float(np.hypot(xi[0], xi[1])) <= self.params[0] + tol
        if self.shape == "box":
            return bool(np.all(np.abs(xi) <= 0.5 * np.asarray(self.params) + tol))
        raise ValueError(f"unknown fiber shape {self.shape!r}")


_KIND_LAYOUT = {
    # kind: (base dim, fiber dim, default r, base slots, fiber slots)
    "rigid": (0, 3, 3, (), (0, 1, 2)),
    "beam": (1, 2, 3, (2,), (0, 1)),
    "shell": (2, 1, 2, (0, 1), (2,)),
}


@dataclass
class StructureModel:
    """A concrete structure: geometry, material, and kinematic layout."""

    kind: str
    base: BaseMesh
    fiber: FiberSpec
    frame: Frame
    material: IsotropicMaterial
    ell: float = None
    r: int = None
    shear_correction: float = 5.0 / 6.0

    def __post_init__(self):
        if self.kind not in _KIND_LAYOUT:
            raise ValueError(f"unknown structure kind {self.kind!r}")
        base_dim, fiber_dim, default_r, base_slots, fiber_slots = _KIND_LAYOUT[self.kind]
        if self.base.dim != base_dim:
            raise ValueError(f"{self.kind} needs a base of dimension {base_dim}")
        if self.fiber.dim != fiber_dim:
            raise ValueError(f"{self.kind} needs a fiber of dimension {fiber_dim}")
        if self.base.dim + self.fiber.dim != 3:
            raise ValueError("base and fiber dimensions must sum to 3")
        if self.r is None:
            self.r = default_r
        if self.r not in (0, default_r):
            raise ValueError(f"{self.kind} supports r=0 or r={default_r}")
        if self.ell is None:
            # radius of gyration of the fiber
            self.ell = float(
                np.sqrt(np.trace(self.fiber.i_f) / (self.fiber.dim * self.fiber.measure))
            )
        if self.ell <= 0:
            raise ValueError("structural length must be positive")
        self._base_slots = base_slots
        self._fiber_slots = fiber_slots

    # -- layout ---------------------------------------------------------

    @property
    def base_slots(self) -> tuple:
        return self._base_slots

    @property
    def fiber_slots(self) -> tuple:
        return self._fiber_slots

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes

    @property
    def dofs_per_node(self) -> int:
        return 3 + self.r

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dofs_per_node

    @property
    def theta_axes(self) -> np.ndarray:
        """(3, r) matrix mapping frame rotation components to global vectors."""
        return self.frame.axes[:, : self.r]

    def rot_inertia_local(self) -> np.ndarray:
        """3x3 rotational inertia of the fiber in frame components."""
        p3 = np.zeros((3, 3))
        s = np.asarray(self.fiber_slots)
        p3[np.ix_(s, s)] = self.fiber.i_f
        return np.trace(self.fiber.i_f) * np.eye(3) - p3

    def grad_coupling_local(self) -> np.ndarray:
        """3x3 rotation pairing from the fiber-direction derivatives.

        Equals m I - sum of e_s (x) e_s over fiber directions: 2 I for
        rigid bodies, I + e3 (x) e3 for beams, I - n (x) n for shells.
        """
        g = self.fiber.dim * np.eye(3)
        for s in self.fiber_slots:
            g[s, s] -= 1.0
        return g

    # -- geometry -------------------------------------------------------

    def embed(self, sigma, xi) -> np.ndarray:
        """Map base/fiber coordinates to physical space; vectorized."""
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        k = max(sigma.shape[0], xi.shape[0])
        p = np.zeros((k, 3))
        for i, s in enumerate(self.base_slots):
            p[:, s] = sigma[:, i]
        for i, s in enumerate(self.fiber_slots):
            p[:, s] = xi[:, i]
        x = self.frame.origin + p @ self.frame.axes.T
        return x[0] if k == 1 else x

    def project(self, x):
        """Split a physical point into (sigma, xi); errors outside the volume."""
        x = np.asarray(x, dtype=float)
        p = self.frame.axes.T @ (x - self.frame.origin)
        sigma = p[list(self.base_slots)]
        xi = p[list(self.fiber_slots)]
        tol = 1e-12 * (1.0 + float(np.linalg.norm(x)))
        span = self.base.span
        for i in range(self.base.dim):
            if sigma[i] < span[i, 0] - tol or sigma[i] > span[i, 1] + tol:
                raise OutOfDomainError(f"point {x} outside the structure base span")
        if not self.fiber.contains(xi, tol):
            raise OutOfDomainError(f"point {x} outside the structure fiber")
        return sigma, xi

    def base_node_positions(self) -> np.ndarray:
        """Global coordinates of the base nodes (zero fiber offset)."""
        zero = np.zeros((self.n_nodes, self.fiber.dim))
        return np.atleast_2d(self.embed(self.base.nodes, zero))

    def base_element_span(self, e: int) -> np.ndarray:
        """(dim, 2) coordinate bounds of base element e."""
        s = self.base.nodes[self.base.elements[e]]
        return np.stack([s.min(axis=0), s.max(axis=0)], axis=1)

    def find_base_element(self, sigma) -> int:
        """Element containing base coordinates sigma (lowest index on ties)."""
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        span = self.base.span
        h = self.base.h_base
        idx = []
        for i in range(self.base.dim):
            n_el = int(round((span[i, 1] - span[i, 0]) / h[i]))
            t = (sigma[i] - span[i, 0]) / h[i]
            idx.append(int(np.clip(np.ceil(t) - 1, 0, n_el - 1)))
        if self.base.dim == 0:
            return 0
        if self.base.dim == 1:
            return idx[0]
        n1 = int(round((span[0, 1] - span[0, 0]) / h[0]))
        return idx[0] + n1 * idx[1]

    def base_basis(self, e: int, sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodes, shape values, and physical-derivative gradients at sigma.

        Returns (nodes (nn,), N (nn,), dN (nn, dim)).
        """
        if self.base.dim == 0:
            return np.array([0]), np.array([1.0]), np.zeros((1, 0))
        nodes = self.base.elements[e]
        coords = self.base.nodes[nodes]
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        if self.base.dim == 1:
            a, b = coords[0, 0], coords[1, 0]
            h = b - a
            s = (sigma[0] - a) / h
            n = np.array([1.0 - s, s])
            dn = np.array([[-1.0 / h], [1.0 / h]])
            return nodes, n, dn
        lo = coords.min(axis=0)
        h = coords.max(axis=0) - lo
        s = (sigma - lo) / h
        s1, s2 = s
        n = np.array([(1 - s1) * (1 - s2), s1 * (1 - s2), s1 * s2, (1 - s1) * s2])
        dn = np.array(
            [
                [-(1 - s2) / h[0], -(1 - s1) / h[1]],
                [(1 - s2) / h[0], -s1 / h[1]],
                [s2 / h[0], s1 / h[1]],
                [-s2 / h[0], (1 - s1) / h[1]],
            ]
        )
        return nodes, n, dn

    def base_rule(self, n: int):
        """Per-element Gauss rule on the base: yields (element, sigma, w).

        n points per base axis; the dim-0 base yields its single point
        with unit weight (integrals there are point evaluations).
        """
        if self.base.dim == 0:
            yield 0, np.zeros(0), 1.0
            return
        p, w = gauss_1d(n)
        for e in range(self.base.n_elements):
            span = self.base_element_span(e)
            mid = 0.5 * (span[:, 0] + span[:, 1])
            half = 0.5 * (span[:, 1] - span[:, 0])
            if self.base.dim == 1:
                for a, wa in zip(p, w):
                    yield e, np.array([mid[0] + half[0] * a]), float(wa * half[0])
            else:
                for a, wa in zip(p, w):
                    for b, wb in zip(p, w):
                        yield e, np.array(
                            [mid[0] + half[0] * a, mid[1] + half[1] * b]
                        ), float(wa * wb * half[0] * half[1])

    def coupling_base_points(self) -> int:
        """Points per base axis of the tie quadrature, matching the
        structural stiffness rule (midpoint for beams, 2x2 for shells)."""
        return 1 if self.kind in ("rigid", "beam") else 2

    # -- degrees of freedom ---------------------------------------------

    def dof_index(self, node: int, comp: int) -> int:
        return node * self.dofs_per_node + comp

    def sigma_dof_mask(self) -> np.ndarray:
        """Boolean mask of translation DOFs in the flat layout."""
        m = np.zeros(self.n_dofs, dtype=bool)
        for n in range(self.n_nodes):
            m[n * self.dofs_per_node: n * self.dofs_per_node + 3] = True
        return m


@dataclass
class GeneralizedField:
    """Nodal structure field: translations (global) and rotations (frame)."""

    sigma: np.ndarray  # (n_nodes, 3)
    theta: np.ndarray  # (n_nodes, r)

    def __post_init__(self):
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        self.theta = np.asarray(self.theta, dtype=float).reshape(self.sigma.shape[0], -1)

    @classmethod
    def zeros(cls, model: StructureModel) -> "GeneralizedField":
        return cls(np.zeros((model.n_nodes, 3)), np.zeros((model.n_nodes, model.r)))

    @classmethod
    def from_flat(cls, model: StructureModel, vec) -> "GeneralizedField":
        vec = np.asarray(vec, dtype=float).reshape(model.n_nodes, model.dofs_per_node)
        return cls(vec[:, :3].copy(), vec[:, 3:].copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.sigma, self.theta], axis=1).ravel()


def interpolate_field(model: StructureModel, fld: GeneralizedField, sigma):
    """Field values and base-derivatives at base coordinates sigma.

    Returns (Sigma (3,), theta (r,), dSigma (3, dim), dtheta (r, dim)).
    """
    e = model.find_base_element(sigma)
    nodes, n, dn = model.base_basis(e, sigma)
    sig = n @ fld.sigma[nodes]
    th = n @ fld.theta[nodes] if model.r else np.zeros(0)
    dsig = fld.sigma[nodes].T @ dn
    dth = fld.theta[nodes].T @ dn if model.r else np.zeros((0, model.base.dim))
    return sig, th, dsig, dth


def ansatz_eval(model: StructureModel, fld: GeneralizedField, sigma, xi) -> np.ndarray:
    """Displacement of the structure at base/fiber coordinates (global)."""
    sig, th, _, _ = interpolate_field(model, fld, sigma)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xi_glob = model.frame.axes[:, list(model.fiber_slots)] @ xi
    th_glob = model.theta_axes @ th
    return sig + np.cross(th_glob, xi_glob)


def ansatz_gradient(model: StructureModel, fld: GeneralizedField, sigma, xi) -> np.ndarray:
    """Displacement gradient in frame columns: column k is the derivative
    along frame axis a_k, components global.  The spatial gradient is
    G @ axes.T."""
    sig, th, dsig, dth = interpolate_field(model, fld, sigma)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    a = model.frame.axes
    xi_glob = a[:, list(model.fiber_slots)] @ xi
    th_glob = model.theta_axes @ th
    g = np.zeros((3, 3))
    for i, s in enumerate(model.base_slots):
        dth_glob = model.theta_axes @ dth[:, i]
        g[:, s] = dsig[:, i] + np.cross(dth_glob, xi_glob)
    for s in model.fiber_slots:
        g[:, s] += np.cross(th_glob, a[:, s])
    return g


def rigid_motion_field(model: StructureModel, translation, rotation) -> GeneralizedField:
    """Generalized field of the rigid motion u(x) = c + omega x x.

    Representable exactly by the ansatz for r > 0 (shells capture the
    in-plane part of omega, which is all that acts on their fibers).
    """
    c = np.asarray(translation, dtype=float)
    omega = np.asarray(rotation, dtype=float)
    pos = model.base_node_positions()
    sigma = c + np.cross(np.broadcast_to(omega, pos.shape), pos)
    theta = np.tile(model.theta_axes.T @ omega, (model.n_nodes, 1))
    return GeneralizedField(sigma, theta)


# -- energy inner product ----------------------------------------------


def _gram_node_blocks(model: StructureModel, ell: float):
    """Weights of the closed-form inner product at one base point.

    Returns callables producing the (dofs x dofs) block from shape values
    and gradients; split out so dim-0 bases reuse the same coefficients.
    """
    f = model.fiber.measure
    j_loc = model.rot_inertia_local()[: model.r, : model.r]
    g_loc = model.grad_coupling_local()[: model.r, : model.r]
    return f, j_loc, g_loc


def structural_gram(
    model: StructureModel,
    ell: float | None = None,
    region=None,
) -> sp.csr_matrix:
    """Gram matrix of the structural energy inner product.

    Implements the reduced closed form of the volume H1 product of two
    ansatz displacement fields over base x fiber: fiber integrals appear
    through |F|, the rotational inertia, and the constant rotation
    pairing of grad_coupling_local; base integrals are integrated exactly
    (2-point Gauss per axis on linear/bilinear fields).

    `region` restricts to a subset of base elements (indices or mask).
    """
    if ell is None:
        ell = model.ell
    f, j_loc, g_loc = _gram_node_blocks(model, ell)
    d = model.dofs_per_node
    rot_val = j_loc + ell**2 * f * g_loc
    rows, cols, vals = [], [], []

    if model.base.dim == 0:
        block = np.zeros((d, d))
        block[:3, :3] = f * np.eye(3)
        if model.r:
            block[3:, 3:] = rot_val
        idx = np.arange(d)
        rr, cc = np.meshgrid(idx, idx, indexing="ij")
        return sp.coo_matrix((block.ravel(), (rr.ravel(), cc.ravel())), shape=(d, d)).tocsr()

    if region is None:
        active = np.ones(model.base.n_elements, dtype=bool)
    else:
        active = np.zeros(model.base.n_elements, dtype=bool)
        active[np.asarray(region)] = True

    for e, sigma, w in model.base_rule(2):
        if not active[e]:
            continue
        nodes, n, dn = model.base_basis(e, sigma)
        nn = len(nodes)
        mass = np.outer(n, n)
        stiff = dn @ dn.T
        block = np.zeros((nn * d, nn * d))
        for a in range(nn):
            for b in range(nn):
                ba, bb = a * d, b * d
                block[ba: ba + 3, bb: bb + 3] = (
                    f * (mass[a, b] + ell**2 * stiff[a, b]) * np.eye(3)
                )
                if model.r:
                    block[ba + 3: ba + d, bb + 3: bb + d] = (
                        mass[a, b] * rot_val + ell**2 * stiff[a, b] * j_loc
                    )
        gdofs = (nodes[:, None] * d + np.arange(d)).ravel()
        rows.append(np.repeat(gdofs, nn * d))
        cols.append(np.tile(gdofs, nn * d))
        vals.append(w * block.ravel())
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(model.n_dofs, model.n_dofs),
    ).tocsr()
    m.sum_duplicates()
    return m


def structural_inner_product(
    model: StructureModel,
    f1: GeneralizedField,
    f2: GeneralizedField,
    region=None,
    ell: float | None = None,
) -> float:
    """Closed-form energy inner product of two generalized fields."""
    m = structural_gram(model, ell=ell, region=region)
    return float(f1.flat() @ (m @ f2.flat()))


def y_norm_gram(model: StructureModel, ell: float | None = None) -> sp.csr_matrix:
    """Gram of the solution-space norm on generalized fields.

    |Sigma|_H1^2 + ell^2 |theta|_H1^2 with plain (unit-length) H1 norms
    on the base; the dim-0 base degenerates to point evaluation.
    """
    if ell is None:
        ell = model.ell
    d = model.dofs_per_node
    if model.base.dim == 0:
        block = np.eye(d)
        block[3:, 3:] *= ell**2
        return sp.csr_matrix(block)
    rows, cols, vals = [], [], []
    for e, sigma, w in model.base_rule(2):
        nodes, n, dn = model.base_basis(e, sigma)
        nn = len(nodes)
        h1 = np.outer(n, n) + dn @ dn.T
        block = np.zeros((nn * d, nn * d))
        for a in range(nn):
            for b in range(nn):
                ba, bb = a * d, b * d
                block[ba: ba + 3, bb: bb + 3] = h1[a, b] * np.eye(3)
                if model.r:
                    block[ba + 3: ba + d, bb + 3: bb + d] = ell**2 * h1[a, b] * np.eye(model.r)
        gdofs = (nodes[:, None] * d + np.arange(d)).ravel()
        rows.append(np.repeat(gdofs, nn * d))
        cols.append(np.tile(gdofs, nn * d))
        vals.append(w * block.ravel())
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(model.n_dofs, model.n_dofs),
    ).tocsr()
    m.sum_duplicates()
    return m


# -- stiffness ----------------------------------------------------------


def structure_stiffness(model: StructureModel) -> sp.csr_matrix:
    """Stiffness of the structure over its generalized DOFs.

    rigid: zero (a rigid body stores no strain energy).
    beam:  2-node linear Timoshenko; axial EA, bending E I per principal
           axis, torsion G J with J the polar moment, shear k G A; a
           single midpoint integration point keeps the shear term from
           locking.
    shell: 4-node bilinear Mindlin; membrane and bending at 2x2 Gauss,
           transverse shear k G t at the element center (selective
           reduced integration).
    r=0:   translation-only gradient form |F| E int DSigma . DGamma.
    """
    n_dofs = model.n_dofs
    if model.kind == "rigid":
        return sp.csr_matrix((n_dofs, n_dofs))
    if model.r == 0:
        return _translation_only_stiffness(model)
    if model.kind == "beam":
        return _beam_stiffness(model)
    return _shell_stiffness(model)


def _assemble_elements(model, element_matrices) -> sp.csr_matrix:
    d = model.dofs_per_node
    rows, cols, vals = [], [], []
    for e, ke in element_matrices:
        nodes = model.base.elements[e]
        gdofs = (nodes[:, None] * d + np.arange(d)).ravel()
        rows.append(np.repeat(gdofs, len(gdofs)))
        cols.append(np.tile(gdofs, len(gdofs)))
        vals.append(ke.ravel())
    k = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(model.n_dofs, model.n_dofs),
    ).tocsr()
    k.sum_duplicates()
    return k


def _translation_only_stiffness(model: StructureModel) -> sp.csr_matrix:
    coeff = model.fiber.measure * model.material.E

    def elements():
        for e in range(model.base.n_elements):
            ke = None
            for ee, sigma, w in _element_rule(model, e, 2):
                nodes, _, dn = model.base_basis(ee, sigma)
                nn = len(nodes)
                stiff = dn @ dn.T
                blk = np.kron(stiff, np.eye(3)) * coeff * w
                ke = blk if ke is None else ke + blk
            yield e, ke

    return _assemble_elements(model, elements())


def _element_rule(model, e, n):
    for ee, sigma, w in model.base_rule(n):
        if ee == e:
            yield ee, sigma, w


def _beam_stiffness(model: StructureModel) -> sp.csr_matrix:
    mat = model.material
    area = model.fiber.measure
    p = model.fiber.i_f  # second moments: p[0,0] = int xi1^2, etc.
    e_mod, g_mod = mat.E, mat.shear_modulus
    kga = model.shear_correction * g_mod * area
    bend = e_mod * np.array([[p[1, 1], -p[0, 1]], [-p[0, 1], p[0, 0]]])
    gj = g_mod * np.trace(p)
    at = model.frame.axes.T

    def elements():
        for e in range(model.base.n_elements):
            span = model.base_element_span(e)
            h = span[0, 1] - span[0, 0]
            mid = np.array([0.5 * (span[0, 0] + span[0, 1])])
            _, n, dn = model.base_basis(e, mid)
            b = np.zeros((6, 12))
            for a in range(2):
                c = 6 * a
                b[0, c + 2] = dn[a, 0]          # axial u3'
                b[1, c + 3] = dn[a, 0]          # curvature about a1
                b[2, c + 4] = dn[a, 0]          # curvature about a2
                b[3, c + 5] = dn[a, 0]          # twist rate
                b[4, c + 0] = dn[a, 0]          # shear u1' - t2
                b[4, c + 4] = -n[a]
                b[5, c + 1] = dn[a, 0]          # shear u2' + t1
                b[5, c + 3] = n[a]
            d_mat = np.zeros((6, 6))
            d_mat[0, 0] = e_mod * area
            d_mat[1:3, 1:3] = bend
            d_mat[3, 3] = gj
            d_mat[4, 4] = d_mat[5, 5] = kga
            ke_loc = h * (b.T @ d_mat @ b)
            t = np.zeros((12, 12))
            for a in range(2):
                t[6 * a: 6 * a + 3, 6 * a: 6 * a + 3] = at
                t[6 * a + 3: 6 * a + 6, 6 * a + 3: 6 * a + 6] = np.eye(3)
            yield e, t.T @ ke_loc @ t

    return _assemble_elements(model, elements())


def _shell_stiffness(model: StructureModel) -> sp.csr_matrix:
    mat = model.material
    t = model.fiber.params[0]  # thickness
    e_mod, nu = mat.E, mat.nu
    cm = e_mod / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])
    dm = t * cm
    db = t**3 / 12.0 * cm
    ds = model.shear_correction * mat.shear_modulus * t * np.eye(2)
    at = model.frame.axes.T

    def elements():
        for e in range(model.base.n_elements):
            span = model.base_element_span(e)
            area = (span[0, 1] - span[0, 0]) * (span[1, 1] - span[1, 0])
            ke_loc = np.zeros((20, 20))
            # membrane + bending, 2x2 Gauss
            for _, sigma, w in _element_rule(model, e, 2):
                _, n, dn = model.base_basis(e, sigma)
                bm = np.zeros((3, 20))
                bb = np.zeros((3, 20))
                for a in range(4):
                    c = 5 * a
                    bm[0, c + 0] = dn[a, 0]
                    bm[1, c + 1] = dn[a, 1]
                    bm[2, c + 0] = dn[a, 1]
                    bm[2, c + 1] = dn[a, 0]
                    # curvatures of phi = (t2, -t1)
                    bb[0, c + 4] = dn[a, 0]
                    bb[1, c + 3] = -dn[a, 1]
                    bb[2, c + 4] = dn[a, 1]
                    bb[2, c + 3] = -dn[a, 0]
                ke_loc += w * (bm.T @ dm @ bm + bb.T @ db @ bb)
            # transverse shear, element center only
            mid = 0.5 * (span[:, 0] + span[:, 1])
            _, n, dn = model.base_basis(e, mid)
            bs = np.zeros((2, 20))
            for a in range(4):
                c = 5 * a
                bs[0, c + 2] = dn[a, 0]
                bs[0, c + 4] = n[a]
                bs[1, c + 2] = dn[a, 1]
                bs[1, c + 3] = -n[a]
            ke_loc += area * (bs.T @ ds @ bs)
            tmat = np.zeros((20, 20))
            for a in range(4):
                tmat[5 * a: 5 * a + 3, 5 * a: 5 * a + 3] = at
                tmat[5 * a + 3: 5 * a + 5, 5 * a + 3: 5 * a + 5] = np.eye(2)
            yield e, tmat.T @ ke_loc @ tmat

    return _assemble_elements(model, elements())


# -- convenience constructors ------------------------------------------


def make_rigid_body(fiber: FiberSpec, frame: Frame, material: IsotropicMaterial, **kw):
    from .mesh import build_base_mesh

    return StructureModel("rigid", build_base_mesh("point", placement=frame), fiber, frame, material, **kw)


def make_beam(
    length: float,
    divisions: int,
    fiber: FiberSpec,
    frame: Frame,
    material: IsotropicMaterial,
    **kw,
):
    """Straight beam along the frame's third axis, base span [0, length]."""
    from .mesh import build_base_mesh

    base = build_base_mesh("line", placement=frame, extent=length, divisions=divisions)
    return StructureModel("beam", base, fiber, frame, material, **kw)


def make_shell(
    extent,
    divisions,
    thickness: float,
    frame: Frame,
    material: IsotropicMaterial,
    **kw,
):
    """Flat shell spanned by the frame's first two axes, normal the third."""
    from .mesh import build_base_mesh

    base = build_base_mesh("quad_grid", placement=frame, extent=extent, divisions=divisions)
    return StructureModel(
        "shell", base, FiberSpec.segment(thickness), frame, material, **kw
    )
