"""Numerical probes of the tied-problem coercivity and its mesh rule.

The tied formulation stays well-posed as long as the stiffness form is
coercive on the kernel of the tie operator.  That constant is estimated
here directly: columns spanning ker B are extracted by dense SVD and the
smallest generalized eigenvalue of the reduced stiffness against the
reduced solution-space Gram is reported.

The demonstration problem is a unit cube stretched between a fixed and a
displaced face with a stiff mid-plane plate.  With the plate mesh at
most as fine as the solid mesh the solve reproduces the plain solid
solution; a coarser free plate triggers the instability (wild deviation
from the solid-only field); giving the plate its own Dirichlet edge
restores stability regardless of mesh ratio.  Verdicts use a 10%
relative H1 deviation threshold, a numeric stand-in for the visual
classification this experiment is usually given.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import build_hex_grid
from .problem import CoupledProblem, EmbeddedStructure
from .solid import DofMap, IsotropicMaterial, assemble_solid_full, reduce_to_free, solid_h1_gram
from .structures import Frame, make_shell, y_norm_gram

logger = logging.getLogger(__name__)

DEVIATION_THRESHOLD = 0.10


@dataclass
class StabilityReport:
    h_solid: float
    h_structure: float
    stiffness_ratio: float
    alpha: float  # kernel coercivity estimate; nan when not computed
    deviation: float  # relative H1 distance to the solid-only solution
    verdict: str  # "stable" | "unstable", from the deviation threshold

    def row(self) -> dict:
        return {
            "h_solid": self.h_solid,
            "h_structure": self.h_structure,
            "stiffness_ratio": self.stiffness_ratio,
            "alpha": self.alpha,
            "deviation": self.deviation,
            "verdict": self.verdict,
        }


def kernel_coercivity(a_mat, b_mat, m_mat) -> float:
    """Smallest Rayleigh quotient of A against M on the kernel of B.

    Dense computation: suitable for problems with at most a few thousand
    primal unknowns.  All-zero rows of B are dropped with a warning
    (they carry no constraint).
    """
    a = np.asarray(a_mat.todense() if sp.issparse(a_mat) else a_mat, dtype=float)
    b = np.asarray(b_mat.todense() if sp.issparse(b_mat) else b_mat, dtype=float)
    m = np.asarray(m_mat.todense() if sp.issparse(m_mat) else m_mat, dtype=float)
    if a.shape[0] > 4000:
        raise ValueError("kernel coercivity estimation is dense-only; problem too large")
    row_norm = np.abs(b).max(axis=1) if b.size else np.zeros(0)
    zero_rows = row_norm == 0
    if np.any(zero_rows):
        logger.warning("dropping %d all-zero constraint rows", int(zero_rows.sum()))
        b = b[~zero_rows]
    z = sla.null_space(b) if b.size else np.eye(a.shape[0])
    if z.shape[1] == 0:
        return np.inf
    az = z.T @ a @ z
    mz = z.T @ m @ z
    w = sla.eigh(0.5 * (az + az.T), 0.5 * (mz + mz.T), eigvals_only=True)
    return float(w[0])


def _demo_pieces(h_solid, h_structure, plate_dirichlet, stiffness_ratio, thickness, delta, n_fiber):
    n = int(round(1.0 / h_solid))
    ns = int(round(1.0 / h_structure))
    mesh = build_hex_grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (n, n, n))
    mat = IsotropicMaterial(1.0, 0.0)
    dofmap = DofMap.build(mesh.n_nodes, [
        (mesh.node_sets["xmin"], [0, 1, 2], 0.0),
        (mesh.node_sets["xmax"], [0, 1, 2], 0.0),
    ])
    dofmap.fixed_values[mesh.node_sets["xmax"], 0] = delta
    plate = make_shell(
        (1.0, 1.0), (ns, ns), thickness,
        Frame((0.0, 0.0, 0.5), np.eye(3)),
        IsotropicMaterial(stiffness_ratio, 0.0),
    )
    fixed = []
    if plate_dirichlet:
        left = np.where(plate.base.nodes[:, 0] < 1e-12)[0]
        fixed = [(left, list(range(plate.dofs_per_node)), 0.0)]
    es = EmbeddedStructure(plate, n_fiber=n_fiber, fixed=fixed)
    prob = CoupledProblem(mesh, mat, dofmap, np.zeros(3 * mesh.n_nodes), [es])
    return prob


def demo_coercivity(
    h_solid: float,
    h_structure: float,
    plate_dirichlet: bool = False,
    stiffness_ratio: float = 64.0,
    thickness: float = 0.25,
    n_fiber: int = 2,
) -> float:
    """Kernel coercivity of the demonstration problem.

    A is the block stiffness on free DOFs, M the solution-space Gram
    (plain H1 for the solid, base H1 with the structural length scaling
    the rotations), B the tie restricted to the free DOFs.
    """
    prob = _demo_pieces(h_solid, h_structure, plate_dirichlet, stiffness_ratio,
                        thickness, 0.0, n_fiber)
    system, ops, free_masks = prob.assemble()
    es = prob.structures[0]
    k_uu = system.kkt[: system.n_solid, : system.n_solid]
    sl = system.struct_slices[0]
    k_yy = system.kkt[sl, sl]
    a = sp.block_diag([k_uu, k_yy], format="csr")
    m_solid = solid_h1_gram(prob.mesh, ell=1.0)
    free = prob.dofmap.free_flat
    m_y = y_norm_gram(es.model)[free_masks[0]][:, free_masks[0]]
    m = sp.block_diag([m_solid[free][:, free], m_y], format="csr")
    n_mult = system.kkt.shape[0] - system.n_primal
    b = system.kkt[system.n_primal:, : system.n_primal]
    return kernel_coercivity(a, b, m)


def traction_demo(
    h_solid: float,
    h_structure: float,
    plate_dirichlet: bool = False,
    stiffness_ratio: float = 64.0,
    thickness: float = 0.25,
    delta: float = 0.1,
    n_fiber: int = 2,
    with_alpha: bool = None,
) -> StabilityReport:
    """Solve the stretched-cube demonstration and classify it.

    The deviation is the relative H1 distance between the coupled solid
    field and the solid-only solution of the same problem (both live on
    the same mesh, so the distance uses the solid H1 Gram directly).
    """
    prob = _demo_pieces(h_solid, h_structure, plate_dirichlet, stiffness_ratio,
                        thickness, delta, n_fiber)
    sol = prob.solve()
    k = assemble_solid_full(prob.mesh, prob.material)
    kff, ff = reduce_to_free(k, prob.dofmap, prob.f_solid_full)
    u0 = prob.dofmap.expand(spla.spsolve(kff.tocsc(), ff))
    gram = solid_h1_gram(prob.mesh, ell=1.0)
    d = sol.u_full - u0
    deviation = float(np.sqrt((d @ (gram @ d)) / (u0 @ (gram @ u0))))
    if with_alpha is None:
        with_alpha = round(1.0 / h_solid) <= 6
    alpha = (
        demo_coercivity(h_solid, h_structure, plate_dirichlet, stiffness_ratio,
                        thickness, n_fiber)
        if with_alpha
        else float("nan")
    )
    verdict = "unstable" if deviation > DEVIATION_THRESHOLD else "stable"
    return StabilityReport(
        h_solid=h_solid,
        h_structure=h_structure,
        stiffness_ratio=stiffness_ratio,
        alpha=alpha,
        deviation=deviation,
        verdict=verdict,
    )


def stability_sweep(h_ratios, stiffness_ratios, h_solid: float = 1.0 / 3.0, **kw):
    """Grid of demonstration runs over mesh and stiffness ratios.

    h_ratio = h_structure / h_solid; reports are ordered like the input
    grid (stiffness varying fastest).
    """
    reports = []
    for hr in h_ratios:
        for sr in stiffness_ratios:
            reports.append(
                traction_demo(h_solid, hr * h_solid, stiffness_ratio=sr, **kw)
            )
    return reports


def sweep_csv(reports) -> str:
    cols = ["h_solid", "h_structure", "stiffness_ratio", "alpha", "deviation", "verdict"]
    lines = [",".join(cols)]
    for r in reports:
        row = r.row()
        lines.append(",".join(
            row[c] if isinstance(row[c], str) else f"{row[c]:.17g}" for c in cols
        ))
    return "\n".join(lines) + "\n"
