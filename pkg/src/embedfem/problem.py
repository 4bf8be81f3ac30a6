"""Orchestration of coupled solid/structure problems.

Gathers mesh, materials, boundary conditions, loads, and any number of
embedded structures into one KKT solve, and expands the raw solution
back into full nodal fields.  The benchmark drivers, the stability
experiments, and the periodic-cell study all run through this layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import coupling as cpl
from . import saddle
from .mesh import SolidMesh
from .solid import DofMap, assemble_solid_full, reduce_to_free
from .structures import GeneralizedField, StructureModel, structure_stiffness


@dataclass
class EmbeddedStructure:
    """One structure tied into the solid.

    fixed: structure-side Dirichlet as (node indices, local dof
    components in 0..2+r, value) triples.  rotation_multipliers=False
    removes the rotation rows of the tie (diagnostic mode; combine with
    a rotation gauge fix to keep the system regular).
    """

    model: StructureModel
    n_fiber: int = 2
    ell_c: float | None = None
    fixed: list = field(default_factory=list)
    rotation_multipliers: bool = True
    f_struct: np.ndarray | None = None

    def free_mask(self) -> np.ndarray:
        m = np.ones(self.model.n_dofs, dtype=bool)
        for nodes, comps, _ in self.fixed:
            for n in np.atleast_1d(nodes):
                for c in comps:
                    m[self.model.dof_index(int(n), int(c))] = False
        return m

    def fixed_values(self) -> np.ndarray:
        v = np.zeros(self.model.n_dofs)
        for nodes, comps, value in self.fixed:
            for n in np.atleast_1d(nodes):
                for c in comps:
                    v[self.model.dof_index(int(n), int(c))] = value
        return v


@dataclass
class CoupledSolution:
    """Fully expanded solution of a coupled problem."""

    u_full: np.ndarray  # (3 n_nodes,) solid displacement
    fields: list[GeneralizedField]
    multipliers: list[np.ndarray]  # flat multiplier vectors per structure
    diagnostics: dict

    def field(self, i: int = 0) -> GeneralizedField:
        return self.fields[i]


@dataclass
class CoupledProblem:
    """A solid with Dirichlet constraints, loads, and embedded structures."""

    mesh: SolidMesh
    material: object  # IsotropicMaterial or a per-element sequence
    dofmap: DofMap
    f_solid_full: np.ndarray
    structures: list[EmbeddedStructure] = field(default_factory=list)
    locator: object = None
    affine_strain: np.ndarray | None = None

    def assemble(self):
        k_full = assemble_solid_full(self.mesh, self.material)
        k_uu, f_u = reduce_to_free(k_full, self.dofmap, self.f_solid_full)
        entries = []
        ops = []
        free_masks = []
        for es in self.structures:
            model = es.model
            quad = cpl.build_fiber_quadrature(model, self.mesh, es.n_fiber, locator=self.locator)
            op = cpl.assemble_coupling(
                quad, self.mesh, model, ell_c=es.ell_c, affine_strain=self.affine_strain
            )
            if not es.rotation_multipliers:
                op = op.drop_rotation_rows()
            b_red, g = op.restrict_solid(self.dofmap)
            k_y = structure_stiffness(model)
            f_y = es.f_struct if es.f_struct is not None else np.zeros(model.n_dofs)
            free_y = es.free_mask()
            if not free_y.all():
                y_fix = es.fixed_values()
                y_fix[free_y] = 0.0
                n_y = model.n_dofs
                g = g - b_red[:, :n_y] @ y_fix
                f_y = np.asarray(f_y)[free_y] - k_y[free_y][:, ~free_y] @ y_fix[~free_y]
                k_y = k_y[free_y][:, free_y]
                b_red = sp.hstack(
                    [b_red[:, :n_y][:, free_y], b_red[:, n_y:]], format="csr"
                )
            entries.append((k_y.tocsr(), np.asarray(f_y, dtype=float), b_red.tocsr(), g))
            ops.append(op)
            free_masks.append(free_y)
        system = saddle.assemble_saddle(k_uu, f_u, entries)
        return system, ops, free_masks

    def solve(self, tol: float = 1e-10) -> CoupledSolution:
        system, ops, free_masks = self.assemble()
        sol = saddle.solve(system, tol=tol)
        u_full = self.dofmap.expand(sol.u)
        fields, multipliers, constraint_residuals = [], [], []
        for i, es in enumerate(self.structures):
            y = es.fixed_values()
            y[free_masks[i]] = sol.structure(i)
            fields.append(GeneralizedField.from_flat(es.model, y))
            multipliers.append(sol.multiplier(i))
            x_cols = np.concatenate([y, u_full])
            constraint_residuals.append(cpl.kernel_residual(ops[i], x_cols))
        a_val, f_val = sol.energy_identity()
        diagnostics = {
            "solver_residual": sol.residual,
            "constraint_residuals": constraint_residuals,
            "energy_a": a_val,
            "energy_f": f_val,
            "n_unknowns": system.n_unknowns,
        }
        return CoupledSolution(
            u_full=u_full, fields=fields, multipliers=multipliers, diagnostics=diagnostics
        )
