"""The four coupled benchmark problems and their reference solutions.

All four share a prismatic or cubic solid with zero Poisson ratio:

    bending       1x1x5 prism, clamped base, flexure traction on the tip
                  face, stiff square-section beam on the axis
    torsion       same solid, torsional tip traction; the tie is carried
                  entirely by rotation multipliers
    shell_bending 1x1x5 prism, transverse tip load, stiff mid-plane shell
    shell_shear   unit cube under antisymmetric face shear, mid-plane
                  shell whose director rotates while its base stays put

References are solid-only meshes fine enough for desk-scale runs; the
bending reference models the stiff core with solid elements directly.
The displacement-mismatch metric integrates value and gradient
differences at the reference quadrature points:

    mismatch^2 = int(|du|^2 + ell^2 |D du|^2) / int(|u|^2 + ell^2 |Du|^2)

with ell = 1 (plain H1 weighting) unless stated otherwise.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .config import MetricTable
from .mesh import SolidMesh, build_hex_grid, gauss_1d, hex8_shape
from .problem import CoupledProblem, EmbeddedStructure
from .solid import (
    DofMap,
    IsotropicMaterial,
    assemble_solid_full,
    eval_displacement,
    reduce_to_free,
    traction_load,
)
from .structures import FiberSpec, Frame, make_beam, make_shell

PRISM_ORIGIN = (-0.5, -0.5, 0.0)
PRISM_EXTENT = (1.0, 1.0, 5.0)

# shell frames: base axes first, normal last (right-handed)
_SHELL_AXES = np.stack([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], axis=1)


def solve_solid_only(mesh, mat, dofmap, f_full) -> np.ndarray:
    """Direct solve of the plain solid problem; returns the full vector."""
    k = assemble_solid_full(mesh, mat)
    kff, ff = reduce_to_free(k, dofmap, f_full)
    return dofmap.expand(spla.spsolve(kff.tocsc(), ff))


# -- mismatch metric ----------------------------------------------------


def _reference_quadrature(mesh: SolidMesh):
    p, w = gauss_1d(2)
    xi = np.array([[a, b, c] for c in p for b in p for a in p])
    wts = np.array([wa * wb * wc for wc in w for wb in w for wa in w])
    n = hex8_shape(xi)  # (8 gp, 8 nodes)
    coords = mesh.nodes[mesh.hexes]  # (nel, 8, 3)
    pts = np.einsum("qa,ear->eqr", n, coords).reshape(-1, 3)
    detj = np.prod(mesh.h) / 8.0  # structured axis-aligned grid
    weights = np.tile(wts * detj, mesh.n_hexes)
    return pts, weights


def h1_mismatch(
    ref_mesh: SolidMesh,
    u_ref: np.ndarray,
    other_mesh: SolidMesh,
    u_other: np.ndarray,
    ell: float = 1.0,
) -> float:
    """Relative H1 distance of a coarse solution from a reference one.

    Both fields are evaluated at the reference-mesh quadrature points;
    the difference is integrated there and normalized by the reference
    norm.
    """
    pts, w = _reference_quadrature(ref_mesh)
    v_ref, g_ref = eval_displacement(ref_mesh, u_ref, pts)
    v_oth, g_oth = eval_displacement(other_mesh, u_other, pts)
    dv, dg = v_oth - v_ref, g_oth - g_ref
    num = np.sum(w * (np.sum(dv**2, axis=1) + ell**2 * np.sum(dg**2, axis=(1, 2))))
    den = np.sum(w * (np.sum(v_ref**2, axis=1) + ell**2 * np.sum(g_ref**2, axis=(1, 2))))
    return float(np.sqrt(num / den))


# -- bending ------------------------------------------------------------

BENDING = {
    "e_solid": 10.0,
    "e_beam": 5120.0,
    "moment_coefficient": -0.0025,  # traction t3 = -12 M x1
    "core_side": 0.25,
}


def bending_problem(divisions=(2, 2, 10), n_beam=10, n_fiber=2, ell_c=None) -> CoupledProblem:
    mesh = build_hex_grid(PRISM_ORIGIN, PRISM_EXTENT, divisions)
    mat = IsotropicMaterial(BENDING["e_solid"], 0.0)
    dofmap = DofMap.build(mesh.n_nodes, [(mesh.node_sets["zmin"], [0, 1, 2], 0.0)])
    m = BENDING["moment_coefficient"]
    f = traction_load(mesh, "zmax", lambda x: np.array([0.0, 0.0, -12.0 * m * x[0]]))
    side = BENDING["core_side"]
    beam = make_beam(
        PRISM_EXTENT[2], n_beam, FiberSpec.rectangle(side, side),
        Frame.identity(), IsotropicMaterial(BENDING["e_beam"], 0.0),
    )
    return CoupledProblem(mesh, mat, dofmap, f, [EmbeddedStructure(beam, n_fiber=n_fiber, ell_c=ell_c)])


def bending_reference(divisions=(8, 8, 160)):
    """Solid-only model of the inhomogeneous prism (stiff square core).

    Element size must divide the core half-width so the core is meshed
    exactly.  Returns (mesh, u_full).
    """
    mesh = build_hex_grid(PRISM_ORIGIN, PRISM_EXTENT, divisions)
    half = BENDING["core_side"] / 2.0
    centers = mesh.nodes[mesh.hexes].mean(axis=1)
    core = (np.abs(centers[:, 0]) < half) & (np.abs(centers[:, 1]) < half)
    soft = IsotropicMaterial(BENDING["e_solid"], 0.0)
    stiff = IsotropicMaterial(BENDING["e_beam"], 0.0)
    mats = [stiff if c else soft for c in core]
    dofmap = DofMap.build(mesh.n_nodes, [(mesh.node_sets["zmin"], [0, 1, 2], 0.0)])
    m = BENDING["moment_coefficient"]
    f = traction_load(mesh, "zmax", lambda x: np.array([0.0, 0.0, -12.0 * m * x[0]]))
    k = assemble_solid_full(mesh, mats)
    kff, ff = reduce_to_free(k, dofmap, f)
    return mesh, dofmap.expand(spla.spsolve(kff.tocsc(), ff))


def max_abs_component_on_face(mesh: SolidMesh, u_full, comp: int, axis: int, value: float):
    sel = np.abs(mesh.nodes[:, axis] - value) < 1e-9
    return float(np.abs(u_full.reshape(-1, 3)[sel, comp]).max())


# -- torsion ------------------------------------------------------------

TORSION = {"e_solid": 10.0, "e_beam": 5120.0, "tau": 0.05, "core_side": 0.25}


def torsion_problem(
    divisions=(4, 4, 8), n_beam=8, n_fiber=2, rotation_multipliers=True
) -> CoupledProblem:
    mesh = build_hex_grid(PRISM_ORIGIN, PRISM_EXTENT, divisions)
    mat = IsotropicMaterial(TORSION["e_solid"], 0.0)
    dofmap = DofMap.build(mesh.n_nodes, [(mesh.node_sets["zmin"], [0, 1, 2], 0.0)])
    tau = TORSION["tau"]
    f = traction_load(mesh, "zmax", lambda x: tau * np.array([-x[1], x[0], 0.0]))
    side = TORSION["core_side"]
    beam = make_beam(
        PRISM_EXTENT[2], n_beam, FiberSpec.rectangle(side, side),
        Frame.identity(), IsotropicMaterial(TORSION["e_beam"], 0.0),
    )
    fixed = []
    if not rotation_multipliers:
        # without rotation ties the constant axial spin of the beam is a
        # zero-energy gauge mode; pin the rotations of one base node
        fixed = [(np.array([0]), [3, 4, 5], 0.0)]
    return CoupledProblem(
        mesh, mat, dofmap, f,
        [EmbeddedStructure(beam, n_fiber=n_fiber,
                           rotation_multipliers=rotation_multipliers, fixed=fixed)],
    )


# -- shell bending ------------------------------------------------------

SHELL_BENDING = {"e_solid": 10.0, "e_shell": 640.0, "thickness": 0.25, "force": 5e-3}


def shell_bending_problem(divisions=(4, 4, 20), shell_divisions=(20, 4), n_fiber=2) -> CoupledProblem:
    mesh = build_hex_grid(PRISM_ORIGIN, PRISM_EXTENT, divisions)
    mat = IsotropicMaterial(SHELL_BENDING["e_solid"], 0.0)
    dofmap = DofMap.build(mesh.n_nodes, [(mesh.node_sets["zmin"], [0, 1, 2], 0.0)])
    p = SHELL_BENDING["force"] / (PRISM_EXTENT[0] * PRISM_EXTENT[1])
    f = traction_load(mesh, "zmax", lambda x: np.array([0.0, p, 0.0]))
    # mid-plane shell spanned by (x3, x1), normal x2, through the axis
    shell = make_shell(
        (PRISM_EXTENT[2], PRISM_EXTENT[0]), shell_divisions, SHELL_BENDING["thickness"],
        Frame((PRISM_ORIGIN[0], 0.0, 0.0), _SHELL_AXES),
        IsotropicMaterial(SHELL_BENDING["e_shell"], 0.0),
    )
    return CoupledProblem(mesh, mat, dofmap, f, [EmbeddedStructure(shell, n_fiber=n_fiber)])


def shell_bending_reference(divisions=(8, 8, 160)):
    """Solid-only model of the prism with the stiff mid-plane slab."""
    mesh = build_hex_grid(PRISM_ORIGIN, PRISM_EXTENT, divisions)
    half = SHELL_BENDING["thickness"] / 2.0
    centers = mesh.nodes[mesh.hexes].mean(axis=1)
    slab = np.abs(centers[:, 1]) < half
    soft = IsotropicMaterial(SHELL_BENDING["e_solid"], 0.0)
    stiff = IsotropicMaterial(SHELL_BENDING["e_shell"], 0.0)
    mats = [stiff if c else soft for c in slab]
    dofmap = DofMap.build(mesh.n_nodes, [(mesh.node_sets["zmin"], [0, 1, 2], 0.0)])
    p = SHELL_BENDING["force"] / (PRISM_EXTENT[0] * PRISM_EXTENT[1])
    f = traction_load(mesh, "zmax", lambda x: np.array([0.0, p, 0.0]))
    k = assemble_solid_full(mesh, mats)
    kff, ff = reduce_to_free(k, dofmap, f)
    return mesh, dofmap.expand(spla.spsolve(kff.tocsc(), ff))


# -- shell shear --------------------------------------------------------

# The benchmark pins the shear correction at 1.0: the reported director
# rotation follows tau / (G_solid + k G_shell) and only the uncorrected
# modulus lands within the published tolerance.
SHELL_SHEAR = {
    "e_solid": 10.0,
    "e_shell": 40.0,
    "thickness": 0.125,
    "tau": 0.01,
    "shear_correction": 1.0,
}


def shear_shell_problem(n=16, n_fiber=2) -> CoupledProblem:
    mesh = build_hex_grid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (n, n, n))
    mat = IsotropicMaterial(SHELL_SHEAR["e_solid"], 0.0)
    y_mid = np.abs(mesh.nodes[:, 1] - 0.5) < 1e-12
    on_bnd = np.zeros(mesh.n_nodes, dtype=bool)
    for name in ("xmin", "xmax", "zmin", "zmax"):
        on_bnd[mesh.node_sets[name]] = True
    ring = np.where(y_mid & on_bnd)[0]
    dofmap = DofMap.build(mesh.n_nodes, [
        (mesh.node_sets["all"], [0], 0.0),
        (mesh.node_sets["all"], [1], 0.0),
        (ring, [2], 0.0),
    ])
    tau = SHELL_SHEAR["tau"]
    f = traction_load(mesh, "ymin", lambda x: np.array([0.0, 0.0, tau]))
    f += traction_load(mesh, "ymax", lambda x: np.array([0.0, 0.0, -tau]))
    shell = make_shell(
        (1.0, 1.0), (n, n), SHELL_SHEAR["thickness"],
        Frame((0.0, 0.5, 0.0), _SHELL_AXES),
        IsotropicMaterial(SHELL_SHEAR["e_shell"], 0.0),
        shear_correction=SHELL_SHEAR["shear_correction"],
    )
    return CoupledProblem(mesh, mat, dofmap, f, [EmbeddedStructure(shell, n_fiber=n_fiber)])


# -- drivers ------------------------------------------------------------


_BUILDERS = {
    "bending": bending_problem,
    "torsion": torsion_problem,
    "shell_bending": shell_bending_problem,
    "shell_shear": shear_shell_problem,
}


def benchmark_metrics(
    name: str, prob: CoupledProblem, sol, with_reference: bool | None = None,
    ref_divisions=(8, 8, 160),
) -> MetricTable:
    """Headline metrics of a solved benchmark problem.

    Works on any solved problem with the benchmark's layout, whether it
    was built programmatically or from a configuration file.
    """
    if with_reference is None:
        with_reference = name == "bending"
    table = MetricTable()
    table.add("n_unknowns", sol.diagnostics["n_unknowns"])
    if name == "bending":
        max_u1 = max_abs_component_on_face(prob.mesh, sol.u_full, 0, 2, PRISM_EXTENT[2])
        table.add("max_u1", max_u1, "length")
        if with_reference:
            ref_mesh, u_ref = bending_reference(ref_divisions)
            ref_max = max_abs_component_on_face(ref_mesh, u_ref, 0, 2, PRISM_EXTENT[2])
            table.add("ref_max_u1", ref_max, "length")
            table.add("max_u1_mismatch", abs(max_u1 - ref_max) / ref_max)
            table.add("h1_mismatch", h1_mismatch(ref_mesh, u_ref, prob.mesh, sol.u_full))
    elif name == "torsion":
        fld = sol.fields[0]
        table.add("beam_max_rotation", float(np.abs(fld.theta).max()), "rad")
        table.add("beam_max_translation", float(np.abs(fld.sigma).max()), "length")
        radius = TORSION["core_side"] / 2.0
        table.add(
            "translation_rotation_ratio",
            float(np.abs(fld.sigma).max() / max(np.abs(fld.theta).max() * radius, 1e-300)),
        )
    elif name == "shell_bending":
        u = sol.u_full.reshape(-1, 3)
        table.add("max_u2", float(np.abs(u[:, 1]).max()), "length")
    elif name == "shell_shear":
        fld = sol.fields[0]
        table.add("midsurface_max", float(np.abs(fld.sigma).max()), "length")
        table.add("director_rotation", float(np.abs(fld.theta).max()), "rad")
    else:
        raise ValueError(f"unknown benchmark {name!r}")
    table.add("solver_residual", sol.diagnostics["solver_residual"])
    table.add("constraint_residual", float(sol.diagnostics["constraint_residuals"][0]))
    return table


def run_benchmark(name: str, config: dict | None = None) -> MetricTable:
    """Run a named benchmark and emit its headline metrics.

    `config` overrides keyword arguments of the underlying problem
    builder (mesh divisions, fiber quadrature, ...).
    """
    config = dict(config or {})
    with_reference = config.pop("with_reference", None)
    ref_divisions = config.pop("ref_divisions", (8, 8, 160))
    if name not in _BUILDERS:
        raise ValueError(f"unknown benchmark {name!r}")
    prob = _BUILDERS[name](**config)
    sol = prob.solve()
    return benchmark_metrics(name, prob, sol, with_reference, ref_divisions)


def sweep_convergence(case: str = "bending", levels: int = 3, fiber_counts=(2, 4)):
    """Mismatch vs the fine solid-only reference across mesh refinements.

    Level k uses solid divisions (2, 2, 10) * 2^k with the structure mesh
    matched to the solid size along its span.  Returns a list of dicts
    (rows of the CSV the CLI writes).
    """
    if case == "bending":
        ref_mesh, u_ref = bending_reference()
        build = lambda div, nf: bending_problem(div, n_beam=div[2], n_fiber=nf)
    elif case == "shell_bending":
        ref_mesh, u_ref = shell_bending_reference()
        build = lambda div, nf: shell_bending_problem(
            div, shell_divisions=(div[2], div[0]), n_fiber=nf
        )
    else:
        raise ValueError(f"no convergence sweep for case {case!r}")
    rows = []
    for k in range(levels):
        div = (2 * 2**k, 2 * 2**k, 10 * 2**k)
        h = PRISM_EXTENT[2] / div[2]
        for nf in fiber_counts:
            prob = build(div, nf)
            sol = prob.solve()
            rows.append(
                {
                    "case": case,
                    "level": k,
                    "h_solid": h,
                    "n_fiber": nf,
                    "h1_mismatch": h1_mismatch(ref_mesh, u_ref, prob.mesh, sol.u_full),
                }
            )
    return rows
