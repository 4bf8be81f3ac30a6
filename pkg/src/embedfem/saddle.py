"""Block KKT assembly and direct solution.

The coupled equilibrium problem is the symmetric indefinite system

    [ A   B^T ] [ x ]   [ f ]
    [ B   0   ] [ l ] = [ g ]

with A the block-diagonal stiffness of the solid and the structures, B
the stacked tie operators, and g the (usually zero) constraint offsets.
Systems are solved by sparse LU with partial pivoting, which tolerates
the zero block; an exactly or numerically singular factorization is
reported as a well-posedness failure, the expected signal for
rank-deficient ties or floating structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(RuntimeError):
    """The saddle system could not be factorized or solved accurately."""


@dataclass
class SaddleSystem:
    """Assembled KKT system with the primal/dual block layout."""

    kkt: sp.csr_matrix
    rhs: np.ndarray
    n_solid: int
    struct_slices: list[slice]
    mult_slices: list[slice]
    a_primal: sp.csr_matrix = field(repr=False, default=None)

    @property
    def n_primal(self) -> int:
        return self.n_solid + sum(s.stop - s.start for s in self.struct_slices)

    @property
    def n_mult(self) -> int:
        return self.kkt.shape[0] - self.n_primal

    @property
    def n_unknowns(self) -> int:
        return self.kkt.shape[0]


def assemble_saddle(
    solid_k: sp.spmatrix,
    f_solid: np.ndarray,
    structures: list[tuple[sp.spmatrix, np.ndarray, sp.spmatrix, np.ndarray]] = (),
) -> SaddleSystem:
    """Build the KKT system.

    Each structure entry is (K_y, f_y, B, g) with B over columns
    [structure | free solid] as produced by CouplingOperator.restrict_solid
    (after any structure-side Dirichlet reduction).  With no structures
    the system degenerates to the solid stiffness alone.
    """
    n_u = solid_k.shape[0]
    f_solid = np.asarray(f_solid, dtype=float)
    if f_solid.shape[0] != n_u:
        raise ValueError("solid load length does not match the stiffness")

    struct_slices, mult_slices = [], []
    offset = n_u
    a_blocks = [solid_k.tocsr()]
    f_parts = [f_solid]
    for k_y, f_y, b, g in structures:
        n_y = k_y.shape[0]
        if b.shape[1] != n_y + n_u:
            raise ValueError("coupling operator does not match the block sizes")
        struct_slices.append(slice(offset, offset + n_y))
        offset += n_y
        a_blocks.append(k_y.tocsr())
        f_parts.append(np.asarray(f_y, dtype=float))
    n_primal = offset
    for _, _, b, g in structures:
        mult_slices.append(slice(offset, offset + b.shape[0]))
        offset += b.shape[0]

    a = sp.block_diag(a_blocks, format="csr")
    if structures:
        # global constraint block assembled by index shifting (cheap even
        # for hundreds of structures)
        rows, cols, vals = [], [], []
        row_off = 0
        for i, (k_y, _, b, _) in enumerate(structures):
            n_y = k_y.shape[0]
            bc = b.tocoo()
            y_off = struct_slices[i].start
            gcol = np.where(bc.col < n_y, bc.col + y_off, bc.col - n_y)
            rows.append(bc.row + row_off)
            cols.append(gcol)
            vals.append(bc.data)
            row_off += b.shape[0]
        b_glob = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(row_off, n_primal),
        ).tocsr()
        kkt = sp.bmat([[a, b_glob.T], [b_glob, None]], format="csr")
        rhs = np.concatenate(f_parts + [g for _, _, _, g in structures])
    else:
        kkt = a
        rhs = np.concatenate(f_parts)
    return SaddleSystem(
        kkt=kkt,
        rhs=rhs,
        n_solid=n_u,
        struct_slices=struct_slices,
        mult_slices=mult_slices,
        a_primal=a,
    )


@dataclass
class SaddleSolution:
    """Raw KKT solution with block views and solver diagnostics."""

    x: np.ndarray
    system: SaddleSystem
    residual: float

    @property
    def u(self) -> np.ndarray:
        return self.x[: self.system.n_solid]

    def structure(self, i: int) -> np.ndarray:
        return self.x[self.system.struct_slices[i]]

    def multiplier(self, i: int) -> np.ndarray:
        return self.x[self.system.mult_slices[i]]

    @property
    def primal(self) -> np.ndarray:
        return self.x[: self.system.n_primal]

    def energy_identity(self) -> tuple[float, float]:
        """Return (a(sol, sol), f(sol)); equal at the solution."""
        xp = self.primal
        a_val = float(xp @ (self.system.a_primal @ xp))
        f_val = float(self.system.rhs[: self.system.n_primal] @ xp)
        return a_val, f_val


def solve(system: SaddleSystem, tol: float = 1e-10) -> SaddleSolution:
    """Direct sparse solve of the KKT system.

    Uses LU with partial pivoting (deterministic given identical input).
    Raises SingularSystemError on factorization failure or when the
    relative residual exceeds `tol`, reporting what the factorization
    exposed about the defect.
    """
    kkt = system.kkt.tocsc()
    try:
        lu = spla.splu(kkt, permc_spec="COLAMD")
        x = lu.solve(system.rhs)
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise SingularSystemError(f"saddle factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("saddle solve produced non-finite values (singular system)")
    scale = max(float(np.linalg.norm(system.rhs)), 1e-300)
    residual = float(np.linalg.norm(system.kkt @ x - system.rhs)) / scale
    if residual > tol:
        raise SingularSystemError(
            f"saddle solve residual {residual:.3e} exceeds {tol:.1e}; "
            "the system is singular or severely ill-conditioned"
        )
    return SaddleSolution(x=x, system=system, residual=residual)
