"""Finite elements for solids with embedded reduced-dimensional structures.

Couples 3D linear elasticity with rigid bodies, Timoshenko beams, and
Mindlin shells living inside the solid.  Compatibility between the solid
displacement and the structure's generalized displacement is enforced by
Lagrange multipliers paired in the structural energy (H1-type) inner
product, leading to symmetric indefinite saddle systems that plain mixed
finite elements solve stably as long as the structure mesh is at least
as fine as the solid's.
"""

from .config import ConfigError, MetricTable, ProblemConfig, load_config, parse_config
from .coupling import (
    CouplingOperator,
    FiberQuadrature,
    MultiplierSpace,
    assemble_coupling,
    build_fiber_quadrature,
    kernel_residual,
)
from .mesh import (
    BaseMesh,
    LocalPoint,
    PointNotFoundError,
    SolidMesh,
    build_base_mesh,
    build_hex_grid,
    locate_point,
)
from .problem import CoupledProblem, CoupledSolution, EmbeddedStructure
from .saddle import SaddleSystem, SingularSystemError, assemble_saddle, solve
from .solid import (
    DofMap,
    IsotropicMaterial,
    assemble_solid,
    assemble_solid_full,
    hex8_stiffness,
    solid_h1_gram,
    traction_load,
)
from .structures import (
    FiberSpec,
    Frame,
    GeneralizedField,
    OutOfDomainError,
    StructureModel,
    ansatz_eval,
    ansatz_gradient,
    make_beam,
    make_rigid_body,
    make_shell,
    rigid_motion_field,
    structural_gram,
    structural_inner_product,
    structure_stiffness,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
