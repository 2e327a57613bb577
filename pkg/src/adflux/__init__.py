"""Conservative flux recovery for P1 advection-diffusion finite elements."""

from .errors import (
    AssemblyError,
    CompatibilityError,
    GummelError,
    SingularLocalSystemError,
    SolverError,
)
from .fem import (
    ProblemSpec,
    SparseSystem,
    assemble,
    element_F,
    element_Q,
    element_gradients,
    interpolate,
    solve,
    solve_problem,
    stabilization_delta,
)
from .mesh import (
    ElementSplit,
    TriMesh,
    build_uniform_mesh,
    control_volume_boundary,
    split_element,
)
from .metrics import (
    ConservationReport,
    ConvergenceTable,
    conservation_defects,
    edge_metrics,
    h1_semi_error,
    observed_orders,
)
from .postprocess import (
    ElementFlux,
    LocalSystem,
    build_local_system,
    postprocess_all,
    postprocess_all_transient,
    solve_local,
)
from .quadrature import SegmentRule, TriangleRule, integrate_segment, integrate_triangle, segment_rule, triangle_rule
from .transient import TransientSpec, be_supg_step, run_rotating_cylinder

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
