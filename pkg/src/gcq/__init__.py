"""Generalized convolution quadrature on nonuniform time meshes."""

from ._validation import ConvergenceError, DomainError
from .estimators import GCQFractionalDerivative, GCQFractionalIntegral
from .fast import (
    ContourQuadrature,
    FastConfig,
    FastGCQ,
    RealQuadrature,
    build_history_quadrature,
    contour_for_poles,
    fractional_integral,
    window_weights,
)
from .harness import (
    ConvergenceReport,
    emit,
    estimate_order,
    quadrature_count_table,
    reproduce,
    run_convergence,
)
from .kernels import (
    DenseOperator,
    KernelSpec,
    PencilOperator,
    frac_derivative_history_kernel,
    frac_integral_kernel,
    power_kernel,
    resolvent_density,
)
from .meshgen import (
    MeshStats,
    TimeMesh,
    graded_mesh,
    mesh_from_points,
    mesh_stats,
    read_mesh_csv,
    two_sided_graded_mesh,
    uniform_mesh,
    write_mesh_csv,
)
from .reference import (
    WeightTable,
    apply_direct,
    composition_check,
    divided_differences,
    weights_dd,
    weights_real_quadrature,
)
from .special import (
    complete_elliptic_K,
    gamma_fn,
    gauss_jacobi_left,
    gauss_legendre,
    jacobi_sn,
    jacobi_sn_cn_dn,
    mittag_leffler,
)
from .subdiffusion import (
    FemSystem,
    SubdiffusionConfig,
    fem_assemble,
    l2_error,
    laplace_invert_E,
    scalar_system,
    solve_nonsmooth,
    solve_smooth,
)

__version__ = "0.1.0"
