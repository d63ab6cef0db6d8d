"""Electromagnetic wave scattering by small impedance particles.

Analytic one-body scattered fields, shape-matrix surface quadrature, the
many-body block linear system for the effective field, and the limiting
effective-medium integral equation with its refraction-coefficient
shift.
"""

from .errors import ConfigError, SolverError
from .fields import (
    Medium,
    PlaneWave,
    curl_incident,
    grad_green,
    green,
    hess_green,
    incident_field,
    interaction_kernel,
)
from .geometry import (
    Ellipsoid,
    ShapeMatrices,
    Sphere,
    SurfaceQuadrature,
    TriMesh,
    build_quadrature,
    compute_b,
    compute_beta,
    compute_shape_matrices,
    load_trimesh,
    rotate_quadrature,
    save_trimesh,
    surface_samples,
)
from .manybody import (
    Box,
    FieldSample,
    LasSystem,
    ParticleCloud,
    assemble_las,
    effective_field,
    generate_cloud,
    read_cloud,
    solve_las,
    write_cloud,
)
from .medium import (
    CubeGrid,
    HomogenizedMedium,
    MediumSolution,
    dispersion_check,
    evaluate_limit_field,
    refraction_shift,
    solve_limit_equation,
)
from .onebody import (
    Impedance,
    OneBodySolution,
    compute_Q,
    far_field,
    magnetic_field,
    scattered_field,
    solve_one_body,
    total_field,
)
from .studies import convergence_study, fit_power_law, scaling_study

__version__ = "0.1.0"
