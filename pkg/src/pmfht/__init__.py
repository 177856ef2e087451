"""Fractional harmonic transforms on point-cloud manifolds.

Discrete Laplace-Beltrami operator and harmonic basis, the fractional
transform of any real order, spectral translation/convolution/correlation,
bandlimited sampling, chaotic-phase encryption and optimal fractional
filtering of radar clutter.
"""
from .errors import *  # noqa: F401,F403
from .geometry import (
    HarmonicBasis,
    LboPair,
    LboParams,
    PointCloud,
    TangentFrame,
    build_lbo,
    default_params,
    estimate_tangent_frame,
    solve_harmonic_basis,
    voronoi_cell_area,
)
from .transform import (
    FractionalSpectrum,
    ManifoldTransform,
    build_transform,
    forward,
    fractional_matrix,
    fused_energy,
    inverse,
    transform_for_cloud,
    transform_from_orthogonal,
)

__version__ = "0.1.0"
