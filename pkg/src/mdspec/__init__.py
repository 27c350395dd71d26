"""Diffusion-based spectral regression on data sampled from a manifold.

A graph Laplacian built on labeled and unlabeled points yields an estimate of
the manifold heat kernel; truncated spectral filtering of that estimate gives
predictions at every sample point.
"""

from .geometry import (
    LabeledDataset,
    ManifoldSpec,
    PointCloud,
    TargetFnSpec,
    make_dataset,
    sample_manifold,
)
from .graph import default_epsilon, gaussian_affinity, unnormalized_laplacian
from .eigen import LaplacianEigens, align_to_reference, smallest_eigenpairs
from .heat import HeatKernelEstimate, heat_kernel_estimate, labeled_block_eigens
from .spectral import (
    DiffusionEstimator,
    FilterFamily,
    HyperParams,
    default_hyperparams,
    filter_value,
    fit_diffusion,
)

__version__ = "0.1.0"
