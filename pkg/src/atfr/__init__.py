"""Similarity guided sampling: adaptive temporal feature resolution for video features."""

from .binning import (
    BinGeometry,
    MagnitudeTrack,
    MultiDimGeometry,
    from_spherical,
    magnitudes,
    make_geometry,
    make_multidim_geometry,
    to_spherical,
)
from .core import (
    ConfigError,
    DimensionError,
    FeatureSequence,
    NonFiniteError,
    SeededRng,
    SgsError,
    finite_diff,
    gap_spatial,
)
from .flops import FlopReport, LayerSpec, layer_flops, report, stack_flops
from .layer import SgsCache, SgsConfig, SgsGradients, sgs_apply, sgs_backward
from .sampler import (
    SampledSequence,
    WeightAssignment,
    kernel_weight,
    sample_backward,
    sample_backward_multidim,
    sample_forward,
    sample_forward_multidim,
)
from .similarity import SimilarityParams, embed_backward, embed_forward, init_params

__version__ = "0.1.0"
