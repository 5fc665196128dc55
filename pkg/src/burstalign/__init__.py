"""Two-stage alignment and fusion of noisy Bayer bursts."""
from .cost_model import CostParams, audit_candidates, one_stage_cost, speedup, two_stage_cost
from .dpbm import (
    ConfigError,
    OffsetGrid,
    SearchConfig,
    align_burst_coarse,
    apply_offsets,
    exhaustive_search,
    progressive_search,
    search_frame,
)
from .fusion import reconstruct, robust_merge
from .image_core import (
    BayerFrame,
    Burst,
    DimensionError,
    NoiseParams,
    ParameterError,
    add_noise,
    demosaic_bilinear,
    isp_gamma,
    mosaic,
    variance_map,
)
from .matching import CandidateSet, hard_argmin, nma_distances, soft_match, soft_weights, soft_weights_jacobian
from .metrics import psnr_gamma, ssim_gamma
from .pipeline import refine_only_align, restore, two_stage_align
from .refine import FlowField, dense_refine, warp
from .synth import make_scene, synthesize_burst

__version__ = "0.1.0"
