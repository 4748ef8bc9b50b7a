"""pvgen: deterministic synthesis of partial-volume MRI training pairs.

Label maps are randomly deformed (diffeomorphic velocity-field flow plus a
random affine), intensities are drawn from a per-class Gaussian model under
a smooth multiplicative bias, and the acquisition is simulated by blurring,
slice-spacing subsampling and linear upsampling.  Hyperpriors for the
intensity model are estimated from segmented scans with robust statistics,
and a brute-force Bayesian oracle on tiny grids provides exact posteriors
for validation.
"""

from .acquire import (
    AcquisitionSpec,
    BLUR_CONSTANT,
    ChannelSpec,
    blur_std,
    gaussian_blur,
    gaussian_kernel_1d,
    simulate_acquisition,
    subsample_to_lr,
    upsample_to_hr,
)
from .config import ConfigError, GenerationConfig, ParamRanges
from .deform import (
    AffineParams,
    DeformationField,
    VelocityField,
    affine_matrix,
    compose_affine_with_field,
    integrate_svf,
    sample_affine,
    sample_label_map,
    sample_svf,
    warp_labels,
)
from .estimate import MAD_SCALE, estimate_class_stats, fit_gaussian_priors, rescale_variance
from .generate import generate_pair, generate_sample, run_benchmark, run_generate
from .nifti import load_intensity, load_labels, read_nifti, save_intensity, save_labels, write_nifti
from .oracle import (
    OracleCapExceeded,
    PosteriorResult,
    TinyPvModel,
    box_partition_weights,
    cost_estimate,
    exact_posterior,
    generator_consistency_score,
    identity_weights,
    lr_likelihood,
)
from .streams import stream
from .synth import (
    BiasField,
    GmmParams,
    GmmPriors,
    sample_bias_field,
    sample_gmm_params,
    synthesize_hr_image,
)
from .volumes import (
    Grid,
    IntensityVolume,
    LabelVolume,
    nearest_sample,
    one_hot,
    resample,
    soft_dice,
    trilinear_sample,
)

__version__ = "0.1.0"
