"""Indoor RF sensing sandbox.

Simulates the complex baseband signal a ceiling-mounted antenna aperture
receives from indoor transmitters, forms matched-filter radio maps, and
reconstructs the floor plan of passive scatterers, with quantitative
evaluation utilities and a dataset pipeline for learned reconstructors.
"""

from .scene import (  # noqa: F401
    BRICK,
    METAL,
    VACUUM,
    Device,
    Material,
    Scene,
    ScattererBox,
    rasterize_floorplan,
    sample_devices,
    scenario_1,
    scenario_2,
    validate_scene,
)
from .propagation import (  # noqa: F401
    FieldGrid,
    RayPath,
    field_at_lis,
    fresnel_reflection,
    trace_paths,
    trace_scene,
)
from .lis import (  # noqa: F401
    LisConfig,
    ReceivedSignal,
    average_samples,
    element_positions,
    noise_sigma_for_snr,
    synthesize_signal,
)
from .radiomap import (  # noqa: F401
    MfKernel,
    RadioMap,
    build_mf_kernel,
    form_radio_map,
    matched_filter,
    to_rgb,
)
from .reconstruct import (  # noqa: F401
    LinearMap,
    fit,
    fit_arrays,
    oracle_clamp,
    predict,
    predict_values,
)
from .metrics import (  # noqa: F401
    CentroidSet,
    EvaluationReport,
    centroid_error,
    evaluate_pair,
    extract_centroids,
    psnr,
    ssim,
)
from .dataset import DatasetConfig, Manifest, build, generate_sample, split  # noqa: F401

__version__ = "0.1.0"
