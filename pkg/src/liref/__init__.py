"""Light-field refocusing, refocus-domain losses, and their verification oracles."""

from .lightfield import (
    DatasetLayout,
    LightField,
    View,
    ViewSet,
    discover_layout,
    extract_sublightfields,
    load_lightfield,
    sample_inputs,
    save_lightfield,
    to_luma,
)
from .losses import (
    LossSpec,
    RieParams,
    base_error,
    combined_loss,
    crie,
    loss_gradient,
    parse_config_token,
    parse_loss_spec,
    rie,
    serialize_loss_spec,
    ucrie,
    value_and_gradient,
    vwe,
)
from .metrics import (
    QualityReport,
    ReportRow,
    SsimParams,
    gmsd,
    psnr,
    quality_report,
    report_to_csv,
    reports_to_csv,
    ssim,
)
from .refocus import (
    FocalStack,
    Refocuser,
    RefocusSpec,
    ShiftEngine,
    focal_stack,
    refocus_adjoint,
    shift_and_add,
    shift_image,
    shift_image_adjoint,
    shift_view,
)
from .spectral import (
    ErrorSpectra,
    SpectralValue,
    crie2_spectral,
    directional_weight_map,
    ucrie2_spectral,
    view_error_spectra,
    vwe2_spectral,
)
from .synth import (
    AdamParams,
    DisparityMap,
    ExperimentResult,
    SynthRun,
    optimize_residual,
    plane_sweep_disparity,
    run_experiment,
    run_pipeline,
    warp_synthesize,
)

__version__ = "0.1.0"
