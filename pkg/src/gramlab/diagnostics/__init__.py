from .collapse import NCReport, construct_etf, nc_probe, one_hot_centered
from .gram import (
    AlignmentReport,
    agop,
    fle_residual,
    gram_shift,
    gram_vcs_residual,
    normalize_sample_for_layer,
    pairwise_taylor_sum,
    per_sample_input_gradients,
    prop1_alignment,
    thm1_residual_scaling,
    vcs,
    vcs_first_order,
    virtual_trajectory,
)
from .linearity import (
    InterpolationGap,
    MovingTargetDecomp,
    Thm2Result,
    Thm3Result,
    euler_gap,
    kantorovich_check,
    moving_target_decomp,
    ols_interpolation_gap,
    ols_projection,
    ridge_fit,
    surrogate,
    surrogate_id,
    target_linearity,
    target_linearity_columns,
    thm2_bound_check,
    thm2_constant,
    thm3_prediction,
    woodbury_error_check,
)
from .regions import RegionCrossing, region_crossings_depth2
from .layers import LayerDiagnostics, layer_diagnostics

__all__ = [name for name in dir() if not name.startswith("_")]
