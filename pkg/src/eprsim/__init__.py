"""Local hidden-parameter model of two-station spin-pair experiments.

Builds an explicit family of setting-dependent product measures on a planar
parameter grid whose mixture reproduces the singlet correlation ``-a . b``
with strictly local +/-1 station outcomes, verifies the spline expansion
bound it rests on, audits the no-signaling properties by simulation, and
evaluates the Bell/CHSH inequalities the construction contradicts.
"""

from .bspline import (
    BasisSet,
    KnotGrid,
    basis_matrix,
    basis_value,
    expand_squared_difference,
    marsden_weight,
    truncated_weight,
    verify_expansion_bound,
)
from .inequalities import (
    Correlation,
    InequalityReport,
    ProductFormReport,
    bell_check,
    change_of_variables_demo,
    chsh_bound_identity,
    chsh_check,
    coplanar_setting,
    jacobian_factor,
    one_norm,
    product_form_consistency,
    quantum_prediction,
    sign_identity_check,
)
from .layers import (
    LayerCount,
    LayerMeasure,
    LayerSpec,
    base_layer_spec,
    build_layer_measure,
    count_layers,
    density_uniformity_audit,
    layer_count_formula,
    layer_defect,
    layer_expectation,
    layer_station_a,
    layer_station_b,
    sample_layer,
)
from .measure import (
    DiagonalMeasure,
    GridSpec,
    anticorrelation_defect,
    build_base_measure,
    cell_integral_a,
    cell_integral_b,
    exact_pair_expectation,
    sign_pm,
    station_a,
    station_b,
    u_density,
    unit_vector,
    v_density,
)
from .simulate import (
    CorrelationEstimate,
    ExperimentConfig,
    HiddenState,
    TrialRecord,
    correlation_curve,
    draw_trial,
    equal_setting_audit,
    marginal_shift_audit,
    modulated_run,
    run_experiment,
)

__version__ = "0.1.0"
