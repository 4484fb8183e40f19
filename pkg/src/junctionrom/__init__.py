"""Reduced-order prediction of pressure differences over vascular bifurcations.

The toolkit derives resistor-resistor-inductor junction blocks from virtual
steady and transient experiments, regresses the block coefficients from
bifurcation geometry, and solves single-junction 0D networks with the
predicted blocks.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DegenerateDataError,
    FingerprintError,
    JunctionRomError,
    SolverError,
    TrainingError,
)
from .geometry import (
    BRACHIOCEPHALIC,
    BUILTIN_COHORTS,
    ISORADIAL,
    MMHG_IN_CGS,
    PULMONARY,
    BifurcationGeometry,
    CohortSample,
    CohortSpec,
    FluidProperties,
    builtin_cohort,
    feature_vector,
    from_mmhg,
    sample_cohort_case,
    sample_cohort_geometry,
    swap_outlets,
    to_mmhg,
)
from .junctions import (
    FlowState,
    RRICoefficients,
    RRILaw,
    StaticContinuityLaw,
    TotalPressureLaw,
    Unified0DPoiseuilleLaw,
    dp_rri,
    dp_rri_derivatives,
    dp_static,
    dp_total_pressure,
    dp_unified0d,
    dp_unified0d_poiseuille,
    make_law,
    poiseuille_resistance,
)
from .oracle import (
    DEFAULT_BC,
    DEFAULT_BCS,
    OracleMode,
    SteadySample,
    TransientTrace,
    inlet_waveform,
    run_steady,
    run_transient,
    true_coefficients,
)
from .fitting import (
    FittedRecord,
    fit_inductance,
    fit_record,
    fit_steady,
    fit_steady_least_squares,
    fit_transient_optimized,
)
from .solver import (
    BoundaryCondition,
    NetworkState,
    NetworkTimeSeries,
    cycle_integral,
    solve_steady,
    solve_transient,
)
from .regressors import (
    Hyperparameters,
    TraceSamples,
    TrainedRegressor,
    compose_dp,
    default_hyperparameters,
    load_model,
    split_dataset,
    train,
)
from .pipeline import (
    CI_PRESET_SIZE,
    DEFAULT_COHORT_SIZES,
    Dataset,
    EvaluationReport,
    ModelBundle,
    build_dataset,
    evaluate_rmse,
    load_dataset,
    run_figure_sweep,
    save_dataset,
    train_models,
)
