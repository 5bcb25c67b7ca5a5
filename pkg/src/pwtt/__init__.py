"""Change detection for multi-temporal SAR amplitude stacks.

Per-pixel two-sample t statistics over reference/inference periods,
stratified by orbit pass and polarization, composited as a max-|t| damage
score; building- and grid-cell-level aggregation, validation metrics, a
synthetic-SAR oracle, and a pipeline with an HTTP API for interactive use.
"""

from .grids import (
    AnalysisWindow,
    GeoGrid,
    GridCompatibilityError,
    OrbitPass,
    Polarization,
    Scene,
    SceneStack,
    select_stratum,
    stack_scenes,
)
from .io import load_manifest, read_raster, read_scene, write_raster
from .speckle import LeeParams, lee_filter
from .ttest import (
    InsufficientSamplesError,
    PwttConfig,
    StratumStats,
    TMap,
    composite_significance_threshold,
    composite_T,
    run_pwtt,
    t_critical,
    temporal_mean,
    temporal_std,
    welch_t,
)
from .footprints import (
    BuildingPrediction,
    DamageAnnotation,
    DamageLabel,
    Footprint,
    LabeledFootprint,
    classify_buildings,
    filter_footprints,
    label_footprints,
    zonal_mean_T,
)
from .metrics import (
    EvaluationRecord,
    MetricsReport,
    PRF,
    WeightedConfusion,
    Weighting,
    balanced_sample,
    confusion,
    join_predictions,
    metrics_report,
    pr_curve,
    precision_recall_f1,
    roc_curve,
    select_threshold,
)
from .gridcells import (
    GridCell,
    RegressionResult,
    SingularFitError,
    SpilloverReport,
    aggregate_cells,
    build_grid,
    fit_damage_regression,
    spillover_analysis,
)
from .population import PopulationRaster, exposure
from .sim import DamageEvent, SimOutput, SimSpec, SurfaceClass, simulate, synthetic_city

__version__ = "0.1.0"
