"""Three-axis tip-force reconstruction from coupled FBG wavelength-shift
channels on bent-cantilever forceps.

The pipeline: a forward simulator provides oracle frames; an instability
filter, a spectral loading classifier, per-pair FastICA decoupling with
physical ambiguity resolution, diagonal force reconstruction, and
tearing-force stationarity statistics recover and characterize the
three-axis tip force.
"""

from .calibration import (
    AxisFit,
    CalibrationModel,
    CalibrationRun,
    ZSensitivityReport,
    assemble_model,
    check_z_insensitivity,
    default_calibration,
    fit_axis,
    naive_decouple,
)
from .classify import MULTIAXIAL, UNIAXIAL, LoadingClass, classify_frame, classify_pair
from .decouple import (
    IcaConfig,
    RecoveredComponents,
    UnmixingEstimate,
    center_whiten,
    decouple_frame,
    decouple_pair,
    fastica_pair,
    resolve_ambiguities,
)
from .errors import (
    AssignmentError,
    CapacityError,
    ConfigurationError,
    DegenerateDataError,
    FbgForceError,
    InsufficientDataError,
    ModelRejectedError,
    ValidationError,
)
from .forces import (
    ConsistencyReport,
    ForceSeries,
    build_force_series,
    components_to_forces,
    consistency_check,
    estimate_fz,
)
from .frames import ForceTrajectory, NoiseSpec, WavelengthFrame
from .mechanics import (
    DEFAULT_ALPHA_RAD,
    DEFAULT_K_N,
    ProngModel,
    axial_strain,
    beam_deflection,
    planar_forces,
    planar_forces_from_trajectory,
)
from .pipeline import PipelineConfig, PipelineResult, compare_paths, run_pipeline
from .preprocess import FilterConfig, FilterReport, filter_instability, filter_report
from .simulate import SimulationResult, instability_channels, simulate_frame
from .stationarity import (
    AdfResult,
    ForceAngle,
    KpssResult,
    LjungBoxResult,
    StationarityReport,
    TestConfig,
    adf_test,
    analyze_session,
    force_angle,
    kpss_test,
    ljung_box,
    summary_stats,
)

__version__ = "0.1.0"
