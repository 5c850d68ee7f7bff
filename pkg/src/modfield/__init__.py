"""modfield — modulus-calibrated random fields, extensions, and experiments.

The toolkit covers one workflow end to end:

1. choose a modulus of continuity (:mod:`modfield.modulus`),
2. measure field regularity against it with Hoelder-type functionals
   (:mod:`modfield.field_core`),
3. extend scattered samples off their grid without degrading the modulus
   (:mod:`modfield.extension`),
4. generate series-based martingale random fields with counter-based,
   coefficient-addressable randomness (:mod:`modfield.martingale_sim`),
5. run the convergence experiments that tie it together
   (:mod:`modfield.experiments`), optionally rendering figures
   (:mod:`modfield.figures`) — all scriptable through the ``modfield`` CLI
   (:mod:`modfield.cli`).
"""

from .modulus import (
    ModulusError,
    Modulus,
    ModulusValidationReport,
    PiecewiseModulus,
    PowerModulus,
    ScaledModulus,
    modulus_from_dict,
    piecewise_modulus,
    power_modulus,
    scaled_modulus,
    validate,
)
from .field_core import (
    BoxDomain,
    FieldSample,
    Grid,
    SeminormBreakdown,
    SmoothFieldSample,
    anchored_holder_norm,
    cm_norm,
    holder_norm,
    modulus_seminorm,
    smooth_holder_norm,
    sup_norm,
)
from .extension import (
    AnchorSet,
    ExtensionModel,
    InconsistencyError,
    VerificationReport,
    anchors_from_csv,
    anchors_to_csv,
    build,
    fit_constant,
    verify_modulus,
    verify_restriction,
    verify_sandwich,
)
from .martingale_sim import (
    BasisCapabilityError,
    EnvelopeDivergenceError,
    GStatistic,
    MartingaleCheckReport,
    PathHandle,
    SeriesSpec,
    coefficient,
    draw_path,
    envelope_bound,
    martingale_check,
    partial_sum,
    partial_sum_jets,
    per_path_bound,
    term_bound,
    term_bound_smooth,
)
from .experiments import (
    ContinuityConfig,
    ExperimentReport,
    SmoothConfig,
    read_report,
    reconstruct_antiderivative,
    run_continuity,
    run_smooth,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    # modulus
    "ModulusError",
    "Modulus",
    "ModulusValidationReport",
    "PowerModulus",
    "PiecewiseModulus",
    "ScaledModulus",
    "power_modulus",
    "piecewise_modulus",
    "scaled_modulus",
    "modulus_from_dict",
    "validate",
    # field core
    "BoxDomain",
    "Grid",
    "FieldSample",
    "SmoothFieldSample",
    "SeminormBreakdown",
    "sup_norm",
    "modulus_seminorm",
    "holder_norm",
    "anchored_holder_norm",
    "cm_norm",
    "smooth_holder_norm",
    # extension
    "InconsistencyError",
    "AnchorSet",
    "ExtensionModel",
    "VerificationReport",
    "fit_constant",
    "build",
    "verify_restriction",
    "verify_sandwich",
    "verify_modulus",
    "anchors_to_csv",
    "anchors_from_csv",
    # series / martingales
    "BasisCapabilityError",
    "EnvelopeDivergenceError",
    "SeriesSpec",
    "PathHandle",
    "draw_path",
    "coefficient",
    "partial_sum",
    "partial_sum_jets",
    "term_bound",
    "term_bound_smooth",
    "per_path_bound",
    "envelope_bound",
    "GStatistic",
    "MartingaleCheckReport",
    "martingale_check",
    # experiments
    "ContinuityConfig",
    "SmoothConfig",
    "ExperimentReport",
    "run_continuity",
    "run_smooth",
    "reconstruct_antiderivative",
    "write_report",
    "read_report",
    "__version__",
]
