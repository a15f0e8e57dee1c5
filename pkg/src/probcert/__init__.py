"""Sample-based certification of classifier robustness to random input noise.

Draws i.i.d. perturbed inputs, takes the minimum sampled margin, and issues
a high-confidence bound on the misclassification probability; a bisection
search turns the certificate into the largest certifiable lp-ball radius.
"""

__version__ = "0.1.0"

from .network import (
    ALL_TARGETS,
    Activation,
    Layer,
    MarginSpec,
    Network,
    classify,
    forward,
    margin,
    margin_batch,
)
from .sampling import (
    Empirical,
    Gaussian,
    NoiseModel,
    SampleSeed,
    UniformBall,
    sample,
    support_contains,
)
from .certify import (
    Certificate,
    CertificationSpec,
    EstimateResult,
    certify,
    clopper_pearson_lower,
    estimate_success_probability,
    required_sample_count,
    scenario_value,
)
from .radius import (
    RadiusSearchResult,
    RadiusSearchSpec,
    RadiusSearchStatus,
    TraceEntry,
    derive_iteration_seed,
    max_radius,
)
from .linear import (
    AffineMargin,
    affine_margin,
    generate_linear_classifier,
    worst_case_margin,
    worst_case_radius,
)
from .modelio import load_model, load_report, save_model
from .errors import (
    ConfigError,
    DimensionError,
    ModelFormatError,
    NumericOverflowError,
    ProbcertError,
)
