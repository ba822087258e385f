"""Influence analysis for word-adoption cascades on a social graph.

Exposes the social-graph structure with embeddedness metrics, cascade
ingestion with exposure-based infection risks and a timestamp-shuffle
null, a feature-factored self-exciting intensity model with constrained
maximum-likelihood fitting, nested-model likelihood-ratio testing with
FDR control, and a thinning-based simulator for ground truth.
"""

from .cascade import (
    BucketCount,
    Cascade,
    ClassRisk,
    Event,
    ExposureRecord,
    RiskReport,
    aggregate_risk,
    exposures,
    infection_risk,
    ingest_events,
    shuffle_test,
    write_events,
)
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    InitializationError,
    InsufficientDataError,
    LexcascadeError,
    ParseError,
    UnknownUserError,
    UnstableProcessError,
)
from .features import (
    FEATURES,
    FeatureContext,
    ModelSpec,
    aggregate_features,
    aggregate_vector,
    enumerate_configs,
    feature_vector,
)
from .graph import (
    SocialGraph,
    adamic_adar,
    degree_distribution,
    geo_assortativity,
    load_cities,
    load_edges,
    tie_strength_threshold,
    write_cities,
    write_edges,
)
from .hawkes import (
    FitConfig,
    FitResult,
    Kernel,
    Params,
    Precompute,
    fit,
    grad,
    intensity,
    intensity_integral,
    loglik_fast,
    loglik_naive,
    rescaled_intervals,
)
from .simulate import SimConfig, branching_report, simulate, synth_graph
from .stats import (
    CompareReport,
    CompareRow,
    bh_correct,
    chi2_1_sf,
    compare_pipeline,
    lrt,
)

__version__ = "0.1.0"
