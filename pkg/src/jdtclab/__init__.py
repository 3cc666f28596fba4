"""Multi-target joint detection, tracking and classification lab.

A conditional labeled multi-Bernoulli filter that couples class decisions
with the measurement update through decision regions and a three-channel
Bayesian risk, plus estimation-then-decision / decision-then-estimation
baselines, scoring metrics, and a seeded Monte Carlo harness.
"""

from .baselines import BaselineConfig, DteTracker, EtdTracker, dte_step, etd_step
from .cjde import (
    BirthModel,
    BirthSite,
    CjdeLmbFilter,
    FilterConfig,
    StepResult,
    TrackEstimate,
    UpdateOutput,
    enumerate_associations,
    extract_estimates,
    predict,
    update_conditioned,
)
from .metrics import ScanScore, jpm, misclassification_rate, ospa
from .motion import ClassModelSet, MotionModel, build_ca_model, build_cv_model, predict_class_density
from .plain_lmb import PlainBirthSite, PlainLmbFilter
from .rfs import (
    AssociationMap,
    ClassConditionedDensity,
    GaussianComponent,
    GaussianMixture,
    HypothesisWeight,
    Label,
    LmbDensity,
    Track,
    lmb_set_weight,
    mixture_moments,
    prune_and_merge,
)
from .risk import (
    DecisionSet,
    RiskCoefficients,
    advise_gamma,
    cardinality_cost,
    decision_region_membership,
    select_decision,
    state_estimation_cost,
)
from .scenarios import (
    MonteCarloResult,
    ScenarioConfig,
    TargetSpec,
    build_example1,
    build_example2,
    build_fusion_demo,
    run_monte_carlo,
    run_single_trial,
    truth_at_scan,
)
from .sensing import (
    EsmModel,
    RadarModel,
    ScanData,
    SensorSuite,
    TruthTarget,
    declare_class,
    esm_likelihood,
    radar_likelihood,
    simulate_scan,
)

__version__ = "0.1.0"
