//! Window mean survival time (WMST) for interval-censored two-arm trials.

pub mod curve;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod mean_survival;
pub mod normal;
pub mod observation;
pub mod rank_tests;
pub mod report;
pub mod turnbull;

pub use curve::{Segment, Shape, SurvivalCurve};
pub use error::{Result, WmstError};
pub use estimators::{km_fit, Imputation, KaplanMeier, PointDatum, RiskRow, RiskTable};
pub use mean_survival::{
    rmst, select_tau1, wmst, wmst_diff_test, wmst_estimate, wmst_variance, Effect, Tau1Rule, TestMethod,
    TestResult, Window, WmstEstimate,
};
pub use observation::{Arm, Observation, Outcome};
pub use turnbull::{turnbull_fit, TurnbullFit, TurnbullInterval};
pub use rank_tests::{fh_weight, weighted_logrank, WeightFn};
pub use datagen::{calibrate_scenario, scenario, true_mean_survival, ArmLaw, DropoutProfile, Family, Scenario, VisitPlan};
pub use harness::{
    bootstrap_se, run_estimation_study, run_sweep, run_test_study, EstimationMethod, StudyConfig, Tau1Policy, TestSpec,
};
pub use io::{load_bcos, parse_config, read_config, read_dataset, write_dataset, SimulationFile, StudyKind};
pub use report::{analyze, estimate_arms, Analysis, EstimateRow, TestRow};
