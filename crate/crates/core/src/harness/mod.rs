//! Seeded, parallel Monte-Carlo experiments over a grid of horizons.

mod plan;
mod run;
mod stats;

pub use plan::{ExperimentPlan, SamplerChoice, PLAN_KEYS};
pub use run::{
    run_plan, run_replication, sample_file_name, write_report, write_samples, HorizonContext,
    KolmogorovReport, PlanOutput, RateCheck, ReportRow, Replication,
};
pub use stats::{
    dkw_halfwidth, empirical_kolmogorov, fit_rate, sample_mean, sample_variance, variance_check,
    RateFit, RateRow, VarianceCheck,
};
