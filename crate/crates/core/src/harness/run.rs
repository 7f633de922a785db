//! Replication runner, report assembly and CSV output.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::plan::{ExperimentPlan, SamplerChoice};
use super::stats::{
    dkw_halfwidth, empirical_kolmogorov, fit_rate, sample_mean, sample_variance, RateFit, RateRow,
};
use crate::covariance::ModelKind;
use crate::error::{Error, Result};
use crate::estimators::{estimate, skorokhod_correction, standardize, IntegralMode};
use crate::fmt::g17;
use crate::rng::{stream_id, StreamRng};
use crate::simulate::{build_vasicek, DriverSampler, GaussianPath, TimeGrid};

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub enum Replication {
    Statistic(f64),
    /// The estimator's statistic was degenerate.
    Degenerate,
    /// Simulation or estimation failed.
    Failed(String),
}

impl Replication {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Statistic(v) => Some(*v),
            _ => None,
        }
    }
}

/// Per-horizon state shared by all replications.
pub struct HorizonContext {
    pub t_index: usize,
    pub horizon: f64,
    sampler: std::result::Result<DriverSampler, String>,
    trace: f64,
}

impl HorizonContext {
    pub fn new(plan: &ExperimentPlan, t_index: usize) -> Result<Self> {
        let horizon = plan.t_list[t_index];
        let grid = TimeGrid::new(horizon, plan.steps(t_index))?;
        let sampler = if plan.zero_driver {
            Ok(DriverSampler::Zero(grid))
        } else {
            let circulant =
                plan.sampler == SamplerChoice::Auto && plan.model.kind() == ModelKind::Fbm;
            DriverSampler::new(&plan.model, grid, circulant).map_err(|e| {
                log::warn!("T = {horizon}: sampler setup failed: {e}");
                e.to_string()
            })
        };
        let trace = if plan.estimator.needs_integral() && plan.mode == IntegralMode::Skorokhod {
            skorokhod_correction(&plan.model, plan.k, horizon, &plan.quad)?
        } else {
            0.0
        };
        Ok(Self {
            t_index,
            horizon,
            sampler,
            trace,
        })
    }

    /// `c(T)` used in skorokhod mode.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn driver(&self, plan: &ExperimentPlan, rep: usize) -> Result<GaussianPath> {
        let sampler = self
            .sampler
            .as_ref()
            .map_err(|e| Error::Precondition(format!("sampler unavailable: {e}")))?;
        let mut rng = StreamRng::new(plan.seed, stream_id(self.t_index, rep));
        Ok(sampler.sample(&mut rng))
    }

    pub fn run(&self, plan: &ExperimentPlan, rep: usize) -> Replication {
        match self.try_run(plan, rep) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("T = {} rep {rep}: {e}", self.horizon);
                Replication::Failed(e.to_string())
            }
        }
    }

    fn try_run(&self, plan: &ExperimentPlan, rep: usize) -> Result<Replication> {
        let g = self.driver(plan, rep)?;
        let v = build_vasicek(&g, plan.k, plan.mu, plan.scheme)?;
        let est = estimate(plan.estimator, &v, &g, &plan.model, plan.mode, self.trace, plan.rule)?;
        if !est.valid {
            return Ok(Replication::Degenerate);
        }
        let z = standardize(
            &est,
            (plan.k, plan.mu),
            self.horizon,
            plan.beta(),
            plan.estimator,
            plan.mu_ls_scaling,
        )?;
        if !z.is_finite() {
            return Err(Error::Numeric(format!("standardised statistic {z}")));
        }
        Ok(Replication::Statistic(z))
    }
}

/// Standardised statistic of replication `rep` at horizon index `t_index`.
pub fn run_replication(plan: &ExperimentPlan, t_index: usize, rep: usize) -> Result<Replication> {
    plan.validate()?;
    if t_index >= plan.t_list.len() {
        return Err(Error::Precondition(format!("no horizon with index {t_index}")));
    }
    Ok(HorizonContext::new(plan, t_index)?.run(plan, rep))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub steps: usize,
    pub replications: usize,
    pub d_k: f64,
    pub dkw: f64,
    pub degenerate: usize,
    pub failed: usize,
    pub mean: f64,
    pub variance: f64,
    /// Sample variance over the target 1.
    pub var_ratio: f64,
    pub tainted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovReport {
    pub estimator: crate::estimators::EstimatorKind,
    pub rows: Vec<ReportRow>,
    pub fit: Option<RateFit>,
    /// Why the rate fit is missing.
    pub fit_error: Option<String>,
    pub paper_exponent: f64,
    pub tainted: bool,
}

/// Outcome of the one-sided rate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheck {
    /// No increase of `d_K` beyond the combined DKW bands.
    pub nonincreasing: bool,
    pub slope: f64,
    /// Upper 95% bound on the decay exponent `−slope`.
    pub exponent_upper: f64,
    pub slope_ok: bool,
    pub exponent_ok: bool,
}

impl RateCheck {
    pub fn pass(&self) -> bool {
        self.nonincreasing && self.slope_ok && self.exponent_ok
    }
}

impl KolmogorovReport {
    pub fn rate_check(&self) -> Option<RateCheck> {
        let fit = self.fit.as_ref()?;
        let nonincreasing = self
            .rows
            .windows(2)
            .all(|w| w[1].d_k <= w[0].d_k + w[0].dkw + w[1].dkw);
        let exponent_upper = fit.upper_exponent_bound(0.95);
        Some(RateCheck {
            nonincreasing,
            slope: fit.slope,
            exponent_upper,
            slope_ok: fit.slope <= -0.1,
            exponent_ok: self.paper_exponent <= exponent_upper,
        })
    }
}

/// Samples of every horizon in plan order.
pub struct PlanOutput {
    pub report: KolmogorovReport,
    pub samples: Vec<Vec<Replication>>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs every horizon, writes CSVs when `out_dir` is set.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutput> {
    plan.validate()?;
    let pool = pool(plan.workers)?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for t_index in 0..plan.t_list.len() {
        let ctx = HorizonContext::new(plan, t_index)?;
        let reps: Vec<Replication> = pool.install(|| {
            (0..plan.replications)
                .into_par_iter()
                .map(|rep| ctx.run(plan, rep))
                .collect()
        });
        rows.push(summarize(plan, t_index, &reps)?);
        samples.push(reps);
    }
    let rate_rows: Vec<RateRow> = rows
        .iter()
        .map(|r| RateRow {
            t: r.t,
            d_k: r.d_k,
            dkw: r.dkw,
        })
        .collect();
    let (fit, fit_error) = match fit_rate(&rate_rows) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let tainted = rows.iter().any(|r| r.tainted);
    if tainted {
        log::warn!("{}: report tainted by degenerate or failed replications", plan.estimator);
    }
    let report = KolmogorovReport {
        estimator: plan.estimator,
        rows,
        fit,
        fit_error,
        paper_exponent: plan.estimator.paper_exponent(plan.beta()),
        tainted,
    };
    if let Some(dir) = &plan.out_dir {
        write_outputs(dir, plan, &report, &samples)?;
    }
    Ok(PlanOutput { report, samples })
}

fn summarize(plan: &ExperimentPlan, t_index: usize, reps: &[Replication]) -> Result<ReportRow> {
    let values: Vec<f64> = reps.iter().filter_map(Replication::value).collect();
    let degenerate = reps.iter().filter(|r| matches!(r, Replication::Degenerate)).count();
    let failed = reps.iter().filter(|r| matches!(r, Replication::Failed(_))).count();
    let bad = degenerate + failed;
    let tainted = bad * 100 >= reps.len() || values.is_empty();
    let (d_k, dkw) = if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            empirical_kolmogorov(&values)?,
            dkw_halfwidth(values.len(), plan.dkw_delta)?,
        )
    };
    let variance = sample_variance(&values);
    Ok(ReportRow {
        t: plan.t_list[t_index],
        steps: plan.steps(t_index),
        replications: reps.len(),
        d_k,
        dkw,
        degenerate: bad,
        failed,
        mean: sample_mean(&values),
        variance,
        var_ratio: variance,
        tainted,
    })
}

/// `samples_T<T>.csv` name for a horizon.
pub fn sample_file_name(t: f64) -> String {
    format!("samples_T{}.csv", g17(t))
}

pub fn write_samples<W: Write>(mut w: W, reps: &[Replication]) -> Result<()> {
    writeln!(w, "rep,stat,degenerate")?;
    for (i, r) in reps.iter().enumerate() {
        match r {
            Replication::Statistic(v) => writeln!(w, "{i},{},0", g17(*v))?,
            _ => writeln!(w, "{i},nan,1")?,
        }
    }
    Ok(())
}

pub fn write_report<W: Write>(mut w: W, report: &KolmogorovReport) -> Result<()> {
    writeln!(w, "T,N,dK,dkw,slope,slope_se,paper_exponent,var_ratio")?;
    let (slope, se) = report
        .fit
        .as_ref()
        .map_or((f64::NAN, f64::NAN), |f| (f.slope, f.slope_se));
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            g17(r.t),
            r.replications,
            g17(r.d_k),
            g17(r.dkw),
            g17(slope),
            g17(se),
            g17(report.paper_exponent),
            g17(r.var_ratio)
        )?;
    }
    Ok(())
}

fn write_outputs(
    dir: &Path,
    plan: &ExperimentPlan,
    report: &KolmogorovReport,
    samples: &[Vec<Replication>],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (t, reps) in plan.t_list.iter().zip(samples) {
        let f = std::fs::File::create(dir.join(sample_file_name(*t)))?;
        write_samples(std::io::BufWriter::new(f), reps)?;
    }
    let f = std::fs::File::create(dir.join("report.csv"))?;
    write_report(std::io::BufWriter::new(f), report)
}
