//! Experiment plans.

use std::path::PathBuf;

use crate::config::{model_from_config, quad_from_config, Config, MODEL_KEYS, QUAD_KEYS};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, IntegralMode, MuLsScaling, StieltjesRule};
use crate::hquad::QuadratureSpec;
use crate::simulate::Scheme;

/// Driver sampler selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerChoice {
    /// Circulant embedding for fbm, Cholesky otherwise.
    #[default]
    Auto,
    Cholesky,
}

impl std::str::FromStr for SamplerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "circulant" => Ok(Self::Auto),
            "cholesky" => Ok(Self::Cholesky),
            other => Err(Error::Config(format!("unknown sampler `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub estimator: EstimatorKind,
    pub model: CovarianceModel,
    pub k: f64,
    pub mu: f64,
    pub t_list: Vec<f64>,
    /// One step count per horizon, or a single count for all.
    pub n_per_t: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub quad: QuadratureSpec,
    pub mode: IntegralMode,
    pub rule: StieltjesRule,
    pub mu_ls_scaling: MuLsScaling,
    pub scheme: Scheme,
    pub sampler: SamplerChoice,
    /// DKW confidence parameter `δ`.
    pub dkw_delta: f64,
    /// Replaces the driver by zero, leaving only the deterministic part.
    pub zero_driver: bool,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
}

pub const PLAN_KEYS: &[&str] = &[
    "estimator",
    "k",
    "mu",
    "T_list",
    "n_per_T",
    "N",
    "seed",
    "mode",
    "rule",
    "mu_ls_scaling",
    "scheme",
    "sampler",
    "dkw_delta",
    "zero_driver",
    "out_dir",
    "workers",
];

impl ExperimentPlan {
    /// fbm `β = 0.6`, `k = 1`, `μ = 2`, skorokhod mode.
    pub fn new(estimator: EstimatorKind, t_list: Vec<f64>, n_per_t: Vec<usize>, replications: usize) -> Self {
        Self {
            estimator,
            model: CovarianceModel::fbm(0.6).expect("valid β"),
            k: 1.0,
            mu: 2.0,
            t_list,
            n_per_t,
            replications,
            seed: 0,
            quad: QuadratureSpec::default(),
            mode: IntegralMode::Skorokhod,
            rule: StieltjesRule::Trapezoid,
            mu_ls_scaling: MuLsScaling::default(),
            scheme: Scheme::ExactOu,
            sampler: SamplerChoice::Auto,
            dkw_delta: 0.05,
            zero_driver: false,
            out_dir: None,
            workers: 0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.model.beta()
    }

    pub fn steps(&self, t_index: usize) -> usize {
        if self.n_per_t.len() == 1 {
            self.n_per_t[0]
        } else {
            self.n_per_t[t_index]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 100 {
            return bad(format!("N = {} must be at least 100", self.replications));
        }
        if self.t_list.is_empty() {
            return bad("T_list is empty".into());
        }
        if self.t_list.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("horizons must be positive".into());
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("T_list must be strictly increasing".into());
        }
        if self.n_per_t.len() != 1 && self.n_per_t.len() != self.t_list.len() {
            return bad(format!(
                "n_per_T has {} entries for {} horizons",
                self.n_per_t.len(),
                self.t_list.len()
            ));
        }
        if self.n_per_t.iter().any(|&n| n < 2) {
            return bad("n_per_T entries must be at least 2".into());
        }
        if !(self.k > 0.0 && self.k.is_finite() && self.mu.is_finite()) {
            return bad(format!("k = {} must be positive and μ = {} finite", self.k, self.mu));
        }
        if matches!(self.estimator, EstimatorKind::KMoment | EstimatorKind::KLs)
            && !(self.beta() > 0.5 && self.beta() < 0.75)
        {
            return bad(format!(
                "{} requires β in (1/2, 3/4), got {}",
                self.estimator,
                self.beta()
            ));
        }
        if self.estimator == EstimatorKind::KMoment {
            self.model
                .hypothesis_constants()
                .map_err(|e| Error::Config(format!("k_moment: {e}")))?;
        }
        if self.estimator.needs_integral() && self.mode == IntegralMode::Skorokhod {
            self.model
                .kernel_parts()
                .map_err(|e| Error::Config(format!("skorokhod trace: {e}")))?;
        }
        if !(self.dkw_delta > 0.0 && self.dkw_delta <= 1.0) {
            return bad(format!("dkw_delta = {} outside (0, 1]", self.dkw_delta));
        }
        self.quad.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.reject_unknown(&[PLAN_KEYS, MODEL_KEYS, QUAD_KEYS])?;
        let t_list: Vec<f64> = cfg
            .list("T_list")?
            .ok_or_else(|| Error::Config("missing key `T_list`".into()))?;
        let n_per_t: Vec<usize> = cfg
            .list("n_per_T")?
            .ok_or_else(|| Error::Config("missing key `n_per_T`".into()))?;
        let mut plan = Self::new(
            cfg.required("estimator")?,
            t_list,
            n_per_t,
            cfg.required("N")?,
        );
        plan.model = model_from_config(cfg)?;
        plan.k = cfg.parsed_or("k", plan.k)?;
        plan.mu = cfg.parsed_or("mu", plan.mu)?;
        plan.seed = cfg.parsed_or("seed", plan.seed)?;
        plan.quad = quad_from_config(cfg)?;
        plan.mode = cfg.parsed_or("mode", plan.mode)?;
        plan.rule = cfg.parsed_or("rule", plan.rule)?;
        plan.mu_ls_scaling = cfg.parsed_or("mu_ls_scaling", plan.mu_ls_scaling)?;
        plan.scheme = cfg.parsed_or("scheme", plan.scheme)?;
        plan.sampler = cfg.parsed_or("sampler", plan.sampler)?;
        plan.dkw_delta = cfg.parsed_or("dkw_delta", plan.dkw_delta)?;
        plan.zero_driver = cfg.flag("zero_driver", false)?;
        plan.out_dir = cfg.get("out_dir").map(PathBuf::from);
        plan.workers = cfg.parsed_or("workers", plan.workers)?;
        plan.validate()?;
        Ok(plan)
    }
}
