//! The moment and least-squares estimators of `(k, μ)` computed from a
//! discretised trajectory, and their CLT standardisations.

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::hquad::{sigma_beta_sq, skorokhod_trace, QuadratureSpec};
use crate::simulate::{GaussianPath, VasicekPath};
use crate::special::gamma;

const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    MuMoment,
    KMoment,
    MuLs,
    KLs,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::MuMoment, Self::KMoment, Self::MuLs, Self::KLs];

    pub fn name(self) -> &'static str {
        match self {
            Self::MuMoment => "mu_moment",
            Self::KMoment => "k_moment",
            Self::MuLs => "mu_ls",
            Self::KLs => "k_ls",
        }
    }

    /// Berry–Esséen exponent claimed for the standardised statistic.
    pub fn paper_exponent(self, beta: f64) -> f64 {
        match self {
            Self::KMoment => (1.0f64 / 3.0).min((3.0 - 4.0 * beta) / 2.0),
            Self::KLs => 0.75 - beta,
            Self::MuMoment => beta / 2.0,
            Self::MuLs => (1.0 - beta) / 2.0,
        }
    }

    pub fn needs_integral(self) -> bool {
        matches!(self, Self::MuLs | Self::KLs)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }
}

/// How `∫V dV` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegralMode {
    /// Pathwise Riemann–Stieltjes limit.
    Young,
    /// Divergence integral: pathwise value minus the trace `c(T)`.
    #[default]
    Skorokhod,
}

impl IntegralMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Young => "young",
            Self::Skorokhod => "skorokhod",
        }
    }
}

impl std::str::FromStr for IntegralMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "young" => Ok(Self::Young),
            "skorokhod" => Ok(Self::Skorokhod),
            other => Err(Error::Config(format!("unknown integral mode `{other}`"))),
        }
    }
}

/// Riemann–Stieltjes sum used for pathwise integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StieltjesRule {
    /// `Σ a_i (b_{i+1} − b_i)`
    Forward,
    /// `Σ ½(a_i + a_{i+1})(b_{i+1} − b_i)`
    #[default]
    Trapezoid,
}

impl std::str::FromStr for StieltjesRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "trapezoid" => Ok(Self::Trapezoid),
            other => Err(Error::Config(format!("unknown Stieltjes rule `{other}`"))),
        }
    }
}

/// Scaling applied to `μ̂_LS − μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuLsScaling {
    /// `k T^{1−β}`
    #[default]
    PowerOneMinusBeta,
    /// `k √T`
    SqrtT,
}

impl std::str::FromStr for MuLsScaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t_pow_1_minus_beta" => Ok(Self::PowerOneMinusBeta),
            "sqrt_t" => Ok(Self::SqrtT),
            other => Err(Error::Config(format!("unknown mu_ls scaling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrections {
    /// Pathwise `∫V dV`.
    pub young: f64,
    /// `c(T)`, zero in young mode.
    pub trace: f64,
    pub mode: IntegralMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub value: f64,
    /// `S_T` for `k̂`, the denominator for the least-squares estimators.
    pub statistic: f64,
    pub corrections: Option<Corrections>,
    pub valid: bool,
}

impl EstimateResult {
    fn ok(value: f64, statistic: f64, corrections: Option<Corrections>) -> Self {
        Self {
            value,
            statistic,
            corrections,
            valid: true,
        }
    }

    fn degenerate(statistic: f64, corrections: Option<Corrections>) -> Self {
        Self {
            value: f64::NAN,
            statistic,
            corrections,
            valid: false,
        }
    }

    /// `Err(Degenerate)` for an invalid estimate.
    pub fn checked(self) -> Result<Self> {
        if self.valid {
            Ok(self)
        } else {
            Err(Error::Degenerate(format!(
                "degenerate statistic {}",
                self.statistic
            )))
        }
    }
}

fn check_steps(path: &VasicekPath) -> Result<()> {
    if path.grid.steps() < 2 {
        return Err(Error::Precondition("estimators need at least two steps".into()));
    }
    Ok(())
}

/// Trapezoid rule for `∫₀ᵀ f` from node values.
pub fn time_integral(values: &[f64], delta: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    delta * (inner + 0.5 * (values[0] + values[n - 1]))
}

fn time_integral_sq(values: &[f64], delta: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().map(|v| v * v).sum();
    delta * (inner + 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]))
}

/// `(1/T)∫₀ᵀ V_t dt`
pub fn mu_moment(path: &VasicekPath) -> Result<EstimateResult> {
    check_steps(path)?;
    let m = shifted_mean(&path.values, path.grid.delta(), path.grid.horizon());
    Ok(EstimateResult::ok(m, m, None))
}

/// `(1/T)∫v` summed relative to `v_0`, so constant paths are exact.
fn shifted_mean(values: &[f64], delta: f64, t: f64) -> f64 {
    let r = values[0];
    let shifted: Vec<f64> = values.iter().map(|v| v - r).collect();
    r + time_integral(&shifted, delta) / t
}

/// `S_T = (1/T)∫V² − ((1/T)∫V)²`
pub fn empirical_variance(path: &VasicekPath) -> f64 {
    let t = path.grid.horizon();
    let d = path.grid.delta();
    // centring first keeps S_T exactly invariant under constant shifts
    let m = shifted_mean(&path.values, d, t);
    let centred: Vec<f64> = path.values.iter().map(|v| v - m).collect();
    let c = time_integral(&centred, d) / t;
    time_integral_sq(&centred, d) / t - c * c
}

/// `k̂ = (S_T / (C_β Γ(2β−1)))^{−1/(2β)}`
pub fn k_moment(path: &VasicekPath, model: &CovarianceModel) -> Result<EstimateResult> {
    check_steps(path)?;
    let hc = model.hypothesis_constants()?;
    let s = empirical_variance(path);
    if !(s > 0.0) {
        return Ok(EstimateResult::degenerate(s, None));
    }
    let v = k_from_statistic(s, hc.c_beta, hc.beta);
    if !v.is_finite() {
        return Err(Error::Numeric(format!("k̂ = {v} from S_T = {s}")));
    }
    Ok(EstimateResult::ok(v, s, None))
}

/// Inverse of `S ↦ C_β Γ(2β−1) k^{−2β}`.
pub fn k_from_statistic(s: f64, c_beta: f64, beta: f64) -> f64 {
    (s / (c_beta * gamma(2.0 * beta - 1.0))).powf(-1.0 / (2.0 * beta))
}

fn same_grid(v: &VasicekPath, g: &GaussianPath) -> Result<()> {
    if v.grid != g.grid || v.values.len() != g.values.len() {
        return Err(Error::GridMismatch("path and driver grids differ".into()));
    }
    Ok(())
}

fn stieltjes(a: &[f64], b: &[f64], rule: StieltjesRule) -> f64 {
    let n = a.len();
    match rule {
        StieltjesRule::Forward => (0..n - 1).map(|i| a[i] * (b[i + 1] - b[i])).sum(),
        StieltjesRule::Trapezoid => (0..n - 1)
            .map(|i| 0.5 * (a[i] + a[i + 1]) * (b[i + 1] - b[i]))
            .sum(),
    }
}

/// `Σ v_i (g_{i+1} − g_i)`
pub fn young_integral_v_dg(vpath: &VasicekPath, gpath: &GaussianPath) -> Result<f64> {
    young_integral_v_dg_with(vpath, gpath, StieltjesRule::Forward)
}

pub fn young_integral_v_dg_with(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    rule: StieltjesRule,
) -> Result<f64> {
    same_grid(vpath, gpath)?;
    Ok(stieltjes(&vpath.values, &gpath.values, rule))
}

/// `c(T) = ∫₀ᵀ∫₀ᵗ e^{−k(t−s)} ∂²R(t,s) ds dt`
pub fn skorokhod_correction(
    model: &CovarianceModel,
    k: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(skorokhod_trace(model, k, t, quad)?.value)
}

/// Pathwise `∫V dV` by `rule`, then the trace subtracted in skorokhod mode.
/// `trace` is `c(T)` for the path's `k`; it is ignored in young mode.
pub fn int_v_dv_with_trace(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    trace: f64,
    rule: StieltjesRule,
) -> Result<(f64, Corrections)> {
    same_grid(vpath, gpath)?;
    let young = stieltjes(&vpath.values, &vpath.values, rule);
    let trace = match mode {
        IntegralMode::Young => 0.0,
        IntegralMode::Skorokhod => trace,
    };
    Ok((young - trace, Corrections { young, trace, mode }))
}

/// `∫₀ᵀ V dV` with the trace evaluated for the path's own `k`.
pub fn int_v_dv(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let trace = trace_for(vpath, mode, model, quad)?;
    Ok(int_v_dv_with_trace(vpath, gpath, mode, trace, StieltjesRule::default())?.0)
}

fn trace_for(
    vpath: &VasicekPath,
    mode: IntegralMode,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    match mode {
        IntegralMode::Young => Ok(0.0),
        IntegralMode::Skorokhod => skorokhod_correction(model, vpath.k, vpath.grid.horizon(), quad),
    }
}

struct LsParts {
    t: f64,
    v_t: f64,
    int_v: f64,
    int_v2: f64,
    int_vdv: f64,
    corr: Corrections,
}

fn ls_parts(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    trace: f64,
    rule: StieltjesRule,
) -> Result<LsParts> {
    check_steps(vpath)?;
    let (int_vdv, corr) = int_v_dv_with_trace(vpath, gpath, mode, trace, rule)?;
    let d = vpath.grid.delta();
    Ok(LsParts {
        t: vpath.grid.horizon(),
        v_t: *vpath.values.last().unwrap(),
        int_v: time_integral(&vpath.values, d),
        int_v2: time_integral_sq(&vpath.values, d),
        int_vdv,
        corr,
    })
}

/// `k̂_LS = (V_T∫V − T∫V dV) / (T∫V² − (∫V)²)` with a precomputed trace.
pub fn k_ls_with_trace(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    trace: f64,
    rule: StieltjesRule,
) -> Result<EstimateResult> {
    let p = ls_parts(vpath, gpath, mode, trace, rule)?;
    let den = p.t * p.int_v2 - p.int_v * p.int_v;
    if !(den > DEGENERATE_EPS * p.t * p.t) {
        return Ok(EstimateResult::degenerate(den, Some(p.corr)));
    }
    let num = p.v_t * p.int_v - p.t * p.int_vdv;
    Ok(EstimateResult::ok(num / den, den, Some(p.corr)))
}

pub fn k_ls(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<EstimateResult> {
    let trace = trace_for(vpath, mode, model, quad)?;
    k_ls_with_trace(vpath, gpath, mode, trace, StieltjesRule::default())
}

/// `μ̂_LS = (V_T∫V² − ∫V dV ∫V) / (V_T∫V − T∫V dV)` with a precomputed trace.
pub fn mu_ls_with_trace(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    trace: f64,
    rule: StieltjesRule,
) -> Result<EstimateResult> {
    let p = ls_parts(vpath, gpath, mode, trace, rule)?;
    let a = p.v_t * p.int_v;
    let b = p.t * p.int_vdv;
    let den = a - b;
    let scale = a.abs() + b.abs();
    if !(den.abs() > DEGENERATE_EPS * scale) {
        return Ok(EstimateResult::degenerate(den, Some(p.corr)));
    }
    let num = p.v_t * p.int_v2 - p.int_vdv * p.int_v;
    Ok(EstimateResult::ok(num / den, den, Some(p.corr)))
}

pub fn mu_ls(
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    mode: IntegralMode,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<EstimateResult> {
    let trace = trace_for(vpath, mode, model, quad)?;
    mu_ls_with_trace(vpath, gpath, mode, trace, StieltjesRule::default())
}

/// Multiplier `s` such that `s·(estimate − truth)` is asymptotically
/// standard normal.
pub fn standard_scale(
    which: EstimatorKind,
    k: f64,
    t: f64,
    beta: f64,
    mu_ls_scaling: MuLsScaling,
) -> Result<f64> {
    if !(k > 0.0 && t > 0.0) {
        return Err(Error::Precondition(format!("k = {k} and T = {t} must be positive")));
    }
    Ok(match which {
        EstimatorKind::KMoment => (4.0 * beta * beta * t / (k * sigma_beta_sq(beta)?)).sqrt(),
        EstimatorKind::KLs => (t / (k * sigma_beta_sq(beta)?)).sqrt(),
        EstimatorKind::MuMoment => k * t.powf(1.0 - beta),
        EstimatorKind::MuLs => match mu_ls_scaling {
            MuLsScaling::PowerOneMinusBeta => k * t.powf(1.0 - beta),
            MuLsScaling::SqrtT => k * t.sqrt(),
        },
    })
}

/// Standardised statistic; `truth` is `(k, μ)`.
pub fn standardize(
    est: &EstimateResult,
    truth: (f64, f64),
    t: f64,
    beta: f64,
    which: EstimatorKind,
    mu_ls_scaling: MuLsScaling,
) -> Result<f64> {
    let est = est.checked()?;
    let (k, mu) = truth;
    let target = match which {
        EstimatorKind::KMoment | EstimatorKind::KLs => k,
        EstimatorKind::MuMoment | EstimatorKind::MuLs => mu,
    };
    let diff = est.value - target;
    if diff == 0.0 {
        return Ok(0.0);
    }
    Ok(standard_scale(which, k, t, beta, mu_ls_scaling)? * diff)
}

/// Computes `which` from a path, using `trace` for the least-squares pair.
pub fn estimate(
    which: EstimatorKind,
    vpath: &VasicekPath,
    gpath: &GaussianPath,
    model: &CovarianceModel,
    mode: IntegralMode,
    trace: f64,
    rule: StieltjesRule,
) -> Result<EstimateResult> {
    match which {
        EstimatorKind::MuMoment => mu_moment(vpath),
        EstimatorKind::KMoment => k_moment(vpath, model),
        EstimatorKind::KLs => k_ls_with_trace(vpath, gpath, mode, trace, rule),
        EstimatorKind::MuLs => mu_ls_with_trace(vpath, gpath, mode, trace, rule),
    }
}
