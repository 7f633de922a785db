//! Covariance models of the Gaussian driver.
//!
//! Each model's mixed derivative has the form
//! `∂²R/∂t∂s = C_β|t−s|^{2β−2} + Ψ(t,s)` with `|Ψ| ≤ C'_β (ts)^{β−1}`.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Fbm,
    Subfbm,
    Bifbm,
    Tabulated,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbm" => Ok(Self::Fbm),
            "subfbm" => Ok(Self::Subfbm),
            "bifbm" => Ok(Self::Bifbm),
            "tabulated" => Ok(Self::Tabulated),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Extra {
    None,
    Bifbm { hprime: f64, kexp: f64 },
    Table { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    kind: ModelKind,
    beta: f64,
    extra: Extra,
    normalized: bool,
    /// Multiplies the closed form, `1/R(1,1)` for normalized sub-fbm.
    scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisConstants {
    pub beta: f64,
    pub c_beta: f64,
    pub c_beta_prime: f64,
}

/// Shape of one additive piece of the mixed derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelShape {
    /// `|t−s|^γ`
    Lag,
    /// `(t+s)^γ`
    Sum,
}

/// `coef · shape(t,s)^gamma`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPart {
    pub shape: KernelShape,
    pub coef: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub max_violation: f64,
    pub worst: Option<(f64, f64)>,
    pub tol: f64,
    pub pass: bool,
}

/// Covariance matrix on a set of times with its lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovFactor {
    pub matrix: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    /// Absolute diagonal jitter that was needed (0 if none).
    pub jitter: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.5 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (1/2, 1)")));
    }
    Ok(())
}

impl CovarianceModel {
    /// Standard fractional Brownian motion with Hurst index `beta`.
    pub fn fbm(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            kind: ModelKind::Fbm,
            beta,
            extra: Extra::None,
            normalized: true,
            scale: 1.0,
        })
    }

    /// Sub-fractional Brownian motion. With `normalized` the covariance is
    /// divided by `R(1,1) = 2 − 2^{2H−1}`.
    pub fn subfbm(h: f64, normalized: bool) -> Result<Self> {
        check_beta(h)?;
        let scale = if normalized {
            1.0 / (2.0 - 2f64.powf(2.0 * h - 1.0))
        } else {
            1.0
        };
        Ok(Self {
            kind: ModelKind::Subfbm,
            beta: h,
            extra: Extra::None,
            normalized,
            scale,
        })
    }

    /// Bifractional Brownian motion; `beta = hprime·kexp`.
    pub fn bifbm(hprime: f64, kexp: f64) -> Result<Self> {
        if !(hprime > 0.0 && hprime < 1.0 && kexp > 0.0 && kexp <= 1.0) {
            return Err(Error::Domain(format!(
                "bifbm needs H' in (0,1) and K in (0,1], got ({hprime}, {kexp})"
            )));
        }
        check_beta(hprime * kexp)?;
        Ok(Self {
            kind: ModelKind::Bifbm,
            beta: hprime * kexp,
            extra: Extra::Bifbm { hprime, kexp },
            normalized: true,
            scale: 1.0,
        })
    }

    /// Covariance tabulated on `times × times` (row-major `values`),
    /// interpolated bilinearly. `times[0]` must be 0.
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let n = times.len();
        if n < 2 || values.len() != n * n {
            return Err(Error::Precondition(
                "table needs at least two times and a square value array".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "table times must start at 0 and increase strictly".into(),
            ));
        }
        for i in 0..n {
            if values[i] != 0.0 || values[i * n] != 0.0 {
                return Err(Error::Precondition("table must satisfy R(0,t) = 0".into()));
            }
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::Precondition("table is not symmetric".into()));
                }
            }
        }
        let normalized = false;
        Ok(Self {
            kind: ModelKind::Tabulated,
            beta,
            extra: Extra::Table { times, values },
            normalized,
            scale: 1.0,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn cov(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= 0.0 && s >= 0.0) {
            return Err(Error::Domain(format!("negative time in R({t}, {s})")));
        }
        if t == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        let b2 = 2.0 * self.beta;
        let r = match &self.extra {
            Extra::None if self.kind == ModelKind::Fbm => {
                0.5 * (t.powf(b2) + s.powf(b2) - (t - s).abs().powf(b2))
            }
            Extra::None => {
                t.powf(b2) + s.powf(b2) - 0.5 * ((t + s).powf(b2) + (t - s).abs().powf(b2))
            }
            Extra::Bifbm { hprime, kexp } => {
                let h2 = 2.0 * hprime;
                2f64.powf(-kexp)
                    * ((t.powf(h2) + s.powf(h2)).powf(*kexp) - (t - s).abs().powf(h2 * kexp))
            }
            Extra::Table { times, values } => bilinear(times, values, t, s)?,
        };
        Ok(self.scale * r)
    }

    pub fn cross_deriv(&self, t: f64, s: f64) -> Result<f64> {
        if !(t > 0.0 && s > 0.0) {
            return Err(Error::Domain(format!(
                "mixed derivative needs t, s > 0, got ({t}, {s})"
            )));
        }
        if t == s {
            return Err(Error::Singularity(t));
        }
        let parts = self.kernel_parts()?;
        Ok(parts
            .iter()
            .map(|p| {
                let x = match p.shape {
                    KernelShape::Lag => (t - s).abs(),
                    KernelShape::Sum => t + s,
                };
                p.coef * x.powf(p.gamma)
            })
            .sum())
    }

    /// Additive decomposition of the mixed derivative.
    pub fn kernel_parts(&self) -> Result<Vec<KernelPart>> {
        let b = self.beta;
        let c = self.scale * b * (2.0 * b - 1.0);
        let gamma = 2.0 * b - 2.0;
        match self.kind {
            ModelKind::Fbm => Ok(vec![KernelPart {
                shape: KernelShape::Lag,
                coef: c,
                gamma,
            }]),
            ModelKind::Subfbm => Ok(vec![
                KernelPart {
                    shape: KernelShape::Lag,
                    coef: c,
                    gamma,
                },
                KernelPart {
                    shape: KernelShape::Sum,
                    coef: -c,
                    gamma,
                },
            ]),
            ModelKind::Bifbm => Err(Error::Unsupported(
                "mixed derivative of bifbm is not implemented".into(),
            )),
            ModelKind::Tabulated => Err(Error::Unsupported(
                "tabulated covariances are not differentiated".into(),
            )),
        }
    }

    pub fn hypothesis_constants(&self) -> Result<HypothesisConstants> {
        let b = self.beta;
        let c = self.scale * b * (2.0 * b - 1.0);
        match self.kind {
            ModelKind::Fbm => Ok(HypothesisConstants {
                beta: b,
                c_beta: c,
                c_beta_prime: 0.0,
            }),
            // (t+s)^{2H−2} ≤ 2^{2H−2}(ts)^{H−1} by AM-GM
            ModelKind::Subfbm => Ok(HypothesisConstants {
                beta: b,
                c_beta: c,
                c_beta_prime: 2f64.powf(2.0 * b - 2.0) * c,
            }),
            ModelKind::Bifbm => Err(Error::Unsupported(
                "bifbm constants are not available".into(),
            )),
            ModelKind::Tabulated => Err(Error::Unsupported(
                "tabulated covariances carry no hypothesis constants".into(),
            )),
        }
    }

    pub fn verify_hypothesis(&self, grid: &[(f64, f64)], tol: f64) -> Result<HypothesisReport> {
        let hc = self.hypothesis_constants()?;
        let mut max_violation = f64::NEG_INFINITY;
        let mut worst = None;
        for &(t, s) in grid {
            let d = self.cross_deriv(t, s)?;
            let psi = d - hc.c_beta * (t - s).abs().powf(2.0 * hc.beta - 2.0);
            let v = psi.abs() - hc.c_beta_prime * (t * s).powf(hc.beta - 1.0);
            if v > max_violation {
                max_violation = v;
                worst = Some((t, s));
            }
        }
        if grid.is_empty() {
            max_violation = 0.0;
        }
        Ok(HypothesisReport {
            max_violation,
            worst,
            tol,
            pass: max_violation <= tol,
        })
    }

    /// `R(t_i, t_j)` on strictly increasing positive times, factorised.
    pub fn cov_matrix(&self, times: &[f64]) -> Result<CovFactor> {
        if times.is_empty() {
            return Err(Error::Precondition("empty time set".into()));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "times must be positive and strictly increasing".into(),
            ));
        }
        let n = times.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let r = self.cov(times[i], times[j])?;
                m[(i, j)] = r;
                m[(j, i)] = r;
            }
        }
        factorize(m)
    }
}

/// Cholesky with escalating diagonal jitter `0, 1e−14, …, 1e−10` times the
/// largest diagonal entry.
pub fn factorize(matrix: DMatrix<f64>) -> Result<CovFactor> {
    let max_diag = matrix.diagonal().max();
    let mut last = 0.0;
    for rel in [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10] {
        let jitter = rel * max_diag;
        let mut a = matrix.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(a) {
            let lower = ch.l();
            if lower.iter().all(|x| x.is_finite()) {
                if jitter > 0.0 {
                    log::info!("covariance factorised with jitter {jitter:e}");
                }
                return Ok(CovFactor {
                    matrix,
                    lower,
                    jitter,
                });
            }
        }
        last = jitter;
    }
    Err(Error::Conditioning { jitter: last })
}

fn bilinear(times: &[f64], values: &[f64], t: f64, s: f64) -> Result<f64> {
    let n = times.len();
    let tmax = times[n - 1];
    if t > tmax || s > tmax {
        return Err(Error::Domain(format!(
            "({t}, {s}) outside the table range [0, {tmax}]"
        )));
    }
    let locate = |x: f64| -> (usize, f64) {
        let i = times.partition_point(|&u| u <= x).clamp(1, n - 1) - 1;
        (i, (x - times[i]) / (times[i + 1] - times[i]))
    };
    let (i, a) = locate(t);
    let (j, b) = locate(s);
    let v = |p: usize, q: usize| values[p * n + q];
    Ok((1.0 - a) * (1.0 - b) * v(i, j)
        + a * (1.0 - b) * v(i + 1, j)
        + (1.0 - a) * b * v(i, j + 1)
        + a * b * v(i + 1, j + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn fbm_closed_form_values() {
        let m = CovarianceModel::fbm(0.75).unwrap();
        assert_eq!(m.cov(1.0, 1.0).unwrap(), 1.0);
        let m = CovarianceModel::fbm(0.6).unwrap();
        assert!(rel(m.cov(2.0, 1.0).unwrap(), 1.148_698_354_997_035) < 1e-15);
        for model in [
            m.clone(),
            CovarianceModel::subfbm(0.6, false).unwrap(),
            CovarianceModel::bifbm(0.8, 0.8).unwrap(),
        ] {
            assert_eq!(model.cov(0.0, 5.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn boundary_betas_rejected() {
        assert!(CovarianceModel::fbm(0.5).is_err());
        assert!(CovarianceModel::fbm(1.0).is_err());
        assert!(CovarianceModel::subfbm(0.5, false).is_err());
        assert!(CovarianceModel::bifbm(0.5, 0.9).is_err());
    }

    #[test]
    fn negative_time_is_domain_error() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        assert!(matches!(m.cov(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cross_derivative_values() {
        let m = CovarianceModel::fbm(0.75).unwrap();
        assert!((m.cross_deriv(2.0, 1.0).unwrap() - 0.375).abs() < 1e-15);
        let m = CovarianceModel::fbm(0.6).unwrap();
        assert!(rel(m.cross_deriv(3.0, 1.0).unwrap(), 0.068_921_901_299_822_1) < 1e-14);
        let s = CovarianceModel::subfbm(0.6, false).unwrap();
        assert!(matches!(s.cross_deriv(2.0, 2.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn cross_derivative_matches_finite_differences() {
        let h = 1e-3;
        for model in [
            CovarianceModel::fbm(0.6).unwrap(),
            CovarianceModel::fbm(0.7).unwrap(),
            CovarianceModel::subfbm(0.6, false).unwrap(),
            CovarianceModel::subfbm(0.7, true).unwrap(),
        ] {
            for &(t, s) in &[(3.0, 1.0), (1.0, 1.5), (0.5, 0.2), (7.0, 2.0)] {
                let r = |a: f64, b: f64| model.cov(a, b).unwrap();
                let fd = (r(t + h, s + h) - r(t + h, s - h) - r(t - h, s + h) + r(t - h, s - h))
                    / (4.0 * h * h);
                let d = model.cross_deriv(t, s).unwrap();
                assert!(rel(fd, d) < 1e-5, "{model:?} at ({t},{s}): {fd} vs {d}");
            }
        }
    }

    #[test]
    fn hypothesis_constants_per_model() {
        let c = CovarianceModel::fbm(0.6).unwrap().hypothesis_constants().unwrap();
        assert!((c.c_beta - 0.12).abs() < 1e-15);
        assert_eq!(c.c_beta_prime, 0.0);
        let c = CovarianceModel::fbm(0.75).unwrap().hypothesis_constants().unwrap();
        assert!((c.c_beta - 0.375).abs() < 1e-15);
        let c = CovarianceModel::subfbm(0.6, false)
            .unwrap()
            .hypothesis_constants()
            .unwrap();
        assert!((c.c_beta - 0.12).abs() < 1e-15);
        assert!(rel(c.c_beta_prime, 0.068_921_901_299_822_1) < 1e-14);
        let tab = CovarianceModel::tabulated(vec![0.0, 1.0], vec![0.0, 0.0, 0.0, 1.0], 0.6)
            .unwrap();
        assert!(matches!(tab.hypothesis_constants(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn subfbm_bound_is_attained_only_up_to_constant() {
        // grid maximum of |Ψ|(ts)^{1−β} must not exceed C'_β
        let m = CovarianceModel::subfbm(0.6, false).unwrap();
        let hc = m.hypothesis_constants().unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..200 {
            for j in 1..200 {
                let (t, s) = (i as f64 * 0.05, j as f64 * 0.05);
                if i == j {
                    continue;
                }
                let psi = m.cross_deriv(t, s).unwrap() - hc.c_beta * (t - s).abs().powf(-0.8);
                worst = worst.max(psi.abs() * (t * s).powf(0.4));
            }
        }
        assert!(worst <= hc.c_beta_prime * (1.0 + 1e-12));
        assert!(worst > 0.9 * hc.c_beta_prime);
    }

    #[test]
    fn verify_hypothesis_reports() {
        let grid: Vec<(f64, f64)> = (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (0.1 + i as f64 * 9.9 / 49.0, 0.1 + j as f64 * 9.9 / 49.0))
            .collect();
        let fbm = CovarianceModel::fbm(0.6).unwrap();
        let r = fbm.verify_hypothesis(&grid, 0.0).unwrap();
        assert!(r.pass && r.max_violation <= 0.0);
        let sub = CovarianceModel::subfbm(0.6, false).unwrap();
        assert!(sub.verify_hypothesis(&grid, 1e-12).unwrap().pass);
        assert!(matches!(
            sub.verify_hypothesis(&[(1.0, 1.0)], 1e-12),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn cov_matrix_examples() {
        let f = CovarianceModel::fbm(0.75).unwrap().cov_matrix(&[1.0]).unwrap();
        assert_eq!(f.matrix[(0, 0)], 1.0);
        let f = CovarianceModel::fbm(0.6).unwrap().cov_matrix(&[1.0, 2.0]).unwrap();
        assert!(rel(f.matrix[(0, 1)], 1.148_698_354_997_035) < 1e-15);
        assert!(rel(f.matrix[(1, 1)], 2f64.powf(1.2)) < 1e-15);
        assert_eq!(f.jitter, 0.0);
        let bad = CovarianceModel::tabulated(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 5.0, 0.0, 5.0, 1.0],
            0.6,
        )
        .unwrap();
        assert!(matches!(
            bad.cov_matrix(&[1.0, 2.0]),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn fine_grid_factorises() {
        let m = CovarianceModel::fbm(0.9).unwrap();
        let times: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
        let f = m.cov_matrix(&times).unwrap();
        assert!(f.jitter <= 1e-10 * f.matrix.diagonal().max());
    }

    #[test]
    fn tabulated_interpolates_fbm() {
        let fbm = CovarianceModel::fbm(0.6).unwrap();
        let times: Vec<f64> = (0..=4).map(|i| i as f64).collect();
        let mut values = vec![];
        for &a in &times {
            for &b in &times {
                values.push(fbm.cov(a, b).unwrap());
            }
        }
        let tab = CovarianceModel::tabulated(times, values, 0.6).unwrap();
        assert!((tab.cov(2.0, 1.0).unwrap() - fbm.cov(2.0, 1.0).unwrap()).abs() < 1e-15);
        let mid = tab.cov(1.5, 1.5).unwrap();
        let want = 0.5 * (fbm.cov(1.0, 1.0).unwrap() + fbm.cov(2.0, 2.0).unwrap()) * 0.5
            + 0.5 * fbm.cov(1.0, 2.0).unwrap();
        assert!((mid - want).abs() < 1e-14);
        assert!(tab.cov(5.0, 1.0).is_err());
        assert!(matches!(tab.cross_deriv(2.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn normalized_subfbm_has_unit_variance() {
        let m = CovarianceModel::subfbm(0.7, true).unwrap();
        assert!((m.cov(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric(t in 0.0..50.0f64, s in 0.0..50.0f64, b in 0.51..0.99f64) {
            for m in [
                CovarianceModel::fbm(b).unwrap(),
                CovarianceModel::subfbm(b, false).unwrap(),
                CovarianceModel::bifbm(b.sqrt(), b.sqrt()).unwrap(),
            ] {
                prop_assert_eq!(m.cov(t, s).unwrap(), m.cov(s, t).unwrap());
            }
        }

        #[test]
        fn fbm_self_similar(t in 0.01..20.0f64, s in 0.01..20.0f64, b in 0.51..0.99f64) {
            let m = CovarianceModel::fbm(b).unwrap();
            for a in [0.5, 2.0, 10.0] {
                let lhs = m.cov(a * t, a * s).unwrap();
                let rhs = a.powf(2.0 * b) * m.cov(t, s).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(a.powf(2.0 * b) * t.max(s).powf(2.0 * b)));
            }
        }
    }
}
