//! Distance, noise-floor and regression helpers for Monte-Carlo output.

use crate::error::{Error, Result};
use crate::special::{norm_cdf, student_t_quantile};

/// `sup_z |F_N(z) − Φ(z)|` over the order statistics.
pub fn empirical_kolmogorov(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("non-finite sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let p = norm_cdf(x);
        let hi = (i + 1) as f64 / n;
        let lo = i as f64 / n;
        d = d.max((hi - p).abs()).max((p - lo).abs());
    }
    Ok(d.min(1.0))
}

/// DKW band `√(ln(2/δ)/(2N))`.
pub fn dkw_halfwidth(n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("δ = {delta} outside (0, 1]")));
    }
    Ok(((2.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub t: f64,
    pub d_k: f64,
    pub dkw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// Horizons of rows that entered the regression.
    pub used: Vec<f64>,
    /// Horizons dropped for lying under their DKW floor.
    pub excluded: Vec<f64>,
}

impl RateFit {
    pub fn dof(&self) -> usize {
        self.used.len().saturating_sub(2)
    }

    /// One-sided upper confidence bound on `−slope`.
    pub fn upper_exponent_bound(&self, level: f64) -> f64 {
        let dof = self.dof();
        if dof == 0 || self.slope_se == 0.0 {
            return -self.slope;
        }
        -self.slope + student_t_quantile(level, dof as f64) * self.slope_se
    }
}

/// Least squares of `log d_K` on `log T`.
pub fn fit_rate(rows: &[RateRow]) -> Result<RateFit> {
    let (used, excluded): (Vec<&RateRow>, Vec<&RateRow>) =
        rows.iter().partition(|r| r.d_k > r.dkw && r.t > 0.0);
    if used.len() < 3 {
        return Err(Error::InsufficientSignal(format!(
            "{} of {} rows above the DKW floor",
            used.len(),
            rows.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.d_k.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientSignal("all rows share one horizon".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_se = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        slope_se,
        used: used.iter().map(|r| r.t).collect(),
        excluded: excluded.iter().map(|r| r.t).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub variance: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let m = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn sample_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Passes iff `|s² − target| / target ≤ tol`.
pub fn variance_check(samples: &[f64], target: f64, tol: f64) -> Result<VarianceCheck> {
    if samples.len() < 500 {
        return Err(Error::Precondition(format!(
            "variance check needs N ≥ 500, got {}",
            samples.len()
        )));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target variance {target} must be positive")));
    }
    let variance = sample_variance(samples);
    let ratio = variance / target;
    Ok(VarianceCheck {
        variance,
        ratio,
        pass: (ratio - 1.0).abs() <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_quantile;

    #[test]
    fn kolmogorov_examples() {
        let d = empirical_kolmogorov(&[-1.0, 0.0, 1.0]).unwrap();
        assert!((d - 0.174_678_079_401_876_28).abs() < 1e-12, "{d}");
        assert_eq!(empirical_kolmogorov(&[0.0]).unwrap(), 0.5);
        let n = 200;
        let q: Vec<f64> = (0..n).map(|i| norm_quantile((i as f64 + 0.5) / n as f64)).collect();
        assert!((empirical_kolmogorov(&q).unwrap() - 0.5 / n as f64).abs() < 1e-12);
        assert!(empirical_kolmogorov(&[]).is_err());
    }

    #[test]
    fn dkw_examples() {
        let w = dkw_halfwidth(2000, 0.05).unwrap();
        assert!((w - 0.030_368_073_095_415_26).abs() < 1e-15);
        let w4 = dkw_halfwidth(8000, 0.05).unwrap();
        assert!((w / w4 - 2.0).abs() < 1e-14);
        let w1 = dkw_halfwidth(50, 1.0).unwrap();
        assert!((w1 - (2f64.ln() / 100.0).sqrt()).abs() < 1e-15);
        assert!(dkw_halfwidth(0, 0.05).is_err());
        assert!(dkw_halfwidth(10, 0.0).is_err());
        assert!(dkw_halfwidth(10, 1.5).is_err());
    }

    #[test]
    fn exact_power_law() {
        let rows: Vec<RateRow> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&t: &f64| RateRow { t, d_k: 0.8 * t.powf(-0.3), dkw: 0.01 })
            .collect();
        let f = fit_rate(&rows).unwrap();
        assert!((f.slope + 0.3).abs() < 1e-12);
        assert!(f.slope_se < 1e-12);
        assert!(f.excluded.is_empty());
    }

    #[test]
    fn rows_under_floor_are_dropped() {
        let mut rows: Vec<RateRow> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&t: &f64| RateRow { t, d_k: t.powf(-0.3), dkw: 0.01 })
            .collect();
        rows[3].dkw = 1.0;
        let f = fit_rate(&rows).unwrap();
        assert_eq!(f.excluded, vec![800.0]);
        rows[2].dkw = 1.0;
        assert!(matches!(fit_rate(&rows), Err(Error::InsufficientSignal(_))));
    }

    #[test]
    fn variance_examples() {
        let z: Vec<f64> = (0..5000).map(|i| norm_quantile((i as f64 + 0.5) / 5000.0)).collect();
        assert!(variance_check(&z, 1.0, 0.1).unwrap().pass);
        let z2: Vec<f64> = z.iter().map(|x| 2.0 * x).collect();
        let r = variance_check(&z2, 1.0, 0.1).unwrap();
        assert!(!r.pass && (r.ratio - 4.0).abs() < 0.05);
        let c = vec![3.0; 600];
        let r = variance_check(&c, 1.0, 0.1).unwrap();
        assert!(!r.pass && r.variance == 0.0);
        assert!(variance_check(&z[..499], 1.0, 0.1).is_err());
    }
}
