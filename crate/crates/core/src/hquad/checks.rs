//! Numerical checks of the norm inequality and the product formula.

use super::inner::{inner_product_h, norm_h1, norm_h2};
use super::kernel::Kernel1;
use super::QuadratureSpec;
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::simulate::{DriverSampler, TimeGrid};

#[derive(Debug, Clone, Copy)]
pub struct NormInequalityReport {
    pub norm_h: f64,
    pub norm_h1: f64,
    pub norm_h2: f64,
    /// `|‖φ‖²_𝔥 − ‖φ‖²_{𝔥₁}| − ‖φ‖²_{𝔥₂}`
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `|‖φ‖²_𝔥 − ‖φ‖²_{𝔥₁}| ≤ ‖φ‖²_{𝔥₂}`.
pub fn check_norm_inequality(
    f: &Kernel1,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<NormInequalityReport> {
    let h = inner_product_h(f, f, model, quad)?.value;
    let h1 = norm_h1(f, model, quad)?.value;
    let h2 = norm_h2(f, model, quad)?.value;
    let residual = (h - h1).abs() - h2;
    Ok(NormInequalityReport {
        norm_h: h,
        norm_h1: h1,
        norm_h2: h2,
        residual,
        tol,
        pass: residual <= tol,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ProductFormulaReport {
    pub inner: f64,
    pub sample_mean: f64,
    pub std_error: f64,
    /// `|mean of I₁(f)I₁(g) − ⟨f,g⟩_𝔥|`
    pub residual: f64,
    pub pass: bool,
}

fn summarize(prods: &[f64], inner: f64) -> ProductFormulaReport {
    let n = prods.len() as f64;
    let mean = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let residual = (mean - inner).abs();
    ProductFormulaReport {
        inner,
        sample_mean: mean,
        std_error,
        residual,
        pass: residual <= 3.0 * std_error,
    }
}

/// `E[I₁(f)I₁(g)] = ⟨f,g⟩_𝔥`, with `(I₁(f), I₁(g))` drawn as a Gaussian
/// pair whose covariance comes from quadrature.
pub fn product_formula_check(
    f: &Kernel1,
    g: &Kernel1,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
    rng: &mut StreamRng,
    n: usize,
) -> Result<ProductFormulaReport> {
    if n < 1000 {
        return Err(Error::Precondition(format!("N = {n} must be at least 1000")));
    }
    let ff = inner_product_h(f, f, model, quad)?.value.max(0.0);
    let gg = inner_product_h(g, g, model, quad)?.value.max(0.0);
    let fg = inner_product_h(f, g, model, quad)?.value;
    let sf = ff.sqrt();
    let (c, r) = if sf > 0.0 {
        let c = fg / sf;
        (c, (gg - c * c).max(0.0).sqrt())
    } else {
        (0.0, gg.sqrt())
    };
    let prods: Vec<f64> = (0..n)
        .map(|_| {
            let z1 = rng.normal();
            let z2 = rng.normal();
            (sf * z1) * (c * z1 + r * z2)
        })
        .collect();
    Ok(summarize(&prods, fg))
}

/// Same check with `I₁` realised as midpoint Riemann–Stieltjes sums on
/// simulated driver paths (`steps` per path, stream ids `0..n`).
pub fn product_formula_check_paths(
    f: &Kernel1,
    g: &Kernel1,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
    master_seed: u64,
    n: usize,
    steps: usize,
) -> Result<ProductFormulaReport> {
    if n < 1000 {
        return Err(Error::Precondition(format!("N = {n} must be at least 1000")));
    }
    if !f.is_atomic() || !g.is_atomic() {
        return Err(Error::Unsupported(
            "path check needs explicit exponential sums".into(),
        ));
    }
    let fg = inner_product_h(f, g, model, quad)?.value;
    let grid = TimeGrid::new(f.horizon(), steps)?;
    let sampler = DriverSampler::new(model, grid, true)?;
    let mids: Vec<f64> = (0..steps).map(|i| grid.node(i) + 0.5 * grid.delta()).collect();
    let fm: Vec<f64> = mids.iter().map(|&x| f.eval_atoms(x)).collect();
    let gm: Vec<f64> = mids.iter().map(|&x| g.eval_atoms(x)).collect();
    let prods: Vec<f64> = (0..n)
        .map(|r| {
            let p = sampler.sample(&mut StreamRng::new(master_seed, r as u64));
            let (mut i1f, mut i1g) = (0.0, 0.0);
            for i in 0..steps {
                let dg = p.values[i + 1] - p.values[i];
                i1f += fm[i] * dg;
                i1g += gm[i] * dg;
            }
            i1f * i1g
        })
        .collect();
    Ok(summarize(&prods, fg))
}
