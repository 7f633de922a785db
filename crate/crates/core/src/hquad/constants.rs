//! Scalar constants: asymptotic variances, the divergence trace and the
//! closed-form and quadrature scalars of the least-squares expansions.

use super::inner::{atoms_inner, inner_product_h};
use super::kernel::{Atom, Kernel1};
use super::rule::{rule1, Singular};
use super::{estimate, Quad, QuadratureSpec};
use crate::covariance::{CovarianceModel, KernelPart, KernelShape};
use crate::error::{Error, Result};
use crate::special::gamma;

/// `σ²_β = (4β−1)[1 + Γ(3−4β)Γ(4β−1)/(Γ(2β)Γ(2−2β))]` on `[1/2, 3/4)`.
pub fn sigma_beta_sq(beta: f64) -> Result<f64> {
    if !(0.5..0.75).contains(&beta) {
        return Err(Error::Domain(format!(
            "sigma_beta_sq needs beta in [1/2, 3/4), got {beta}"
        )));
    }
    let ratio = gamma(3.0 - 4.0 * beta) * gamma(4.0 * beta - 1.0)
        / (gamma(2.0 * beta) * gamma(2.0 - 2.0 * beta));
    Ok((4.0 * beta - 1.0) * (1.0 + ratio))
}

/// `α = C_β Γ(2β−1) k^{−2β}`
pub fn alpha_const(model: &CovarianceModel, k: f64) -> Result<f64> {
    check_k(k)?;
    let hc = model.hypothesis_constants()?;
    if hc.c_beta == 0.0 {
        return Ok(0.0);
    }
    Ok(hc.c_beta * gamma(2.0 * hc.beta - 1.0) * k.powf(-2.0 * hc.beta))
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k = {k} must be positive")));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition(format!("T = {t} must be positive")));
    }
    Ok(())
}

/// `c(T) = ∫₀ᵀ∫₀ᵗ e^{−k(t−s)} ∂²R(t,s) ds dt`, the gap between pathwise and
/// divergence integration of `V` against `G`.
pub fn skorokhod_trace(
    model: &CovarianceModel,
    k: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    skorokhod_trace_parts(&model.kernel_parts()?, k, t, quad)
}

/// [`skorokhod_trace`] for an explicit decomposition of `∂²R`.
pub fn skorokhod_trace_parts(
    parts: &[KernelPart],
    k: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    check_k(k)?;
    check_t(t)?;
    estimate(quad, |s| {
        let mut v = 0.0;
        let mut m = 0.0;
        for p in parts {
            let sing = Some(Singular {
                at: 0.0,
                gamma: p.gamma,
            });
            let (pv, pm) = match p.shape {
                // ½∫∫e^{−k|u|}|u|^γ over the square = ∫₀ᵀ e^{−ku} u^γ (T−u) du
                KernelShape::Lag => {
                    rule1(0.0, t, sing, &[], k, s).apply_with_mass(|u| (-k * u).exp() * (t - u))
                }
                // the inner integral along x+y = v is (1 − e^{−k min(v, 2T−v)})/k
                KernelShape::Sum => rule1(0.0, 2.0 * t, sing, &[t], k, s)
                    .apply_with_mass(|v| -0.5 * (-k * v.min(2.0 * t - v)).exp_m1() / k),
            };
            v += p.coef * pv;
            m += p.coef.abs() * pm;
        }
        Ok((v, m))
    })
}

/// `b_T = (1/T)∫₀ᵀ ‖e^{−k(t−·)}𝟙_{[0,t]}‖²_𝔥 dt`
pub fn b_t(model: &CovarianceModel, k: f64, t: f64, quad: &QuadratureSpec) -> Result<Quad> {
    check_k(k)?;
    check_t(t)?;
    let parts = model.kernel_parts()?;
    estimate(quad, |s| {
        // the integrand behaves like t^{2β} at the origin
        let outer = rule1(0.0, t, Some(Singular { at: 0.0, gamma: 0.0 }), &[], k, s);
        let (v, m) = outer.apply_with_mass(|tau| {
            let a = [Atom::new(1.0, k, 0.0, tau)];
            atoms_inner(&a, &a, &parts, s).0
        });
        Ok((v / t, m / t))
    })
}

/// `b_T` through the identity `b_T = (2c(T) − ‖k_T‖²_𝔥)/(2kT)`.
pub fn b_t_from_trace(
    model: &CovarianceModel,
    k: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    let c = skorokhod_trace(model, k, t, quad)?;
    let kt = Kernel1::k_t(t, k);
    let n = inner_product_h(&kt, &kt, model, quad)?;
    Ok(Quad {
        value: (2.0 * c.value - n.value) / (2.0 * k * t),
        est_error: (2.0 * c.est_error + n.est_error) / (2.0 * k * t),
    })
}

/// `a_T = 1 − e^{−kT}`
pub fn a_t(k: f64, t: f64) -> f64 {
    -(-k * t).exp_m1()
}

/// `c_T = ∫₀ᵀ μ²(1−e^{−kt})² dt`
pub fn c_t(k: f64, mu: f64, t: f64) -> f64 {
    mu * mu * (t + 2.0 / k * (-k * t).exp_m1() - 0.5 / k * (-2.0 * k * t).exp_m1())
}

/// `d_T = T + (e^{−kT} − 1)/k`
pub fn d_t(k: f64, t: f64) -> f64 {
    t + (-k * t).exp_m1() / k
}

/// `K_T = μ²(1−e^{−2kT})/(2kT) − μ²(e^{−kT}−1)²/(k²T²)`, the deterministic
/// part of the empirical variance statistic.
pub fn k_t_diag(k: f64, mu: f64, t: f64) -> f64 {
    let e1 = (-k * t).exp_m1();
    -mu * mu * (-2.0 * k * t).exp_m1() / (2.0 * k * t) - mu * mu * e1 * e1 / (k * k * t * t)
}

/// `e_T = ⟨l_T, l_T⟩_𝔥`, the constant in `I₁(l_T)² = I₂(l_T⊗l_T) + e_T`.
pub fn e_t(model: &CovarianceModel, k: f64, t: f64, quad: &QuadratureSpec) -> Result<Quad> {
    let l = Kernel1::l_t(t, k);
    inner_product_h(&l, &l, model, quad)
}

/// `q_T = ⟨l_T, k_T⟩_𝔥`
pub fn q_t(model: &CovarianceModel, k: f64, t: f64, quad: &QuadratureSpec) -> Result<Quad> {
    inner_product_h(&Kernel1::l_t(t, k), &Kernel1::k_t(t, k), model, quad)
}

/// `E[M_T²] = ‖m_T‖²_𝔥` with `M_T = ∫₀ᵀ e^{−ks} dG_s`.
pub fn m_t_norm_sq(model: &CovarianceModel, k: f64, t: f64, quad: &QuadratureSpec) -> Result<Quad> {
    let m = Kernel1::m_t(t, k);
    inner_product_h(&m, &m, model, quad)
}
