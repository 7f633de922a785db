//! Wiener-chaos expansions of the least-squares estimators as ratios
//! `(I₀ + I₁(f₁) + I₂(f₂) [+ I₃(f₃)]) / (J₀ + I₁(h₁) + I₂(h₂))`.

use super::constants::{a_t, b_t, c_t, d_t, e_t, k_t_diag, q_t};
use super::inner::{contract_2_1, inner_h2, inner_h3, inner_product_h};
use super::kernel::{Kernel1, Kernel2, Kernel3};
use super::{Quad, QuadratureSpec};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};

/// Which function table to build the kernels from.
///
/// `Printed` takes `g_T = f_T/(2kT) − h_T`, `n_T = (e^{−k(2T−s)}−1)/(2k)` and
/// the first-chaos denominator kernels in their tabulated form.
/// `Rederived` uses `g_T = (f_T − h_T)/(2kT)`,
/// `n_T = (e^{−k(2T−s)} − e^{−ks})/(2k)`, the `μ` factor on the `d_T l_T`
/// term of `h₁`, and `−μk_T` in `h₁*`, which is what expanding the
/// estimators from `V_t = μ(1−e^{−kt}) + X_t` produces. For `μ̂_LS` it also
/// drops the `⟨k_T, l_T⟩` and `k_T ⊗ l_T` terms and flips the sign of the
/// `f_T` terms in the numerator; without that `I₀*` is far from the sample
/// mean of the numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChaosConvention {
    #[default]
    Printed,
    Rederived,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub q: f64,
    /// Deterministic part `K_T` of the empirical variance statistic.
    pub k_diag: f64,
}

#[derive(Debug, Clone)]
pub struct ChaosDecomp {
    pub horizon: f64,
    pub k: f64,
    pub mu: f64,
    pub convention: ChaosConvention,
    pub scalars: Scalars,
    /// `I₀` or `I₀*`
    pub i0: f64,
    /// `J₀` or `J₀*`
    pub j0: f64,
    pub f1: Kernel1,
    pub f2: Kernel2,
    pub f3: Option<Kernel3>,
    pub h1: Kernel1,
    pub h2: Kernel2,
}

/// Squared norms of the kernels; two-variable kernels are symmetrised first.
#[derive(Debug, Clone, Copy)]
pub struct ChaosNorms {
    pub f1: Quad,
    pub f2: Quad,
    pub f3: Option<Quad>,
    pub h1: Quad,
    pub h2: Quad,
}

impl ChaosDecomp {
    pub fn norms(&self, model: &CovarianceModel, quad: &QuadratureSpec) -> Result<ChaosNorms> {
        let f2 = self.f2.symmetrize();
        let h2 = self.h2.symmetrize();
        Ok(ChaosNorms {
            f1: inner_product_h(&self.f1, &self.f1, model, quad)?,
            f2: inner_h2(&f2, &f2, model, quad)?,
            f3: match &self.f3 {
                Some(f3) => Some(inner_h3(f3, f3, model, quad)?),
                None => None,
            },
            h1: inner_product_h(&self.h1, &self.h1, model, quad)?,
            h2: inner_h2(&h2, &h2, model, quad)?,
        })
    }

    /// Variance of the denominator, `‖h₁‖² + 2‖h₂‖²`.
    pub fn denominator_variance(&self, model: &CovarianceModel, quad: &QuadratureSpec) -> Result<f64> {
        let h2 = self.h2.symmetrize();
        let n1 = inner_product_h(&self.h1, &self.h1, model, quad)?.value;
        let n2 = inner_h2(&h2, &h2, model, quad)?.value;
        Ok(n1 + 2.0 * n2)
    }
}

struct Table {
    t: f64,
    k: f64,
    one: Kernel1,
    kt: Kernel1,
    lt: Kernel1,
    mt: Kernel1,
    nt: Kernel1,
    ft: Kernel2,
    gt: Kernel2,
}

impl Table {
    fn new(t: f64, k: f64, convention: ChaosConvention) -> Result<Self> {
        let ft = Kernel2::f_t(t, k);
        let ht = Kernel2::h_t(t, k);
        let (nt, gt) = match convention {
            ChaosConvention::Printed => (
                Kernel1::n_t_printed(t, k),
                ft.clone().scale(1.0 / (2.0 * k * t)).axpy(-1.0, &ht)?,
            ),
            ChaosConvention::Rederived => (
                Kernel1::n_t(t, k),
                ft.clone().axpy(-1.0, &ht)?.scale(1.0 / (2.0 * k * t)),
            ),
        };
        Ok(Self {
            t,
            k,
            one: Kernel1::one(t),
            kt: Kernel1::k_t(t, k),
            lt: Kernel1::l_t(t, k),
            mt: Kernel1::m_t(t, k),
            nt,
            ft,
            gt,
        })
    }

    fn tensor(&self, a: &Kernel1, b: &Kernel1) -> Kernel2 {
        Kernel2::tensor(a, b).expect("atomic factors on a common horizon")
    }
}

fn check(k: f64, t: f64) -> Result<()> {
    if !(k > 0.0 && t > 0.0 && k.is_finite() && t.is_finite()) {
        return Err(Error::Precondition(format!(
            "k = {k} and T = {t} must be positive"
        )));
    }
    Ok(())
}

fn scalars(
    model: &CovarianceModel,
    k: f64,
    mu: f64,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Scalars> {
    Ok(Scalars {
        a: a_t(k, t),
        b: b_t(model, k, t, quad)?.value,
        c: c_t(k, mu, t),
        d: d_t(k, t),
        e: e_t(model, k, t, quad)?.value,
        q: q_t(model, k, t, quad)?.value,
        k_diag: k_t_diag(k, mu, t),
    })
}

/// Expansion of `√T(k̂_LS − k)`.
pub fn chaos_kernels_kls(
    model: &CovarianceModel,
    k: f64,
    mu: f64,
    t: f64,
    quad: &QuadratureSpec,
    convention: ChaosConvention,
) -> Result<ChaosDecomp> {
    check(k, t)?;
    let s = scalars(model, k, mu, t, quad)?;
    let tb = Table::new(t, k, convention)?;
    let t15 = t.powf(1.5);
    let rt = t.sqrt();

    let i0 = (mu * mu * s.a * s.d + s.q + mu * mu / k * s.a * s.a + k * s.e) / t15
        + mu * mu / rt * (-k * t).exp_m1();
    let f1 = tb
        .kt
        .clone()
        .scale(mu * s.d / t15)
        .axpy(-mu * s.a / t15, &tb.lt)?
        .axpy(mu / rt, &tb.mt)?
        .axpy(-mu / rt, &tb.kt)?;
    let f2 = tb
        .tensor(&tb.lt, &tb.kt)
        .scale(1.0 / t15)
        .axpy(k / t15, &tb.tensor(&tb.lt, &tb.lt))?
        .axpy(-0.5 / rt, &tb.ft)?;
    let j0 = s.c / t + s.b - (mu * mu * s.d * s.d + s.e) / (t * t);
    let dl_coef = match convention {
        ChaosConvention::Printed => -2.0 * s.d / (t * t),
        ChaosConvention::Rederived => -2.0 * mu * s.d / (t * t),
    };
    let h1 = tb
        .lt
        .clone()
        .scale(2.0 * mu / t)
        .axpy(2.0 * mu / t, &tb.nt)?
        .axpy(dl_coef, &tb.lt)?;
    let h2 = tb.gt.clone().axpy(-1.0 / (t * t), &tb.tensor(&tb.lt, &tb.lt))?;
    Ok(ChaosDecomp {
        horizon: t,
        k,
        mu,
        convention,
        scalars: s,
        i0,
        j0,
        f1,
        f2,
        f3: None,
        h1,
        h2,
    })
}

/// Expansion of `T^{1−β}(μ̂_LS − μ)`.
pub fn chaos_kernels_muls(
    model: &CovarianceModel,
    k: f64,
    mu: f64,
    t: f64,
    quad: &QuadratureSpec,
    convention: ChaosConvention,
) -> Result<ChaosDecomp> {
    check(k, t)?;
    let beta = model.beta();
    let s = scalars(model, k, mu, t, quad)?;
    let tb = Table::new(t, k, convention)?;
    let ip = |a: &Kernel1, b: &Kernel1| -> Result<f64> {
        Ok(inner_product_h(a, b, model, quad)?.value)
    };
    let tb1 = t.powf(1.0 + beta);
    let tbeta = t.powf(beta);

    let f_l = contract_2_1(&tb.ft, &tb.lt, model, quad)?;
    let g_one = contract_2_1(&tb.gt, &tb.one, model, quad)?;
    let common_i0 = 2.0 * mu * ip(&tb.kt, &tb.nt)?
        + 2.0 * k * mu * ip(&tb.nt, &tb.lt)?
        + mu * ip(&tb.mt, &tb.lt)?;
    let common_f2 = tb
        .tensor(&tb.kt, &tb.nt)
        .scale(2.0 * mu / tb1)
        .axpy(2.0 * k * mu / tb1, &tb.tensor(&tb.nt, &tb.lt))?
        .axpy(mu / tb1, &tb.tensor(&tb.mt, &tb.lt))?;
    let g3 = Kernel3::tensor(&tb.gt, &tb.kt)?
        .scale(1.0 / tbeta)
        .add(&Kernel3::tensor(&tb.gt, &tb.lt)?.scale(k / tbeta))?;

    let (i0, f1, f2, f3) = match convention {
        ChaosConvention::Printed => {
            let i0 = (2.0 * mu * ip(&tb.kt, &tb.lt)? + common_i0) / tb1;
            let f1 = tb
                .one
                .clone()
                .scale((s.c - mu * mu * s.d - mu * mu * s.a / k) / tb1)
                .axpy(2.0 * mu * mu * s.a / tb1, &tb.lt)?
                .axpy(1.0 / tb1, &f_l)?
                .axpy(-mu * mu * s.a / (k * tb1), &tb.mt)?
                .axpy(s.b / tbeta, &tb.one)?
                .axpy(2.0 / tbeta, &g_one)?;
            let f2 = common_f2
                .axpy(2.0 * mu / tb1, &tb.tensor(&tb.kt, &tb.lt))?
                .axpy(-mu * s.a / (2.0 * k * tb1), &tb.ft)?;
            let f3 = g3.add(&Kernel3::tensor(&tb.ft, &tb.lt)?.scale(0.5 / tb1))?;
            (i0, f1, f2, f3)
        }
        ChaosConvention::Rederived => {
            // No ⟨k_T, l_T⟩ or k_T ⊗ l_T term, and the pieces coming from
            // ∫X δG = I₂(f_T/2) enter with a minus sign.
            let i0 = common_i0 / tb1;
            let f1 = tb
                .one
                .clone()
                .scale(-mu * mu * (-2.0 * k * t).exp_m1() / (2.0 * k * tb1))
                .axpy(-1.0 / tb1, &f_l)?
                .axpy(-mu * mu * s.a / (k * tb1), &tb.mt)?
                .axpy(s.b / tbeta, &tb.one)?
                .axpy(2.0 / tbeta, &g_one)?;
            let f2 = common_f2.axpy(mu * s.a / (2.0 * k * tb1), &tb.ft)?;
            let f3 = g3.add(&Kernel3::tensor(&tb.ft, &tb.lt)?.scale(-0.5 / tb1))?;
            (i0, f1, f2, f3)
        }
    };

    let j0 = (mu * mu * s.a * s.d + s.q) / (t * t) + (k * s.c - k * mu * mu * s.d) / t + k * s.b;
    let kt_coef = match convention {
        ChaosConvention::Printed => mu / t,
        ChaosConvention::Rederived => -mu / t,
    };
    let h1 = tb
        .lt
        .clone()
        .scale(mu * s.a / (t * t))
        .axpy(mu * s.d / (t * t), &tb.kt)?
        .axpy(kt_coef, &tb.kt)?
        .axpy(2.0 * k * mu / t, &tb.nt)?
        .axpy(mu / t, &tb.mt)?;
    let h2 = tb
        .tensor(&tb.lt, &tb.kt)
        .scale(1.0 / (t * t))
        .axpy(-0.5 / t, &tb.ft)?
        .axpy(tb.k, &tb.gt)?;
    debug_assert_eq!(tb.t, t);
    Ok(ChaosDecomp {
        horizon: t,
        k,
        mu,
        convention,
        scalars: s,
        i0,
        j0,
        f1,
        f2,
        f3: Some(f3),
        h1,
        h2,
    })
}
