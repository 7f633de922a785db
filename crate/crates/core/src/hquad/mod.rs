//! Quadrature in the reproducing Hilbert space `𝔥` of the driver.
//!
//! `⟨f,g⟩_𝔥 = ∫∫ f(t)g(s) ∂²R/∂t∂s dt ds` with the mixed derivative split
//! into lag parts `c|t−s|^γ` and sum parts `c(t+s)^γ`. For exponential
//! kernels the inner integral in lag (or sum) coordinates is closed form,
//! which leaves one-dimensional integrals with an algebraic end-point
//! weight.

mod chaos;
mod checks;
mod constants;
mod gauss;
mod inner;
mod kernel;
mod rule;

pub use chaos::{chaos_kernels_kls, chaos_kernels_muls, ChaosConvention, ChaosDecomp, ChaosNorms, Scalars};
pub use checks::{
    check_norm_inequality, product_formula_check, product_formula_check_paths, NormInequalityReport,
    ProductFormulaReport,
};
pub use constants::{
    a_t, alpha_const, b_t, b_t_from_trace, c_t, d_t, e_t, k_t_diag, m_t_norm_sq, q_t,
    sigma_beta_sq, skorokhod_trace, skorokhod_trace_parts,
};
pub use gauss::{jacobi_left, legendre, NodeSet};
pub use inner::{
    contract1, contract_2_1, inner_h2, inner_h3, inner_product_h, norm_h1, norm_h2, norm_h_sq,
    op_k, op_k_at, product_matrix, Contraction, ProductMatrix, Tabulated1,
};
pub use kernel::{Atom, Contracted, Kernel1, Kernel2, Kernel3, KernelExpr, SepTerm};
pub use rule::{rule1, Rule1, Singular};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalHandling {
    /// Geometric grading (factor 2, depth 8) toward the singular point with
    /// a Gauss–Jacobi rule on the innermost cell.
    SplitAndRefine,
    /// `u = h σ^{1/(γ+1)}` on the cell adjacent to the singular point.
    PowerSubstitution,
}

impl std::str::FromStr for DiagonalHandling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split_and_refine" => Ok(Self::SplitAndRefine),
            "power_substitution" => Ok(Self::PowerSubstitution),
            other => Err(Error::Config(format!("unknown diagonal handling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Minimum panels per smooth piece.
    pub panels: usize,
    /// Gauss–Legendre points per panel.
    pub order: usize,
    pub diagonal: DiagonalHandling,
    /// Allowed relative error estimate.
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 8,
            order: 12,
            diagonal: DiagonalHandling::SplitAndRefine,
            rel_tol: 1e-8,
        }
    }
}

impl QuadratureSpec {
    pub fn new(panels: usize, order: usize, diagonal: DiagonalHandling, rel_tol: f64) -> Result<Self> {
        let s = Self {
            panels,
            order,
            diagonal,
            rel_tol,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || self.order == 0 || self.order > 64 {
            return Err(Error::Precondition(
                "quadrature needs panels ≥ 1 and 1 ≤ order ≤ 64".into(),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::Precondition(format!(
                "tolerance {} must lie in (0, 1e-2]",
                self.rel_tol
            )));
        }
        Ok(())
    }

    /// Twice the panels and four more points per panel.
    pub fn refined(&self) -> Self {
        Self {
            panels: 2 * self.panels,
            order: self.order + 4,
            ..*self
        }
    }

    pub fn with_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }
}

/// Quadrature value with an error estimate from a refined rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub est_error: f64,
}

impl Quad {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            est_error: 0.0,
        }
    }
}

/// Runs `f` at `spec` and at `spec.refined()`; the difference is the error
/// estimate. `f` returns `(value, Σ|contributions|)`.
pub(crate) fn estimate(
    spec: &QuadratureSpec,
    f: impl Fn(&QuadratureSpec) -> Result<(f64, f64)>,
) -> Result<Quad> {
    spec.validate()?;
    let (v0, _) = f(spec)?;
    let (v1, mass) = f(&spec.refined())?;
    if !v1.is_finite() {
        return Err(Error::Numeric("quadrature produced a non-finite value".into()));
    }
    let est_error = (v1 - v0).abs();
    let allowed = spec.rel_tol * v1.abs().max(mass);
    if est_error > allowed {
        return Err(Error::Quadrature { est_error, allowed });
    }
    Ok(Quad {
        value: v1,
        est_error,
    })
}
