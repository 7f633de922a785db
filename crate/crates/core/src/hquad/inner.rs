//! Inner products, norms, operator K and contractions.

use nalgebra::DMatrix;

use super::gauss::legendre;
use super::kernel::{abs_exp_slice, sum_atoms, Atom, Contracted, Kernel1, Kernel2, Kernel3};
use super::rule::{rule1, Singular};
use super::{estimate, Quad, QuadratureSpec};
use crate::covariance::{CovarianceModel, KernelPart, KernelShape};
use crate::error::{Error, Result};

/// `∫_L^U e^{E(y)} dy` for affine `E` with slope `sigma`, given `E` at both
/// ends; evaluated from the larger end so nothing overflows.
fn exp_segment(e_lo: f64, e_hi: f64, sigma: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if sigma == 0.0 {
        return e_lo.exp() * len;
    }
    let top = e_lo.max(e_hi);
    top.exp() * (-(-sigma.abs() * len).exp_m1()) / sigma.abs()
}

/// `X(u) = ∫ a(y+u) b(y) dy`
fn cross_corr(a: &Atom, b: &Atom, u: f64) -> f64 {
    let lo = (a.lo - u).max(b.lo);
    let hi = (a.hi - u).min(b.hi);
    if hi <= lo {
        return 0.0;
    }
    let e = |y: f64| a.rate * (y + u - a.anchor) + b.rate * (y - b.anchor);
    a.coef * b.coef * exp_segment(e(lo), e(hi), a.rate + b.rate, hi - lo)
}

/// `D(v) = ∫ a(v−y) b(y) dy`
fn convolution(a: &Atom, b: &Atom, v: f64) -> f64 {
    let lo = (v - a.hi).max(b.lo);
    let hi = (v - a.lo).min(b.hi);
    if hi <= lo {
        return 0.0;
    }
    let e = |y: f64| a.rate * (v - y - a.anchor) + b.rate * (y - b.anchor);
    a.coef * b.coef * exp_segment(e(lo), e(hi), b.rate - a.rate, hi - lo)
}

fn pair_rate(a: &Atom, b: &Atom) -> f64 {
    a.rate.abs().max(b.rate.abs())
}

/// `∫∫ a(x) b(y) part(x,y) dx dy`, returned with its absolute mass.
fn atom_pair(a: &Atom, b: &Atom, part: &KernelPart, spec: &QuadratureSpec) -> (f64, f64) {
    if a.lo >= a.hi || b.lo >= b.hi || a.coef == 0.0 || b.coef == 0.0 {
        return (0.0, 0.0);
    }
    let sing = Some(Singular {
        at: 0.0,
        gamma: part.gamma,
    });
    let rate = pair_rate(a, b);
    let (v, m) = match part.shape {
        KernelShape::Lag => {
            let r = rule1(
                a.lo - b.hi,
                a.hi - b.lo,
                sing,
                &[a.lo - b.lo, a.hi - b.hi],
                rate,
                spec,
            );
            r.apply_with_mass(|u| cross_corr(a, b, u))
        }
        KernelShape::Sum => {
            let r = rule1(
                a.lo + b.lo,
                a.hi + b.hi,
                sing,
                &[a.lo + b.hi, a.hi + b.lo],
                rate,
                spec,
            );
            r.apply_with_mass(|v| convolution(a, b, v))
        }
    };
    (part.coef * v, part.coef.abs() * m)
}

pub(crate) fn atoms_inner(
    f: &[Atom],
    g: &[Atom],
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> (f64, f64) {
    let mut v = 0.0;
    let mut m = 0.0;
    for part in parts {
        for a in f {
            for b in g {
                let (pv, pm) = atom_pair(a, b, part, spec);
                v += pv;
                m += pm;
            }
        }
    }
    (v, m)
}

fn contracted_value(
    c: &Contracted,
    horizon: f64,
    x: f64,
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> f64 {
    if c.coef == 0.0 || !(0.0..horizon).contains(&x) {
        return 0.0;
    }
    let slice = abs_exp_slice(horizon, 1.0, c.rate, x);
    c.coef * atoms_inner(&slice, &c.with, parts, spec).0
}

/// Pointwise value of the non-atomic part.
fn contracted_part(f: &Kernel1, x: f64, parts: &[KernelPart], spec: &QuadratureSpec) -> f64 {
    f.contracted
        .iter()
        .map(|c| contracted_value(c, f.horizon(), x, parts, spec))
        .sum()
}

/// Points and weights on `[0,T]²` for `∫∫ F(x,y) part(x,y) dx dy`, with the
/// kernel weight folded in. `F` may have kinks on the lines `x = bx`,
/// `y = by` and `x = y`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Rule2 {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl Rule2 {
    pub fn apply_with_mass(&self, f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
        let mut s = 0.0;
        let mut m = 0.0;
        for i in 0..self.w.len() {
            let v = self.w[i] * f(self.x[i], self.y[i]);
            s += v;
            m += v.abs();
        }
        (s, m)
    }
}

pub(crate) fn rule2(
    horizon: f64,
    part: &KernelPart,
    bx: &[f64],
    by: &[f64],
    rate: f64,
    spec: &QuadratureSpec,
) -> Rule2 {
    let t = horizon;
    let sing = Some(Singular {
        at: 0.0,
        gamma: part.gamma,
    });
    let mut out = Rule2::default();
    match part.shape {
        KernelShape::Lag => {
            let cross: Vec<f64> = bx.iter().flat_map(|x| by.iter().map(move |y| x - y)).collect();
            let outer = rule1(-t, t, sing, &cross, rate, spec);
            let mut inner_breaks = by.to_vec();
            for (&u, &wu) in outer.x.iter().zip(&outer.w) {
                inner_breaks.truncate(by.len());
                inner_breaks.extend(bx.iter().map(|b| b - u));
                let inner = rule1((-u).max(0.0), t.min(t - u), None, &inner_breaks, rate, spec);
                for (&y, &wy) in inner.x.iter().zip(&inner.w) {
                    out.x.push(y + u);
                    out.y.push(y);
                    out.w.push(part.coef * wu * wy);
                }
            }
        }
        KernelShape::Sum => {
            let mut cross: Vec<f64> = bx.iter().flat_map(|x| by.iter().map(move |y| x + y)).collect();
            cross.push(t);
            let outer = rule1(0.0, 2.0 * t, sing, &cross, rate, spec);
            let mut inner_breaks = by.to_vec();
            for (&v, &wv) in outer.x.iter().zip(&outer.w) {
                inner_breaks.truncate(by.len());
                inner_breaks.extend(bx.iter().map(|b| v - b));
                inner_breaks.push(0.5 * v);
                let inner = rule1((v - t).max(0.0), t.min(v), None, &inner_breaks, rate, spec);
                for (&y, &wy) in inner.x.iter().zip(&inner.w) {
                    out.x.push(v - y);
                    out.y.push(y);
                    out.w.push(part.coef * wv * wy);
                }
            }
        }
    }
    out
}

fn inner_raw(
    f: &Kernel1,
    g: &Kernel1,
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> (f64, f64) {
    let (mut v, mut m) = atoms_inner(&f.atoms, &g.atoms, parts, spec);
    if f.is_atomic() && g.is_atomic() {
        return (v, m);
    }
    let bx = with_ends(f.breaks(), f.horizon());
    let by = with_ends(g.breaks(), g.horizon());
    let rate = f.rate().max(g.rate());
    for part in parts {
        let r = rule2(f.horizon(), part, &bx, &by, rate, spec);
        let (pv, pm) = r.apply_with_mass(|x, y| {
            let fa = f.eval_atoms(x);
            let ga = g.eval_atoms(y);
            let fc = contracted_part(f, x, parts, spec);
            let gc = contracted_part(g, y, parts, spec);
            (fa + fc) * (ga + gc) - fa * ga
        });
        v += pv;
        m += pm;
    }
    (v, m)
}

fn with_ends(mut b: Vec<f64>, horizon: f64) -> Vec<f64> {
    b.push(0.0);
    b.push(horizon);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn same_horizon(a: f64, b: f64) -> Result<()> {
    if a != b {
        return Err(Error::Precondition(format!(
            "kernels have different horizons {a} and {b}"
        )));
    }
    Ok(())
}

/// `⟨f, g⟩_𝔥`
pub fn inner_product_h(
    f: &Kernel1,
    g: &Kernel1,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    same_horizon(f.horizon(), g.horizon())?;
    let parts = model.kernel_parts()?;
    estimate(quad, |s| Ok(inner_raw(f, g, &parts, s)))
}

/// `‖f‖²_𝔥`
pub fn norm_h_sq(f: &Kernel1, model: &CovarianceModel, quad: &QuadratureSpec) -> Result<Quad> {
    inner_product_h(f, f, model, quad)
}

/// `‖φ‖²_{𝔥₁} = C_β ∫∫ φ(r₁)φ(r₂)|r₁−r₂|^{2β−2}`
pub fn norm_h1(f: &Kernel1, model: &CovarianceModel, quad: &QuadratureSpec) -> Result<Quad> {
    let hc = model.hypothesis_constants()?;
    let parts = [KernelPart {
        shape: KernelShape::Lag,
        coef: hc.c_beta,
        gamma: 2.0 * hc.beta - 2.0,
    }];
    estimate(quad, |s| Ok(inner_raw(f, f, &parts, s)))
}

/// `‖φ‖²_{𝔥₂} = C'_β (∫|φ(r)| r^{β−1} dr)²`
pub fn norm_h2(f: &Kernel1, model: &CovarianceModel, quad: &QuadratureSpec) -> Result<Quad> {
    let hc = model.hypothesis_constants()?;
    if hc.c_beta_prime == 0.0 || f.is_zero() {
        return Ok(Quad::exact(0.0));
    }
    let parts = model.kernel_parts()?;
    let horizon = f.horizon();
    let breaks = f.breaks();
    let rate = f.rate();
    let q = estimate(quad, |s| {
        let eval = |x: f64| f.eval_atoms(x) + contracted_part(f, x, &parts, s);
        let v = abs_weighted(&eval, horizon, hc.beta - 1.0, &breaks, rate, s);
        Ok((v, v))
    })?;
    Ok(Quad {
        value: hc.c_beta_prime * q.value * q.value,
        est_error: 2.0 * hc.c_beta_prime * q.value * q.est_error,
    })
}

/// `∫₀ᵀ |f(u)| u^γ du` with the zeros of `f` located and used as breaks.
fn abs_weighted(
    f: &dyn Fn(f64) -> f64,
    horizon: f64,
    gamma: f64,
    breaks: &[f64],
    rate: f64,
    spec: &QuadratureSpec,
) -> f64 {
    let mut pts = with_ends(breaks.to_vec(), horizon);
    pts.retain(|&x| (0.0..=horizon).contains(&x));
    let mut roots = vec![];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        const M: usize = 256;
        let xs: Vec<f64> = (0..M).map(|i| a + (b - a) * (i as f64 + 0.5) / M as f64).collect();
        let mut prev = f(xs[0]);
        for i in 1..xs.len() {
            let cur = f(xs[i]);
            if prev * cur < 0.0 {
                let (mut lo, mut hi, mut flo) = (xs[i - 1], xs[i], prev);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = f(mid);
                    if fm * flo > 0.0 {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
    }
    pts.extend(roots);
    let r = rule1(
        0.0,
        horizon,
        Some(Singular { at: 0.0, gamma }),
        &pts,
        rate,
        spec,
    );
    r.apply(|x| f(x).abs())
}

/// A function tabulated on composite Gauss–Legendre nodes of `[0,T]`.
#[derive(Debug, Clone)]
pub struct Tabulated1 {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

fn composite_nodes(horizon: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let r = legendre(order);
    let h = horizon / panels as f64;
    let mut x = Vec::with_capacity(panels * order);
    let mut w = Vec::with_capacity(panels * order);
    for p in 0..panels {
        for (xi, wi) in r.x.iter().zip(&r.w) {
            x.push((p as f64 + xi) * h);
            w.push(h * wi);
        }
    }
    (x, w)
}

/// `(Kφ)(r) = ∫₀ᵀ |φ(r,u)| u^{β−1} du`
pub fn op_k_at(phi: &Kernel2, r: f64, beta: f64, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    let atoms = phi.slice(r);
    if atoms.is_empty() {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> = atoms.iter().flat_map(|a| [a.lo, a.hi]).collect();
    breaks.push(r);
    let rate = atoms.iter().map(|a| a.rate.abs()).fold(0.0, f64::max);
    let eval = |u: f64| sum_atoms(&atoms, u);
    Ok(abs_weighted(&eval, phi.horizon(), beta - 1.0, &breaks, rate, quad))
}

/// Operator K tabulated on the composite nodes of `quad`.
pub fn op_k(phi: &Kernel2, beta: f64, quad: &QuadratureSpec) -> Result<Tabulated1> {
    let (nodes, weights) = composite_nodes(phi.horizon(), quad.panels, quad.order);
    let values = nodes
        .iter()
        .map(|&r| op_k_at(phi, r, beta, quad))
        .collect::<Result<_>>()?;
    Ok(Tabulated1 {
        nodes,
        weights,
        values,
    })
}

/// `x ↦ ⟨A(x,·), ψ⟩_𝔥` for an atomic `ψ`.
pub fn contract_2_1(
    a: &Kernel2,
    psi: &Kernel1,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<Kernel1> {
    same_horizon(a.horizon(), psi.horizon())?;
    if !psi.is_atomic() {
        return Err(Error::Unsupported(
            "contraction against a non-atomic kernel".into(),
        ));
    }
    let mut out = Kernel1::zero(a.horizon());
    for term in &a.sep {
        let b = Kernel1::from_atoms(a.horizon(), term.b.clone())?;
        let c = inner_product_h(&b, psi, model, quad)?.value * term.coef;
        let af = Kernel1::from_atoms(a.horizon(), term.a.clone())?;
        out = out.axpy(c, &af)?;
    }
    for &(c, k) in &a.absexp {
        out.contracted.push(Contracted {
            coef: c,
            rate: k,
            with: psi.atoms.clone(),
        });
    }
    Ok(out)
}

fn absexp_pair_raw(
    horizon: f64,
    k1: f64,
    k2: f64,
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> (f64, f64) {
    let ends = [0.0, horizon];
    let mut v = 0.0;
    let mut m = 0.0;
    for part in parts {
        let r = rule2(horizon, part, &ends, &ends, k1.max(k2), spec);
        let (pv, pm) = r.apply_with_mass(|x, y| {
            let sx = abs_exp_slice(horizon, 1.0, k1, x);
            let sy = abs_exp_slice(horizon, 1.0, k2, y);
            atoms_inner(&sx, &sy, parts, spec).0
        });
        v += pv;
        m += pm;
    }
    (v, m)
}

fn inner_h2_raw(
    a: &Kernel2,
    b: &Kernel2,
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let t = a.horizon();
    let mut v = 0.0;
    let mut m = 0.0;
    for s in &a.sep {
        for u in &b.sep {
            let (x, mx) = atoms_inner(&s.a, &u.a, parts, spec);
            let (y, my) = atoms_inner(&s.b, &u.b, parts, spec);
            v += s.coef * u.coef * x * y;
            m += (s.coef * u.coef).abs() * mx * my;
        }
    }
    let mixed = |absexp: &[(f64, f64)], sep: &[super::kernel::SepTerm]| -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut m = 0.0;
        for &(c, k) in absexp {
            for s in sep {
                let f = Kernel1 {
                    contracted: vec![Contracted {
                        coef: c * s.coef,
                        rate: k,
                        with: s.b.clone(),
                    }],
                    ..Kernel1::zero(t)
                };
                let g = Kernel1::from_atoms(t, s.a.clone())?;
                let (pv, pm) = inner_raw(&f, &g, parts, spec);
                v += pv;
                m += pm;
            }
        }
        Ok((v, m))
    };
    let (pv, pm) = mixed(&a.absexp, &b.sep)?;
    v += pv;
    m += pm;
    let (pv, pm) = mixed(&b.absexp, &a.sep)?;
    v += pv;
    m += pm;
    for &(c1, k1) in &a.absexp {
        for &(c2, k2) in &b.absexp {
            let (pv, pm) = absexp_pair_raw(t, k1, k2, parts, spec);
            v += c1 * c2 * pv;
            m += (c1 * c2).abs() * pm;
        }
    }
    Ok((v, m))
}

/// `⟨A, B⟩_{𝔥⊗2}`
pub fn inner_h2(
    a: &Kernel2,
    b: &Kernel2,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    same_horizon(a.horizon(), b.horizon())?;
    let parts = model.kernel_parts()?;
    estimate(quad, |s| inner_h2_raw(a, b, &parts, s))
}

/// `⟨A, B⟩_{𝔥⊗3}` for sums of `(two-variable) ⊗ (one-variable)` terms.
pub fn inner_h3(
    a: &Kernel3,
    b: &Kernel3,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<Quad> {
    same_horizon(a.horizon(), b.horizon())?;
    let parts = model.kernel_parts()?;
    estimate(quad, |s| {
        let mut v = 0.0;
        let mut m = 0.0;
        for (c1, a2, a1) in &a.terms {
            for (c2, b2, b1) in &b.terms {
                let (x, mx) = inner_h2_raw(a2, b2, &parts, s)?;
                let (y, my) = atoms_inner(&a1.atoms, &b1.atoms, &parts, s);
                v += c1 * c2 * x * y;
                m += (c1 * c2).abs() * mx * my;
            }
        }
        Ok((v, m))
    })
}

/// Product-integration weights `W_ij = ∫∫ L_i(x) L_j(y) ∂²R(x,y)` for the
/// piecewise Lagrange interpolants on composite Gauss–Legendre nodes, so
/// that `⟨u, v⟩_𝔥 ≈ Σ u(x_i) W_ij v(x_j)`.
#[derive(Debug, Clone)]
pub struct ProductMatrix {
    pub nodes: Vec<f64>,
    pub w: DMatrix<f64>,
}

pub fn product_matrix(
    model: &CovarianceModel,
    horizon: f64,
    panels: usize,
    order: usize,
) -> Result<ProductMatrix> {
    let parts = model.kernel_parts()?;
    let (nodes, _) = composite_nodes(horizon, panels, order);
    let n = nodes.len();
    let h = horizon / panels as f64;
    let local = legendre(order);
    let bary: Vec<f64> = (0..order)
        .map(|i| {
            1.0 / (0..order)
                .filter(|&j| j != i)
                .map(|j| local.x[i] - local.x[j])
                .product::<f64>()
        })
        .collect();
    let basis = |x: f64, out: &mut [f64]| -> usize {
        let p = ((x / h).floor() as usize).min(panels - 1);
        let s = x / h - p as f64;
        if let Some(i) = local.x.iter().position(|&xi| xi == s) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[i] = 1.0;
            return p;
        }
        let mut denom = 0.0;
        for i in 0..order {
            out[i] = bary[i] / (s - local.x[i]);
            denom += out[i];
        }
        out.iter_mut().for_each(|v| *v /= denom);
        p
    };
    let bounds: Vec<f64> = (0..=panels).map(|p| p as f64 * h).collect();
    let spec = QuadratureSpec {
        panels: 1,
        order: order + 4,
        ..QuadratureSpec::default()
    };
    let mut w = DMatrix::zeros(n, n);
    let mut lx = vec![0.0; order];
    let mut ly = vec![0.0; order];
    for part in &parts {
        let r = rule2(horizon, part, &bounds, &bounds, 0.0, &spec);
        for q in 0..r.w.len() {
            let p1 = basis(r.x[q], &mut lx);
            let p2 = basis(r.y[q], &mut ly);
            for i in 0..order {
                let wi = r.w[q] * lx[i];
                for j in 0..order {
                    w[(p1 * order + i, p2 * order + j)] += wi * ly[j];
                }
            }
        }
    }
    let sym = (&w + w.transpose()) * 0.5;
    Ok(ProductMatrix { nodes, w: sym })
}

/// `φ ⊗₁ ψ` tabulated on composite nodes, with its `𝔥⊗2` norm.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub nodes: Vec<f64>,
    /// `values[(i, j)] = ⟨φ(x_i,·), ψ(x_j,·)⟩_𝔥`
    pub values: DMatrix<f64>,
    /// `‖φ ⊗₁ ψ‖²_{𝔥⊗2}`
    pub norm_sq: Quad,
}

fn contraction_table(
    phi: &Kernel2,
    psi: &Kernel2,
    nodes: &[f64],
    parts: &[KernelPart],
    spec: &QuadratureSpec,
) -> DMatrix<f64> {
    let sx: Vec<Vec<Atom>> = nodes.iter().map(|&x| phi.slice(x)).collect();
    let sy: Vec<Vec<Atom>> = nodes.iter().map(|&y| psi.slice(y)).collect();
    DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| {
        atoms_inner(&sx[i], &sy[j], parts, spec).0
    })
}

/// Second-argument contraction
/// `(φ⊗₁ψ)(x,y) = ∫∫ φ(x,u) ψ(y,v) ∂²R(u,v) du dv`.
///
/// Separable inputs get an exact norm from Gram matrices; otherwise the
/// table is integrated with [`product_matrix`], capped at 8 panels of
/// order 12.
pub fn contract1(
    phi: &Kernel2,
    psi: &Kernel2,
    model: &CovarianceModel,
    quad: &QuadratureSpec,
) -> Result<Contraction> {
    same_horizon(phi.horizon(), psi.horizon())?;
    quad.validate()?;
    let parts = model.kernel_parts()?;
    let horizon = phi.horizon();
    let panels = quad.panels.min(8);
    let order = quad.order.min(12);
    let (nodes, _) = composite_nodes(horizon, panels, order);
    let values = contraction_table(phi, psi, &nodes, &parts, quad);

    let norm_sq = if phi.absexp.is_empty() && psi.absexp.is_empty() {
        estimate(quad, |s| {
            // F = Σ_pq ⟨b_p, d_q⟩ a_p ⊗ c_q
            let (np, nq) = (phi.sep.len(), psi.sep.len());
            let mut coupling = DMatrix::zeros(np, nq);
            for (p, s1) in phi.sep.iter().enumerate() {
                for (q, s2) in psi.sep.iter().enumerate() {
                    coupling[(p, q)] = s1.coef * s2.coef * atoms_inner(&s1.b, &s2.b, &parts, s).0;
                }
            }
            let ga = DMatrix::from_fn(np, np, |p, r| {
                atoms_inner(&phi.sep[p].a, &phi.sep[r].a, &parts, s).0
            });
            let gc = DMatrix::from_fn(nq, nq, |q, r| {
                atoms_inner(&psi.sep[q].a, &psi.sep[r].a, &parts, s).0
            });
            let v = (&ga * &coupling * &gc * coupling.transpose()).trace();
            Ok((v, v.abs()))
        })?
    } else {
        let fine = ProductNorm::new(model, horizon, panels, order)?;
        let v1 = fine.norm_sq(&values);
        let cp = (panels / 2).max(1);
        let coarse = ProductNorm::new(model, horizon, cp, order)?;
        let (cn, _) = composite_nodes(horizon, cp, order);
        let v0 = coarse.norm_sq(&contraction_table(phi, psi, &cn, &parts, quad));
        let est_error = (v1 - v0).abs();
        let allowed = quad.rel_tol * v1.abs();
        if est_error > allowed {
            return Err(Error::Quadrature { est_error, allowed });
        }
        Quad {
            value: v1,
            est_error,
        }
    };
    Ok(Contraction {
        nodes,
        values,
        norm_sq,
    })
}

struct ProductNorm {
    w: DMatrix<f64>,
}

impl ProductNorm {
    fn new(model: &CovarianceModel, horizon: f64, panels: usize, order: usize) -> Result<Self> {
        Ok(Self {
            w: product_matrix(model, horizon, panels, order)?.w,
        })
    }

    /// `Σ F_ij (W F W)_ij`
    fn norm_sq(&self, f: &DMatrix<f64>) -> f64 {
        let wfw = &self.w * f * &self.w;
        f.component_mul(&wfw).sum()
    }
}

