//! Gauss–Legendre and Gauss–Jacobi node sets, cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::gamma;

/// Nodes and weights on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

thread_local! {
    static LEGENDRE: RefCell<HashMap<usize, Rc<NodeSet>>> = RefCell::new(HashMap::new());
    static JACOBI: RefCell<HashMap<(usize, u64), Rc<NodeSet>>> = RefCell::new(HashMap::new());
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`.
pub fn legendre(n: usize) -> Rc<NodeSet> {
    LEGENDRE.with(|c| {
        c.borrow_mut()
            .entry(n)
            .or_insert_with(|| Rc::new(legendre_uncached(n)))
            .clone()
    })
}

/// Gauss rule for the weight `u^gamma` on `[0, 1]`, `gamma > −1`.
pub fn jacobi_left(gamma: f64, n: usize) -> Rc<NodeSet> {
    JACOBI.with(|c| {
        c.borrow_mut()
            .entry((n, gamma.to_bits()))
            .or_insert_with(|| Rc::new(jacobi_left_uncached(gamma, n)))
            .clone()
    })
}

fn legendre_uncached(n: usize) -> NodeSet {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    if n == 1 {
        return NodeSet {
            x: vec![0.5],
            w: vec![1.0],
        };
    }
    NodeSet { x, w }
}

/// Golub–Welsch for the Jacobi weight `(1+t)^b` on `[−1, 1]`, mapped to
/// `u = (1+t)/2`.
fn jacobi_left_uncached(b: f64, n: usize) -> NodeSet {
    assert!(b > -1.0 && n >= 1);
    let a = 0.0;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let s = 2.0 * k + a + b;
        j[(i, i)] = if i == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let s = 2.0 * m + a + b;
            let off = (4.0 * m * (m + a) * (m + b) * (m + a + b) / (s * s * (s + 1.0) * (s - 1.0)))
                .sqrt();
            j[(i, i + 1)] = off;
            j[(i + 1, i)] = off;
        }
    }
    let mu0 = 2f64.powf(a + b + 1.0) * gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 2.0);
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    // ∫₀¹ u^b f(u) du = 2^{−b−1} ∫ (1+t)^b f((1+t)/2) dt
    let scale = 2f64.powf(-b - 1.0);
    NodeSet {
        x: pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect(),
        w: pairs.iter().map(|p| scale * p.1).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 12, 16, 20] {
            let r = legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = r.x.iter().zip(&r.w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn jacobi_integrates_weighted_monomials() {
        for gamma in [-0.8, -0.6, -0.4, 0.2] {
            let r = jacobi_left(gamma, 12);
            for p in 0..24 {
                let q: f64 = r.x.iter().zip(&r.w).map(|(x, w)| w * x.powi(p)).sum();
                let exact = 1.0 / (p as f64 + gamma + 1.0);
                assert!(((q - exact) / exact).abs() < 1e-12, "gamma={gamma} p={p}");
            }
        }
    }
}
