//! Composite 1D rules with an optional algebraic endpoint weight.

use super::gauss::{jacobi_left, legendre};
use super::{DiagonalHandling, QuadratureSpec};

/// Weight `|x − at|^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    pub at: f64,
    pub gamma: f64,
}

/// Nodes and weights with the algebraic weight folded in.
#[derive(Debug, Clone, Default)]
pub struct Rule1 {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl Rule1 {
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `(Σ w f, Σ |w f|)`
    pub fn apply_with_mass(&self, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut s = 0.0;
        let mut m = 0.0;
        for (&x, &w) in self.x.iter().zip(&self.w) {
            let v = w * f(x);
            s += v;
            m += v.abs();
        }
        (s, m)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn push_gl(&mut self, a: f64, b: f64, order: usize, weight: Option<Singular>) {
        let r = legendre(order);
        let h = b - a;
        for (x, w) in r.x.iter().zip(&r.w) {
            let xi = a + h * x;
            let wi = h * w * weight.map_or(1.0, |s| (xi - s.at).abs().powf(s.gamma));
            self.x.push(xi);
            self.w.push(wi);
        }
    }
}

/// Rule for `∫_a^b f(x) |x − at|^γ dx` where `f` is smooth between the
/// given `breaks` and varies on the length scale `1/rate`.
pub fn rule1(
    a: f64,
    b: f64,
    sing: Option<Singular>,
    breaks: &[f64],
    rate: f64,
    spec: &QuadratureSpec,
) -> Rule1 {
    let mut out = Rule1::default();
    if !(b > a) {
        return out;
    }
    let mut pts = vec![a, b];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    if let Some(s) = sing {
        if s.at > a && s.at < b {
            pts.push(s.at);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    for w in pts.windows(2) {
        piece(&mut out, w[0], w[1], sing, rate, spec);
    }
    out
}

fn piece(out: &mut Rule1, p: f64, q: f64, sing: Option<Singular>, rate: f64, spec: &QuadratureSpec) {
    let len = q - p;
    if len <= 0.0 {
        return;
    }
    let n_decay = (len * rate.abs() / 2.0).ceil() as usize;
    let n = n_decay.max(spec.panels).max(1);
    let h = len / n as f64;
    let Some(s) = sing else {
        for i in 0..n {
            out.push_gl(p + i as f64 * h, p + (i + 1) as f64 * h, spec.order, None);
        }
        return;
    };
    let at_left = s.at == p;
    let at_right = s.at == q;
    if at_left || at_right {
        // first panel touches the singular point, the rest are graded away
        let cell = h;
        singular_cell(out, s, cell, at_left, spec);
        let (lo, hi) = if at_left { (p + cell, q) } else { (p, q - cell) };
        graded(out, lo, hi, s, n - 1, spec);
    } else {
        graded(out, p, q, s, n, spec);
    }
}

/// Uniform split into `n` panels, each refined geometrically when it is
/// closer to the singular point than its own width.
fn graded(out: &mut Rule1, p: f64, q: f64, s: Singular, n: usize, spec: &QuadratureSpec) {
    if n == 0 || q <= p {
        return;
    }
    let h = (q - p) / n as f64;
    for i in 0..n {
        let (a, b) = (p + i as f64 * h, p + (i + 1) as f64 * h);
        let d = (a - s.at).abs().min((b - s.at).abs());
        if d >= b - a {
            out.push_gl(a, b, spec.order, Some(s));
            continue;
        }
        // distances from the singular point: d, 2d, 4d, … up to the far end
        let far = (a - s.at).abs().max((b - s.at).abs());
        let mut lo = d;
        while lo < far {
            let hi = (2.0 * lo).min(far);
            let (x0, x1) = if s.at <= a {
                (s.at + lo, s.at + hi)
            } else {
                (s.at - hi, s.at - lo)
            };
            out.push_gl(x0, x1, spec.order, Some(s));
            lo = hi;
        }
    }
}

/// `∫` over the cell of width `h` adjacent to the singular point.
fn singular_cell(out: &mut Rule1, s: Singular, h: f64, at_left: bool, spec: &QuadratureSpec) {
    let place = |u: f64| if at_left { s.at + u } else { s.at - u };
    match spec.diagonal {
        DiagonalHandling::SplitAndRefine => {
            const DEPTH: i32 = 8;
            for j in 0..DEPTH {
                let hi = h * 0.5f64.powi(j);
                let lo = 0.5 * hi;
                let (x0, x1) = if at_left {
                    (place(lo), place(hi))
                } else {
                    (place(hi), place(lo))
                };
                out.push_gl(x0, x1, spec.order, Some(s));
            }
            let inner = h * 0.5f64.powi(DEPTH);
            let r = jacobi_left(s.gamma, spec.order);
            let scale = inner.powf(s.gamma + 1.0);
            for (x, w) in r.x.iter().zip(&r.w) {
                out.x.push(place(inner * x));
                out.w.push(scale * w);
            }
        }
        DiagonalHandling::PowerSubstitution => {
            // u = h σ^q with q = 1/(γ+1) turns u^γ du into q h^{γ+1} dσ
            let qexp = 1.0 / (s.gamma + 1.0);
            let scale = qexp * h.powf(s.gamma + 1.0);
            let r = legendre(spec.order);
            let panels = spec.panels.max(2);
            for i in 0..panels {
                let (a, b) = (i as f64 / panels as f64, (i + 1) as f64 / panels as f64);
                for (x, w) in r.x.iter().zip(&r.w) {
                    let sigma = a + (b - a) * x;
                    out.x.push(place(h * sigma.powf(qexp)));
                    out.w.push(scale * (b - a) * w);
                }
            }
        }
    }
}
