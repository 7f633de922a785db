//! Kernel expressions on `[0,T]` and `[0,T]²`.
//!
//! One-variable kernels are finite sums of exponential atoms
//! `c·e^{r(x−x₀)}𝟙_{[lo,hi)}(x)`, plus contractions of `e^{−k|·−·|}`
//! against such sums, which are only known pointwise. Two-variable kernels
//! are sums of tensor products of atom sums plus multiples of
//! `e^{−k|t−s|}𝟙_{[0,T]²}`.

use crate::error::{Error, Result};

/// `coef · e^{rate (x − anchor)}` on `[lo, hi)`.
///
/// The anchor is kept at the end of the support where the exponent is
/// largest, so evaluation never overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub coef: f64,
    pub rate: f64,
    pub anchor: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Atom {
    pub fn new(coef: f64, rate: f64, lo: f64, hi: f64) -> Self {
        let anchor = if rate > 0.0 { hi } else { lo };
        Self {
            coef,
            rate,
            anchor,
            lo,
            hi,
        }
    }

    /// `coef·e^{rate·(x − anchor)}` with an explicit anchor; the caller
    /// guarantees `rate·(x − anchor) ≤ 0` on the support.
    pub fn anchored(coef: f64, rate: f64, anchor: f64, lo: f64, hi: f64) -> Self {
        Self {
            coef,
            rate,
            anchor,
            lo,
            hi,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.lo && x < self.hi {
            self.coef * (self.rate * (x - self.anchor)).exp()
        } else {
            0.0
        }
    }

    fn scaled(mut self, c: f64) -> Self {
        self.coef *= c;
        self
    }
}

/// `coef · ⟨e^{−rate|x−·|}𝟙_{[0,T]}, with⟩_𝔥` as a function of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contracted {
    pub coef: f64,
    pub rate: f64,
    pub with: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1 {
    pub(crate) horizon: f64,
    pub atoms: Vec<Atom>,
    pub contracted: Vec<Contracted>,
}

impl Kernel1 {
    pub fn zero(horizon: f64) -> Self {
        Self {
            horizon,
            atoms: vec![],
            contracted: vec![],
        }
    }

    pub fn from_atoms(horizon: f64, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.lo < 0.0 || a.hi > horizon * (1.0 + 1e-15) || a.lo > a.hi {
                return Err(Error::Precondition(format!(
                    "atom support [{}, {}) is not inside [0, {horizon}]",
                    a.lo, a.hi
                )));
            }
        }
        Ok(Self {
            horizon,
            atoms,
            contracted: vec![],
        })
    }

    /// `𝟙_{[a,b)}`
    pub fn indicator(horizon: f64, a: f64, b: f64) -> Result<Self> {
        Self::from_atoms(horizon, vec![Atom::new(1.0, 0.0, a, b)])
    }

    /// `𝟙_{[0,T]}`
    pub fn one(horizon: f64) -> Self {
        Self::from_atoms(horizon, vec![Atom::new(1.0, 0.0, 0.0, horizon)]).unwrap()
    }

    /// `k_T(s) = e^{−k(T−s)}`
    pub fn k_t(horizon: f64, k: f64) -> Self {
        Self::from_atoms(horizon, vec![Atom::new(1.0, k, 0.0, horizon)]).unwrap()
    }

    /// `m_T(s) = e^{−ks}`
    pub fn m_t(horizon: f64, k: f64) -> Self {
        Self::from_atoms(horizon, vec![Atom::new(1.0, -k, 0.0, horizon)]).unwrap()
    }

    /// `l_T(s) = (1 − e^{−k(T−s)})/k`
    pub fn l_t(horizon: f64, k: f64) -> Self {
        Self::from_atoms(
            horizon,
            vec![
                Atom::new(1.0 / k, 0.0, 0.0, horizon),
                Atom::new(-1.0 / k, k, 0.0, horizon),
            ],
        )
        .unwrap()
    }

    /// `n_T(s) = (e^{−k(2T−s)} − 1)/(2k)`, the tabulated variant.
    pub fn n_t_printed(horizon: f64, k: f64) -> Self {
        Self::from_atoms(
            horizon,
            vec![
                Atom::new((-k * horizon).exp() / (2.0 * k), k, 0.0, horizon),
                Atom::new(-1.0 / (2.0 * k), 0.0, 0.0, horizon),
            ],
        )
        .unwrap()
    }

    /// `n_T(s) = (e^{−k(2T−s)} − e^{−ks})/(2k)`, the kernel that actually
    /// appears in `∫(1−e^{−kt})X_t dt = I₁(l_T + n_T)`.
    pub fn n_t(horizon: f64, k: f64) -> Self {
        Self::from_atoms(
            horizon,
            vec![
                Atom::new((-k * horizon).exp() / (2.0 * k), k, 0.0, horizon),
                Atom::new(-1.0 / (2.0 * k), -k, 0.0, horizon),
            ],
        )
        .unwrap()
    }

    /// `e^{−k(t−·)}𝟙_{[0,t)}`
    pub fn decay_to(horizon: f64, k: f64, t: f64) -> Self {
        Self::from_atoms(horizon, vec![Atom::new(1.0, k, 0.0, t)]).unwrap()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_atomic(&self) -> bool {
        self.contracted.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.coef == 0.0 || a.lo >= a.hi)
            && self.contracted.iter().all(|c| c.coef == 0.0)
    }

    /// Value of the atomic part.
    pub fn eval_atoms(&self, x: f64) -> f64 {
        self.atoms.iter().map(|a| a.eval(x)).sum()
    }

    pub fn scale(mut self, c: f64) -> Self {
        for a in &mut self.atoms {
            a.coef *= c;
        }
        for t in &mut self.contracted {
            t.coef *= c;
        }
        self
    }

    pub fn add(mut self, other: &Kernel1) -> Result<Self> {
        check_horizon(self.horizon, other.horizon)?;
        self.atoms.extend_from_slice(&other.atoms);
        self.contracted.extend(other.contracted.iter().cloned());
        Ok(self)
    }

    /// `self + c·other`
    pub fn axpy(self, c: f64, other: &Kernel1) -> Result<Self> {
        self.add(&other.clone().scale(c))
    }

    /// Largest absolute exponential rate, a hint for panel sizes.
    pub fn rate(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.rate.abs())
            .chain(self.contracted.iter().map(|c| c.rate))
            .fold(0.0, f64::max)
    }

    /// Support end points of the atoms.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.atoms.iter().flat_map(|a| [a.lo, a.hi]).collect();
        for c in &self.contracted {
            b.extend(c.with.iter().flat_map(|a| [a.lo, a.hi]));
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// `coef · a ⊗ b`
#[derive(Debug, Clone, PartialEq)]
pub struct SepTerm {
    pub coef: f64,
    pub a: Vec<Atom>,
    pub b: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2 {
    horizon: f64,
    pub sep: Vec<SepTerm>,
    /// `(coef, k)` for `coef·e^{−k|t−s|}𝟙_{[0,T]²}`
    pub absexp: Vec<(f64, f64)>,
}

impl Kernel2 {
    pub fn zero(horizon: f64) -> Self {
        Self {
            horizon,
            sep: vec![],
            absexp: vec![],
        }
    }

    pub fn tensor(a: &Kernel1, b: &Kernel1) -> Result<Self> {
        check_horizon(a.horizon, b.horizon)?;
        if !a.is_atomic() || !b.is_atomic() {
            return Err(Error::Unsupported(
                "tensor factors must be explicit exponential sums".into(),
            ));
        }
        Ok(Self {
            horizon: a.horizon,
            sep: vec![SepTerm {
                coef: 1.0,
                a: a.atoms.clone(),
                b: b.atoms.clone(),
            }],
            absexp: vec![],
        })
    }

    /// `f_T(t,s) = e^{−k|t−s|}`
    pub fn f_t(horizon: f64, k: f64) -> Self {
        Self {
            horizon,
            sep: vec![],
            absexp: vec![(1.0, k)],
        }
    }

    /// `h_T(t,s) = e^{−k(2T−t−s)} = k_T ⊗ k_T`
    pub fn h_t(horizon: f64, k: f64) -> Self {
        let kt = Kernel1::k_t(horizon, k);
        Self::tensor(&kt, &kt).unwrap()
    }

    /// `𝟙_{[0,T]²}`
    pub fn one(horizon: f64) -> Self {
        let o = Kernel1::one(horizon);
        Self::tensor(&o, &o).unwrap()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scale(mut self, c: f64) -> Self {
        for t in &mut self.sep {
            t.coef *= c;
        }
        for t in &mut self.absexp {
            t.0 *= c;
        }
        self
    }

    pub fn add(mut self, other: &Kernel2) -> Result<Self> {
        check_horizon(self.horizon, other.horizon)?;
        self.sep.extend(other.sep.iter().cloned());
        self.absexp.extend_from_slice(&other.absexp);
        Ok(self)
    }

    pub fn axpy(self, c: f64, other: &Kernel2) -> Result<Self> {
        self.add(&other.clone().scale(c))
    }

    /// Average of the kernel and its transpose.
    pub fn symmetrize(&self) -> Self {
        let mut sep = Vec::with_capacity(2 * self.sep.len());
        for t in &self.sep {
            sep.push(SepTerm {
                coef: 0.5 * t.coef,
                a: t.a.clone(),
                b: t.b.clone(),
            });
            sep.push(SepTerm {
                coef: 0.5 * t.coef,
                a: t.b.clone(),
                b: t.a.clone(),
            });
        }
        Self {
            horizon: self.horizon,
            sep,
            absexp: self.absexp.clone(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let t = self.horizon;
        let mut v: f64 = self
            .sep
            .iter()
            .map(|s| s.coef * sum_atoms(&s.a, x) * sum_atoms(&s.b, y))
            .sum();
        if (0.0..t).contains(&x) && (0.0..t).contains(&y) {
            v += self
                .absexp
                .iter()
                .map(|(c, k)| c * (-k * (x - y).abs()).exp())
                .sum::<f64>();
        }
        v
    }

    /// Atoms of `y ↦ self(x, y)`.
    pub fn slice(&self, x: f64) -> Vec<Atom> {
        let mut out = vec![];
        for s in &self.sep {
            let ax = s.coef * sum_atoms(&s.a, x);
            if ax != 0.0 {
                out.extend(s.b.iter().map(|b| b.scaled(ax)));
            }
        }
        if (0.0..self.horizon).contains(&x) {
            for &(c, k) in &self.absexp {
                out.extend(abs_exp_slice(self.horizon, c, k, x));
            }
        }
        out
    }

    /// Atoms of `x ↦ self(x, y)`.
    pub fn slice_first(&self, y: f64) -> Vec<Atom> {
        let mut out = vec![];
        for s in &self.sep {
            let by = s.coef * sum_atoms(&s.b, y);
            if by != 0.0 {
                out.extend(s.a.iter().map(|a| a.scaled(by)));
            }
        }
        if (0.0..self.horizon).contains(&y) {
            for &(c, k) in &self.absexp {
                out.extend(abs_exp_slice(self.horizon, c, k, y));
            }
        }
        out
    }

    pub fn rate(&self) -> f64 {
        let r = self
            .sep
            .iter()
            .flat_map(|s| s.a.iter().chain(&s.b))
            .map(|a| a.rate.abs());
        r.chain(self.absexp.iter().map(|t| t.1)).fold(0.0, f64::max)
    }

    /// Support end points in each argument.
    pub fn breaks(&self) -> (Vec<f64>, Vec<f64>) {
        let mut bx: Vec<f64> = self
            .sep
            .iter()
            .flat_map(|s| s.a.iter().flat_map(|a| [a.lo, a.hi]))
            .collect();
        let mut by: Vec<f64> = self
            .sep
            .iter()
            .flat_map(|s| s.b.iter().flat_map(|a| [a.lo, a.hi]))
            .collect();
        for v in [&mut bx, &mut by] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        (bx, by)
    }
}

/// Three-variable kernel `Σ coef · A ⊗ b` with `A` two-variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel3 {
    horizon: f64,
    pub terms: Vec<(f64, Kernel2, Kernel1)>,
}

impl Kernel3 {
    pub fn zero(horizon: f64) -> Self {
        Self {
            horizon,
            terms: vec![],
        }
    }

    pub fn tensor(a: &Kernel2, b: &Kernel1) -> Result<Self> {
        check_horizon(a.horizon, b.horizon)?;
        if !b.is_atomic() {
            return Err(Error::Unsupported(
                "tensor factors must be explicit exponential sums".into(),
            ));
        }
        Ok(Self {
            horizon: a.horizon,
            terms: vec![(1.0, a.clone(), b.clone())],
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scale(mut self, c: f64) -> Self {
        for t in &mut self.terms {
            t.0 *= c;
        }
        self
    }

    pub fn add(mut self, other: &Kernel3) -> Result<Self> {
        check_horizon(self.horizon, other.horizon)?;
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        self.terms
            .iter()
            .map(|(c, a, b)| c * a.eval(x, y) * sum_atoms(&b.atoms, z))
            .sum()
    }
}

/// A kernel of arity one, two or three.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelExpr {
    One(Kernel1),
    Two(Kernel2),
    Three(Kernel3),
}

impl KernelExpr {
    pub fn arity(&self) -> usize {
        match self {
            Self::One(_) => 1,
            Self::Two(_) => 2,
            Self::Three(_) => 3,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Self::One(k) => k.horizon(),
            Self::Two(k) => k.horizon(),
            Self::Three(k) => k.horizon(),
        }
    }
}

pub(crate) fn sum_atoms(atoms: &[Atom], x: f64) -> f64 {
    atoms.iter().map(|a| a.eval(x)).sum()
}

/// Atoms of `y ↦ c·e^{−k|x−y|}𝟙_{[0,T)}(y)`.
pub(crate) fn abs_exp_slice(horizon: f64, c: f64, k: f64, x: f64) -> [Atom; 2] {
    [
        Atom::anchored(c, k, x, 0.0, x),
        Atom::anchored(c, -k, x, x, horizon),
    ]
}

fn check_horizon(a: f64, b: f64) -> Result<()> {
    if a != b {
        return Err(Error::Precondition(format!(
            "kernels have different horizons {a} and {b}"
        )));
    }
    Ok(())
}
