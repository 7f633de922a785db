//! Driver sampling on uniform grids and Vasicek trajectories.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DVector;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::covariance::{CovFactor, CovarianceModel, ModelKind};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::rng::{Lineage, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Precondition(format!("horizon {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::Precondition("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.delta()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Cholesky,
    Circulant,
    /// Circulant embedding was not nonnegative; Cholesky was used instead.
    CirculantFallback,
    Zero,
    External,
}

#[derive(Debug, Clone)]
pub struct GaussianPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub lineage: Option<Lineage>,
    pub sampler: SamplerKind,
}

impl GaussianPath {
    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.steps() + 1],
            lineage: None,
            sampler: SamplerKind::Zero,
        }
    }

    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.steps() + 1
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::Precondition("driver must start at 0".into()));
        }
        Ok(Self {
            grid,
            values,
            lineage: None,
            sampler: SamplerKind::External,
        })
    }

    /// Every `stride`-th node; the step count must be divisible by `stride`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.grid.steps() % stride != 0 {
            return Err(Error::GridMismatch(format!(
                "stride {stride} does not divide {} steps",
                self.grid.steps()
            )));
        }
        Ok(Self {
            grid: TimeGrid::new(self.grid.horizon(), self.grid.steps() / stride)?,
            values: self.values.iter().step_by(stride).copied().collect(),
            lineage: self.lineage,
            sampler: self.sampler,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExactOu,
    Euler,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_ou" => Ok(Self::ExactOu),
            "euler" => Ok(Self::Euler),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VasicekPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub driver: Option<Lineage>,
    pub k: f64,
    pub mu: f64,
    pub scheme: Scheme,
}

/// Cholesky sampler, `g = L z` on the nodes `t_1 … t_n`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: TimeGrid,
    factor: Arc<CovFactor>,
}

impl CholeskySampler {
    pub fn new(model: &CovarianceModel, grid: TimeGrid) -> Result<Self> {
        let times: Vec<f64> = (1..=grid.steps()).map(|i| grid.node(i)).collect();
        Ok(Self {
            grid,
            factor: Arc::new(model.cov_matrix(&times)?),
        })
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    pub fn sample(&self, rng: &mut StreamRng) -> GaussianPath {
        let n = self.grid.steps();
        let mut z = DVector::zeros(n);
        rng.fill_normal(z.as_mut_slice());
        let g = &self.factor.lower * z;
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        values.extend(g.iter());
        GaussianPath {
            grid: self.grid,
            values,
            lineage: Some(rng.lineage()),
            sampler: SamplerKind::Cholesky,
        }
    }
}

/// Davies–Harte sampler for fbm: circulant embedding of the fractional
/// Gaussian noise autocovariance, size `2n`.
#[derive(Clone)]
pub struct CirculantSampler {
    grid: TimeGrid,
    beta: f64,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    fallback: Option<CholeskySampler>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("grid", &self.grid)
            .field("beta", &self.beta)
            .field("fallback", &self.fallback.is_some())
            .finish()
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `j`.
pub fn fgn_autocov(beta: f64, j: usize) -> f64 {
    let h2 = 2.0 * beta;
    let j = j as f64;
    0.5 * ((j + 1.0).powf(h2) - 2.0 * j.powf(h2) + (j - 1.0).abs().powf(h2))
}

impl CirculantSampler {
    pub fn new(beta: f64, grid: TimeGrid) -> Result<Self> {
        let model = CovarianceModel::fbm(beta)?;
        let n = grid.steps();
        let m = 2 * n;
        let mut c: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        for j in 0..=n {
            c[j].re = fgn_autocov(beta, j);
        }
        for j in 1..n {
            c[m - j].re = c[j].re;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut c);
        let min = c.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            log::warn!(
                "circulant embedding has eigenvalue {min:e} for beta = {beta}, n = {n}; \
                 falling back to Cholesky"
            );
            return Ok(Self {
                grid,
                beta,
                sqrt_eig: vec![],
                fft,
                fallback: Some(CholeskySampler::new(&model, grid)?),
            });
        }
        let sqrt_eig = c
            .iter()
            .map(|z| (z.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            grid,
            beta,
            sqrt_eig,
            fft,
            fallback: None,
        })
    }

    pub fn used_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> GaussianPath {
        if let Some(ch) = &self.fallback {
            let mut p = ch.sample(rng);
            p.sampler = SamplerKind::CirculantFallback;
            return p;
        }
        let n = self.grid.steps();
        let mut w: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let a = rng.normal();
                let b = rng.normal();
                Complex::new(s * a, s * b)
            })
            .collect();
        self.fft.process(&mut w);
        let scale = self.grid.delta().powf(self.beta);
        let mut values = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for z in &w[..n] {
            acc += scale * z.re;
            values.push(acc);
        }
        GaussianPath {
            grid: self.grid,
            values,
            lineage: Some(rng.lineage()),
            sampler: SamplerKind::Circulant,
        }
    }
}

/// A prepared driver sampler for one grid.
#[derive(Debug, Clone)]
pub enum DriverSampler {
    Circulant(CirculantSampler),
    Cholesky(CholeskySampler),
    /// Test hook: the driver is identically zero.
    Zero(TimeGrid),
}

impl DriverSampler {
    /// Circulant for fbm when requested, Cholesky otherwise.
    pub fn new(model: &CovarianceModel, grid: TimeGrid, prefer_circulant: bool) -> Result<Self> {
        if prefer_circulant && model.kind() == ModelKind::Fbm {
            Ok(Self::Circulant(CirculantSampler::new(model.beta(), grid)?))
        } else {
            Ok(Self::Cholesky(CholeskySampler::new(model, grid)?))
        }
    }

    pub fn grid(&self) -> TimeGrid {
        match self {
            Self::Circulant(s) => s.grid,
            Self::Cholesky(s) => s.grid,
            Self::Zero(g) => *g,
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> GaussianPath {
        match self {
            Self::Circulant(s) => s.sample(rng),
            Self::Cholesky(s) => s.sample(rng),
            Self::Zero(g) => GaussianPath::zero(*g),
        }
    }
}

pub fn sample_gaussian_cholesky(
    model: &CovarianceModel,
    grid: TimeGrid,
    rng: &mut StreamRng,
) -> Result<GaussianPath> {
    Ok(CholeskySampler::new(model, grid)?.sample(rng))
}

pub fn sample_fbm_circulant(beta: f64, grid: TimeGrid, rng: &mut StreamRng) -> Result<GaussianPath> {
    Ok(CirculantSampler::new(beta, grid)?.sample(rng))
}

/// `X_t = ∫₀ᵗ e^{−k(t−s)} dG_s` by the recursion
/// `X_{i+1} = e^{−kΔ} X_i + e^{−kΔ/2} (g_{i+1} − g_i)`.
pub fn stochastic_convolution(gpath: &GaussianPath, k: f64) -> Result<Vec<f64>> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k = {k} must be positive")));
    }
    let d = gpath.grid.delta();
    let decay = (-k * d).exp();
    let w = (-0.5 * k * d).exp();
    let g = &gpath.values;
    let mut x = Vec::with_capacity(g.len());
    x.push(0.0);
    for i in 0..g.len() - 1 {
        x.push(decay * x[i] + w * (g[i + 1] - g[i]));
    }
    Ok(x)
}

pub fn build_vasicek(gpath: &GaussianPath, k: f64, mu: f64, scheme: Scheme) -> Result<VasicekPath> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Precondition(format!("k = {k} must be positive")));
    }
    let grid = gpath.grid;
    let values = match scheme {
        Scheme::ExactOu => {
            let x = stochastic_convolution(gpath, k)?;
            x.iter()
                .enumerate()
                .map(|(i, xi)| -mu * (-k * grid.node(i)).exp_m1() + xi)
                .collect()
        }
        Scheme::Euler => {
            let d = grid.delta();
            let g = &gpath.values;
            let mut v = Vec::with_capacity(g.len());
            v.push(0.0);
            for i in 0..g.len() - 1 {
                v.push(v[i] + k * (mu - v[i]) * d + (g[i + 1] - g[i]));
            }
            v
        }
    };
    let path = VasicekPath {
        grid,
        values,
        driver: gpath.lineage,
        k,
        mu,
        scheme,
    };
    if path.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite Vasicek value".into()));
    }
    Ok(path)
}

/// Writes `t,g,v` rows.
pub fn write_path_csv<W: Write>(mut w: W, gpath: &GaussianPath, vpath: &VasicekPath) -> Result<()> {
    if gpath.values.len() != vpath.values.len() {
        return Err(Error::GridMismatch("driver and path lengths differ".into()));
    }
    writeln!(w, "t,g,v")?;
    for i in 0..gpath.values.len() {
        writeln!(
            w,
            "{},{},{}",
            g17(gpath.grid.node(i)),
            g17(gpath.values[i]),
            g17(vpath.values[i])
        )?;
    }
    Ok(())
}

/// Reads a `t,g,v` CSV written by [`write_path_csv`]. Returns the grid and
/// the raw `g` and `v` columns.
pub fn read_path_csv<R: BufRead>(r: R) -> Result<(TimeGrid, Vec<f64>, Vec<f64>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Precondition("empty path file".into()))??;
    if header.trim() != "t,g,v" {
        return Err(Error::Precondition(format!("unexpected header `{header}`")));
    }
    let (mut t, mut g, mut v) = (vec![], vec![], vec![]);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Precondition(format!("line {}: {e}", lineno + 2)))?;
        if cols.len() != 3 {
            return Err(Error::Precondition(format!("line {}: expected 3 columns", lineno + 2)));
        }
        t.push(cols[0]);
        g.push(cols[1]);
        v.push(cols[2]);
    }
    if t.len() < 2 || t[0] != 0.0 {
        return Err(Error::Precondition("path must start at t = 0 and have two nodes".into()));
    }
    let grid = TimeGrid::new(t[t.len() - 1], t.len() - 1)?;
    let tol = 1e-9 * grid.horizon();
    if t.iter().enumerate().any(|(i, ti)| (ti - grid.node(i)).abs() > tol) {
        return Err(Error::GridMismatch("path times are not uniform".into()));
    }
    Ok((grid, g, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(10.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 5).is_err());
    }

    #[test]
    fn one_step_cholesky_is_scaled_normal() {
        let m = CovarianceModel::fbm(0.75).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let p = sample_gaussian_cholesky(&m, grid, &mut StreamRng::new(11, 0)).unwrap();
        let z = StreamRng::new(11, 0).normal();
        assert_eq!(p.values, vec![0.0, z]);
        assert_eq!(p.lineage.unwrap().master_seed, 11);
    }

    #[test]
    fn circulant_is_deterministic() {
        let grid = TimeGrid::new(5.0, 64).unwrap();
        let a = sample_fbm_circulant(0.6, grid, &mut StreamRng::new(3, 9)).unwrap();
        let b = sample_fbm_circulant(0.6, grid, &mut StreamRng::new(3, 9)).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.sampler, SamplerKind::Circulant);
    }

    #[test]
    fn embedding_is_nonnegative_for_persistent_range() {
        for beta in [0.55, 0.6, 0.75, 0.9, 0.99] {
            let s = CirculantSampler::new(beta, TimeGrid::new(1.0, 1000).unwrap()).unwrap();
            assert!(!s.used_fallback(), "beta {beta}");
        }
    }

    #[test]
    fn lag_one_increment_autocovariance() {
        // 200 replications of n = 4096; pooled lag-1 autocovariance
        let (beta, n) = (0.75, 4096);
        let grid = TimeGrid::new(1.0, n).unwrap();
        let s = CirculantSampler::new(beta, grid).unwrap();
        let d = grid.delta();
        let mut per_rep = vec![];
        for r in 0..200 {
            let p = s.sample(&mut StreamRng::new(42, r));
            let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
            let ac: f64 = inc.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
            per_rep.push(ac);
        }
        let mean = per_rep.iter().sum::<f64>() / 200.0;
        let var = per_rep.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0;
        let se = (var / 200.0).sqrt();
        let want = 0.5 * (2f64.powf(2.0 * beta) - 2.0) * d.powf(2.0 * beta);
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    }

    #[test]
    fn terminal_variance() {
        let (beta, t) = (0.6, 3.0);
        let grid = TimeGrid::new(t, 128).unwrap();
        let s = CirculantSampler::new(beta, grid).unwrap();
        let n = 4000;
        let sq: Vec<f64> = (0..n)
            .map(|r| s.sample(&mut StreamRng::new(5, r)).values[128].powi(2))
            .collect();
        let mean = sq.iter().sum::<f64>() / n as f64;
        let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want = t.powf(2.0 * beta);
        assert!((mean - want).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn cholesky_two_point_covariance() {
        let m = CovarianceModel::fbm(0.6).unwrap();
        let grid = TimeGrid::new(2.0, 2).unwrap();
        let s = CholeskySampler::new(&m, grid).unwrap();
        let n = 20000;
        let mut prods = [vec![], vec![], vec![]];
        for r in 0..n {
            let p = s.sample(&mut StreamRng::new(1, r));
            prods[0].push(p.values[1] * p.values[1]);
            prods[1].push(p.values[1] * p.values[2]);
            prods[2].push(p.values[2] * p.values[2]);
        }
        let want = [1.0, 0.5 * 2f64.powf(1.2), 2f64.powf(1.2)];
        for (x, w) in prods.iter().zip(want) {
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - w).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {w}");
        }
    }

    #[test]
    fn convolution_examples() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let g = GaussianPath::from_values(grid, vec![0.0, 1.0]).unwrap();
        let x = stochastic_convolution(&g, 1.0).unwrap();
        assert!((x[1] - (-0.5f64).exp()).abs() < 1e-16);
        assert!(stochastic_convolution(&g, 0.0).is_err());
        let z = GaussianPath::zero(TimeGrid::new(3.0, 30).unwrap());
        assert!(stochastic_convolution(&z, 2.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_driver_reproduces_mean_curve() {
        let grid = TimeGrid::new(10.0, 1000).unwrap();
        let v = build_vasicek(&GaussianPath::zero(grid), 1.0, 2.0, Scheme::ExactOu).unwrap();
        for (i, vi) in v.values.iter().enumerate() {
            let want = 2.0 * (1.0 - (-grid.node(i)).exp());
            assert!((vi - want).abs() <= 4e-16 * 2.0);
        }
        assert!((v.values[1000] - 1.999_909_200_140_475).abs() < 1e-15);
    }

    #[test]
    fn mu_zero_is_plain_convolution() {
        let grid = TimeGrid::new(4.0, 256).unwrap();
        let g = sample_fbm_circulant(0.7, grid, &mut StreamRng::new(2, 2)).unwrap();
        let v = build_vasicek(&g, 1.5, 0.0, Scheme::ExactOu).unwrap();
        assert_eq!(v.values, stochastic_convolution(&g, 1.5).unwrap());
    }

    #[test]
    fn euler_converges_to_exact_under_refinement() {
        let fine = TimeGrid::new(10.0, 1 << 14).unwrap();
        let g = sample_fbm_circulant(0.7, fine, &mut StreamRng::new(8, 1)).unwrap();
        let mut last = f64::INFINITY;
        for stride in [256, 128, 64, 32, 16] {
            let gs = g.subsample(stride).unwrap();
            let a = build_vasicek(&gs, 1.0, 2.0, Scheme::ExactOu).unwrap();
            let b = build_vasicek(&gs, 1.0, 2.0, Scheme::Euler).unwrap();
            let sup = a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(sup < last, "stride {stride}: {sup} !< {last}");
            last = sup;
        }
    }

    #[test]
    fn csv_round_trip() {
        let grid = TimeGrid::new(2.0, 8).unwrap();
        let g = sample_fbm_circulant(0.6, grid, &mut StreamRng::new(1, 1)).unwrap();
        let v = build_vasicek(&g, 1.0, 0.5, Scheme::ExactOu).unwrap();
        let mut buf = vec![];
        write_path_csv(&mut buf, &g, &v).unwrap();
        let (grid2, g2, v2) = read_path_csv(&buf[..]).unwrap();
        assert_eq!(grid2.steps(), 8);
        assert_eq!(g2, g.values);
        assert_eq!(v2, v.values);
    }
}
