//! Monte Carlo engine: Gaussian increments, log-Gaussian angular processes and
//! generalized r-Pareto ensembles obtained by rejection.
//!
//! Every path owns an RNG stream keyed by `(seed, path index)`, so ensembles
//! are identical whatever the number of worker threads.
//!
//! The angular component is built from a single Cholesky factor of the
//! increment covariance anchored at grid index 0. A spectral function anchored
//! at any cell `j` is recovered from the same draw as
//! `exp{G(s) - G(s_j) - γ(s - s_j)}`, which is how uniformly random anchors are
//! obtained without refactorizing.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{RiskFunctional, SpatialGrid};
use crate::error::{Error, Result};
use crate::samples::SampleMatrix;
use crate::variogram::{variogram_matrix, VariogramModel};

/// Diagonal jitter ladder, relative to the largest diagonal entry.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-9, 1e-8];
/// Relative eigenvalue tolerance separating round-off from a genuinely
/// indefinite conditional covariance.
const PSD_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Independent RNG stream for path (or batch, or slice) `index`.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// A distinct seed for a named sub-experiment.
    pub fn derive(self, tag: u64) -> Seed {
        // splitmix64 finalizer
        let mut z = self.0 ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }
}

/// Lower-triangular factor stored row by row (row `i` holds `i + 1` entries).
#[derive(Debug, Clone)]
struct LowerFactor {
    n: usize,
    packed: Vec<f64>,
}

impl LowerFactor {
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    fn row_dot(&self, i: usize, z: &[f64]) -> f64 {
        dot(self.row(i), &z[..=i])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn factor_psd(m: &DMatrix<f64>) -> Result<LowerFactor> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
    if n == 0 || (scale == 0.0 && m.iter().all(|v| *v == 0.0)) {
        return Ok(LowerFactor {
            n,
            packed: vec![0.0; n * (n + 1) / 2],
        });
    }
    for jitter in JITTER_LADDER {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] += jitter * scale;
        }
        if let Some(chol) = a.cholesky() {
            let l = chol.l();
            let mut packed = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in 0..=i {
                    packed.push(l[(i, j)]);
                }
            }
            return Ok(LowerFactor { n, packed });
        }
    }
    Err(Error::Factorization {
        jitter: *JITTER_LADDER.last().unwrap(),
    })
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidParameter(format!("{what} must be square")));
    }
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(())
}

/// `Σ_ij = Γ_i1 + Γ_j1 - Γ_ij`: covariance of the Gaussian increments
/// `G(s) - G(s_1)`, pinned to zero at the first location.
///
/// Small negative eigenvalues from round-off are clipped; an eigenvalue below
/// `-1e-8` times the largest one means the variogram is invalid.
pub fn conditional_covariance(gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(gamma, "variogram matrix")?;
    let n = gamma.nrows();
    if (0..n).any(|i| gamma[(i, i)] != 0.0) {
        return Err(Error::InvalidParameter(
            "variogram matrix must have a zero diagonal".into(),
        ));
    }
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = gamma[(i, 0)] + gamma[(j, 0)] - gamma[(i, j)];
        }
    }
    if n <= 1 {
        return Ok(sigma);
    }
    let sub = sigma.view((1, 1), (n - 1, n - 1)).into_owned();
    if factor_psd(&sub).is_ok() {
        return Ok(sigma);
    }
    let eig = SymmetricEigen::new(sub);
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PSD_TOLERANCE * max_eig.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidVariogram { min_eig, max_eig });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let repaired =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    for i in 1..n {
        for j in 1..n {
            sigma[(i, j)] = 0.5 * (repaired[(i - 1, j - 1)] + repaired[(j - 1, i - 1)]);
        }
    }
    Ok(sigma)
}

/// Zero-mean Gaussian vectors with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    len: usize,
    pinned: bool,
    factor: LowerFactor,
}

impl GaussianSampler {
    /// Sampler for a covariance pinned at index 0 (first row and column zero);
    /// coordinate 0 of every draw is exactly zero.
    pub fn pinned(sigma: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(sigma, "covariance")?;
        let n = sigma.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("empty covariance".into()));
        }
        if (0..n).any(|i| sigma[(0, i)] != 0.0) {
            return Err(Error::InvalidParameter(
                "covariance must be pinned to zero at the anchor".into(),
            ));
        }
        let sub = sigma.view((1, 1), (n - 1, n - 1)).into_owned();
        Ok(Self {
            len: n,
            pinned: true,
            factor: factor_psd(&sub)?,
        })
    }

    /// Sampler for an arbitrary positive semidefinite covariance.
    pub fn full(cov: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(cov, "covariance")?;
        Ok(Self {
            len: cov.nrows(),
            pinned: false,
            factor: factor_psd(cov)?,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn draw_normals<R: Rng>(&self, rng: &mut R, z: &mut Vec<f64>) {
        z.clear();
        z.extend((0..self.factor.n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    }

    /// Value of coordinate `i` given the standard normal draw `z`.
    fn coordinate(&self, i: usize, z: &[f64]) -> f64 {
        if self.pinned {
            if i == 0 {
                0.0
            } else {
                self.factor.row_dot(i - 1, z)
            }
        } else {
            self.factor.row_dot(i, z)
        }
    }

    pub fn sample_into<R: Rng>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        self.draw_normals(rng, z);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coordinate(i, z);
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianEnsemble {
    pub samples: SampleMatrix,
    pub seed: Seed,
    pub grid: Option<SpatialGrid>,
    pub model: Option<VariogramModel>,
}

/// `n` draws from `N(0, Σ)` where `Σ` is pinned at index 0.
pub fn simulate_gaussian(sigma: &DMatrix<f64>, n: usize, seed: Seed) -> Result<GaussianEnsemble> {
    let sampler = GaussianSampler::pinned(sigma)?;
    Ok(GaussianEnsemble {
        samples: draw_rows(&sampler, n, seed),
        seed,
        grid: None,
        model: None,
    })
}

/// Gaussian increments `G(s) - G(s_1)` of a variogram model on a grid.
pub fn simulate_gaussian_field(
    model: &VariogramModel,
    grid: &SpatialGrid,
    n: usize,
    seed: Seed,
) -> Result<GaussianEnsemble> {
    let sigma = conditional_covariance(&variogram_matrix(model, grid))?;
    let mut ens = simulate_gaussian(&sigma, n, seed)?;
    ens.grid = Some(grid.clone());
    ens.model = Some(*model);
    Ok(ens)
}

fn draw_rows(sampler: &GaussianSampler, n: usize, seed: Seed) -> SampleMatrix {
    let len = sampler.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let mut z = Vec::with_capacity(len);
            let mut out = vec![0.0; len];
            sampler.sample_into(&mut rng, &mut z, &mut out);
            out
        })
        .collect();
    SampleMatrix::new(n, len, rows.into_iter().flatten().collect()).expect("row lengths")
}

/// How the anchor of each log-Gaussian spectral function is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// Uniformly random grid cell: the L1-normalized draw then follows the
    /// angular law of the limit measure.
    #[default]
    Uniform,
    /// Always grid index 0 (drift `Σ_ss / 2` from the pinned covariance).
    First,
}

/// Log-Gaussian spectral functions on a grid.
#[derive(Debug, Clone)]
pub struct AngularSampler {
    gamma: DMatrix<f64>,
    gauss: GaussianSampler,
    anchor: Anchor,
}

/// Per-worker scratch buffers.
#[derive(Debug, Default)]
struct Scratch {
    z: Vec<f64>,
    g: Vec<f64>,
    w: Vec<f64>,
}

impl AngularSampler {
    pub fn new(model: &VariogramModel, grid: &SpatialGrid, anchor: Anchor) -> Result<Self> {
        Self::from_variogram_matrix(variogram_matrix(model, grid), anchor)
    }

    pub fn from_variogram_matrix(gamma: DMatrix<f64>, anchor: Anchor) -> Result<Self> {
        let sigma = conditional_covariance(&gamma)?;
        let gauss = GaussianSampler::pinned(&sigma)?;
        Ok(Self {
            gamma,
            gauss,
            anchor,
        })
    }

    pub fn len(&self) -> usize {
        self.gauss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gauss.is_empty()
    }

    fn gamma_col(&self, j: usize) -> &[f64] {
        let n = self.len();
        &self.gamma.as_slice()[j * n..(j + 1) * n]
    }

    fn pick_anchor<R: Rng>(&self, rng: &mut R) -> usize {
        match self.anchor {
            Anchor::First => 0,
            Anchor::Uniform => rng.random_range(0..self.len()),
        }
    }

    /// `log W^{(j)}(s) = G(s) - G(s_j) - γ(s - s_j)` into `scratch.w`.
    fn log_spectral<R: Rng>(&self, j: usize, rng: &mut R, scratch: &mut Scratch) {
        let n = self.len();
        scratch.g.resize(n, 0.0);
        scratch.w.resize(n, 0.0);
        self.gauss.sample_into(rng, &mut scratch.z, &mut scratch.g);
        let gj = scratch.g[j];
        let col = self.gamma_col(j);
        for ((w, g), c) in scratch.w.iter_mut().zip(&scratch.g).zip(col) {
            *w = g - gj - c;
        }
    }

    /// One angular sample on the unit L1 simplex.
    fn sample_l1<R: Rng>(&self, rng: &mut R, scratch: &mut Scratch, out: &mut [f64]) {
        let j = self.pick_anchor(rng);
        self.log_spectral(j, rng, scratch);
        let m = scratch.w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, lw) in out.iter_mut().zip(&scratch.w) {
            *o = (lw - m).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}

/// `n` log-Gaussian angular samples `W = exp(G - σ²/2) / ‖exp(G - σ²/2)‖₁`.
pub fn simulate_angular(
    model: &VariogramModel,
    grid: &SpatialGrid,
    n: usize,
    seed: Seed,
) -> Result<SampleMatrix> {
    let sampler = AngularSampler::new(model, grid, Anchor::Uniform)?;
    Ok(simulate_angular_with(&sampler, n, seed))
}

pub fn simulate_angular_with(sampler: &AngularSampler, n: usize, seed: Seed) -> SampleMatrix {
    let len = sampler.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let mut scratch = Scratch::default();
            let mut out = vec![0.0; len];
            sampler.sample_l1(&mut rng, &mut scratch, &mut out);
            out
        })
        .collect();
    SampleMatrix::new(n, len, rows.into_iter().flatten().collect()).expect("row lengths")
}

/// Unit Pareto variable by inversion, `R = 1 / U`.
pub fn unit_pareto_from_uniform(u: f64) -> f64 {
    1.0 / u
}

pub fn sample_unit_pareto<R: Rng>(rng: &mut R) -> f64 {
    // U in (0, 1]
    unit_pareto_from_uniform(1.0 - rng.random::<f64>())
}

/// `(y^ξ - 1) / ξ`, with the logarithm at `ξ = 0`.
pub fn pole_to_standard(y: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        y.ln()
    } else {
        (xi * y.ln()).exp_m1() / xi
    }
}

/// Inverse of [`pole_to_standard`]. Values below the lower end point map to
/// `0`; values above a finite upper end point (ξ < 0) map to `+∞`.
pub fn standard_to_pole(p: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        return p.exp();
    }
    if 1.0 + xi * p <= 0.0 {
        return if xi > 0.0 { 0.0 } else { f64::INFINITY };
    }
    ((xi * p).ln_1p() / xi).exp()
}

/// Maps a pole value `y = R W / r(W)` to the data scale `a {y^ξ - 1} / ξ + b`.
pub fn standardize(y: f64, a: f64, b: f64, xi: f64) -> f64 {
    a * pole_to_standard(y, xi) + b
}

/// Inverse of [`standardize`].
pub fn destandardize(x: f64, a: f64, b: f64, xi: f64) -> f64 {
    standard_to_pole((x - b) / a, xi)
}

/// Marginal tail model `X(s) = a(s) P(s) + b(s)` with a common tail index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub xi: f64,
}

impl MarginalModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, xi: f64) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "scale ({}) and location ({}) must cover the same nonempty grid",
                a.len(),
                b.len()
            )));
        }
        if a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "scale function must be positive".into(),
            ));
        }
        if b.iter().any(|v| !v.is_finite()) || !xi.is_finite() {
            return Err(Error::InvalidParameter(
                "location and tail index must be finite".into(),
            ));
        }
        Ok(Self { a, b, xi })
    }

    pub fn constant(len: usize, a: f64, b: f64, xi: f64) -> Result<Self> {
        Self::new(vec![a; len], vec![b; len], xi)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn to_data(&self, s: usize, p: f64) -> f64 {
        self.a[s] * p + self.b[s]
    }

    /// Pole-scale level at which the data at `s` reaches `u`.
    pub fn pole_threshold(&self, s: usize, u: f64) -> f64 {
        destandardize(u, self.a[s], self.b[s], self.xi)
    }

    /// Restriction to a subset of grid cells, in order.
    pub fn select(&self, indices: &[usize]) -> MarginalModel {
        MarginalModel {
            a: indices.iter().map(|&i| self.a[i]).collect(),
            b: indices.iter().map(|&i| self.b[i]).collect(),
            xi: self.xi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RejectionStats {
    pub accepted: u64,
    pub attempted: u64,
}

/// Everything needed to simulate an r-Pareto ensemble except the grid, size
/// and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSpec {
    pub model: VariogramModel,
    pub marginal: MarginalModel,
    pub risk: RiskFunctional,
    pub threshold: f64,
    pub max_attempts: u64,
    pub anchor: Anchor,
}

impl ParetoSpec {
    pub fn new(
        model: VariogramModel,
        marginal: MarginalModel,
        risk: RiskFunctional,
        threshold: f64,
    ) -> Self {
        Self {
            model,
            marginal,
            risk,
            threshold,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            anchor: Anchor::Uniform,
        }
    }
}

/// Generalized r-Pareto sample paths on the standardized scale
/// `P = ({R W / r(W)}^ξ - 1) / ξ`, each satisfying `r(a P + b) ≥ u`.
#[derive(Debug, Clone)]
pub struct ParetoEnsemble {
    pub grid: SpatialGrid,
    pub samples: SampleMatrix,
    pub xi: f64,
    pub risk: RiskFunctional,
    pub threshold: f64,
    pub model: VariogramModel,
    pub marginal: MarginalModel,
    pub stats: RejectionStats,
    pub seed: Seed,
}

impl ParetoEnsemble {
    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    /// Paths mapped through the ensemble's own marginal model.
    pub fn data_scale(&self) -> SampleMatrix {
        self.data_scale_with(&self.marginal)
    }

    pub fn data_scale_with(&self, marginal: &MarginalModel) -> SampleMatrix {
        self.samples.map_columns(|s, p| marginal.to_data(s, p))
    }

    /// Paths on the pole scale `R W / r(W)`.
    pub fn pole_scale(&self) -> SampleMatrix {
        let xi = self.xi;
        self.samples.map_columns(|_, p| standard_to_pole(p, xi))
    }
}

enum Proposal {
    /// Supremum functional whose exceedance region is `{max_s Y(s) / y*(s) ≥ 1}`
    /// with every `y*(s) ≥ 1`: anchor `J ∝ 1 / y*(J)`, accepted iff the
    /// anchor attains the weighted maximum.
    Targeted {
        log_weights: Vec<f64>,
        index: WeightedIndex<f64>,
    },
    /// Pole `R Θ / r(Θ)` with `Θ` size-biased by `r(Θ)`, then a data-scale
    /// exceedance check.
    Generic { bound: f64 },
}

struct ParetoSampler<'a> {
    spec: &'a ParetoSpec,
    angular: AngularSampler,
    proposal: Proposal,
}

impl<'a> ParetoSampler<'a> {
    fn new(spec: &'a ParetoSpec, grid: &SpatialGrid) -> Result<Self> {
        let len = grid.len();
        if spec.marginal.len() != len {
            return Err(Error::InvalidParameter(format!(
                "marginal model covers {} cells, grid has {len}",
                spec.marginal.len()
            )));
        }
        spec.model.validate()?;
        spec.risk.validate(Some(len))?;
        if spec.max_attempts == 0 {
            return Err(Error::InvalidParameter(
                "max_attempts must be at least 1".into(),
            ));
        }
        let angular = AngularSampler::new(&spec.model, grid, spec.anchor)?;
        let proposal = Self::proposal(spec, len)?;
        Ok(Self {
            spec,
            angular,
            proposal,
        })
    }

    fn proposal(spec: &ParetoSpec, len: usize) -> Result<Proposal> {
        if spec.risk == RiskFunctional::Supremum && spec.anchor == Anchor::Uniform {
            let thresholds: Vec<f64> = (0..len)
                .map(|s| spec.marginal.pole_threshold(s, spec.threshold))
                .collect();
            if thresholds.iter().all(|t| *t >= 1.0) {
                if thresholds.iter().all(|t| t.is_infinite()) {
                    return Err(Error::AcceptanceTooLow {
                        path: 0,
                        attempts: 0,
                    });
                }
                let weights: Vec<f64> = thresholds.iter().map(|t| 1.0 / t).collect();
                let index = WeightedIndex::new(&weights)
                    .map_err(|e| Error::InvalidParameter(format!("anchor weights: {e}")))?;
                return Ok(Proposal::Targeted {
                    log_weights: weights.iter().map(|w| w.ln()).collect(),
                    index,
                });
            }
        }
        Ok(Proposal::Generic {
            bound: spec.risk.simplex_bound(len),
        })
    }

    /// Returns the standardized path and the number of proposals used.
    fn path(&self, index: usize, seed: Seed) -> Result<(Vec<f64>, u64)> {
        let mut rng = seed.stream(index as u64);
        let mut scratch = Scratch::default();
        let n = self.angular.len();
        let xi = self.spec.marginal.xi;
        let mut out = vec![0.0; n];
        for attempt in 1..=self.spec.max_attempts {
            let accepted = match &self.proposal {
                Proposal::Targeted { log_weights, index } => {
                    self.try_targeted(&mut rng, &mut scratch, log_weights, index, &mut out)
                }
                Proposal::Generic { bound } => {
                    self.try_generic(&mut rng, &mut scratch, *bound, &mut out)
                }
            };
            if accepted {
                for v in out.iter_mut() {
                    *v = pole_to_standard(*v, xi);
                }
                return Ok((out, attempt));
            }
        }
        Err(Error::AcceptanceTooLow {
            path: index,
            attempts: self.spec.max_attempts,
        })
    }

    fn try_targeted<R: Rng>(
        &self,
        rng: &mut R,
        scratch: &mut Scratch,
        log_weights: &[f64],
        index: &WeightedIndex<f64>,
        pole: &mut [f64],
    ) -> bool {
        let n = self.angular.len();
        let j = index.sample(rng);
        let gauss = &self.angular.gauss;
        gauss.draw_normals(rng, &mut scratch.z);
        let gj = gauss.coordinate(j, &scratch.z);
        let col = self.angular.gamma_col(j);
        let lwj = log_weights[j];
        scratch.w.resize(n, 0.0);
        // early exit as soon as another cell beats the anchor
        for s in 0..n {
            let lv = gauss.coordinate(s, &scratch.z) - gj - col[s];
            if s != j && log_weights[s] + lv > lwj {
                return false;
            }
            scratch.w[s] = lv;
        }
        let r = sample_unit_pareto(rng);
        for (p, lv) in pole.iter_mut().zip(&scratch.w) {
            *p = r * (lv - lwj).exp();
        }
        true
    }

    fn try_generic<R: Rng>(
        &self,
        rng: &mut R,
        scratch: &mut Scratch,
        bound: f64,
        pole: &mut [f64],
    ) -> bool {
        let spec = self.spec;
        self.angular.sample_l1(rng, scratch, pole);
        let rt = spec.risk.eval(pole);
        if !(rt > 0.0) {
            return false;
        }
        if rt < bound && rng.random::<f64>() * bound > rt {
            return false;
        }
        let r = sample_unit_pareto(rng);
        for p in pole.iter_mut() {
            *p *= r / rt;
        }
        let marg = &spec.marginal;
        let data: Vec<f64> = pole
            .iter()
            .enumerate()
            .map(|(s, y)| marg.to_data(s, pole_to_standard(*y, marg.xi)))
            .collect();
        spec.risk.eval(&data) >= spec.threshold
    }
}

/// Simulates `n` generalized r-Pareto paths conditioned on `r(a P + b) ≥ u`.
pub fn simulate_r_pareto(
    spec: &ParetoSpec,
    grid: &SpatialGrid,
    n: usize,
    seed: Seed,
) -> Result<ParetoEnsemble> {
    let sampler = ParetoSampler::new(spec, grid)?;
    let paths: Vec<(Vec<f64>, u64)> = (0..n)
        .into_par_iter()
        .map(|i| sampler.path(i, seed))
        .collect::<Result<_>>()?;
    let attempted = paths.iter().map(|(_, a)| a).sum();
    let data = paths.into_iter().flat_map(|(p, _)| p).collect();
    Ok(ParetoEnsemble {
        grid: grid.clone(),
        samples: SampleMatrix::new(n, grid.len(), data)?,
        xi: spec.marginal.xi,
        risk: spec.risk.clone(),
        threshold: spec.threshold,
        model: spec.model,
        marginal: spec.marginal.clone(),
        stats: RejectionStats {
            accepted: n as u64,
            attempted,
        },
        seed,
    })
}

/// Covariance `C(h) = sill - γ(h)` of a stationary Gaussian field.
pub fn stationary_covariance(model: &VariogramModel, grid: &SpatialGrid) -> Result<DMatrix<f64>> {
    let sill = model.sill();
    if !sill.is_finite() {
        return Err(Error::InvalidParameter(
            "stationary Gaussian fields need a bounded variogram".into(),
        ));
    }
    Ok(variogram_matrix(model, grid).map(|g| sill - g))
}

/// Stationary Gaussian fields conditioned on `r(X) ≥ u` by rejection.
pub fn simulate_gaussian_exceedances(
    model: &VariogramModel,
    grid: &SpatialGrid,
    risk: &RiskFunctional,
    threshold: f64,
    n: usize,
    seed: Seed,
    max_attempts: u64,
) -> Result<SampleMatrix> {
    risk.validate(Some(grid.len()))?;
    let sampler = GaussianSampler::full(&stationary_covariance(model, grid)?)?;
    let len = grid.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let mut z = Vec::with_capacity(len);
            let mut out = vec![0.0; len];
            for _ in 0..max_attempts {
                sampler.sample_into(&mut rng, &mut z, &mut out);
                if risk.eval(&out) >= threshold {
                    return Ok(out);
                }
            }
            Err(Error::AcceptanceTooLow {
                path: i,
                attempts: max_attempts,
            })
        })
        .collect::<Result<_>>()?;
    SampleMatrix::new(n, len, rows.into_iter().flatten().collect())
}
