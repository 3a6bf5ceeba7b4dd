//! Statistical inference for the empirical transport map.
//!
//! Replications are independent given seeds derived with [`derive_seed`], so
//! they run in parallel and results do not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, StandardNormal};
use rayon::prelude::*;

use crate::dual::{DualProblem, DualSolveReport, PotentialVector, SimplexWeights, SolveOptions};
use crate::error::{check_dim, Error, Result};
use crate::field::VectorField;
use crate::functionals::{delta_s_between, gamma_phi_on};
use crate::geometry::{Cell, ConvexPolygon, FacetShape, LaguerreDiagram, SiteSet};
use crate::measure::{FacetIntegrals, FacetTable};

/// Eigenvalues below this are treated as zero in the covariance square root.
pub const EIGEN_CLIP: f64 = 1e-12;

/// Seed for replication `index` of `stream` under `master`.
///
/// The rule is `splitmix64(master + γ · (stream · 2^32 + index + 1))` with
/// `γ = 0x9E3779B97F4A7C15`, i.e. one SplitMix64 output per replication.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let key = (stream << 32).wrapping_add(index).wrapping_add(1);
    let mut x = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(key));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed streams used by the pipeline.
pub mod streams {
    pub const BOOTSTRAP: u64 = 1;
    pub const LIMIT_DELTA: u64 = 2;
    pub const LIMIT_GAMMA: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const OUTER: u64 = 5;
}

/// An i.i.d. sample from `P`, recorded as site indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    observations: Vec<usize>,
    n_sites: usize,
}

impl SampleData {
    pub fn new(observations: Vec<usize>, n_sites: usize) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidInput("sample must contain at least one observation".into()));
        }
        if let Some(&bad) = observations.iter().find(|&&i| i >= n_sites) {
            return Err(Error::InvalidInput(format!("observation {bad} is not a site index below {n_sites}")));
        }
        Ok(Self { observations, n_sites })
    }

    /// Expands category counts into an (ordered) observation list.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let observations = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect();
        Self::new(observations, counts.len())
    }

    /// Draws `n` i.i.d. indices from `p`.
    pub fn draw<R: Rng + ?Sized>(p: &SimplexWeights, n: usize, rng: &mut R) -> Result<Self> {
        let cdf: Vec<f64> = p
            .as_slice()
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let last = p.len() - 1;
        let observations = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(last)
            })
            .collect();
        Self::new(observations, p.len())
    }

    /// [`SampleData::draw`] with a ChaCha8 stream seeded by `seed`.
    pub fn draw_seeded(p: &SimplexWeights, n: usize, seed: u64) -> Result<Self> {
        Self::draw(p, n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.n_sites];
        for &i in &self.observations {
            c[i] += 1;
        }
        c
    }
}

/// `p̂_n`: category frequencies. Interior membership is `is_interior()`.
pub fn empirical_frequencies(sample: &SampleData) -> SimplexWeights {
    SimplexWeights::from_counts(&sample.counts()).expect("sample is nonempty")
}

/// One multinomial draw of `n` trials by sequential conditional binomials.
pub fn multinomial_counts<R: Rng + ?Sized>(p: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let mut remaining = n;
    let mut mass_left = 1.0;
    for (k, &pk) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == p.len() - 1 {
            counts[k] = remaining;
            break;
        }
        let prob = (pk / mass_left).clamp(0.0, 1.0);
        let c = if prob <= 0.0 {
            0
        } else if prob >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, prob).expect("valid binomial").sample(rng)
        };
        counts[k] = c;
        remaining -= c;
        mass_left -= pk;
    }
    counts
}

/// `A = (p_i (δ_ij - p_j))` over the first `N - 1` categories.
pub fn multinomial_covariance(p: &SimplexWeights) -> DMatrix<f64> {
    let q = p.reduced();
    DMatrix::from_fn(q.len(), q.len(), |i, j| if i == j { q[i] * (1.0 - q[i]) } else { -q[i] * q[j] })
}

/// CLT covariance of the empirical potentials: `Σ = Bᵀ A B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    /// `(N-1) × (N-1)` multinomial covariance.
    pub a: DMatrix<f64>,
    /// `(N-1) × N` sensitivity `∇_q z*`.
    pub b: DMatrix<f64>,
    /// `N × N`, singular along `1`.
    pub sigma: DMatrix<f64>,
}

impl CovarianceModel {
    pub fn from_parts(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.nrows(),
            });
        }
        let s = b.transpose() * &a * &b;
        let sigma = (&s + s.transpose()) * 0.5;
        Ok(Self { a, b, sigma })
    }

    /// Symmetric square root by eigendecomposition, clipping eigenvalues
    /// below [`EIGEN_CLIP`] to zero.
    pub fn sqrt_sigma(&self) -> Result<DMatrix<f64>> {
        psd_sqrt(&self.sigma)
    }
}

pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * max.max(1.0) {
        return Err(Error::NotPsd(min));
    }
    let roots = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&l| if l < EIGEN_CLIP { 0.0 } else { l.sqrt() }),
    );
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Assembles `A`, `B` and `Σ` at the population weights `p` with `z* = z*(p)`.
pub fn covariance_model(problem: &DualProblem<'_>, p: &SimplexWeights, z_star: &[f64]) -> Result<CovarianceModel> {
    if let Some((index, &value)) = p.as_slice().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotInterior { index, value });
    }
    let b = problem.sensitivity(z_star, p)?;
    CovarianceModel::from_parts(multinomial_covariance(p), b)
}

/// Which statistic a set of draws belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum StatisticTag {
    Delta { s: f64 },
    Gamma { field: String },
}

/// Draws from a limit law or its bootstrap approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLawSample {
    pub draws: Vec<f64>,
    pub tag: StatisticTag,
    pub seed: u64,
}

impl LimitLawSample {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.draws.len() as f64;
        self.draws.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.draws.len() as f64).sqrt()
    }
}

fn gaussian_draws(model: &CovarianceModel, n_draws: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let root = model.sqrt_sigma()?;
    let n = root.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_draws)
        .map(|_| {
            let xi = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            &root * xi
        })
        .collect())
}

/// Draws of `Σ_{i<j} |x_i - x_j|^{s-1} R^+(D_ij) |W_i - W_j|` with `W ~ N(0, Σ)`.
pub fn sample_limit_delta(
    model: &CovarianceModel,
    facets: &FacetTable,
    sites: &SiteSet,
    s: f64,
    n_draws: usize,
    seed: u64,
) -> Result<LimitLawSample> {
    check_dim(sites.len(), model.sigma.nrows())?;
    let weights: Vec<((usize, usize), f64)> = facets
        .records()
        .iter()
        .map(|r| (r.pair, sites.distance(r.pair.0, r.pair.1).powf(s - 1.0) * r.surface_mass))
        .collect();
    let draws = gaussian_draws(model, n_draws, seed)?
        .into_iter()
        .map(|w| weights.iter().map(|&((i, j), c)| c * (w[i] - w[j]).abs()).sum())
        .collect();
    Ok(LimitLawSample {
        draws,
        tag: StatisticTag::Delta { s },
        seed,
    })
}

/// Coefficients `c` with `Σ_{i<j} (W_i - W_j) / |x_i - x_j| · I_ij = <c, W>`.
fn gamma_coefficients(integrals: &FacetIntegrals, sites: &SiteSet) -> Vec<f64> {
    let mut c = vec![0.0; sites.len()];
    for &((i, j), est) in integrals.entries() {
        let g = est.value / sites.distance(i, j);
        c[i] += g;
        c[j] -= g;
    }
    c
}

/// `σ² = cᵀ Σ c` for the linear-functional limit law.
pub fn limit_variance_gamma(model: &CovarianceModel, integrals: &FacetIntegrals, sites: &SiteSet) -> Result<f64> {
    check_dim(sites.len(), model.sigma.nrows())?;
    let c = DVector::from_vec(gamma_coefficients(integrals, sites));
    Ok((c.transpose() * &model.sigma * &c)[(0, 0)].max(0.0))
}

/// Draws of the Gaussian linear-functional limit `<c, W>`.
pub fn sample_limit_gamma(
    model: &CovarianceModel,
    integrals: &FacetIntegrals,
    sites: &SiteSet,
    label: &str,
    n_draws: usize,
    seed: u64,
) -> Result<LimitLawSample> {
    check_dim(sites.len(), model.sigma.nrows())?;
    let c = DVector::from_vec(gamma_coefficients(integrals, sites));
    let draws = gaussian_draws(model, n_draws, seed)?.into_iter().map(|w| c.dot(&w)).collect();
    Ok(LimitLawSample {
        draws,
        tag: StatisticTag::Gamma { field: label.to_string() },
        seed,
    })
}

/// The plug-in potential `ẑ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginEstimate {
    pub z: PotentialVector,
    pub p_hat: SimplexWeights,
    /// `p̂_n` left the interior and `z_0` was substituted.
    pub fallback: bool,
    pub report: Option<DualSolveReport>,
}

/// `ẑ_n = z*(p̂_n)` when `p̂_n` is interior, `z_0` otherwise.
pub fn plugin_estimate(
    sample: &SampleData,
    problem: &DualProblem<'_>,
    z0: &PotentialVector,
    options: &SolveOptions,
) -> Result<PluginEstimate> {
    check_dim(problem.len(), sample.n_sites())?;
    check_dim(problem.len(), z0.len())?;
    let p_hat = empirical_frequencies(sample);
    if !p_hat.is_interior() {
        return Ok(PluginEstimate {
            z: z0.clone(),
            p_hat,
            fallback: true,
            report: None,
        });
    }
    let report = problem.solve(&p_hat, options)?;
    Ok(PluginEstimate {
        z: report.z.clone(),
        p_hat,
        fallback: false,
        report: Some(report),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    pub solve: SolveOptions,
}

/// Bootstrap draws plus the replications that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    pub sample: LimitLawSample,
    /// Resamples with some empty category (`z_0` branch), excluded.
    pub fallback_count: usize,
    /// Resamples whose dual solve failed, excluded.
    pub failure_count: usize,
}

enum Replicate {
    Draw(f64),
    Fallback,
    Failure,
}

fn bootstrap_generic<F>(
    sample: &SampleData,
    problem: &DualProblem<'_>,
    z_hat: &PotentialVector,
    config: &BootstrapConfig,
    tag: StatisticTag,
    statistic: F,
) -> Result<BootstrapOutcome>
where
    F: Fn(&LaguerreDiagram<'_>) -> Result<f64> + Sync,
{
    let p_hat = empirical_frequencies(sample);
    if let Some((index, &value)) = p_hat.as_slice().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotInterior { index, value });
    }
    check_dim(problem.len(), z_hat.len())?;
    let n = sample.n() as u64;
    let mut options = config.solve.clone();
    options.initial = Some(z_hat.as_slice().to_vec());
    let results: Vec<Replicate> = (0..config.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, streams::BOOTSTRAP, b as u64));
            let counts = multinomial_counts(p_hat.as_slice(), n, &mut rng);
            if counts.contains(&0) {
                return Replicate::Fallback;
            }
            let q = SimplexWeights::from_counts(&counts).expect("nonzero counts");
            let z_b = match problem.solve(&q, &options) {
                Ok(rep) => rep.z,
                Err(_) => return Replicate::Failure,
            };
            match problem.diagram(z_b.as_slice()).and_then(|d| statistic(&d)) {
                Ok(v) => Replicate::Draw(v),
                Err(_) => Replicate::Failure,
            }
        })
        .collect();
    let mut draws = Vec::with_capacity(results.len());
    let (mut fallback_count, mut failure_count) = (0, 0);
    for r in results {
        match r {
            Replicate::Draw(v) => draws.push(v),
            Replicate::Fallback => fallback_count += 1,
            Replicate::Failure => failure_count += 1,
        }
    }
    Ok(BootstrapOutcome {
        sample: LimitLawSample {
            draws,
            tag,
            seed: config.seed,
        },
        fallback_count,
        failure_count,
    })
}

/// `√n δ_s(ẑ^B, ẑ_n)` for one bootstrap potential.
pub fn bootstrap_delta_statistic(
    problem: &DualProblem<'_>,
    z_boot: &[f64],
    z_hat: &[f64],
    n: usize,
    s: f64,
) -> Result<f64> {
    let db = problem.diagram(z_boot)?;
    let dh = problem.diagram(z_hat)?;
    Ok((n as f64).sqrt() * delta_s_between(problem.measure(), &db, &dh, s)?)
}

/// Bootstrap draws of `√n |T̂^B - T̂_n|^s_{L^s(R)}`.
pub fn bootstrap_delta(
    sample: &SampleData,
    problem: &DualProblem<'_>,
    z_hat: &PotentialVector,
    s: f64,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    let hat = problem.diagram(z_hat.as_slice())?;
    let root_n = (sample.n() as f64).sqrt();
    bootstrap_generic(sample, problem, z_hat, config, StatisticTag::Delta { s }, |db| {
        Ok(root_n * delta_s_between(problem.measure(), db, &hat, s)?)
    })
}

/// Bootstrap draws of `√n <φ, T̂^B - T̂_n>_{L²(R)}`.
pub fn bootstrap_gamma(
    sample: &SampleData,
    problem: &DualProblem<'_>,
    z_hat: &PotentialVector,
    field: &VectorField,
    config: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    let hat = problem.diagram(z_hat.as_slice())?;
    let base = gamma_phi_on(problem.measure(), &hat, field)?;
    let root_n = (sample.n() as f64).sqrt();
    let tag = StatisticTag::Gamma {
        field: field.note().to_string(),
    };
    bootstrap_generic(sample, problem, z_hat, config, tag, |db| {
        Ok(root_n * (gamma_phi_on(problem.measure(), db, field)? - base))
    })
}

/// `τ̂(1 - α)`: the smallest draw whose rank is at least `⌈(1 - α) B⌉`.
pub fn confidence_set_radius(draws: &[f64], alpha: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len() as f64;
    // guard (1 - α) B against rounding just above an integer
    let rank = ((1.0 - alpha) * b - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

/// One grid point of the band `C̃(y) = {x_i : |T̂_n(y) - x_i| <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub point: Vec<f64>,
    /// Index of `T̂_n(y)`.
    pub estimate: usize,
    pub radius: f64,
    pub members: Vec<usize>,
}

/// Band radius `τ̂(1 - α/2) / √n · 2 / α`.
pub fn band_radius(tau_half: f64, n: usize, alpha: f64) -> f64 {
    tau_half / (n as f64).sqrt() * 2.0 / alpha
}

/// The average-coverage band on a grid. Coverage holds on average over
/// `y ~ R`, not uniformly in `y`.
pub fn confidence_band(
    z_hat: &[f64],
    tau_half: f64,
    n: usize,
    alpha: f64,
    grid: &[Vec<f64>],
    sites: &SiteSet,
) -> Result<Vec<BandPoint>> {
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 || !(tau_half >= 0.0) {
        return Err(Error::InvalidInput("band needs alpha in (0,1), n >= 1, tau >= 0".into()));
    }
    let radius = band_radius(tau_half, n, alpha);
    grid.iter()
        .map(|y| {
            let estimate = sites.locate(z_hat, y)?;
            let members = (0..sites.len())
                .filter(|&i| i == estimate || sites.distance(estimate, i) <= radius)
                .collect();
            Ok(BandPoint {
                point: y.clone(),
                estimate,
                radius,
                members,
            })
        })
        .collect()
}

/// Points of each cell of `truth` at distance at least `margin` from all of
/// its facets, on a `grid_per_cell` (per axis) grid.
pub fn interior_grid(truth: &LaguerreDiagram<'_>, margin: f64, grid_per_cell: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for i in 0..truth.len() {
        let facets: Vec<&FacetShape> = truth
            .facets()
            .iter()
            .filter(|f| f.pair.0 == i || f.pair.1 == i)
            .map(|f| &f.shape)
            .collect();
        match truth.cell(i) {
            Cell::Empty => {}
            Cell::Implicit => return Err(Error::UnsupportedExactDimension(truth.dim())),
            Cell::Interval { lo, hi } => {
                let h = (hi - lo) / grid_per_cell as f64;
                for k in 0..grid_per_cell {
                    let y = lo + (k as f64 + 0.5) * h;
                    let clear = facets.iter().all(|f| match f {
                        FacetShape::Point(p) => (y - p).abs() >= margin,
                        _ => true,
                    });
                    if clear {
                        out.push((i, vec![y]));
                    }
                }
            }
            Cell::Polygon(poly) => {
                let (lo, hi) = poly.bounding_box();
                let (hx, hy) = ((hi[0] - lo[0]) / grid_per_cell as f64, (hi[1] - lo[1]) / grid_per_cell as f64);
                for a in 0..grid_per_cell {
                    for b in 0..grid_per_cell {
                        let y = [lo[0] + (a as f64 + 0.5) * hx, lo[1] + (b as f64 + 0.5) * hy];
                        if !poly.contains(y, 0.0) {
                            continue;
                        }
                        let clear = facets.iter().all(|f| match f {
                            FacetShape::Segment(p, q) => ConvexPolygon::segment_distance(y, *p, *q) >= margin,
                            _ => true,
                        });
                        if clear {
                            out.push((i, y.to_vec()));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fraction of interior grid points where `T̂_n = T*`; `None` when the
/// margin leaves no grid points.
pub fn super_consistency_probe(
    z_hat: &[f64],
    truth: &LaguerreDiagram<'_>,
    margin: f64,
    grid_per_cell: usize,
) -> Result<Option<f64>> {
    if !(margin > 0.0) || grid_per_cell == 0 {
        return Err(Error::InvalidInput("probe needs margin > 0 and a nonempty grid".into()));
    }
    let grid = interior_grid(truth, margin, grid_per_cell)?;
    probe_on_grid(z_hat, truth.sites(), &grid)
}

/// [`super_consistency_probe`] on a precomputed interior grid.
pub fn probe_on_grid(z_hat: &[f64], sites: &SiteSet, grid: &[(usize, Vec<f64>)]) -> Result<Option<f64>> {
    if grid.is_empty() {
        return Ok(None);
    }
    let mut hits = 0usize;
    for (i, y) in grid {
        if sites.locate(z_hat, y)? == *i {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / grid.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_diagram, SupportRegion};
    use crate::measure::ReferenceMeasure;

    fn canonical() -> (ReferenceMeasure, SiteSet) {
        (
            ReferenceMeasure::uniform(SupportRegion::interval(0.0, 1.0).unwrap()).unwrap(),
            SiteSet::new(vec![vec![0.0], vec![1.0]]).unwrap(),
        )
    }

    #[test]
    fn frequencies() {
        let s = SampleData::from_counts(&[3, 7]).unwrap();
        assert_eq!(empirical_frequencies(&s).as_slice(), &[0.3, 0.7]);
        let one = SampleData::new(vec![1], 2).unwrap();
        let p = empirical_frequencies(&one);
        assert_eq!(p.as_slice(), &[0.0, 1.0]);
        assert!(!p.is_interior());
        assert!(SampleData::new(vec![2], 2).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(7, streams::BOOTSTRAP, 0);
        assert_eq!(a, derive_seed(7, streams::BOOTSTRAP, 0));
        assert_ne!(a, derive_seed(7, streams::BOOTSTRAP, 1));
        assert_ne!(a, derive_seed(7, streams::OUTER, 0));
        assert_ne!(a, derive_seed(8, streams::BOOTSTRAP, 0));
    }

    #[test]
    fn multinomial_counts_sum_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = multinomial_counts(&[0.2, 0.5, 0.3], 1000, &mut rng);
            assert_eq!(c.iter().sum::<u64>(), 1000);
        }
        assert_eq!(multinomial_counts(&[0.0, 1.0], 10, &mut rng), vec![0, 10]);
    }

    #[test]
    fn canonical_covariance() {
        let (r, s) = canonical();
        let problem = DualProblem::new(&r, &s).unwrap();
        let p = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        let m = covariance_model(&problem, &p, &[-0.1, 0.1]).unwrap();
        assert!((m.a[(0, 0)] - 0.21).abs() < 1e-15);
        let expected = [[0.0525, -0.0525], [-0.0525, 0.0525]];
        for (i, row) in expected.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                assert!((m.sigma[(i, j)] - e).abs() < 1e-12);
            }
            assert!(m.sigma.row(i).sum().abs() < 1e-10);
        }
        let half = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(multinomial_covariance(&half)[(0, 0)], 0.25);
    }

    #[test]
    fn degenerate_limit_draws_vanish() {
        let (_, s) = canonical();
        let zero = CovarianceModel::from_parts(DMatrix::zeros(1, 1), DMatrix::zeros(1, 2)).unwrap();
        let facets = FacetTable::new(vec![crate::measure::FacetMeasureRecord {
            pair: (0, 1),
            surface_mass: 1.0,
            extent: Some(1.0),
            estimator: crate::measure::FacetEstimator::ExactLineIntegral,
            std_error: None,
        }]);
        let d = sample_limit_delta(&zero, &facets, &s, 1.0, 100, 3).unwrap();
        assert!(d.draws.iter().all(|&v| v == 0.0));
        let a = DMatrix::from_element(1, 1, 0.21);
        let b = DMatrix::from_row_slice(1, 2, &[0.5, -0.5]);
        let model = CovarianceModel::from_parts(a, b).unwrap();
        let empty = sample_limit_delta(&model, &FacetTable::default(), &s, 1.0, 100, 3).unwrap();
        assert!(empty.draws.iter().all(|&v| v == 0.0));
        let bad = CovarianceModel {
            a: DMatrix::zeros(1, 1),
            b: DMatrix::zeros(1, 2),
            sigma: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]),
        };
        assert!(matches!(sample_limit_delta(&bad, &facets, &s, 1.0, 10, 1), Err(Error::NotPsd(_))));
    }

    #[test]
    fn canonical_gamma_variance() {
        let (r, s) = canonical();
        let problem = DualProblem::new(&r, &s).unwrap();
        let p = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        let model = covariance_model(&problem, &p, &[-0.1, 0.1]).unwrap();
        let d = build_diagram(&s, &[-0.1, 0.1], r.support()).unwrap();
        let one = VectorField::constant(vec![1.0]).unwrap();
        let ints = r.facet_integrals(&d, &one).unwrap();
        assert!((limit_variance_gamma(&model, &ints, &s).unwrap() - 0.21).abs() < 1e-12);
        let zero = VectorField::zero(1).unwrap();
        let ints = r.facet_integrals(&d, &zero).unwrap();
        assert_eq!(limit_variance_gamma(&model, &ints, &s).unwrap(), 0.0);
    }

    #[test]
    fn quantile_convention() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(confidence_set_radius(&draws, 0.10).unwrap(), 90.0);
        assert_eq!(confidence_set_radius(&draws, 0.05).unwrap(), 95.0);
        assert_eq!(confidence_set_radius(&[0.0; 10], 0.1).unwrap(), 0.0);
        assert_eq!(confidence_set_radius(&[], 0.1).unwrap_err(), Error::EmptyDraws);
        assert_eq!(confidence_set_radius(&[2.0], 0.5).unwrap(), 2.0);
    }

    #[test]
    fn band_extremes() {
        let (_, s) = canonical();
        let grid: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64 / 10.0 + 0.05]).collect();
        let wide = confidence_band(&[-0.1, 0.1], 100.0, 4, 0.1, &grid, &s).unwrap();
        assert!(wide.iter().all(|b| b.members == vec![0, 1]));
        let tight = confidence_band(&[-0.1, 0.1], 0.0, 4, 0.1, &grid, &s).unwrap();
        for b in &tight {
            assert_eq!(b.members, vec![b.estimate]);
        }
    }

    #[test]
    fn probe_trivial_cases() {
        let (r, s) = canonical();
        let truth = build_diagram(&s, &[-0.1, 0.1], r.support()).unwrap();
        assert_eq!(super_consistency_probe(&[-0.1, 0.1], &truth, 0.05, 50).unwrap(), Some(1.0));
        assert_eq!(super_consistency_probe(&[-0.1, 0.1], &truth, 2.0, 50).unwrap(), None);
        // moving the boundary to 0.4 misassigns grid points in (0.3, 0.4)
        let f = super_consistency_probe(&[-0.05, 0.05], &truth, 0.05, 100).unwrap().unwrap();
        assert!(f < 1.0);
    }

    #[test]
    fn bootstrap_degenerate_statistic() {
        let (r, s) = canonical();
        let problem = DualProblem::new(&r, &s).unwrap();
        let z = [-0.1, 0.1];
        assert_eq!(bootstrap_delta_statistic(&problem, &z, &z, 100, 1.0).unwrap(), 0.0);
        let sample = SampleData::from_counts(&[30, 70]).unwrap();
        let zhat = PotentialVector::normalized(z.to_vec());
        let cfg = BootstrapConfig {
            replications: 1,
            seed: 9,
            solve: SolveOptions::default(),
        };
        let out = bootstrap_delta(&sample, &problem, &zhat, 1.0, &cfg).unwrap();
        assert_eq!(out.sample.n_draws() + out.fallback_count + out.failure_count, 1);
        assert!(out.sample.draws.iter().all(|&v| v >= 0.0));
        let zero = VectorField::zero(1).unwrap();
        let cfg = BootstrapConfig { replications: 20, ..cfg };
        let g = bootstrap_gamma(&sample, &problem, &zhat, &zero, &cfg).unwrap();
        assert!(g.sample.draws.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn plugin_fallback() {
        let (r, s) = canonical();
        let problem = DualProblem::new(&r, &s).unwrap();
        let z0 = PotentialVector::zeros(2);
        let sample = SampleData::from_counts(&[0, 5]).unwrap();
        let est = plugin_estimate(&sample, &problem, &z0, &SolveOptions::default()).unwrap();
        assert!(est.fallback);
        assert_eq!(est.z, z0);
        let sample = SampleData::from_counts(&[300, 700]).unwrap();
        let est = plugin_estimate(&sample, &problem, &z0, &SolveOptions::default()).unwrap();
        assert!(!est.fallback);
        assert!((est.z.as_slice()[0] + 0.1).abs() < 1e-10);
    }
}
