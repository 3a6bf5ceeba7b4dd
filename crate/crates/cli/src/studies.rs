//! Outer Monte Carlo studies: limit-law replications, coverage of the
//! confidence set and band, and the super-consistency frequency.
//!
//! Every replication draws its own sample from a seed derived from the
//! master seed, so results are identical for any thread count.

use rayon::prelude::*;
use sdot::dual::{DualProblem, PotentialVector, SimplexWeights, SolveOptions};
use sdot::functionals::{delta_s_between, gamma_phi_on};
use sdot::inference::{
    band_radius, bootstrap_delta, confidence_set_radius, derive_seed, interior_grid, plugin_estimate,
    probe_on_grid, streams, BootstrapConfig, SampleData,
};
use sdot::{Result, ReferenceMeasure, VectorField};

/// Midpoint grid over the support's bounding box, weighted by `ρ · cell volume`.
/// Points outside the support (zero density) are dropped.
pub fn weighted_grid(measure: &ReferenceMeasure, per_axis: usize) -> Vec<(Vec<f64>, f64)> {
    let (lo, hi) = measure.support().bounding_box();
    let d = lo.len();
    let h: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / per_axis as f64).collect();
    let vol: f64 = h.iter().product();
    let total = per_axis.pow(d as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let y: Vec<f64> = (0..d)
            .map(|k| {
                let idx = rest % per_axis;
                rest /= per_axis;
                lo[k] + (idx as f64 + 0.5) * h[k]
            })
            .collect();
        let w = measure.density(&y) * vol;
        if w > 0.0 {
            out.push((y, w));
        }
    }
    out
}

/// Draws of `√n δ_s(ẑ_n, z*)` per `s` and `√n (γ_φ(ẑ_n) - γ_φ(z*))` per field.
#[derive(Debug, Clone, PartialEq)]
pub struct Replications {
    pub delta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// Samples with an empty category, where `ẑ_n = z_0` was used.
    pub fallback_count: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn limit_replications(
    problem: &DualProblem<'_>,
    p: &SimplexWeights,
    z_star: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
    s_values: &[f64],
    fields: &[VectorField],
) -> Result<Replications> {
    let measure = problem.measure();
    let truth = problem.diagram(z_star)?;
    let gamma_star = fields
        .iter()
        .map(|f| gamma_phi_on(measure, &truth, f))
        .collect::<Result<Vec<_>>>()?;
    let z0 = PotentialVector::zeros(problem.len());
    let root_n = (n as f64).sqrt();
    let rows = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sample = SampleData::draw_seeded(p, n, derive_seed(seed, streams::OUTER, r as u64))?;
            let est = plugin_estimate(&sample, problem, &z0, &SolveOptions::default())?;
            let hat = problem.diagram(est.z.as_slice())?;
            let deltas = s_values
                .iter()
                .map(|&s| Ok(root_n * delta_s_between(measure, &hat, &truth, s)?))
                .collect::<Result<Vec<_>>>()?;
            let gammas = fields
                .iter()
                .zip(&gamma_star)
                .map(|(f, g)| Ok(root_n * (gamma_phi_on(measure, &hat, f)? - g)))
                .collect::<Result<Vec<_>>>()?;
            Ok((deltas, gammas, est.fallback))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Replications {
        delta: vec![Vec::with_capacity(reps); s_values.len()],
        gamma: vec![Vec::with_capacity(reps); fields.len()],
        fallback_count: 0,
    };
    for (deltas, gammas, fallback) in rows {
        for (k, v) in deltas.into_iter().enumerate() {
            out.delta[k].push(v);
        }
        for (k, v) in gammas.into_iter().enumerate() {
            out.gamma[k].push(v);
        }
        out.fallback_count += usize::from(fallback);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSettings {
    pub n: usize,
    pub outer_reps: usize,
    pub bootstrap_reps: usize,
    pub alpha: f64,
    /// Per-axis resolution of the grid used to average band coverage over `R`.
    pub band_grid: usize,
    pub seed: u64,
}

/// Result of one outer replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRecord {
    pub statistic: f64,
    pub tau: f64,
    pub tau_half: f64,
    pub set_covered: bool,
    /// `R`-weighted share of grid points with `T*(y) ∈ C̃(y)`.
    pub band_coverage: f64,
    pub bootstrap_fallbacks: usize,
    pub bootstrap_failures: usize,
    /// `p̂_n` was not interior; the replication counts as a miss.
    pub plugin_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub records: Vec<CoverageRecord>,
    pub set_coverage: f64,
    pub band_average_coverage: f64,
}

/// Coverage of the `L¹` confidence set and the average-coverage band.
pub fn coverage_study(
    problem: &DualProblem<'_>,
    p: &SimplexWeights,
    z_star: &[f64],
    settings: &CoverageSettings,
) -> Result<CoverageSummary> {
    let measure = problem.measure();
    let sites = problem.sites();
    let truth = problem.diagram(z_star)?;
    let grid = weighted_grid(measure, settings.band_grid);
    let total_weight: f64 = grid.iter().map(|(_, w)| w).sum();
    let truth_idx = grid
        .iter()
        .map(|(y, _)| sites.locate(z_star, y))
        .collect::<Result<Vec<_>>>()?;
    let z0 = PotentialVector::zeros(problem.len());
    let n = settings.n;
    let root_n = (n as f64).sqrt();
    let records = (0..settings.outer_reps)
        .into_par_iter()
        .map(|r| {
            let sample = SampleData::draw_seeded(p, n, derive_seed(settings.seed, streams::OUTER, r as u64))?;
            let est = plugin_estimate(&sample, problem, &z0, &SolveOptions::default())?;
            if est.fallback {
                return Ok(CoverageRecord {
                    statistic: f64::NAN,
                    tau: f64::NAN,
                    tau_half: f64::NAN,
                    set_covered: false,
                    band_coverage: 0.0,
                    bootstrap_fallbacks: 0,
                    bootstrap_failures: 0,
                    plugin_fallback: true,
                });
            }
            let hat = problem.diagram(est.z.as_slice())?;
            let statistic = root_n * delta_s_between(measure, &hat, &truth, 1.0)?;
            let config = BootstrapConfig {
                replications: settings.bootstrap_reps,
                seed: derive_seed(settings.seed, streams::BOOTSTRAP, r as u64),
                solve: SolveOptions::default(),
            };
            let boot = bootstrap_delta(&sample, problem, &est.z, 1.0, &config)?;
            let tau = confidence_set_radius(&boot.sample.draws, settings.alpha)?;
            let tau_half = confidence_set_radius(&boot.sample.draws, settings.alpha / 2.0)?;
            let radius = band_radius(tau_half, n, settings.alpha);
            let mut covered_weight = 0.0;
            for ((y, w), &i_star) in grid.iter().zip(&truth_idx) {
                let i_hat = sites.locate(est.z.as_slice(), y)?;
                if i_hat == i_star || sites.distance(i_hat, i_star) <= radius {
                    covered_weight += w;
                }
            }
            Ok(CoverageRecord {
                statistic,
                tau,
                tau_half,
                set_covered: statistic <= tau,
                band_coverage: covered_weight / total_weight,
                bootstrap_fallbacks: boot.fallback_count,
                bootstrap_failures: boot.failure_count,
                plugin_fallback: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = records.len().max(1) as f64;
    let set_coverage = records.iter().filter(|r| r.set_covered).count() as f64 / reps;
    let band_average_coverage = records.iter().map(|r| r.band_coverage).sum::<f64>() / reps;
    Ok(CoverageSummary {
        records,
        set_coverage,
        band_average_coverage,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperConsistencySummary {
    /// Match fraction per replication; `None` when the margin empties every cell.
    pub fractions: Vec<Option<f64>>,
    /// Share of replications with an exact match on the whole grid.
    pub all_match_rate: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn super_consistency_study(
    problem: &DualProblem<'_>,
    p: &SimplexWeights,
    z_star: &[f64],
    n: usize,
    reps: usize,
    margin: f64,
    grid_per_cell: usize,
    seed: u64,
) -> Result<SuperConsistencySummary> {
    let truth = problem.diagram(z_star)?;
    let grid = interior_grid(&truth, margin, grid_per_cell)?;
    let z0 = PotentialVector::zeros(problem.len());
    let fractions = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sample = SampleData::draw_seeded(p, n, derive_seed(seed, streams::OUTER, r as u64))?;
            let est = plugin_estimate(&sample, problem, &z0, &SolveOptions::default())?;
            probe_on_grid(est.z.as_slice(), problem.sites(), &grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let all_match_rate = fractions.iter().filter(|f| **f == Some(1.0)).count() as f64 / reps.max(1) as f64;
    Ok(SuperConsistencySummary {
        fractions,
        all_match_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdot::{SiteSet, SupportRegion};

    #[test]
    fn grid_weights_sum_to_one() {
        let r = ReferenceMeasure::uniform(SupportRegion::unit_cube(2).unwrap()).unwrap();
        let g = weighted_grid(&r, 20);
        assert_eq!(g.len(), 400);
        assert!((g.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_coverage_run_is_deterministic() {
        let r = ReferenceMeasure::uniform(SupportRegion::interval(0.0, 1.0).unwrap()).unwrap();
        let s = SiteSet::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let problem = DualProblem::new(&r, &s).unwrap();
        let p = SimplexWeights::new(vec![0.3, 0.7]).unwrap();
        let settings = CoverageSettings {
            n: 500,
            outer_reps: 4,
            bootstrap_reps: 50,
            alpha: 0.1,
            band_grid: 100,
            seed: 3,
        };
        let a = coverage_study(&problem, &p, &[-0.1, 0.1], &settings).unwrap();
        let b = coverage_study(&problem, &p, &[-0.1, 0.1], &settings).unwrap();
        assert_eq!(a, b);
        assert!(a.records.iter().all(|r| r.tau <= r.tau_half));
    }
}
