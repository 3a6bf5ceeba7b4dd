mod common;

use common::{canonical, ks_distance, solve, three_site, CANONICAL_Z};
use proptest::prelude::*;
use sdot::dual::{DualProblem, PotentialVector, SimplexWeights, SolveOptions};
use sdot::inference::{
    bootstrap_delta, bootstrap_gamma, confidence_set_radius, covariance_model, plugin_estimate, sample_limit_delta,
    sample_limit_gamma, BootstrapConfig, SampleData,
};
use sdot::{ReferenceMeasure, SiteSet, SupportRegion, VectorField};

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

fn bootstrap_matches_limit(r: ReferenceMeasure, sites: SiteSet, p: SimplexWeights, seed: u64) -> f64 {
    let z_star = solve(&r, &sites, &p);
    let problem = DualProblem::new(&r, &sites).unwrap();
    let model = covariance_model(&problem, &p, &z_star).unwrap();
    let facets = r.facet_table(&problem.diagram(&z_star).unwrap()).unwrap();
    let limit = sample_limit_delta(&model, &facets, &sites, 1.0, 2000, seed).unwrap();
    let sample = SampleData::draw_seeded(&p, 5000, seed + 1).unwrap();
    let est = plugin_estimate(&sample, &problem, &PotentialVector::zeros(sites.len()), &SolveOptions::default()).unwrap();
    let config = BootstrapConfig {
        replications: 2000,
        seed: seed + 2,
        solve: SolveOptions::default(),
    };
    let boot = bootstrap_delta(&sample, &problem, &est.z, 1.0, &config).unwrap();
    assert_eq!(boot.failure_count, 0);
    ks_distance(&boot.sample.draws, &limit.draws)
}

#[test]
fn bootstrap_agrees_with_limit_law_in_one_dimension() {
    let (r, s, p) = canonical();
    let ks = bootstrap_matches_limit(r, s, p, 100);
    assert!(ks <= 0.05, "KS {ks}");
}

#[test]
fn bootstrap_agrees_with_limit_law_on_three_sites() {
    let (r, s, p) = three_site();
    let ks = bootstrap_matches_limit(r, s, p, 200);
    assert!(ks <= 0.05, "KS {ks}");
}

#[test]
fn limit_samplers_are_deterministic_and_well_shaped() {
    let (r, sites, p) = three_site();
    let z = solve(&r, &sites, &p);
    let problem = DualProblem::new(&r, &sites).unwrap();
    let model = covariance_model(&problem, &p, &z).unwrap();
    let d = problem.diagram(&z).unwrap();
    let facets = r.facet_table(&d).unwrap();
    let a = sample_limit_delta(&model, &facets, &sites, 2.0, 1000, 5).unwrap();
    let b = sample_limit_delta(&model, &facets, &sites, 2.0, 1000, 5).unwrap();
    let c = sample_limit_delta(&model, &facets, &sites, 2.0, 1000, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.draws, c.draws);
    assert!(a.draws.iter().all(|&v| v >= 0.0));
    let phi = VectorField::identity(2, 2.0).unwrap();
    let integrals = r.facet_integrals(&d, &phi).unwrap();
    let g = sample_limit_gamma(&model, &integrals, &sites, "identity", 100_000, 7).unwrap();
    assert!(g.variance() > 1e-6);
    assert!(skewness(&g.draws).abs() <= 0.1);
    assert!(g.mean().abs() <= 3.0 * g.std_error());
}

#[test]
fn bootstrap_gamma_is_centred() {
    let (r, s, p) = canonical();
    let problem = DualProblem::new(&r, &s).unwrap();
    let sample = SampleData::draw_seeded(&p, 5000, 41).unwrap();
    let est = plugin_estimate(&sample, &problem, &PotentialVector::zeros(2), &SolveOptions::default()).unwrap();
    let one = VectorField::constant(vec![1.0]).unwrap();
    let config = BootstrapConfig {
        replications: 2000,
        seed: 42,
        solve: SolveOptions::default(),
    };
    let g = bootstrap_gamma(&sample, &problem, &est.z, &one, &config).unwrap();
    assert!(g.sample.mean().abs() <= 3.0 * g.sample.std_error());
}

#[test]
fn plugin_error_shrinks_at_root_n_rate() {
    let (r, s, p) = canonical();
    let problem = DualProblem::new(&r, &s).unwrap();
    let z0 = PotentialVector::zeros(2);
    let sizes = [100usize, 1000, 10_000, 100_000];
    let reps = 400;
    let logs: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let mean_err = (0..reps)
                .map(|k| {
                    let sample = SampleData::draw_seeded(&p, n, 1000 * n as u64 + k).unwrap();
                    let est = plugin_estimate(&sample, &problem, &z0, &SolveOptions::default()).unwrap();
                    est.z
                        .as_slice()
                        .iter()
                        .zip(CANONICAL_Z)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / reps as f64;
            ((n as f64).ln(), mean_err.ln())
        })
        .collect();
    let mx = logs.iter().map(|v| v.0).sum::<f64>() / logs.len() as f64;
    let my = logs.iter().map(|v| v.1).sum::<f64>() / logs.len() as f64;
    let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / logs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

fn random_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-0.5f64..1.5, 2), n),
                prop::collection::vec(0.2f64..1.0, n),
            )
        })
        .prop_filter("well separated sites", |(pts, _)| {
            (0..pts.len()).all(|i| {
                (i + 1..pts.len()).all(|j| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) > 0.05)
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_psd_and_annihilates_constants((pts, raw) in random_problem()) {
        let total: f64 = raw.iter().sum();
        let p = SimplexWeights::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let r = ReferenceMeasure::uniform(SupportRegion::unit_cube(2).unwrap()).unwrap();
        let sites = SiteSet::new(pts).unwrap();
        let z = solve(&r, &sites, &p);
        let problem = DualProblem::new(&r, &sites).unwrap();
        let m = covariance_model(&problem, &p, &z).unwrap();
        let scale = m.sigma.norm().max(1e-300);
        prop_assert!((&m.sigma - m.sigma.transpose()).norm() <= 1e-12 * scale);
        for i in 0..sites.len() {
            prop_assert!(m.sigma.row(i).sum().abs() <= 1e-10);
        }
        let eig = m.sigma.clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * scale));
        let a_eig = m.a.clone().symmetric_eigen();
        prop_assert!(a_eig.eigenvalues.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn radius_is_monotone_in_confidence(draws in prop::collection::vec(0.0f64..10.0, 1..300)) {
        let alphas = [0.5, 0.3, 0.2, 0.1, 0.05, 0.01, 0.001];
        let taus: Vec<f64> = alphas.iter().map(|&a| confidence_set_radius(&draws, a).unwrap()).collect();
        for w in taus.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(taus.iter().all(|&t| t >= 0.0));
    }
}
