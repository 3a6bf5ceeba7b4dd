#![allow(dead_code)]

use std::sync::Arc;

use sdot::dual::{DualProblem, SimplexWeights, SolveOptions};
use sdot::{ReferenceMeasure, SiteSet, SupportRegion};

pub const CANONICAL_Z: [f64; 2] = [-0.1, 0.1];

pub fn canonical() -> (ReferenceMeasure, SiteSet, SimplexWeights) {
    (
        ReferenceMeasure::uniform(SupportRegion::interval(0.0, 1.0).unwrap()).unwrap(),
        SiteSet::new(vec![vec![0.0], vec![1.0]]).unwrap(),
        SimplexWeights::new(vec![0.3, 0.7]).unwrap(),
    )
}

pub fn three_site() -> (ReferenceMeasure, SiteSet, SimplexWeights) {
    (
        ReferenceMeasure::uniform(SupportRegion::unit_cube(2).unwrap()).unwrap(),
        SiteSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        SimplexWeights::new(vec![1.0 / 3.0; 3]).unwrap(),
    )
}

pub fn tilted_three_site() -> (ReferenceMeasure, SiteSet, SimplexWeights) {
    let rho = Arc::new(|y: &[f64]| 1.0 + 0.5 * (y[0] - 0.5) + 0.3 * (y[1] - 0.5));
    (
        ReferenceMeasure::with_density(SupportRegion::unit_cube(2).unwrap(), rho, Some(1.4)).unwrap(),
        SiteSet::new(vec![vec![0.2, 0.3], vec![0.8, 0.4], vec![0.4, 0.9]]).unwrap(),
        SimplexWeights::new(vec![0.25, 0.4, 0.35]).unwrap(),
    )
}

pub fn five_site_pentagon() -> (ReferenceMeasure, SiteSet, SimplexWeights) {
    let verts: Vec<[f64; 2]> = (0..5)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 5.0;
            [a.cos(), a.sin()]
        })
        .collect();
    (
        ReferenceMeasure::uniform(SupportRegion::polygon(verts).unwrap()).unwrap(),
        SiteSet::new(vec![
            vec![0.0, 0.0],
            vec![0.6, 0.1],
            vec![-0.3, 0.5],
            vec![-0.4, -0.5],
            vec![0.3, -0.6],
        ])
        .unwrap(),
        SimplexWeights::new(vec![0.15, 0.25, 0.2, 0.22, 0.18]).unwrap(),
    )
}

pub fn problems_2d() -> Vec<(ReferenceMeasure, SiteSet, SimplexWeights)> {
    vec![three_site(), tilted_three_site(), five_site_pentagon()]
}

pub fn solve(measure: &ReferenceMeasure, sites: &SiteSet, p: &SimplexWeights) -> Vec<f64> {
    DualProblem::new(measure, sites)
        .unwrap()
        .solve(p, &SolveOptions::default())
        .unwrap()
        .z
        .into_inner()
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
