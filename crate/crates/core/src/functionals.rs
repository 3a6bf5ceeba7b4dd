//! The transport map `T_z`, the error functional `δ_s(z1, z2) = |T_{z1} - T_{z2}|^s_{L^s(R)}`,
//! the linear functional `γ_φ(z) = <φ, T_z>_{L²(R)}`, and their derivatives at an
//! optimal potential.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::field::VectorField;
use crate::geometry::{build_diagram, LaguerreDiagram, SiteSet};
use crate::measure::{Backend, Estimate, FacetIntegrals, FacetTable, ReferenceMeasure};

/// `T_z(y)`: the site whose cell contains `y` (smallest index on ties).
pub fn transport_map<'s>(sites: &'s SiteSet, z: &[f64], y: &[f64]) -> Result<&'s [f64]> {
    Ok(sites.point(sites.locate(z, y)?))
}

fn check_exponent(s: f64) -> Result<()> {
    if s >= 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("exponent s must be >= 1, got {s}")))
    }
}

/// `δ_s(z1, z2) = Σ_{i≠j} |x_i - x_j|^s R(C_i(z1) ∩ C_j(z2))`, with the
/// pairwise intersections clipped exactly (d <= 2).
pub fn delta_s(measure: &ReferenceMeasure, sites: &SiteSet, z1: &[f64], z2: &[f64], s: f64) -> Result<f64> {
    check_exponent(s)?;
    let d1 = build_diagram(sites, z1, measure.support())?;
    let d2 = build_diagram(sites, z2, measure.support())?;
    delta_s_between(measure, &d1, &d2, s)
}

/// [`delta_s`] for two prebuilt diagrams. Implicit diagrams fall back to
/// [`delta_s_mc`] with the measure's Monte Carlo settings, so repeated calls
/// share the same reference draws.
pub fn delta_s_between(
    measure: &ReferenceMeasure,
    d1: &LaguerreDiagram<'_>,
    d2: &LaguerreDiagram<'_>,
    s: f64,
) -> Result<f64> {
    check_exponent(s)?;
    check_dim(d1.len(), d2.len())?;
    if d1.z() == d2.z() {
        return Ok(0.0);
    }
    if !d1.is_exact() || !d2.is_exact() {
        let mc = measure.mc_config();
        return Ok(delta_s_mc(measure, d1.sites(), d1.z(), d2.z(), s, mc.samples, mc.seed)?.value);
    }
    let sites = d1.sites();
    let mut total = 0.0;
    for i in 0..d1.len() {
        if d1.cell(i).is_empty() {
            continue;
        }
        for j in 0..d2.len() {
            if i == j || d2.cell(j).is_empty() {
                continue;
            }
            let overlap = d1.intersect_cells(i, d2, j);
            if overlap.is_empty() {
                continue;
            }
            let mass = measure.region_mass(&overlap)?.value;
            total += sites.distance(i, j).powf(s) * mass;
        }
    }
    Ok(total)
}

/// Monte Carlo estimate of `δ_s(z1, z2)` for any dimension.
pub fn delta_s_mc(
    measure: &ReferenceMeasure,
    sites: &SiteSet,
    z1: &[f64],
    z2: &[f64],
    s: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_exponent(s)?;
    check_dim(sites.len(), z1.len())?;
    check_dim(sites.len(), z2.len())?;
    check_dim(sites.dim(), measure.dim())?;
    mc_mean(measure, n_samples, seed, |y| {
        let (i, j) = (sites.locate_unchecked(z1, y), sites.locate_unchecked(z2, y));
        if i == j {
            0.0
        } else {
            sites.distance(i, j).powf(s)
        }
    })
}

fn mc_mean(measure: &ReferenceMeasure, n: usize, seed: u64, mut f: impl FnMut(&[f64]) -> f64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidInput("Monte Carlo needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; measure.dim()];
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        measure.sample(&mut rng, &mut y)?;
        let v = f(&y);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    Ok(Estimate {
        value: mean,
        std_error: Some((var / n as f64).sqrt()),
        backend: Backend::MonteCarlo,
    })
}

/// `γ_φ(z) = Σ_i <∫_{C_i(z)} φ dR, x_i>` on an exact diagram.
pub fn gamma_phi(measure: &ReferenceMeasure, sites: &SiteSet, z: &[f64], field: &VectorField) -> Result<f64> {
    let diagram = build_diagram(sites, z, measure.support())?;
    gamma_phi_on(measure, &diagram, field)
}

/// [`gamma_phi`] for a prebuilt diagram.
pub fn gamma_phi_on(measure: &ReferenceMeasure, diagram: &LaguerreDiagram<'_>, field: &VectorField) -> Result<f64> {
    check_dim(diagram.dim(), field.dim())?;
    let sites = diagram.sites();
    let mut total = 0.0;
    for i in 0..diagram.len() {
        if diagram.cell(i).is_empty() {
            continue;
        }
        let x = sites.point(i);
        total += measure.integrate_cell(diagram, i, &mut |y| field.dot(x, y))?;
    }
    Ok(total)
}

/// Monte Carlo estimate of `γ_φ(z)`.
pub fn gamma_phi_mc(
    measure: &ReferenceMeasure,
    sites: &SiteSet,
    z: &[f64],
    field: &VectorField,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_dim(sites.len(), z.len())?;
    check_dim(sites.dim(), field.dim())?;
    mc_mean(measure, n_samples, seed, |y| field.dot(sites.point(sites.locate_unchecked(z, y)), y))
}

/// One pair's contribution to a derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTerm {
    pub pair: (usize, usize),
    /// `|x_i - x_j|^{s-1} R^+(D_ij)` for δ_s, or
    /// `|x_i - x_j|^{-1} ∫_{D_ij} <x_i - x_j, φ> ρ dH^{d-1}` for γ_φ.
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBreakdown {
    pub terms: Vec<DerivativeTerm>,
    pub total: f64,
}

/// Hadamard directional derivative of `δ_s` at `(z*, z*)`:
/// `Σ_{i<j} |x_i - x_j|^{s-1} R^+(D_ij) |h2_j - h2_i - h1_j + h1_i|`.
pub fn hadamard_delta_deriv(
    sites: &SiteSet,
    facets: &FacetTable,
    h1: &[f64],
    h2: &[f64],
    s: f64,
) -> Result<DerivativeBreakdown> {
    check_exponent(s)?;
    check_dim(sites.len(), h1.len())?;
    check_dim(sites.len(), h2.len())?;
    let terms: Vec<DerivativeTerm> = facets
        .records()
        .iter()
        .map(|r| {
            let (i, j) = r.pair;
            let weight = sites.distance(i, j).powf(s - 1.0) * r.surface_mass;
            let contribution = weight * (h2[j] - h2[i] - h1[j] + h1[i]).abs();
            DerivativeTerm {
                pair: r.pair,
                weight,
                contribution,
            }
        })
        .collect();
    let total = terms.iter().map(|t| t.contribution).sum();
    Ok(DerivativeBreakdown { terms, total })
}

/// Derivative of `γ_φ` at `z*` from precomputed facet integrals:
/// `Σ_{i<j} (h_i - h_j) / |x_i - x_j| · ∫_{D_ij} <x_i - x_j, φ> ρ dH^{d-1}`.
pub fn gamma_deriv_from(sites: &SiteSet, integrals: &FacetIntegrals, h: &[f64]) -> Result<DerivativeBreakdown> {
    check_dim(sites.len(), h.len())?;
    let terms: Vec<DerivativeTerm> = integrals
        .entries()
        .iter()
        .map(|&((i, j), est)| {
            let weight = est.value / sites.distance(i, j);
            DerivativeTerm {
                pair: (i, j),
                weight,
                contribution: (h[i] - h[j]) * weight,
            }
        })
        .collect();
    let total = terms.iter().map(|t| t.contribution).sum();
    Ok(DerivativeBreakdown { terms, total })
}

/// Derivative of `γ_φ` at `z*` in direction `h`, integrating `φ` over the
/// facets of `diagram` (built at `z*`).
pub fn gamma_deriv(
    measure: &ReferenceMeasure,
    diagram: &LaguerreDiagram<'_>,
    h: &[f64],
    field: &VectorField,
) -> Result<DerivativeBreakdown> {
    let integrals = measure.facet_integrals(diagram, field)?;
    gamma_deriv_from(diagram.sites(), &integrals, h)
}

/// A functional and direction for the finite-difference oracle.
#[derive(Debug, Clone)]
pub enum Functional<'f> {
    /// `t ↦ δ_s(z* + t h1, z* + t h2)`.
    Delta { s: f64, h1: Vec<f64>, h2: Vec<f64> },
    /// `t ↦ γ_φ(z* + t h)`.
    Gamma { field: &'f VectorField, h: Vec<f64> },
}

/// One-sided difference quotients `(F(z* + t·dir) - F(z*)) / t` for each `t`.
pub fn fd_directional_quotient(
    measure: &ReferenceMeasure,
    sites: &SiteSet,
    functional: &Functional<'_>,
    z_star: &[f64],
    ts: &[f64],
) -> Result<Vec<f64>> {
    if ts.iter().any(|t| !(*t > 0.0)) || ts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("step sizes must be positive and decreasing".into()));
    }
    let shift = |h: &[f64], t: f64| -> Vec<f64> { z_star.iter().zip(h).map(|(a, b)| a + t * b).collect() };
    match functional {
        Functional::Delta { s, h1, h2 } => {
            check_dim(sites.len(), h1.len())?;
            check_dim(sites.len(), h2.len())?;
            let base = delta_s(measure, sites, z_star, z_star, *s)?;
            ts.iter()
                .map(|&t| Ok((delta_s(measure, sites, &shift(h1, t), &shift(h2, t), *s)? - base) / t))
                .collect()
        }
        Functional::Gamma { field, h } => {
            check_dim(sites.len(), h.len())?;
            let base = gamma_phi(measure, sites, z_star, field)?;
            ts.iter()
                .map(|&t| Ok((gamma_phi(measure, sites, &shift(h, t), field)? - base) / t))
                .collect()
        }
    }
}
