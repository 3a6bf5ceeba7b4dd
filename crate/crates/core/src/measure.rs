//! The reference measure `R` and its cell and facet integrals.
//!
//! Exact backends apply on interval (d = 1) and convex polygon (d = 2)
//! supports: closed-form areas for the uniform density and adaptive
//! Gauss–Legendre quadrature otherwise. Everything else is Monte Carlo with
//! an explicit seed.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::field::VectorField;
use crate::geometry::{Cell, FacetGeometry, FacetShape, LaguerreDiagram, SiteSet, SupportRegion};
use crate::quadrature;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Allowed deviation of `∫ρ` from 1.
pub const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Clone)]
pub enum Density {
    /// Constant `1 / vol(Y)` on the support.
    Uniform,
    /// User density; `sup_bound` enables rejection sampling.
    Custom { eval: DensityFn, sup_bound: Option<f64> },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Uniform => f.write_str("Uniform"),
            Density::Custom { sup_bound, .. } => f.debug_struct("Custom").field("sup_bound", sup_bound).finish(),
        }
    }
}

/// Settings for the Monte Carlo backends used when no exact geometry exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    /// Geometric half-width of the thin slab; `None` means `1e-3 · diam(Y)`.
    pub slab_half_width: Option<f64>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0x5eed,
            slab_half_width: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Quadrature,
    MonteCarlo,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Quadrature => "quadrature",
            Backend::MonteCarlo => "monte-carlo",
        }
    }
}

/// A numeric result tagged with how it was computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Present for Monte Carlo estimates.
    pub std_error: Option<f64>,
    pub backend: Backend,
}

impl Estimate {
    fn exact(value: f64, backend: Backend) -> Self {
        Self {
            value,
            std_error: None,
            backend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetEstimator {
    ExactLineIntegral,
    ThinSlabMonteCarlo,
}

/// `R^+(D_ij) = ∫_{D_ij} ρ dH^{d-1}` for one facet.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetMeasureRecord {
    pub pair: (usize, usize),
    pub surface_mass: f64,
    /// `H^{d-1}` extent of the facet when known.
    pub extent: Option<f64>,
    pub estimator: FacetEstimator,
    pub std_error: Option<f64>,
}

/// Surface masses of all facets of a diagram, ordered by pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FacetTable {
    records: Vec<FacetMeasureRecord>,
}

impl FacetTable {
    pub fn new(mut records: Vec<FacetMeasureRecord>) -> Self {
        records.sort_by_key(|r| r.pair);
        Self { records }
    }

    pub fn records(&self) -> &[FacetMeasureRecord] {
        &self.records
    }

    /// `R^+(D_ij)`, zero for pairs without a facet.
    pub fn surface_mass(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.records
            .binary_search_by(|r| r.pair.cmp(&key))
            .map(|k| self.records[k].surface_mass)
            .unwrap_or(0.0)
    }

    /// Multiplies every surface mass by `factor` (fault injection in validation).
    pub fn scaled(&self, factor: f64) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| FacetMeasureRecord {
                surface_mass: r.surface_mass * factor,
                ..r.clone()
            })
            .collect();
        Self { records }
    }
}

/// `∫_{D_ij} <x_i - x_j, φ> ρ dH^{d-1}` for each facet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FacetIntegrals {
    entries: Vec<((usize, usize), Estimate)>,
}

impl FacetIntegrals {
    pub fn new(mut entries: Vec<((usize, usize), Estimate)>) -> Self {
        entries.sort_by_key(|e| e.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[((usize, usize), Estimate)] {
        &self.entries
    }

    /// Integral for the ordered pair `(i, j)`; antisymmetric in the pair.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        let v = self
            .entries
            .binary_search_by(|e| e.0.cmp(&key))
            .map(|k| self.entries[k].1.value)
            .unwrap_or(0.0);
        if i <= j {
            v
        } else {
            -v
        }
    }
}

/// The absolutely continuous reference measure `R` on a convex support.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    support: SupportRegion,
    density: Density,
    uniform_value: f64,
    mc: MonteCarloConfig,
}

impl ReferenceMeasure {
    pub fn uniform(support: SupportRegion) -> Result<Self> {
        let vol = support.volume();
        if !(vol > 0.0) {
            return Err(Error::InvalidInput("support must have positive volume".into()));
        }
        Ok(Self {
            uniform_value: 1.0 / vol,
            support,
            density: Density::Uniform,
            mc: MonteCarloConfig::default(),
        })
    }

    /// A user density, assumed continuous on the support and zero outside it.
    ///
    /// Normalization is checked by quadrature on exact supports (tolerance
    /// [`NORMALIZATION_TOL`]) and by Monte Carlo otherwise (five standard
    /// errors plus the same tolerance).
    pub fn with_density(support: SupportRegion, eval: DensityFn, sup_bound: Option<f64>) -> Result<Self> {
        if let Some(b) = sup_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidInput("density sup bound must be positive".into()));
            }
        }
        let measure = Self {
            uniform_value: 0.0,
            support,
            density: Density::Custom { eval, sup_bound },
            mc: MonteCarloConfig::default(),
        };
        let (mass, slack) = measure.total_mass_check()?;
        if (mass - 1.0).abs() > NORMALIZATION_TOL + slack {
            return Err(Error::InvalidInput(format!("density integrates to {mass}, not 1")));
        }
        Ok(measure)
    }

    fn total_mass_check(&self) -> Result<(f64, f64)> {
        let eval = match &self.density {
            Density::Uniform => return Ok((1.0, 0.0)),
            Density::Custom { eval, .. } => eval.clone(),
        };
        let mut probe_max: f64 = 0.0;
        let mut f = |y: &[f64]| {
            let v = eval(y);
            probe_max = probe_max.max(v);
            v
        };
        let result = match &self.support {
            SupportRegion::Interval { lo, hi } => (quadrature::integrate_interval(*lo, *hi, &mut |t| f(&[t])), 0.0),
            SupportRegion::Polygon(p) => (quadrature::integrate_polygon(p, &mut f), 0.0),
            _ => {
                let n = 200_000;
                let mut rng = ChaCha8Rng::seed_from_u64(self.mc.seed);
                let mut y = vec![0.0; self.dim()];
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..n {
                    self.support.sample_uniform(&mut rng, &mut y);
                    let v = f(&y);
                    s += v;
                    s2 += v * v;
                }
                let mean = s / n as f64;
                let var = (s2 / n as f64 - mean * mean).max(0.0);
                let vol = self.support.volume();
                (vol * mean, 5.0 * vol * (var / n as f64).sqrt())
            }
        };
        if let Density::Custom { sup_bound: Some(b), .. } = &self.density {
            if probe_max > b * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "density reaches {probe_max}, above its declared bound {b}"
                )));
            }
        }
        Ok(result)
    }

    pub fn with_mc_config(mut self, mc: MonteCarloConfig) -> Self {
        self.mc = mc;
        self
    }

    pub fn mc_config(&self) -> MonteCarloConfig {
        self.mc
    }

    pub fn support(&self) -> &SupportRegion {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.density, Density::Uniform)
    }

    /// `ρ(y)`, zero outside the support.
    pub fn density(&self, y: &[f64]) -> f64 {
        if !self.support.contains(y) {
            return 0.0;
        }
        match &self.density {
            Density::Uniform => self.uniform_value,
            Density::Custom { eval, .. } => eval(y),
        }
    }

    /// `ρ` without the support check, for points known to lie in `Y`.
    fn density_inside(&self, y: &[f64]) -> f64 {
        match &self.density {
            Density::Uniform => self.uniform_value,
            Density::Custom { eval, .. } => eval(y),
        }
    }

    pub fn has_sampler(&self) -> bool {
        match &self.density {
            Density::Uniform => true,
            Density::Custom { sup_bound, .. } => sup_bound.is_some(),
        }
    }

    /// One draw from `R`.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G, out: &mut [f64]) -> Result<()> {
        match &self.density {
            Density::Uniform => {
                self.support.sample_uniform(rng, out);
                Ok(())
            }
            Density::Custom { eval, sup_bound } => {
                let bound = sup_bound.ok_or(Error::NoSampler)?;
                loop {
                    self.support.sample_uniform(rng, out);
                    if rng.random::<f64>() * bound <= eval(out) {
                        return Ok(());
                    }
                }
            }
        }
    }

    fn check_diagram(&self, diagram: &LaguerreDiagram<'_>) -> Result<()> {
        if std::ptr::eq(diagram.support(), &self.support) || diagram.support() == &self.support {
            Ok(())
        } else {
            Err(Error::NotBuiltAgainstSupport)
        }
    }

    /// `∫_cell f dR` for exact geometry.
    pub fn integrate_region(&self, cell: &Cell, f: &mut dyn FnMut(&[f64]) -> f64) -> Result<f64> {
        let uniform = self.is_uniform();
        let mut g = |y: &[f64]| {
            let v = f(y);
            if uniform || v == 0.0 {
                v
            } else {
                v * self.density_inside(y)
            }
        };
        let raw = match cell {
            Cell::Empty => 0.0,
            Cell::Interval { lo, hi } => quadrature::integrate_interval(*lo, *hi, &mut |t| g(&[t])),
            Cell::Polygon(p) => quadrature::integrate_polygon(p, &mut g),
            Cell::Implicit => return Err(Error::UnsupportedExactDimension(self.dim())),
        };
        Ok(if uniform { raw * self.uniform_value } else { raw })
    }

    /// `R(cell)` for exact geometry.
    pub fn region_mass(&self, cell: &Cell) -> Result<Estimate> {
        if self.is_uniform() {
            let vol = cell.volume().ok_or(Error::UnsupportedExactDimension(self.dim()))?;
            return Ok(Estimate::exact(vol * self.uniform_value, Backend::Exact));
        }
        if cell.is_empty() {
            return Ok(Estimate::exact(0.0, Backend::Exact));
        }
        let v = self.integrate_region(cell, &mut |_| 1.0)?;
        Ok(Estimate::exact(v, Backend::Quadrature))
    }

    /// `∫_{C_i(z)} f dR` on an exact diagram.
    pub fn integrate_cell(&self, diagram: &LaguerreDiagram<'_>, i: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> Result<f64> {
        self.check_diagram(diagram)?;
        self.integrate_region(diagram.cell(i), f)
    }

    /// `R(C_i(z))`: exact, quadrature or Monte Carlo depending on the diagram.
    pub fn cell_mass(&self, diagram: &LaguerreDiagram<'_>, i: usize) -> Result<Estimate> {
        self.check_diagram(diagram)?;
        if diagram.is_exact() {
            self.region_mass(diagram.cell(i))
        } else {
            let (m, se) = self.mc_cell_mass(diagram.sites(), diagram.z(), i, self.mc.samples, self.mc.seed)?;
            Ok(Estimate {
                value: m,
                std_error: Some(se),
                backend: Backend::MonteCarlo,
            })
        }
    }

    /// All cell masses; one shared sample for Monte Carlo diagrams.
    pub fn cell_masses(&self, diagram: &LaguerreDiagram<'_>) -> Result<Vec<Estimate>> {
        self.check_diagram(diagram)?;
        if diagram.is_exact() {
            return (0..diagram.len()).map(|i| self.region_mass(diagram.cell(i))).collect();
        }
        let n = self.mc.samples;
        let counts = self.mc_counts(diagram.sites(), diagram.z(), n, self.mc.seed)?;
        Ok(counts
            .into_iter()
            .map(|c| {
                let m = c as f64 / n as f64;
                Estimate {
                    value: m,
                    std_error: Some((m * (1.0 - m) / n as f64).sqrt()),
                    backend: Backend::MonteCarlo,
                }
            })
            .collect())
    }

    fn mc_counts(&self, sites: &SiteSet, z: &[f64], n: usize, seed: u64) -> Result<Vec<usize>> {
        check_dim(self.dim(), sites.dim())?;
        check_dim(sites.len(), z.len())?;
        if !self.has_sampler() {
            return Err(Error::NoSampler);
        }
        if n == 0 {
            return Err(Error::InvalidInput("Monte Carlo needs at least one sample".into()));
        }
        let mut counts = vec![0usize; sites.len()];
        if sites.len() == 1 {
            counts[0] = n;
            return Ok(counts);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; self.dim()];
        for _ in 0..n {
            self.sample(&mut rng, &mut y)?;
            counts[sites.locate_unchecked(z, &y)] += 1;
        }
        Ok(counts)
    }

    /// Hit-or-miss estimate of `R(C_i(z))` and its standard error
    /// `sqrt(m (1 - m) / n)`.
    pub fn mc_cell_mass(&self, sites: &SiteSet, z: &[f64], i: usize, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
        let counts = self.mc_counts(sites, z, n_samples, seed)?;
        let m = counts[i] as f64 / n_samples as f64;
        Ok((m, (m * (1.0 - m) / n_samples as f64).sqrt()))
    }

    fn slab_half_width(&self) -> f64 {
        self.mc.slab_half_width.unwrap_or(1e-3 * self.support.diameter())
    }

    /// `R^+(D_ij)`: `ρ` at the point (d = 1), a line integral (d = 2), or a
    /// thin-slab Monte Carlo estimate `R(slab ∩ (C_i ∪ C_j)) / (2ε)` whose
    /// bias is `O(ε)`.
    pub fn facet_surface_mass(&self, diagram: &LaguerreDiagram<'_>, facet: &FacetGeometry) -> Result<FacetMeasureRecord> {
        self.check_diagram(diagram)?;
        let (i, j) = facet.pair;
        match &facet.shape {
            FacetShape::Point(p) => Ok(FacetMeasureRecord {
                pair: facet.pair,
                surface_mass: self.density(&[*p]),
                extent: Some(1.0),
                estimator: FacetEstimator::ExactLineIntegral,
                std_error: None,
            }),
            FacetShape::Segment(a, b) => {
                let len = (a[0] - b[0]).hypot(a[1] - b[1]);
                if len == 0.0 {
                    return Err(Error::EmptyFacet(i, j));
                }
                let mass = if self.is_uniform() {
                    len * self.uniform_value
                } else {
                    quadrature::integrate_segment(a, b, &mut |y| self.density_inside(y))
                };
                Ok(FacetMeasureRecord {
                    pair: facet.pair,
                    surface_mass: mass,
                    extent: Some(len),
                    estimator: FacetEstimator::ExactLineIntegral,
                    std_error: None,
                })
            }
            FacetShape::Implicit => {
                let est = self.thin_slab(diagram, facet, self.slab_half_width(), self.mc.samples, self.mc.seed, None)?;
                Ok(FacetMeasureRecord {
                    pair: facet.pair,
                    surface_mass: est.value,
                    extent: None,
                    estimator: FacetEstimator::ThinSlabMonteCarlo,
                    std_error: est.std_error,
                })
            }
        }
    }

    /// Thin-slab estimate of `∫_{D_ij} w ρ dH^{d-1}` with `w = 1` or
    /// `w = <x_i - x_j, φ>`, valid for any diagram (exact or implicit).
    pub fn thin_slab(
        &self,
        diagram: &LaguerreDiagram<'_>,
        facet: &FacetGeometry,
        half_width: f64,
        n_samples: usize,
        seed: u64,
        field: Option<&VectorField>,
    ) -> Result<Estimate> {
        self.check_diagram(diagram)?;
        if !self.has_sampler() {
            return Err(Error::NoSampler);
        }
        if !(half_width > 0.0) || n_samples == 0 {
            return Err(Error::InvalidInput("slab needs a positive half-width and samples".into()));
        }
        let (i, j) = facet.pair;
        let sites = diagram.sites();
        let z = diagram.z();
        let norm = facet.normal.iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; self.dim()];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n_samples {
            self.sample(&mut rng, &mut y)?;
            if facet.plane_residual(&y).abs() > half_width * norm {
                continue;
            }
            let k = sites.locate_unchecked(z, &y);
            if k != i && k != j {
                continue;
            }
            let w = match field {
                None => 1.0,
                Some(phi) => phi.dot(&facet.normal, &y),
            };
            s += w;
            s2 += w * w;
        }
        let n = n_samples as f64;
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        let scale = 1.0 / (2.0 * half_width);
        Ok(Estimate {
            value: mean * scale,
            std_error: Some((var / n).sqrt() * scale),
            backend: Backend::MonteCarlo,
        })
    }

    /// `∫_{D_ij} <x_i - x_j, φ(y)> ρ(y) dH^{d-1}(y)` for the facet's ordered pair.
    pub fn facet_weighted_integral(
        &self,
        diagram: &LaguerreDiagram<'_>,
        facet: &FacetGeometry,
        field: &VectorField,
    ) -> Result<Estimate> {
        self.check_diagram(diagram)?;
        check_dim(self.dim(), field.dim())?;
        let (i, j) = facet.pair;
        match &facet.shape {
            FacetShape::Point(p) => {
                let y = [*p];
                Ok(Estimate::exact(
                    field.dot(&facet.normal, &y) * self.density(&y),
                    Backend::Exact,
                ))
            }
            FacetShape::Segment(a, b) => {
                if a == b {
                    return Err(Error::EmptyFacet(i, j));
                }
                let v = quadrature::integrate_segment(a, b, &mut |y| {
                    let w = field.dot(&facet.normal, y);
                    if w == 0.0 {
                        0.0
                    } else {
                        w * self.density_inside(y)
                    }
                });
                Ok(Estimate::exact(v, Backend::Quadrature))
            }
            FacetShape::Implicit => self.thin_slab(
                diagram,
                facet,
                self.slab_half_width(),
                self.mc.samples,
                self.mc.seed,
                Some(field),
            ),
        }
    }

    /// Surface masses of every facet of the diagram.
    pub fn facet_table(&self, diagram: &LaguerreDiagram<'_>) -> Result<FacetTable> {
        let records = diagram
            .facets()
            .iter()
            .map(|f| self.facet_surface_mass(diagram, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(FacetTable::new(records))
    }

    /// Weighted facet integrals of `field` over every facet.
    pub fn facet_integrals(&self, diagram: &LaguerreDiagram<'_>, field: &VectorField) -> Result<FacetIntegrals> {
        let entries = diagram
            .facets()
            .iter()
            .map(|f| Ok((f.pair, self.facet_weighted_integral(diagram, f, field)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FacetIntegrals::new(entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_diagram, build_implicit};

    fn canonical() -> (SiteSet, ReferenceMeasure) {
        (
            SiteSet::new(vec![vec![0.0], vec![1.0]]).unwrap(),
            ReferenceMeasure::uniform(SupportRegion::interval(0.0, 1.0).unwrap()).unwrap(),
        )
    }

    #[test]
    fn canonical_masses_and_facet() {
        let (sites, r) = canonical();
        let d = build_diagram(&sites, &[-0.1, 0.1], r.support()).unwrap();
        let m = r.cell_mass(&d, 0).unwrap();
        assert!((m.value - 0.3).abs() < 1e-15);
        assert_eq!(m.backend, Backend::Exact);
        let rec = r.facet_surface_mass(&d, &d.facets()[0]).unwrap();
        assert_eq!(rec.surface_mass, 1.0);
        let one = VectorField::constant(vec![1.0]).unwrap();
        let v = r.facet_weighted_integral(&d, &d.facets()[0], &one).unwrap();
        assert_eq!(v.value, -1.0);
        let zero = VectorField::zero(1).unwrap();
        assert_eq!(r.facet_weighted_integral(&d, &d.facets()[0], &zero).unwrap().value, 0.0);
    }

    #[test]
    fn symmetric_square_facet() {
        let sites = SiteSet::new(vec![vec![0.25, 0.5], vec![0.75, 0.5]]).unwrap();
        let r = ReferenceMeasure::uniform(SupportRegion::unit_cube(2).unwrap()).unwrap();
        let d = build_diagram(&sites, &[0.0, 0.0], r.support()).unwrap();
        for i in 0..2 {
            assert!((r.cell_mass(&d, i).unwrap().value - 0.5).abs() < 1e-15);
        }
        let f = d.facet(0, 1).unwrap();
        assert!((r.facet_surface_mass(&d, f).unwrap().surface_mass - 1.0).abs() < 1e-15);
        let e1 = VectorField::constant(vec![1.0, 0.0]).unwrap();
        let v = r.facet_weighted_integral(&d, f, &e1).unwrap().value;
        assert!((v + 0.5).abs() < 1e-13);
    }

    #[test]
    fn rejects_foreign_diagram() {
        let (sites, r) = canonical();
        let other = SupportRegion::interval(0.0, 2.0).unwrap();
        let d = build_diagram(&sites, &[0.0, 0.0], &other).unwrap();
        assert_eq!(r.cell_mass(&d, 0).unwrap_err(), Error::NotBuiltAgainstSupport);
    }

    #[test]
    fn custom_density_normalization_and_quadrature() {
        let support = SupportRegion::interval(0.0, 1.0).unwrap();
        // ρ(y) = 2y
        let r = ReferenceMeasure::with_density(support.clone(), Arc::new(|y| 2.0 * y[0]), Some(2.0)).unwrap();
        let sites = SiteSet::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let d = build_diagram(&sites, &[0.0, 0.0], r.support()).unwrap();
        let m = r.cell_mass(&d, 0).unwrap();
        assert!((m.value - 0.25).abs() < 1e-14);
        assert_eq!(m.backend, Backend::Quadrature);
        assert_eq!(r.facet_table(&d).unwrap().surface_mass(0, 1), 1.0);
        assert!(ReferenceMeasure::with_density(support.clone(), Arc::new(|_| 2.0), None).is_err());
        assert!(ReferenceMeasure::with_density(support, Arc::new(|y| 2.0 * y[0]), Some(1.0)).is_err());
    }

    #[test]
    fn mc_mass_single_site_and_no_sampler() {
        let sites = SiteSet::new(vec![vec![0.5]]).unwrap();
        let (_, r) = canonical();
        assert_eq!(r.mc_cell_mass(&sites, &[0.0], 0, 100, 1).unwrap(), (1.0, 0.0));
        let custom = ReferenceMeasure::with_density(
            SupportRegion::interval(0.0, 1.0).unwrap(),
            Arc::new(|_| 1.0),
            None,
        )
        .unwrap();
        assert_eq!(custom.mc_cell_mass(&sites, &[0.0], 0, 100, 1).unwrap_err(), Error::NoSampler);
    }

    #[test]
    fn implicit_diagram_uses_monte_carlo() {
        let sites = SiteSet::new(vec![vec![0.0; 3], vec![1.0; 3]]).unwrap();
        let r = ReferenceMeasure::uniform(SupportRegion::unit_cube(3).unwrap())
            .unwrap()
            .with_mc_config(MonteCarloConfig {
                samples: 200_000,
                seed: 3,
                slab_half_width: Some(0.01),
            });
        let d = build_implicit(&sites, &[0.0, 0.0], r.support()).unwrap();
        let masses = r.cell_masses(&d).unwrap();
        let se = masses[0].std_error.unwrap();
        assert!((masses[0].value - 0.5).abs() < 4.0 * se);
        assert!((masses[0].value + masses[1].value - 1.0).abs() < 1e-12);
        // bisector plane x+y+z = 1.5 cuts the unit cube in a hexagon of area 3√3/4
        let rec = r.facet_surface_mass(&d, &d.facets()[0]).unwrap();
        let exact = 3.0 * 3f64.sqrt() / 4.0;
        assert!((rec.surface_mass - exact).abs() < 4.0 * rec.std_error.unwrap() + 0.02 * exact);
    }
}
