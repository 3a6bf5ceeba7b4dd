//! TOML problem configuration and its conversion into library types.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use sdot::dual::SimplexWeights;
use sdot::inference::SampleData;
use sdot::{MonteCarloConfig, ReferenceMeasure, SiteSet, SupportRegion, VectorField};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub seed: u64,
    /// Confidence levels are `1 - alpha`.
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    pub problem: ProblemSection,
    pub reference: ReferenceSection,
    #[serde(default)]
    pub functionals: FunctionalSection,
    #[serde(default)]
    pub stages: StageSection,
    #[serde(default)]
    pub replications: ReplicationSection,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub coverage: CoverageSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

fn default_alpha() -> Vec<f64> {
    vec![0.1]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub sites: Vec<Vec<f64>>,
    /// Population weights `p`.
    pub weights: Option<Vec<f64>>,
    /// Observed category counts; used as the sample when present.
    pub counts: Option<Vec<u64>>,
    /// Size of the synthetic sample drawn from `weights` when no counts are given.
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub interval: Option<[f64; 2]>,
    pub rectangle: Option<RectangleSpec>,
    pub polygon: Option<Vec<[f64; 2]>>,
    pub ball: Option<BallSpec>,
    /// `ρ(y) = 1 / vol(Y) + <gradient, y - c>` for `kind = "affine"`.
    pub gradient: Option<Vec<f64>>,
    pub mc_samples: Option<usize>,
    pub mc_seed: Option<u64>,
}

fn default_kind() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    #[serde(default = "default_s")]
    pub s: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<FieldSpec>,
}

fn default_s() -> Vec<f64> {
    vec![1.0]
}

impl Default for FunctionalSection {
    fn default() -> Self {
        Self {
            s: default_s(),
            phi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: Vec<f64> },
    Zero,
    Coordinate { axis: usize },
    Identity,
    Bump { center: Vec<f64>, radius: f64, direction: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    #[serde(default = "yes")]
    pub limit_law: bool,
    #[serde(default = "yes")]
    pub bootstrap: bool,
    #[serde(default = "yes")]
    pub band: bool,
    #[serde(default = "yes")]
    pub probe: bool,
}

fn yes() -> bool {
    true
}

impl Default for StageSection {
    fn default() -> Self {
        Self {
            limit_law: true,
            bootstrap: true,
            band: true,
            probe: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationSection {
    #[serde(default = "default_limit_draws")]
    pub limit_draws: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_limit_draws() -> usize {
    100_000
}
fn default_bootstrap() -> usize {
    2000
}
fn default_bins() -> usize {
    40
}

impl Default for ReplicationSection {
    fn default() -> Self {
        Self {
            limit_draws: default_limit_draws(),
            bootstrap: default_bootstrap(),
            histogram_bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    /// Grid points per axis.
    #[serde(default = "default_band_grid")]
    pub grid: usize,
}

fn default_band_grid() -> usize {
    50
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            grid: default_band_grid(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_grid_per_cell")]
    pub grid_per_cell: usize,
}

fn default_margin() -> f64 {
    0.05
}
fn default_grid_per_cell() -> usize {
    100
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            margin: default_margin(),
            grid_per_cell: default_grid_per_cell(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSection {
    #[serde(default = "default_cov_n")]
    pub n: usize,
    #[serde(default = "default_outer")]
    pub outer_reps: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_reps: usize,
    #[serde(default = "default_cov_grid")]
    pub band_grid: usize,
}

fn default_cov_n() -> usize {
    5000
}
fn default_outer() -> usize {
    500
}
fn default_cov_grid() -> usize {
    1000
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            n: default_cov_n(),
            outer_reps: default_outer(),
            bootstrap_reps: default_bootstrap(),
            band_grid: default_cov_grid(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Multiplies every facet surface mass before the derivative checks
    /// (fault injection; 1 leaves the table intact).
    #[serde(default = "one")]
    pub corrupt_facet_scale: f64,
}

fn default_fd_step() -> f64 {
    1e-4
}
fn default_directions() -> usize {
    5
}
fn default_mc_samples() -> usize {
    1_000_000
}
fn one() -> f64 {
    1.0
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            fd_step: default_fd_step(),
            directions: default_directions(),
            mc_samples: default_mc_samples(),
            corrupt_facet_scale: 1.0,
        }
    }
}

/// A parsed config with its provenance.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    pub sha256: String,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let config: ProblemConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
        let loaded = Self { config, sha256 };
        loaded.check()?;
        Ok(loaded)
    }

    /// Validates every section before any computation.
    fn check(&self) -> Result<(), CliError> {
        let c = &self.config;
        self.sites()?;
        self.measure()?;
        let n = c.problem.sites.len();
        if c.problem.weights.is_none() && c.problem.counts.is_none() {
            return Err(config_err("problem", "needs `weights` or `counts`"));
        }
        self.weights()?;
        self.sample_counts()?;
        if let Some(k) = &c.problem.counts {
            if k.len() != n {
                return Err(config_err("problem.counts", format!("expected {n} entries, found {}", k.len())));
            }
        }
        for (k, a) in c.alpha.iter().enumerate() {
            if !(*a > 0.0 && *a < 1.0) {
                return Err(config_err(&format!("alpha[{k}]"), format!("must lie in (0, 1), got {a}")));
            }
        }
        for (k, s) in c.functionals.s.iter().enumerate() {
            if !(*s >= 1.0) || !s.is_finite() {
                return Err(config_err(&format!("functionals.s[{k}]"), format!("must be >= 1, got {s}")));
            }
        }
        self.fields()?;
        if c.replications.bootstrap == 0 || c.replications.limit_draws == 0 {
            return Err(config_err("replications", "counts must be positive"));
        }
        if c.band.grid == 0 || c.probe.grid_per_cell == 0 || !(c.probe.margin > 0.0) {
            return Err(config_err("band/probe", "grids must be nonempty and the margin positive"));
        }
        if !(c.validate.fd_step > 0.0) || !(c.validate.corrupt_facet_scale.is_finite()) {
            return Err(config_err("validate", "fd_step must be positive and the facet scale finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.config.problem.sites.first().map_or(0, Vec::len)
    }

    pub fn sites(&self) -> Result<SiteSet, CliError> {
        SiteSet::new(self.config.problem.sites.clone()).map_err(|e| config_err("problem.sites", e))
    }

    /// Population weights when configured.
    pub fn weights(&self) -> Result<Option<SimplexWeights>, CliError> {
        let Some(w) = &self.config.problem.weights else {
            return Ok(None);
        };
        let n = self.config.problem.sites.len();
        if w.len() != n {
            return Err(config_err("problem.weights", format!("expected {n} entries, found {}", w.len())));
        }
        SimplexWeights::new(w.clone())
            .map(Some)
            .map_err(|e| config_err("problem.weights", e))
    }

    /// Observed counts, or `None` when the sample must be simulated.
    pub fn sample_counts(&self) -> Result<Option<Vec<u64>>, CliError> {
        match (&self.config.problem.counts, self.config.problem.sample_size) {
            (Some(c), _) => {
                if c.iter().sum::<u64>() == 0 {
                    return Err(config_err("problem.counts", "must contain at least one observation"));
                }
                Ok(Some(c.clone()))
            }
            (None, Some(0)) => Err(config_err("problem.sample_size", "must be positive")),
            _ => Ok(None),
        }
    }

    pub fn sample(&self, seed: u64) -> Result<Option<SampleData>, CliError> {
        if let Some(c) = self.sample_counts()? {
            return SampleData::from_counts(&c)
                .map(Some)
                .map_err(|e| config_err("problem.counts", e));
        }
        match (self.weights()?, self.config.problem.sample_size) {
            (Some(p), Some(n)) => Ok(Some(SampleData::draw_seeded(&p, n, seed)?)),
            _ => Ok(None),
        }
    }

    pub fn support(&self) -> Result<SupportRegion, CliError> {
        let r = &self.config.reference;
        let given = [r.interval.is_some(), r.rectangle.is_some(), r.polygon.is_some(), r.ball.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(config_err(
                "reference",
                "exactly one of `interval`, `rectangle`, `polygon`, `ball` is required",
            ));
        }
        let support = if let Some([lo, hi]) = r.interval {
            SupportRegion::interval(lo, hi).map_err(|e| config_err("reference.interval", e))?
        } else if let Some(rect) = &r.rectangle {
            SupportRegion::rectangle(&rect.lo, &rect.hi).map_err(|e| config_err("reference.rectangle", e))?
        } else if let Some(v) = &r.polygon {
            SupportRegion::polygon(v.clone()).map_err(|e| config_err("reference.polygon", e))?
        } else {
            let b = r.ball.as_ref().expect("one support given");
            SupportRegion::ball(b.center.clone(), b.radius).map_err(|e| config_err("reference.ball", e))?
        };
        if support.dim() != self.dim() {
            return Err(config_err(
                "reference",
                format!("support has dimension {} but sites have dimension {}", support.dim(), self.dim()),
            ));
        }
        Ok(support)
    }

    pub fn measure(&self) -> Result<ReferenceMeasure, CliError> {
        let r = &self.config.reference;
        let support = self.support()?;
        let measure = match r.kind.as_str() {
            "uniform" => {
                if r.gradient.is_some() {
                    return Err(config_err("reference.gradient", "only valid with kind = \"affine\""));
                }
                ReferenceMeasure::uniform(support).map_err(|e| config_err("reference", e))?
            }
            "affine" => {
                let g = r
                    .gradient
                    .clone()
                    .ok_or_else(|| config_err("reference.gradient", "required for kind = \"affine\""))?;
                if g.len() != support.dim() {
                    return Err(config_err("reference.gradient", "length must match the dimension"));
                }
                let center = support.interior_point();
                let base = 1.0 / support.volume();
                let slope = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let low = base - slope * support.diameter();
                let high = base + slope * support.diameter();
                if !(low > 0.0) {
                    return Err(config_err(
                        "reference.gradient",
                        "too steep: the density must stay positive on the support",
                    ));
                }
                let rho = Arc::new(move |y: &[f64]| {
                    base + g.iter().zip(y).zip(&center).map(|((a, b), c)| a * (b - c)).sum::<f64>()
                });
                ReferenceMeasure::with_density(support, rho, Some(high)).map_err(|e| config_err("reference", e))?
            }
            other => return Err(config_err("reference.kind", format!("unknown kind {other:?}"))),
        };
        let mut mc = MonteCarloConfig::default();
        if let Some(n) = r.mc_samples {
            mc.samples = n;
        }
        if let Some(s) = r.mc_seed {
            mc.seed = s;
        }
        Ok(measure.with_mc_config(mc))
    }

    /// Built-in test functions, labelled for output tables.
    pub fn fields(&self) -> Result<Vec<(String, VectorField)>, CliError> {
        let d = self.dim();
        let support = self.support()?;
        let (lo, hi) = support.bounding_box();
        let reach: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a.abs().max(b.abs())).collect();
        self.config
            .functionals
            .phi
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                let field = format!("functionals.phi[{k}]");
                let (label, made) = match spec {
                    FieldSpec::Constant { value } => {
                        if value.len() != d {
                            return Err(config_err(&field, "constant must match the dimension"));
                        }
                        let label = format!(
                            "constant({})",
                            value.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
                        );
                        (label, VectorField::constant(value.clone()))
                    }
                    FieldSpec::Zero => ("zero".to_string(), VectorField::zero(d)),
                    FieldSpec::Coordinate { axis } => {
                        if *axis >= d {
                            return Err(config_err(&field, format!("axis {axis} out of range")));
                        }
                        (format!("coordinate({axis})"), VectorField::coordinate(d, *axis, reach[*axis]))
                    }
                    FieldSpec::Identity => {
                        let bound = reach.iter().map(|v| v * v).sum::<f64>().sqrt();
                        ("identity".to_string(), VectorField::identity(d, bound))
                    }
                    FieldSpec::Bump {
                        center,
                        radius,
                        direction,
                    } => (
                        format!("bump(r={radius})"),
                        VectorField::smooth_bump(center.clone(), *radius, direction.clone()),
                    ),
                };
                made.map(|f| (label, f)).map_err(|e| config_err(&field, e))
            })
            .collect()
    }
}
