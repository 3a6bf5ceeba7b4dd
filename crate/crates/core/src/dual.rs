//! The semidiscrete dual problem and its damped Newton solver.
//!
//! The objective is `Φ(z, q) = Σ_{i<N} z_i q_i + z_N (1 - Σ q_i) + ∫ min_i (|y - x_i|²/2 - z_i) dR(y)`.
//! Newton runs in the reduced coordinates `z^{-N} = (z_1, ..., z_{N-1})` with
//! `z_N = -<z^{-N}, 1>`, where the Hessian is negative definite whenever
//! every cell has positive mass.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{build_diagram, build_implicit, LaguerreDiagram, SiteSet};
use crate::measure::ReferenceMeasure;

/// Tolerance on `<z, 1> = 0`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Dual potentials normalized to `<z, 1> = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector(Vec<f64>);

impl PotentialVector {
    /// Accepts an already normalized vector.
    pub fn new(z: Vec<f64>) -> Result<Self> {
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let sum: f64 = z.iter().sum();
        if z.is_empty() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential vector must be finite and nonempty".into()));
        }
        if sum.abs() > NORMALIZATION_TOL * scale * z.len() as f64 {
            return Err(Error::InvalidInput(format!("potential vector sums to {sum}, not 0")));
        }
        Ok(Self(z))
    }

    /// Projects onto `<1>^⊥` by subtracting the mean.
    pub fn normalized(mut z: Vec<f64>) -> Self {
        let mean = z.iter().sum::<f64>() / z.len().max(1) as f64;
        z.iter_mut().for_each(|v| *v -= mean);
        Self(z)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `z + t h`, renormalized.
    pub fn perturbed(&self, h: &[f64], t: f64) -> Self {
        Self::normalized(self.0.iter().zip(h).map(|(a, b)| a + t * b).collect())
    }
}

impl AsRef<[f64]> for PotentialVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Tolerance on `Σ p_i = 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector on the sites. The reduced form drops the last coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("weights must be nonempty".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("weight {i} is {v}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(p))
    }

    /// `(q, 1 - <q, 1>)`.
    pub fn from_reduced(q: &[f64]) -> Result<Self> {
        let mut p = q.to_vec();
        p.push(1.0 - q.iter().sum::<f64>());
        if p[p.len() - 1] < 0.0 && p[p.len() - 1] > -SIMPLEX_TOL {
            *p.last_mut().unwrap() = 0.0;
        }
        Self::new(p)
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput("counts must not all be zero".into()));
        }
        Self::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First `N - 1` coordinates.
    pub fn reduced(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    /// Membership in `Q_+`: every weight strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop when `|∇Φ|_∞` falls to this level, or to `1/√M` for Monte
    /// Carlo masses from `M` samples.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Starting point; zero when absent.
    pub initial: Option<Vec<f64>>,
    /// Cap on contraction halvings used when a starting cell is empty.
    pub warm_start_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            max_halvings: 50,
            initial: None,
            warm_start_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolveReport {
    pub z: PotentialVector,
    /// Accepted Newton steps.
    pub iterations: usize,
    pub gradient_norm: f64,
    /// `|∇Φ|_∞` at the start and after each accepted step.
    pub gradient_history: Vec<f64>,
    /// Smallest cell mass at the start and after each accepted step.
    pub min_mass_history: Vec<f64>,
    /// Mass floor enforced by the line search.
    pub mass_floor: f64,
    pub warm_start_steps: usize,
    pub converged: bool,
}

/// The dual problem for a fixed reference measure and site set.
#[derive(Debug, Clone, Copy)]
pub struct DualProblem<'a> {
    measure: &'a ReferenceMeasure,
    sites: &'a SiteSet,
}

impl<'a> DualProblem<'a> {
    pub fn new(measure: &'a ReferenceMeasure, sites: &'a SiteSet) -> Result<Self> {
        check_dim(measure.dim(), sites.dim())?;
        Ok(Self { measure, sites })
    }

    pub fn measure(&self) -> &'a ReferenceMeasure {
        self.measure
    }

    pub fn sites(&self) -> &'a SiteSet {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Exact geometry on intervals and polygons, implicit (Monte Carlo) cells otherwise.
    pub fn diagram(&self, z: &[f64]) -> Result<LaguerreDiagram<'a>> {
        let support = self.measure.support();
        if support.is_exact() {
            build_diagram(self.sites, z, support)
        } else {
            build_implicit(self.sites, z, support)
        }
    }

    fn masses_of(&self, diagram: &LaguerreDiagram<'_>) -> Result<Vec<f64>> {
        Ok(self.measure.cell_masses(diagram)?.into_iter().map(|e| e.value).collect())
    }

    /// `R(C_i(z))` for every `i`.
    pub fn masses(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.masses_of(&self.diagram(z)?)
    }

    /// `Φ(z, q)`, with each cell's share of the integral computed exactly.
    pub fn objective(&self, z: &[f64], q: &SimplexWeights) -> Result<f64> {
        check_dim(self.len(), q.len())?;
        let diagram = self.diagram(z)?;
        let linear: f64 = z.iter().zip(q.as_slice()).map(|(a, b)| a * b).sum();
        let mut integral = 0.0;
        for i in 0..self.len() {
            integral += self
                .measure
                .integrate_cell(&diagram, i, &mut |y| self.sites.cost(z, i, y))?;
        }
        Ok(linear + integral)
    }

    /// `∇_z Φ = (q_i - R(C_i(z)))_i`.
    pub fn gradient(&self, z: &[f64], q: &SimplexWeights) -> Result<Vec<f64>> {
        check_dim(self.len(), q.len())?;
        let m = self.masses(z)?;
        Ok(q.as_slice().iter().zip(&m).map(|(a, b)| a - b).collect())
    }

    /// Reduced Hessian of `z^{-N} ↦ Φ(z^{-N}, -<z^{-N}, 1>, q)`.
    ///
    /// With facet weights `w_ij = R^+(D_ij) / |x_i - x_j|` and the weighted
    /// graph Laplacian `L`, the full Hessian in `z` is `-L`; eliminating `z_N`
    /// gives `H_ab = -(L_ab - L_aN - L_Nb + L_NN)`.
    pub fn hessian_reduced(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let diagram = self.diagram(z)?;
        let masses = self.masses_of(&diagram)?;
        self.hessian_from(&diagram, &masses)
    }

    fn hessian_from(&self, diagram: &LaguerreDiagram<'_>, masses: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::EmptyCell(i));
        }
        let n = self.len();
        let table = self.measure.facet_table(diagram)?;
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for rec in table.records() {
            let (i, j) = rec.pair;
            let w = rec.surface_mass / self.sites.distance(i, j);
            lap[(i, j)] -= w;
            lap[(j, i)] -= w;
            lap[(i, i)] += w;
            lap[(j, j)] += w;
        }
        let last = n - 1;
        Ok(DMatrix::from_fn(last, last, |a, b| {
            -(lap[(a, b)] - lap[(a, last)] - lap[(last, b)] + lap[(last, last)])
        }))
    }

    /// Solves `max_{<z,1>=0} Φ(z, q)` by damped Newton.
    ///
    /// A step is halved until every cell keeps at least the mass floor
    /// `min(min_i q_i, min_i R(C_i(z_0))) / 2` and `|∇Φ|_∞` strictly
    /// decreases.
    pub fn solve(&self, q: &SimplexWeights, options: &SolveOptions) -> Result<DualSolveReport> {
        let n = self.len();
        check_dim(n, q.len())?;
        if let Some((index, &value)) = q.as_slice().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NotInterior { index, value });
        }
        if n == 1 {
            return Ok(DualSolveReport {
                z: PotentialVector::zeros(1),
                iterations: 0,
                gradient_norm: 0.0,
                gradient_history: vec![0.0],
                min_mass_history: vec![1.0],
                mass_floor: 0.5,
                warm_start_steps: 0,
                converged: true,
            });
        }
        let q = q.as_slice();
        let mut z = match &options.initial {
            Some(z0) => {
                check_dim(n, z0.len())?;
                PotentialVector::normalized(z0.clone()).into_inner()
            }
            None => vec![0.0; n],
        };

        let mut diagram = self.diagram(&z)?;
        let mut masses = self.masses_of(&diagram)?;
        let warm_start_steps = self.warm_start(&mut z, &mut diagram, &mut masses, options)?;

        let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let inf_norm = |m: &[f64]| q.iter().zip(m).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let mass_floor = 0.5 * min_of(q).min(min_of(&masses));

        // Monte Carlo masses are piecewise constant in z; resolving the
        // gradient below their sampling noise is not meaningful.
        let tolerance = if diagram.is_exact() {
            options.tolerance
        } else {
            options.tolerance.max(1.0 / (self.measure.mc_config().samples as f64).sqrt())
        };
        let mut grad_norm = inf_norm(&masses);
        let mut gradient_history = vec![grad_norm];
        let mut min_mass_history = vec![min_of(&masses)];
        let mut iterations = 0;

        while grad_norm > tolerance {
            if iterations >= options.max_iterations {
                return Err(Error::MaxIterationsExceeded {
                    iterations,
                    gradient_norm: grad_norm,
                });
            }
            let hess = self.hessian_from(&diagram, &masses)?;
            // reduced gradient: (q_a - m_a) - (q_N - m_N)
            let g_last = q[n - 1] - masses[n - 1];
            let g_red = nalgebra::DVector::from_fn(n - 1, |a, _| (q[a] - masses[a]) - g_last);
            let chol = (-hess).cholesky().ok_or_else(|| {
                Error::DegenerateConfiguration("reduced Hessian is numerically singular".into())
            })?;
            let step = chol.solve(&g_red);
            let mut direction: Vec<f64> = step.iter().copied().collect();
            direction.push(-step.iter().sum::<f64>());

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=options.max_halvings {
                let trial: Vec<f64> = z.iter().zip(&direction).map(|(a, d)| a + alpha * d).collect();
                let trial_diagram = self.diagram(&trial)?;
                let trial_masses = self.masses_of(&trial_diagram)?;
                let trial_norm = inf_norm(&trial_masses);
                if min_of(&trial_masses) >= mass_floor && trial_norm < grad_norm {
                    accepted = Some((trial, trial_diagram, trial_masses, trial_norm));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, trial_diagram, trial_masses, trial_norm)) = accepted else {
                return Err(Error::DegenerateConfiguration(format!(
                    "line search failed after {} halvings at gradient norm {grad_norm:e}",
                    options.max_halvings
                )));
            };
            z = trial;
            diagram = trial_diagram;
            masses = trial_masses;
            grad_norm = trial_norm;
            iterations += 1;
            gradient_history.push(grad_norm);
            min_mass_history.push(min_of(&masses));
        }

        Ok(DualSolveReport {
            z: PotentialVector::normalized(z),
            iterations,
            gradient_norm: grad_norm,
            gradient_history,
            min_mass_history,
            mass_floor,
            warm_start_steps,
            converged: true,
        })
    }

    /// Replaces a starting point with an empty cell by
    /// `z_i = (1 - λ) |x_i - c|² / 2`, whose cells are the Voronoi cells of the
    /// contracted sites `c + λ (x_i - c)` around the support center `c`. `λ`
    /// is halved from 1 until every cell has positive mass; once the
    /// contracted sites lie inside the support this is guaranteed.
    fn warm_start(
        &self,
        z: &mut Vec<f64>,
        diagram: &mut LaguerreDiagram<'a>,
        masses: &mut Vec<f64>,
        options: &SolveOptions,
    ) -> Result<usize> {
        if masses.iter().all(|&m| m > 0.0) {
            return Ok(0);
        }
        let center = self.measure.support().interior_point();
        let sq_dist: Vec<f64> = self
            .sites
            .iter()
            .map(|x| x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum())
            .collect();
        let mut lambda = 1.0;
        for step in 1..=options.warm_start_iterations {
            lambda *= 0.5;
            let trial: Vec<f64> = sq_dist.iter().map(|d| 0.5 * (1.0 - lambda) * d).collect();
            *z = PotentialVector::normalized(trial).into_inner();
            *diagram = self.diagram(z)?;
            *masses = self.masses_of(diagram)?;
            if masses.iter().all(|&m| m > 0.0) {
                return Ok(step);
            }
        }
        Err(Error::DegenerateConfiguration(
            "could not find potentials with all cells nonempty".into(),
        ))
    }

    /// `B = ∇_q z*(q)` as an `(N-1) × N` matrix with `B[k][j] = ∂z*_j / ∂q_k`.
    ///
    /// Implicit differentiation of the reduced first-order condition gives
    /// `∂z^{*,-N}/∂q = -H^{-1} M` with `M = I + 11^T`; the last column follows
    /// from `z*_N = -<z^{*,-N}, 1>`.
    pub fn sensitivity(&self, z_star: &[f64], q: &SimplexWeights) -> Result<DMatrix<f64>> {
        let n = self.len();
        check_dim(n, q.len())?;
        check_dim(n, z_star.len())?;
        if n == 1 {
            return Ok(DMatrix::zeros(0, 1));
        }
        let hess = self.hessian_reduced(z_star)?;
        let m = DMatrix::from_fn(n - 1, n - 1, |a, b| if a == b { 2.0 } else { 1.0 });
        let lu = hess.lu();
        let jac = lu.solve(&(-m)).ok_or(Error::SingularHessian)?;
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularHessian);
        }
        Ok(DMatrix::from_fn(n - 1, n, |k, j| {
            if j < n - 1 {
                jac[(j, k)]
            } else {
                -(0..n - 1).map(|a| jac[(a, k)]).sum::<f64>()
            }
        }))
    }
}
