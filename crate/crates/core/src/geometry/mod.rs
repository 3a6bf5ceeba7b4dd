//! Sites, supports and Laguerre (power) diagrams.
//!
//! Site indices are 0-based throughout the crate.

mod diagram;
mod polygon;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_dim, Error, Result};

pub use diagram::{build_diagram, build_implicit, cell_clip, Cell, FacetGeometry, FacetShape, LaguerreDiagram};
pub use polygon::{ConvexPolygon, EdgeLabel, Point2};

/// Tolerance for algebraic identities such as the offset cocycle.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for on-hyperplane tests.
pub const ON_PLANE_TOL: f64 = 1e-10;
/// Relative tolerance for volume conservation of exact diagrams.
pub const VOLUME_TOL: f64 = 1e-9;

/// The support points `x_1, ..., x_N` of the discrete target.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    dim: usize,
    coords: Vec<f64>,
}

impl SiteSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        for p in &points {
            check_dim(dim, p.len())?;
        }
        Self::from_flat(dim, points.into_iter().flatten().collect())
    }

    /// Sites stored row-major: `coords[i * dim..(i + 1) * dim]` is site `i`.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("site dimension must be positive".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "need at least one site with {dim} coordinates"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("site coordinates must be finite".into()));
        }
        let sites = Self { dim, coords };
        for i in 0..sites.len() {
            for j in i + 1..sites.len() {
                if sites.point(i) == sites.point(j) {
                    return Err(Error::InvalidInput(format!("sites {i} and {j} coincide")));
                }
            }
        }
        Ok(sites)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn sq_norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|c| c * c).sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `x_i - x_j`.
    pub fn difference(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| a - b).collect()
    }

    pub fn max_pairwise_distance(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                m = m.max(self.distance(i, j));
            }
        }
        m
    }

    /// `b_ij(z) = (|x_i|^2 - |x_j|^2) / 2 - z_i + z_j`.
    pub fn offset(&self, z: &[f64], i: usize, j: usize) -> f64 {
        0.5 * (self.sq_norm(i) - self.sq_norm(j)) - z[i] + z[j]
    }

    /// `|y - x_i|^2 / 2 - z_i`.
    pub fn cost(&self, z: &[f64], i: usize, y: &[f64]) -> f64 {
        0.5 * self
            .point(i)
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            - z[i]
    }

    /// Index minimizing `|y - x_i|^2 / 2 - z_i`; ties go to the smallest index.
    pub fn locate(&self, z: &[f64], y: &[f64]) -> Result<usize> {
        check_dim(self.dim, y.len())?;
        check_dim(self.len(), z.len())?;
        Ok(self.locate_unchecked(z, y))
    }

    /// Costs equal up to rounding (relative `1e-14` of the term magnitudes)
    /// count as ties.
    pub(crate) fn locate_unchecked(&self, z: &[f64], y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_cost = self.cost(z, 0, y);
        let mut magnitude = best_cost.abs() + 2.0 * z[0].abs();
        for i in 1..self.len() {
            let c = self.cost(z, i, y);
            magnitude = magnitude.max(c.abs() + 2.0 * z[i].abs());
            if c < best_cost {
                best = i;
                best_cost = c;
            }
        }
        let tol = 1e-14 * magnitude;
        (0..best)
            .find(|&i| self.cost(z, i, y) <= best_cost + tol)
            .unwrap_or(best)
    }
}

/// Membership predicate for a general convex body.
pub type MembershipFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A convex body known through a membership oracle and a bounding box.
#[derive(Clone)]
pub struct ConvexBody {
    lo: Vec<f64>,
    hi: Vec<f64>,
    volume: f64,
    contains: MembershipFn,
}

impl ConvexBody {
    /// `volume` is the caller-supplied Lebesgue volume of the body; it is
    /// only used to normalize the uniform density.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, volume: f64, contains: MembershipFn) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("bounding box must have positive extent".into()));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::InvalidInput("body volume must be positive".into()));
        }
        Ok(Self { lo, hi, volume, contains })
    }
}

impl fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexBody")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("volume", &self.volume)
            .finish_non_exhaustive()
    }
}

/// The compact convex set `Y` carrying the reference measure.
#[derive(Debug, Clone)]
pub enum SupportRegion {
    Interval { lo: f64, hi: f64 },
    Polygon(ConvexPolygon),
    /// Axis-aligned box in any dimension (Monte Carlo backends only for d >= 3).
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball (Monte Carlo backends only).
    Ball { center: Vec<f64>, radius: f64 },
    Body(ConvexBody),
}

impl PartialEq for SupportRegion {
    fn eq(&self, other: &Self) -> bool {
        use SupportRegion::*;
        match (self, other) {
            (Interval { lo: a, hi: b }, Interval { lo: c, hi: d }) => a == c && b == d,
            (Polygon(p), Polygon(q)) => p.vertices() == q.vertices(),
            (Box { lo: a, hi: b }, Box { lo: c, hi: d }) => a == c && b == d,
            (Ball { center: a, radius: r }, Ball { center: b, radius: s }) => a == b && r == s,
            (Body(a), Body(b)) => Arc::ptr_eq(&a.contains, &b.contains) && a.lo == b.lo && a.hi == b.hi,
            _ => false,
        }
    }
}

impl SupportRegion {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self::Interval { lo, hi })
    }

    pub fn polygon(vertices: Vec<Point2>) -> Result<Self> {
        Ok(Self::Polygon(ConvexPolygon::new(vertices)?))
    }

    /// Axis-aligned box; stored as an interval in d = 1 and a polygon in d = 2
    /// so that exact geometry applies.
    pub fn rectangle(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("box must have positive extent".into()));
        }
        match lo.len() {
            1 => Self::interval(lo[0], hi[0]),
            2 => Ok(Self::Polygon(ConvexPolygon::rectangle([lo[0], lo[1]], [hi[0], hi[1]])?)),
            _ => Ok(Self::Box { lo: lo.to_vec(), hi: hi.to_vec() }),
        }
    }

    pub fn unit_cube(dim: usize) -> Result<Self> {
        Self::rectangle(&vec![0.0; dim], &vec![1.0; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::InvalidInput("ball needs a center and positive radius".into()));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval { .. } => 1,
            Self::Polygon(_) => 2,
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Body(b) => b.lo.len(),
        }
    }

    /// Whether exact cell geometry is available on this support.
    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Interval { .. } | Self::Polygon(_))
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Self::Interval { lo, hi } => *lo <= y[0] && y[0] <= *hi,
            Self::Polygon(p) => p.contains([y[0], y[1]], 0.0),
            Self::Box { lo, hi } => y.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| a <= v && v <= b),
            Self::Ball { center, radius } => {
                y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            }
            Self::Body(b) => (b.contains)(y),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Self::Polygon(p) => {
                let (lo, hi) = p.bounding_box();
                (lo.to_vec(), hi.to_vec())
            }
            Self::Box { lo, hi } => (lo.clone(), hi.clone()),
            Self::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Self::Body(b) => (b.lo.clone(), b.hi.clone()),
        }
    }

    /// A point in the interior: the centroid for intervals, polygons, boxes and
    /// balls, the bounding-box center for predicate bodies.
    pub fn interior_point(&self) -> Vec<f64> {
        match self {
            Self::Polygon(p) => p.centroid().to_vec(),
            Self::Ball { center, .. } => center.clone(),
            _ => {
                let (lo, hi) = self.bounding_box();
                lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    /// Lebesgue volume.
    pub fn volume(&self) -> f64 {
        match self {
            Self::Interval { lo, hi } => hi - lo,
            Self::Polygon(p) => p.area(),
            Self::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Self::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
            Self::Body(b) => b.volume,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::Interval { lo, hi } => hi - lo,
            Self::Polygon(p) => p.diameter(),
            Self::Ball { radius, .. } => 2.0 * radius,
            Self::Box { .. } | Self::Body(_) => {
                let (lo, hi) = self.bounding_box();
                lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
            }
        }
    }

    /// Uniform draw from the support by rejection from the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let (lo, hi) = self.bounding_box();
        loop {
            for k in 0..out.len() {
                out[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
            }
            if self.contains(out) {
                return;
            }
        }
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_d = 2 pi / d * V_{d-2}
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => std::f64::consts::TAU / d as f64 * unit_ball_volume(d - 2),
    }
}
