use std::collections::BTreeMap;

use super::polygon::{ConvexPolygon, EdgeLabel, Point2};
use super::{SiteSet, SupportRegion, ON_PLANE_TOL};
use crate::error::{check_dim, Error, Result};

/// Geometry of one Laguerre cell `C_i(z) ∩ Y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Empty interior.
    Empty,
    Interval { lo: f64, hi: f64 },
    Polygon(ConvexPolygon),
    /// Only known through its half-space description (Monte Carlo backends).
    Implicit,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        matches!(self, Cell::Empty)
    }

    /// Lebesgue volume of an exact cell.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Cell::Empty => Some(0.0),
            Cell::Interval { lo, hi } => Some(hi - lo),
            Cell::Polygon(p) => Some(p.area()),
            Cell::Implicit => None,
        }
    }

    /// Intersects an exact cell with the half-space `{y : <normal, y> >= offset}`.
    pub(crate) fn clip(&self, normal: &[f64], offset: f64, label: EdgeLabel, scale: f64) -> Cell {
        match self {
            Cell::Empty => Cell::Empty,
            Cell::Implicit => Cell::Implicit,
            Cell::Interval { lo, hi } => {
                let (mut lo, mut hi) = (*lo, *hi);
                let a = normal[0];
                if a > 0.0 {
                    lo = lo.max(offset / a);
                } else if a < 0.0 {
                    hi = hi.min(offset / a);
                } else if offset > 0.0 {
                    return Cell::Empty;
                }
                if hi - lo <= 1e-12 * scale {
                    Cell::Empty
                } else {
                    Cell::Interval { lo, hi }
                }
            }
            Cell::Polygon(p) => match p.clip([normal[0], normal[1]], offset, label) {
                Some(q) => Cell::Polygon(q),
                None => Cell::Empty,
            },
        }
    }
}

/// Shape of a facet `D_ij = C_i ∩ C_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum FacetShape {
    Point(f64),
    Segment(Point2, Point2),
    /// Carrier hyperplane restricted implicitly by the remaining constraints.
    Implicit,
}

/// A facet with its carrier hyperplane `{y : <x_i - x_j, y> = b_ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetGeometry {
    pub pair: (usize, usize),
    /// `x_i - x_j` (not normalized).
    pub normal: Vec<f64>,
    /// `b_ij(z)`.
    pub offset: f64,
    pub shape: FacetShape,
}

impl FacetGeometry {
    pub fn unit_normal(&self) -> Vec<f64> {
        let n = norm(&self.normal);
        self.normal.iter().map(|c| c / n).collect()
    }

    /// `H^{d-1}` extent: 1 for a point (counting measure), the length of a
    /// segment, `None` for implicit facets.
    pub fn extent(&self) -> Option<f64> {
        match &self.shape {
            FacetShape::Point(_) => Some(1.0),
            FacetShape::Segment(a, b) => Some((a[0] - b[0]).hypot(a[1] - b[1])),
            FacetShape::Implicit => None,
        }
    }

    /// Signed residual of the carrier-plane equation at `y`.
    pub fn plane_residual(&self, y: &[f64]) -> f64 {
        self.normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// The power diagram of `sites` with additive weights `z`, restricted to the support.
#[derive(Debug, Clone)]
pub struct LaguerreDiagram<'a> {
    sites: &'a SiteSet,
    support: &'a SupportRegion,
    z: Vec<f64>,
    cells: Vec<Cell>,
    facets: Vec<FacetGeometry>,
    offsets: Vec<f64>,
}

impl<'a> LaguerreDiagram<'a> {
    pub fn sites(&self) -> &'a SiteSet {
        self.sites
    }

    pub fn support(&self) -> &'a SupportRegion {
        self.support
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sites.dim()
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.cells.first(), Some(Cell::Implicit))
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Facets with positive `(d-1)`-dimensional extent, ordered by pair.
    pub fn facets(&self) -> &[FacetGeometry] {
        &self.facets
    }

    pub fn facet(&self, i: usize, j: usize) -> Option<&FacetGeometry> {
        let key = (i.min(j), i.max(j));
        self.facets
            .binary_search_by(|f| f.pair.cmp(&key))
            .ok()
            .map(|k| &self.facets[k])
    }

    /// Cached `b_ij(z)`.
    pub fn offset(&self, i: usize, j: usize) -> f64 {
        self.offsets[i * self.len() + j]
    }

    pub fn locate(&self, y: &[f64]) -> Result<usize> {
        self.sites.locate(&self.z, y)
    }

    /// Whether `y` satisfies every half-space constraint of cell `i`
    /// (within `tol` in the residual of each constraint).
    pub fn in_cell(&self, i: usize, y: &[f64], tol: f64) -> bool {
        (0..self.len()).filter(|&j| j != i).all(|j| {
            let r: f64 = self.sites.difference(i, j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                - self.offset(i, j);
            r >= -tol
        })
    }

    /// Exact geometry of `C_i(self) ∩ C_j(other)` (cells of two diagrams
    /// over the same sites and support).
    pub fn intersect_cells(&self, i: usize, other: &LaguerreDiagram<'_>, j: usize) -> Cell {
        let scale = self.support.diameter();
        let mut cell = self.cells[i].clone();
        for k in 0..other.len() {
            if k == j || cell.is_empty() {
                continue;
            }
            let normal = other.sites.difference(j, k);
            cell = cell.clip(&normal, other.offset(j, k), EdgeLabel::Site(k), scale);
        }
        cell
    }
}

fn prepare<'a>(sites: &'a SiteSet, z: &[f64], support: &'a SupportRegion) -> Result<Vec<f64>> {
    check_dim(sites.dim(), support.dim())?;
    check_dim(sites.len(), z.len())?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("potential vector must be finite".into()));
    }
    let n = sites.len();
    let mut offsets = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                offsets[i * n + j] = sites.offset(z, i, j);
            }
        }
    }
    Ok(offsets)
}

/// Builds the exact Laguerre diagram (d = 1 on an interval, d = 2 on a convex polygon).
pub fn build_diagram<'a>(
    sites: &'a SiteSet,
    z: &[f64],
    support: &'a SupportRegion,
) -> Result<LaguerreDiagram<'a>> {
    let offsets = prepare(sites, z, support)?;
    let n = sites.len();
    let scale = support.diameter();
    let base = match support {
        SupportRegion::Interval { lo, hi } => Cell::Interval { lo: *lo, hi: *hi },
        SupportRegion::Polygon(p) => Cell::Polygon(p.clone()),
        _ if support.dim() >= 3 => return Err(Error::UnsupportedExactDimension(support.dim())),
        _ => return Err(Error::NonPolygonalSupport),
    };
    let cells: Vec<Cell> = (0..n)
        .map(|i| {
            let mut cell = base.clone();
            for j in 0..n {
                if j == i || cell.is_empty() {
                    continue;
                }
                cell = cell.clip(&sites.difference(i, j), offsets[i * n + j], EdgeLabel::Site(j), scale);
            }
            cell
        })
        .collect();

    let mut facets: BTreeMap<(usize, usize), FacetGeometry> = BTreeMap::new();
    let facet = |i: usize, j: usize, shape: FacetShape| FacetGeometry {
        pair: (i, j),
        normal: sites.difference(i, j),
        offset: offsets[i * n + j],
        shape,
    };
    for i in 0..n {
        match &cells[i] {
            Cell::Interval { lo, hi } => {
                for j in i + 1..n {
                    if let Cell::Interval { lo: lo_j, hi: hi_j } = &cells[j] {
                        let touches = (hi - lo_j).abs() <= ON_PLANE_TOL * scale
                            || (hi_j - lo).abs() <= ON_PLANE_TOL * scale;
                        if touches {
                            let point = offsets[i * n + j] / (sites.point(i)[0] - sites.point(j)[0]);
                            facets.insert((i, j), facet(i, j, FacetShape::Point(point)));
                        }
                    }
                }
            }
            Cell::Polygon(p) => {
                for (a, b, label) in p.edges() {
                    let EdgeLabel::Site(j) = label else { continue };
                    if cells[j].is_empty() {
                        continue;
                    }
                    if (a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-12 * scale {
                        continue;
                    }
                    let key = (i.min(j), i.max(j));
                    facets
                        .entry(key)
                        .or_insert_with(|| facet(key.0, key.1, FacetShape::Segment(a, b)));
                }
            }
            Cell::Empty | Cell::Implicit => {}
        }
    }

    Ok(LaguerreDiagram {
        sites,
        support,
        z: z.to_vec(),
        cells,
        facets: facets.into_values().collect(),
        offsets,
    })
}

/// Builds a diagram whose cells stay implicit; every pair is a candidate facet.
pub fn build_implicit<'a>(
    sites: &'a SiteSet,
    z: &[f64],
    support: &'a SupportRegion,
) -> Result<LaguerreDiagram<'a>> {
    let offsets = prepare(sites, z, support)?;
    let n = sites.len();
    let mut facets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            facets.push(FacetGeometry {
                pair: (i, j),
                normal: sites.difference(i, j),
                offset: offsets[i * n + j],
                shape: FacetShape::Implicit,
            });
        }
    }
    Ok(LaguerreDiagram {
        sites,
        support,
        z: z.to_vec(),
        cells: vec![Cell::Implicit; n],
        facets,
        offsets,
    })
}

/// Exact geometry of cell `i`.
pub fn cell_clip<'d>(diagram: &'d LaguerreDiagram<'_>, i: usize) -> Result<&'d Cell> {
    match diagram.cell(i) {
        Cell::Implicit => Err(Error::UnsupportedExactDimension(diagram.dim())),
        c => Ok(c),
    }
}
