use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Which constraint produced a polygon edge: the support boundary or the
/// bisector against another site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    Boundary,
    Site(usize),
}

/// A convex polygon with counterclockwise vertices.
///
/// Edge `k` runs from `vertices[k]` to `vertices[(k + 1) % len]` and carries
/// `labels[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
    labels: Vec<EdgeLabel>,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl ConvexPolygon {
    /// Validates that `vertices` form a simple, strictly convex,
    /// counterclockwise polygon with positive area.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("polygon has non-finite coordinates".into()));
        }
        let scale = bbox_scale(&vertices);
        for k in 0..n {
            let (a, b, c) = (vertices[k], vertices[(k + 1) % n], vertices[(k + 2) % n]);
            if dist(a, b) <= 1e-12 * scale {
                return Err(Error::InvalidInput("polygon has duplicate vertices".into()));
            }
            if cross(a, b, c) <= 0.0 {
                return Err(Error::InvalidInput(
                    "polygon must be strictly convex and counterclockwise".into(),
                ));
            }
        }
        // Local left turns everywhere still admit star-shaped winding > 1.
        let total_turn: f64 = (0..n)
            .map(|k| {
                let (a, b, c) = (vertices[k], vertices[(k + 1) % n], vertices[(k + 2) % n]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - b[0], c[1] - b[1]];
                (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1])
            })
            .sum();
        if (total_turn - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::InvalidInput("polygon is not simple".into()));
        }
        Ok(Self {
            labels: vec![EdgeLabel::Boundary; n],
            vertices,
        })
    }

    /// Axis-aligned rectangle `[lo.0, hi.0] x [lo.1, hi.1]`.
    pub fn rectangle(lo: Point2, hi: Point2) -> Result<Self> {
        Self::new(vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn labels(&self) -> &[EdgeLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2, EdgeLabel)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n], self.labels[k]))
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let o = self.vertices[0];
        let mut twice = 0.0;
        for k in 1..n.saturating_sub(1) {
            twice += cross(o, self.vertices[k], self.vertices[k + 1]);
        }
        0.5 * twice
    }

    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for k in 1..self.vertices.len() - 1 {
            let (b, c) = (self.vertices[k], self.vertices[k + 1]);
            let w = cross(o, b, c);
            cx += w * (o[0] + b[0] + c[0]) / 3.0;
            cy += w * (o[1] + b[1] + c[1]) / 3.0;
            a += w;
        }
        [cx / a, cy / a]
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (k, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[k + 1..] {
                d = d.max(dist(*a, *b));
            }
        }
        d
    }

    /// Point-in-polygon test; points within `tol` outside an edge line count as inside.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.edges().all(|(a, b, _)| {
            let len = dist(a, b);
            cross(a, b, p) >= -tol * len
        })
    }

    /// Euclidean distance from `p` to the segment `[a, b]`.
    pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        if len2 == 0.0 {
            return dist(p, a);
        }
        let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
        dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
    }

    /// Intersects with the half-plane `{y : <normal, y> >= offset}`.
    ///
    /// The new edge along the clipping line gets `label`. Returns `None` when
    /// the result has empty interior.
    pub fn clip(&self, normal: Point2, offset: f64, label: EdgeLabel) -> Option<ConvexPolygon> {
        let n = self.vertices.len();
        let scale = bbox_scale(&self.vertices);
        let nn = normal[0].hypot(normal[1]);
        let tol = 1e-12 * (offset.abs() + nn * scale).max(f64::MIN_POSITIVE);
        let f: Vec<f64> = self
            .vertices
            .iter()
            .map(|v| normal[0] * v[0] + normal[1] * v[1] - offset)
            .collect();
        if f.iter().all(|&fk| fk >= -tol) {
            return Some(self.clone());
        }
        if f.iter().all(|&fk| fk <= tol) {
            return None;
        }
        let mut verts = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for k in 0..n {
            let next = (k + 1) % n;
            let (cur_in, next_in) = (f[k] >= -tol, f[next] >= -tol);
            let crossing = |a: Point2, b: Point2, fa: f64, fb: f64| {
                let t = fa / (fa - fb);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            };
            match (cur_in, next_in) {
                (true, true) => {
                    verts.push(self.vertices[k]);
                    labels.push(self.labels[k]);
                }
                (true, false) => {
                    verts.push(self.vertices[k]);
                    labels.push(self.labels[k]);
                    if f[k] > tol {
                        verts.push(crossing(self.vertices[k], self.vertices[next], f[k], f[next]));
                        labels.push(label);
                    } else {
                        // current vertex sits on the line: its outgoing edge is the new one
                        *labels.last_mut().unwrap() = label;
                    }
                }
                (false, true) => {
                    if f[next] > tol {
                        verts.push(crossing(self.vertices[k], self.vertices[next], f[k], f[next]));
                        labels.push(self.labels[k]);
                    }
                }
                (false, false) => {}
            }
        }
        Self::from_raw(verts, labels, scale)
    }

    /// Builds a polygon from clipped output, merging near-duplicate vertices.
    fn from_raw(verts: Vec<Point2>, labels: Vec<EdgeLabel>, scale: f64) -> Option<ConvexPolygon> {
        let eps = 1e-12 * scale;
        let mut out_v: Vec<Point2> = Vec::with_capacity(verts.len());
        let mut out_l: Vec<EdgeLabel> = Vec::with_capacity(verts.len());
        for (v, l) in verts.into_iter().zip(labels) {
            match out_v.last() {
                // zero-length edge from the previous vertex: keep this vertex's outgoing label
                Some(&prev) if dist(prev, v) <= eps => *out_l.last_mut().unwrap() = l,
                _ => {
                    out_v.push(v);
                    out_l.push(l);
                }
            }
        }
        while out_v.len() > 1 && dist(out_v[0], *out_v.last().unwrap()) <= eps {
            out_v.pop();
            out_l.pop();
        }
        if out_v.len() < 3 {
            return None;
        }
        let poly = ConvexPolygon {
            vertices: out_v,
            labels: out_l,
        };
        if poly.area() <= 1e-14 * scale * scale {
            return None;
        }
        Some(poly)
    }

    /// Fan triangulation from the first vertex.
    pub fn triangles(&self) -> impl Iterator<Item = [Point2; 3]> + '_ {
        let o = self.vertices[0];
        (1..self.vertices.len() - 1).map(move |k| [o, self.vertices[k], self.vertices[k + 1]])
    }
}

fn bbox_scale(vertices: &[Point2]) -> f64 {
    let mut m: f64 = 0.0;
    for v in vertices {
        m = m.max(v[0].abs()).max(v[1].abs());
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1]).max(m * 1e-3).max(f64::MIN_POSITIVE)
}
