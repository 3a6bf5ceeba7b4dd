//! Gauss–Legendre rules on intervals, segments, triangles and convex polygons.
//!
//! Every integrator compares the 32-point rule on a piece with the same rule
//! on its bisection (interval, segment) or midpoint subdivision (triangle)
//! and refines while the two disagree by more than [`REFINE_TOL`].

use std::sync::OnceLock;

use crate::geometry::{ConvexPolygon, Point2};

/// Base rule order.
pub const ORDER: usize = 32;
/// Absolute disagreement that triggers refinement.
pub const REFINE_TOL: f64 = 1e-10;
const MAX_INTERVAL_DEPTH: u32 = 24;
const MAX_TRIANGLE_DEPTH: u32 = 4;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single application of the rule on `[a, b]`.
    pub fn apply(&self, a: f64, b: f64, f: &mut dyn FnMut(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        s * half
    }
}

/// Returns `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached 32-point rule.
pub fn base_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ORDER))
}

/// `∫_a^b f(t) dt` with adaptive bisection.
pub fn integrate_interval(a: f64, b: f64, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    let rule = base_rule();
    let coarse = rule.apply(a, b, f);
    refine_interval(rule, a, b, coarse, f, 0)
}

fn refine_interval(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    coarse: f64,
    f: &mut dyn FnMut(f64) -> f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.apply(a, m, f);
    let right = rule.apply(m, b, f);
    if (left + right - coarse).abs() <= REFINE_TOL || depth >= MAX_INTERVAL_DEPTH {
        return left + right;
    }
    refine_interval(rule, a, m, left, f, depth + 1) + refine_interval(rule, m, b, right, f, depth + 1)
}

/// `∫_{[a,b]} f dH^1` along a segment in `R^d`.
pub fn integrate_segment(a: &[f64], b: &[f64], f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let len = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let mut y = vec![0.0; a.len()];
    let mut g = |t: f64| {
        for k in 0..y.len() {
            y[k] = a[k] + t * (b[k] - a[k]);
        }
        f(&y)
    };
    len * integrate_interval(0.0, 1.0, &mut g)
}

/// Collapsed (Duffy) tensor rule on a triangle.
fn apply_triangle(rule: &GaussLegendre, t: &[Point2; 3], f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let [a, b, c] = *t;
    let twice_area = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    let mut s = 0.0;
    for (xu, wu) in rule.nodes.iter().zip(&rule.weights) {
        let u = 0.5 * (xu + 1.0);
        let mut inner = 0.0;
        for (xv, wv) in rule.nodes.iter().zip(&rule.weights) {
            let v = 0.5 * (xv + 1.0);
            let p = [
                a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
            ];
            inner += wv * f(&p);
        }
        s += wu * u * inner;
    }
    // the two half-weights of the [0,1]^2 map
    0.25 * twice_area * s
}

/// `∫_T f` over a triangle with adaptive midpoint subdivision.
pub fn integrate_triangle(t: &[Point2; 3], f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let rule = base_rule();
    let coarse = apply_triangle(rule, t, f);
    refine_triangle(rule, t, coarse, f, 0)
}

fn subdivide(t: &[Point2; 3]) -> [[Point2; 3]; 4] {
    let [a, b, c] = *t;
    let mid = |p: Point2, q: Point2| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

fn refine_triangle(
    rule: &GaussLegendre,
    t: &[Point2; 3],
    coarse: f64,
    f: &mut dyn FnMut(&[f64]) -> f64,
    depth: u32,
) -> f64 {
    let parts = subdivide(t);
    let vals: Vec<f64> = parts.iter().map(|p| apply_triangle(rule, p, f)).collect();
    let fine: f64 = vals.iter().sum();
    if (fine - coarse).abs() <= REFINE_TOL || depth >= MAX_TRIANGLE_DEPTH {
        return fine;
    }
    parts
        .iter()
        .zip(vals)
        .map(|(p, v)| refine_triangle(rule, p, v, f, depth + 1))
        .sum()
}

/// `∫_P f` over a convex polygon (fan triangulation).
pub fn integrate_polygon(poly: &ConvexPolygon, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    poly.triangles().map(|t| integrate_triangle(&t, f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 16, 32] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for k in 0..n {
                assert!((r.nodes()[k] + r.nodes()[n - 1 - k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let r = GaussLegendre::new(32);
        // degree 63 is the exactness limit; check x^62 on [-1,1] = 2/63
        let v = r.apply(-1.0, 1.0, &mut |x| x.powi(62));
        assert!((v - 2.0 / 63.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_interval_integral() {
        let v = integrate_interval(0.0, std::f64::consts::PI, &mut |x| x.sin());
        assert!((v - 2.0).abs() < 1e-14);
        // kink forces refinement
        let k = integrate_interval(-1.0, 2.0, &mut |x: f64| x.abs());
        assert!((k - 2.5).abs() < 1e-10, "{}", k - 2.5);
    }

    #[test]
    fn segment_length_and_moment() {
        let len = integrate_segment(&[0.0, 0.0], &[3.0, 4.0], &mut |_| 1.0);
        assert!((len - 5.0).abs() < 1e-14);
        let m = integrate_segment(&[0.0, 0.0], &[3.0, 4.0], &mut |y| y[0]);
        assert!((m - 7.5).abs() < 1e-13);
    }

    #[test]
    fn polygon_moments() {
        let sq = ConvexPolygon::rectangle([0.0, 0.0], [1.0, 2.0]).unwrap();
        let area = integrate_polygon(&sq, &mut |_| 1.0);
        assert!((area - 2.0).abs() < 1e-14);
        // ∫ x^2 y dA over [0,1]x[0,2] = 1/3 * 2 = 2/3
        let m = integrate_polygon(&sq, &mut |p| p[0] * p[0] * p[1]);
        assert!((m - 2.0 / 3.0).abs() < 1e-14);
        let e = integrate_polygon(&sq, &mut |p| (p[0] + p[1]).exp());
        let exact = (1f64.exp() - 1.0) * (2f64.exp() - 1.0);
        assert!((e - exact).abs() < 1e-12);
    }
}
