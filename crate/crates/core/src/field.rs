use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A bounded Borel vector field `φ : R^d → R^d`.
///
/// Its discontinuity set is assumed to have Hausdorff dimension below `d - 1`;
/// the built-ins are all continuous.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    bound: f64,
    note: String,
    eval: FieldFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .field("note", &self.note)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new(dim: usize, bound: f64, note: impl Into<String>, eval: FieldFn) -> Result<Self> {
        if dim == 0 || !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidInput("vector field needs d >= 1 and a finite bound".into()));
        }
        Ok(Self {
            dim,
            bound,
            note: note.into(),
            eval,
        })
    }

    pub fn constant(value: Vec<f64>) -> Result<Self> {
        let bound = value.iter().map(|c| c * c).sum::<f64>().sqrt();
        let dim = value.len();
        Self::new(
            dim,
            bound,
            "constant",
            Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&value)),
        )
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::constant(vec![0.0; dim])
    }

    /// `φ(y) = y_k e_k`; `bound` must dominate `|y_k|` on the support.
    pub fn coordinate(dim: usize, k: usize, bound: f64) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidInput(format!("coordinate {k} out of range for d = {dim}")));
        }
        Self::new(
            dim,
            bound,
            "coordinate projection",
            Arc::new(move |y: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                out[k] = y[k];
            }),
        )
    }

    /// `φ(y) = y`; `bound` must dominate `|y|` on the support.
    pub fn identity(dim: usize, bound: f64) -> Result<Self> {
        Self::new(
            dim,
            bound,
            "identity",
            Arc::new(|y: &[f64], out: &mut [f64]| out.copy_from_slice(y)),
        )
    }

    /// Smooth compactly supported field `direction · ψ(|y - center| / radius)`
    /// with the standard bump `ψ(t) = exp(1 - 1 / (1 - t²))` on `t < 1`.
    pub fn smooth_bump(center: Vec<f64>, radius: f64, direction: Vec<f64>) -> Result<Self> {
        if center.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: direction.len(),
            });
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("bump radius must be positive".into()));
        }
        let bound = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self::new(
            center.len(),
            bound,
            "smooth bump",
            Arc::new(move |y: &[f64], out: &mut [f64]| {
                let r2: f64 = y.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / (radius * radius);
                let w = if r2 < 1.0 { (1.0 - 1.0 / (1.0 - r2)).exp() } else { 0.0 };
                for (o, d) in out.iter_mut().zip(&direction) {
                    *o = w * d;
                }
            }),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        (self.eval)(y, out)
    }

    pub fn eval_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(y, &mut out);
        out
    }

    /// `<v, φ(y)>`.
    pub fn dot(&self, v: &[f64], y: &[f64]) -> f64 {
        let mut buf = [0.0; 8];
        if self.dim <= buf.len() {
            let out = &mut buf[..self.dim];
            self.eval(y, out);
            out.iter().zip(v).map(|(a, b)| a * b).sum()
        } else {
            self.eval_vec(y).iter().zip(v).map(|(a, b)| a * b).sum()
        }
    }

    /// Checks the declared sup-norm bound at the given probe points.
    pub fn respects_bound<'a>(&self, probes: impl IntoIterator<Item = &'a [f64]>) -> bool {
        probes.into_iter().all(|y| {
            let v = self.eval_vec(y);
            v.iter().map(|c| c * c).sum::<f64>().sqrt() <= self.bound * (1.0 + 1e-12)
        })
    }
}
