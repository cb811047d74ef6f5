//! Meshes on `[0, end]` and piecewise-linear grid functions.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Default node count for solver meshes.
pub const DEFAULT_NODES: usize = 512;
/// Default grading exponent; resolves `t^|k|` layers at second order for `|k| <= 2`.
pub const DEFAULT_GRADING: f64 = 2.0;

/// Strictly increasing nodes starting at `0`.
///
/// Graded meshes place node `j` at `end * (j / N)^gamma`, so nodes cluster at
/// the singular endpoint `t = 0`.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Arc<[f64]>,
    grading: Option<f64>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes[..] == other.nodes[..]
    }
}

impl Mesh {
    /// Graded mesh on `[0, 1]` with `n` intervals.
    pub fn graded(n: usize, gamma: f64) -> Result<Self> {
        Self::graded_on(n, gamma, 1.0)
    }

    /// Graded mesh on `[0, end]` with `n` intervals.
    pub fn graded_on(n: usize, gamma: f64, end: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("need at least 2 intervals, got {n}")));
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidMesh(format!("grading exponent must be >= 1, got {gamma}")));
        }
        if !(end > 0.0 && end <= 1.0) {
            return Err(Error::InvalidMesh(format!("mesh end must lie in (0, 1], got {end}")));
        }
        let nodes: Vec<f64> = (0..=n)
            .map(|j| {
                if j == n {
                    end
                } else {
                    end * (j as f64 / n as f64).powf(gamma)
                }
            })
            .collect();
        Ok(Self { nodes: nodes.into(), grading: Some(gamma) })
    }

    /// The default solver mesh (`N = 512`, `gamma = 2`).
    pub fn default_graded() -> Self {
        Self::graded(DEFAULT_NODES, DEFAULT_GRADING).expect("default mesh parameters are valid")
    }

    /// Mesh from explicit nodes. The first node must be `0`.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidMesh(format!("first node must be 0, got {}", nodes[0])));
        }
        if nodes.iter().any(|t| !t.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh("nodes must be finite and strictly increasing".into()));
        }
        if *nodes.last().unwrap() > 1.0 {
            return Err(Error::InvalidMesh("nodes must lie in [0, 1]".into()));
        }
        Ok(Self { nodes: nodes.into(), grading: None })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes (`N + 1`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Interval index `i` and local coordinate `w` with
    /// `t = (1 - w) t_i + w t_{i+1}`. Points outside the mesh are clamped.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.intervals();
        if t <= self.nodes[0] {
            return (0, 0.0);
        }
        if t >= self.nodes[n] {
            return (n - 1, 1.0);
        }
        let i = self.nodes.partition_point(|&x| x <= t) - 1;
        let i = i.min(n - 1);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        (i, (t - a) / (b - a))
    }

    /// Sorted union of both node sets restricted to this mesh's domain.
    pub fn merged_with(&self, other: &[f64]) -> Mesh {
        let end = self.end();
        let mut all: Vec<f64> = self
            .nodes
            .iter()
            .copied()
            .chain(other.iter().copied().filter(|&t| t > 0.0 && t < end))
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        if all.len() == self.len() {
            return self.clone();
        }
        Mesh { nodes: all.into(), grading: None }
    }

    /// Position of an exact node value, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.nodes.binary_search_by(|x| x.total_cmp(&t)).ok()
    }
}

/// A continuous piecewise-linear function given by its node values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a mesh with {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid function values must be finite".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&t| f(t)).collect();
        Self { mesh: mesh.clone(), values }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::from_fn(mesh, |_| c)
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// The linear function `a + b t` on the two-node mesh `{0, 1}`.
    pub fn linear(a: f64, b: f64) -> Self {
        let mesh = Mesh::from_nodes(vec![0.0, 1.0]).expect("valid");
        Self { mesh, values: vec![a, a + b] }
    }

    pub(crate) fn from_parts(mesh: Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(mesh.len(), values.len());
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolant at `t`; exact node values at nodes.
    pub fn eval(&self, t: f64) -> f64 {
        let (i, w) = self.mesh.locate(t);
        if w == 0.0 {
            return self.values[i];
        }
        if w == 1.0 {
            return self.values[i + 1];
        }
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// Same function sampled on another mesh (exact when `mesh` refines `self.mesh`).
    pub fn resample(&self, mesh: &Mesh) -> GridFunction {
        GridFunction::from_fn(mesh, |t| self.eval(t))
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `a * self + b * other` on the union of both meshes.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> GridFunction {
        let mesh = if self.mesh == other.mesh {
            self.mesh.clone()
        } else {
            self.mesh.merged_with(other.mesh.nodes())
        };
        GridFunction::from_fn(&mesh, |t| a * self.eval(t) + b * other.eval(t))
    }

    /// Segments `(a, b, f(a), f(b))`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let t = self.mesh.nodes();
        (0..t.len() - 1).map(move |i| (t[i], t[i + 1], self.values[i], self.values[i + 1]))
    }

    /// Segments clipped to `[lo, hi]`.
    pub fn segments_within(&self, lo: f64, hi: f64) -> Vec<(f64, f64, f64, f64)> {
        self.segments()
            .filter(|&(a, b, _, _)| b > lo && a < hi)
            .map(|(a, b, _, _)| {
                let (u, v) = (a.max(lo), b.min(hi));
                (u, v, self.eval(u), self.eval(v))
            })
            .filter(|&(u, v, _, _)| v > u)
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.segments().map(|(a, b, fa, fb)| 0.5 * (b - a) * (fa + fb)).sum()
    }

    /// Integrals of the positive and negative parts, exact for the interpolant.
    pub fn sign_split_integrals(&self) -> (f64, f64) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for (a, b, fa, fb) in self.segments() {
            let h = b - a;
            if fa >= 0.0 && fb >= 0.0 {
                pos += 0.5 * h * (fa + fb);
            } else if fa <= 0.0 && fb <= 0.0 {
                neg -= 0.5 * h * (fa + fb);
            } else {
                // one sign change at the root
                let r = fa / (fa - fb);
                let left = 0.5 * h * r * fa;
                let right = 0.5 * h * (1.0 - r) * fb;
                if fa > 0.0 {
                    pos += left;
                    neg -= right;
                } else {
                    neg -= left;
                    pos += right;
                }
            }
        }
        (pos, neg)
    }

    pub fn l1_norm(&self) -> f64 {
        let (p, n) = self.sign_split_integrals();
        p + n
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|x(end)| + total variation`.
    pub fn ac_norm(&self) -> f64 {
        let tv: f64 = self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        self.values[self.values.len() - 1].abs() + tv
    }

    /// Positive part `max(f, 0)` on a mesh refined at the zero crossings.
    pub fn positive_part(&self) -> GridFunction {
        let mut nodes = Vec::with_capacity(self.values.len() + 4);
        let mut vals = Vec::with_capacity(self.values.len() + 4);
        nodes.push(self.mesh.nodes()[0]);
        vals.push(self.values[0].max(0.0));
        for (a, b, fa, fb) in self.segments() {
            if (fa > 0.0 && fb < 0.0) || (fa < 0.0 && fb > 0.0) {
                let r = fa / (fa - fb);
                let root = a + r * (b - a);
                if root > a && root < b {
                    nodes.push(root);
                    vals.push(0.0);
                }
            }
            nodes.push(b);
            vals.push(fb.max(0.0));
        }
        let mesh = Mesh::from_nodes(nodes).expect("refined nodes stay increasing");
        Self { mesh, values: vals }
    }

    /// `|f|` on a mesh refined at the zero crossings.
    pub fn abs_value(&self) -> GridFunction {
        let mesh = self.positive_part().mesh;
        GridFunction::from_fn(&mesh, |t| self.eval(t).abs())
    }

    /// Negative part `max(-f, 0)`.
    pub fn negative_part(&self) -> GridFunction {
        self.scaled(-1.0).positive_part()
    }
}
