//! The model equation `x' = -k p x + f`, the inverse operators `Lambda+-`
//! and the discretised compositions `Lambda T`.
//!
//! Every integral operator here has the form
//! `z -> int w(t,s) rho(s) z(s) ds` with `w(t,s) = x1(t)/x1(s)` over either
//! `[0, t]` or `[t, end]`. On a mesh this is applied with an O(N) recursion:
//! the weight factorises across nodes, so the value at node `m` is the value
//! at the neighbouring node times a per-segment decay plus one segment
//! integral.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::operator::{Deviation, RegularOperator};
use crate::quadrature::{integrate, power_hat_moments};
use crate::space::{SingularCoefficient, WeightFunction};

/// Which of the two model problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    /// `k > 0`, Cauchy condition at 0.
    Plus,
    /// `k < 0`, value prescribed at the right end.
    Minus,
}

impl Sign {
    pub fn of(k: f64) -> Result<Self> {
        if k > 0.0 {
            Ok(Sign::Plus)
        } else if k < 0.0 {
            Ok(Sign::Minus)
        } else {
            invalid("k must be nonzero")
        }
    }

    pub(crate) fn check(self, k: f64) -> Result<()> {
        match self {
            Sign::Plus if !(k > 0.0) => invalid(format!("the plus problem needs k > 0, got {k}")),
            Sign::Minus if !(k < 0.0) => invalid(format!("the minus problem needs k < 0, got {k}")),
            _ if !k.is_finite() => invalid("k must be finite"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `int_0^t`.
    Forward,
    /// `int_t^end`.
    Backward,
}

/// Factor `rho` multiplying the integrand.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Unit,
    /// `p(s)`.
    Coefficient,
    /// `p(s) nu(s)`.
    CoefficientWeighted(WeightFunction),
}

/// Data defining a sweep operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub direction: Direction,
    /// `|k|`.
    pub kappa: f64,
    pub p: SingularCoefficient,
    pub density: Density,
}

/// `exp(-kappa int_lo^hi p)` for `lo <= hi`.
pub(crate) fn decay(p: &SingularCoefficient, kappa: f64, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 1.0;
    }
    if lo <= 0.0 {
        return 0.0;
    }
    if p.is_unit_power() {
        return (lo / hi).powf(kappa);
    }
    (-kappa * p.primitive_value(lo, hi)).exp()
}

/// A sweep discretised on a mesh.
#[derive(Debug, Clone)]
pub struct Sweep {
    direction: Direction,
    decay: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Sweep {
    pub fn build(mesh: &Mesh, spec: &SweepSpec) -> Sweep {
        let t = mesh.nodes();
        let n = t.len();
        let mut dec = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let kappa = spec.kappa;
        let p = &spec.p;
        for m in 1..n {
            let (a, b) = (t[m - 1], t[m]);
            dec[m] = decay(p, kappa, a, b);
            let (lo, up) = match spec.direction {
                Direction::Forward => segment_moments(spec, a, b, b),
                Direction::Backward if a == 0.0 => (0.0, 0.0),
                Direction::Backward => segment_moments(spec, a, b, a),
            };
            lower[m] = lo;
            upper[m] = up;
        }
        Sweep { direction: spec.direction, decay: dec, lower, upper }
    }

    pub fn len(&self) -> usize {
        self.decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay.is_empty()
    }

    /// Node values of the sweep applied to the interpolant of `z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        match self.direction {
            Direction::Forward => {
                for m in 1..n {
                    out[m] = self.decay[m] * out[m - 1] + self.lower[m] * z[m - 1] + self.upper[m] * z[m];
                }
            }
            Direction::Backward => {
                for m in (1..n).rev() {
                    out[m - 1] = self.decay[m] * out[m] + self.lower[m] * z[m - 1] + self.upper[m] * z[m];
                }
            }
        }
        out
    }

    /// Dense matrix of [`Sweep::apply`].
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        match self.direction {
            Direction::Forward => {
                for r in 1..n {
                    for c in 0..r {
                        m[(r, c)] = self.decay[r] * m[(r - 1, c)];
                    }
                    m[(r, r - 1)] += self.lower[r];
                    m[(r, r)] += self.upper[r];
                }
            }
            Direction::Backward => {
                for r in (0..n - 1).rev() {
                    for c in r + 2..n {
                        m[(r, c)] = self.decay[r + 1] * m[(r + 1, c)];
                    }
                    m[(r, r + 1)] = self.decay[r + 1] * m[(r + 1, r + 1)] + self.upper[r + 1];
                    m[(r, r)] += self.lower[r + 1];
                }
            }
        }
        m
    }
}

/// Integrals of the two hat pieces on `[a, b]` against `w rho` with `w` anchored at `anchor`.
fn segment_moments(spec: &SweepSpec, a: f64, b: f64, anchor: f64) -> (f64, f64) {
    let kappa = spec.kappa;
    let p = &spec.p;
    let forward = spec.direction == Direction::Forward;
    if p.is_unit_power() {
        let e = if forward { kappa } else { -kappa };
        match spec.density {
            Density::Unit => return power_hat_moments(e, a, b, anchor),
            Density::Coefficient => {
                let (lo, up) = power_hat_moments(e - 1.0, a, b, anchor);
                return (lo / anchor, up / anchor);
            }
            Density::CoefficientWeighted(_) => {}
        }
    }
    let h = b - a;
    let weight = |s: f64| -> f64 {
        let w = if forward { decay(p, kappa, s, anchor) } else { decay(p, kappa, anchor, s) };
        if w == 0.0 {
            return 0.0;
        }
        match &spec.density {
            Density::Unit => w,
            Density::Coefficient => w * p.eval(s),
            Density::CoefficientWeighted(nu) => w * p.eval(s) * nu.eval(s),
        }
    };
    let lo = integrate(|s| weight(s) * (b - s) / h, a, b);
    let up = integrate(|s| weight(s) * (s - a) / h, a, b);
    (lo, up)
}

/// `x1(t) / x1(end)` on the nodes of `mesh` for the minus problem: `exp(-|k| int_t^end p)`.
pub fn x1_minus_profile(mesh: &Mesh, p: &SingularCoefficient, kappa: f64) -> Vec<f64> {
    let end = mesh.end();
    mesh.nodes().iter().map(|&t| decay(p, kappa, t, end)).collect()
}

fn lambda_spec(sign: Sign, k: f64, p: &SingularCoefficient, density: Density) -> (SweepSpec, f64) {
    let direction = match sign {
        Sign::Plus => Direction::Forward,
        Sign::Minus => Direction::Backward,
    };
    let factor = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    (SweepSpec { direction, kappa: k.abs(), p: p.clone(), density }, factor)
}

/// `Lambda+ z = int_0^t [x1(t)/x1(s)] z(s) ds` or
/// `Lambda- z = -int_t^1 [x1(t)/x1(s)] z(s) ds`, on `z`'s mesh.
pub fn lambda_apply(sign: Sign, k: f64, p: &SingularCoefficient, z: &GridFunction) -> Result<GridFunction> {
    sign.check(k)?;
    let (spec, factor) = lambda_spec(sign, k, p, Density::Unit);
    let sweep = Sweep::build(z.mesh(), &spec);
    let values = sweep.apply(z.values()).into_iter().map(|v| factor * v).collect();
    Ok(GridFunction::from_parts(z.mesh().clone(), values))
}

/// Solution of `x' = -k p x + f`, `x(0) = 0` for `k > 0`, with the value
/// `x(1) = int_0^1 f / x1` that a right-end condition would have to match.
pub fn solve_model_plus(k: f64, p: &SingularCoefficient, f: &GridFunction) -> Result<(GridFunction, f64)> {
    let x = lambda_apply(Sign::Plus, k, p, f)?;
    let end = x.values()[x.values().len() - 1];
    Ok((x, end))
}

/// Solution of `x' = -k p x + f`, `x(1) = c` for `k < 0`.
pub fn solve_model_minus(k: f64, p: &SingularCoefficient, f: &GridFunction, c: f64) -> Result<GridFunction> {
    let lam = lambda_apply(Sign::Minus, k, p, f)?;
    let x1 = x1_minus_profile(f.mesh(), p, k.abs());
    let mut values: Vec<f64> = lam.values().iter().zip(&x1).map(|(l, w)| c * w + l).collect();
    values[0] = 0.0;
    let n = values.len();
    values[n - 1] = c;
    Ok(GridFunction::from_parts(f.mesh().clone(), values))
}

#[derive(Debug, Clone)]
struct RankTerm {
    u: Vec<f64>,
    at: [(usize, f64); 2],
}

/// Discretisation of `z -> factor * S(T z)` on the nodes of a mesh, where `S` is a sweep.
///
/// Point terms with a constant argument become exact rank-one pieces
/// `S(q) x(theta)`, with `S(q)` computed on a mesh that contains the
/// breakpoints of `q`. All other terms are interpolated at the nodes before
/// the sweep.
#[derive(Debug, Clone)]
pub struct Composition {
    mesh: Mesh,
    factor: f64,
    sweep: Sweep,
    rows: Vec<Vec<(usize, f64)>>,
    ranks: Vec<RankTerm>,
}

impl Composition {
    pub fn new(mesh: &Mesh, spec: &SweepSpec, factor: f64, t: &RegularOperator) -> Self {
        let sweep = Sweep::build(mesh, spec);
        let mut ranks = Vec::new();
        let mut rest = RegularOperator::zero();
        for term in t.points() {
            match term.deviation() {
                Deviation::Constant(theta) => {
                    let q = term.coefficient();
                    if q.values().iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let merged = mesh.merged_with(q.mesh().nodes());
                    let fine = if merged == *mesh { sweep.clone() } else { Sweep::build(&merged, spec) };
                    let qv: Vec<f64> = merged.nodes().iter().map(|&s| q.eval(s)).collect();
                    let full = fine.apply(&qv);
                    let u = if merged == *mesh {
                        full
                    } else {
                        mesh.nodes().iter().map(|&s| full[merged.index_of(s).expect("mesh nodes kept")]).collect()
                    };
                    let theta = theta.min(mesh.end());
                    let (j, w) = mesh.locate(theta);
                    ranks.push(RankTerm { u, at: [(j, 1.0 - w), (j + 1, w)] });
                }
                Deviation::Function(_) => rest = rest.with_point(term.clone()),
            }
        }
        for k in t.kernels() {
            rest = rest.with_kernel(k.clone());
        }
        let rows = if rest.is_zero() {
            Vec::new()
        } else {
            mesh.nodes().iter().map(|&ti| rest.functional(ti, mesh)).collect()
        };
        Composition { mesh: mesh.clone(), factor, sweep, rows, ranks }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = if self.rows.is_empty() {
            vec![0.0; n]
        } else {
            let tx: Vec<f64> = self.rows.iter().map(|r| r.iter().map(|&(j, w)| w * x[j]).sum()).collect();
            self.sweep.apply(&tx)
        };
        for r in &self.ranks {
            let xv = r.at[0].1 * x[r.at[0].0] + r.at[1].1 * x[r.at[1].0];
            if xv != 0.0 {
                for (o, u) in out.iter_mut().zip(&r.u) {
                    *o += u * xv;
                }
            }
        }
        for o in &mut out {
            *o *= self.factor;
        }
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        if !self.rows.is_empty() {
            let s = self.sweep.dense();
            let mut r = DMatrix::zeros(n, n);
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, w) in row {
                    r[(i, j)] += w;
                }
            }
            m = s * r;
        }
        for term in &self.ranks {
            for &(j, w) in &term.at {
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    m[(i, j)] += term.u[i] * w;
                }
            }
        }
        m * self.factor
    }

    /// Spectral radius estimate of the discretised composition.
    pub fn spectral_estimate(&self) -> SpectralEstimate {
        let dense = self.dense();
        let norm_bound = (0..dense.nrows()).map(|i| dense.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        if norm_bound == 0.0 {
            return SpectralEstimate { radius: 0.0, norm_bound, converged: true, method: SpectralMethod::PowerIteration };
        }
        if let Some(radius) = power_iteration(|v| self.apply(v), self.dim()) {
            return SpectralEstimate { radius: radius.min(norm_bound), norm_bound, converged: true, method: SpectralMethod::PowerIteration };
        }
        match dense.clone().try_schur(1e-14, 100_000) {
            Some(schur) => {
                let radius = schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
                SpectralEstimate { radius: radius.min(norm_bound), norm_bound, converged: true, method: SpectralMethod::Dense }
            }
            None => SpectralEstimate { radius: norm_bound, norm_bound, converged: false, method: SpectralMethod::NormBound },
        }
    }
}

/// Power iteration from the all-ones vector; `None` when it fails to settle
/// within 500 steps. A two-step ratio catches dominant `+-lambda` pairs.
fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> Option<f64> {
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut v = vec![1.0; n];
    let mut one = f64::NAN;
    let mut two = f64::NAN;
    for _ in 0..500 {
        let w = apply(&v);
        let nw = sup(&w);
        if nw == 0.0 {
            return Some(0.0);
        }
        let w2 = apply(&w);
        let nw2 = sup(&w2);
        let next_one = nw2 / nw;
        let next_two = (nw2 / sup(&v)).sqrt();
        if nw2 == 0.0 {
            return Some(0.0);
        }
        let settled = |old: f64, new: f64| (new - old).abs() <= 1e-10 * new.abs();
        if settled(one, next_one) {
            return Some(next_one);
        }
        if settled(two, next_two) {
            return Some(next_two);
        }
        one = next_one;
        two = next_two;
        v = w2.iter().map(|x| x / nw2).collect();
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectralMethod {
    PowerIteration,
    /// Eigenvalues of the dense matrix after power iteration stalled.
    Dense,
    NormBound,
}

/// Result of a spectral-radius estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub radius: f64,
    /// Maximum absolute row sum of the discretised operator.
    pub norm_bound: f64,
    pub converged: bool,
    pub method: SpectralMethod,
}

impl SpectralEstimate {
    /// `radius` when trusted, the norm bound otherwise.
    pub fn conservative(&self) -> f64 {
        if self.converged {
            self.radius
        } else {
            self.norm_bound
        }
    }
}

/// Spectral radius of the discretised `Lambda T` on `mesh`.
pub fn spectral_radius_estimate(
    sign: Sign,
    k: f64,
    p: &SingularCoefficient,
    t: &RegularOperator,
    mesh: &Mesh,
) -> Result<SpectralEstimate> {
    sign.check(k)?;
    let (spec, factor) = lambda_spec(sign, k, p, Density::Unit);
    Ok(Composition::new(mesh, &spec, factor, t).spectral_estimate())
}

/// The composition `Lambda T` for the sign of `k`.
pub fn lambda_composition(sign: Sign, k: f64, p: &SingularCoefficient, t: &RegularOperator, mesh: &Mesh) -> Result<Composition> {
    sign.check(k)?;
    let (spec, factor) = lambda_spec(sign, k, p, Density::Unit);
    Ok(Composition::new(mesh, &spec, factor, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::PointTerm;
    use approx::assert_abs_diff_eq;

    fn unit() -> SingularCoefficient {
        SingularCoefficient::unit()
    }

    #[test]
    fn model_plus_examples() {
        let m = Mesh::graded(64, 2.0).unwrap();
        let one = GridFunction::constant(&m, 1.0);
        let (x, end) = solve_model_plus(1.0, &unit(), &one).unwrap();
        for (&t, &v) in m.nodes().iter().zip(x.values()) {
            assert_abs_diff_eq!(v, t / 2.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(end, 0.5, epsilon = 1e-14);
        let id = GridFunction::from_fn(&m, |s| s);
        let (x, _) = solve_model_plus(2.0, &unit(), &id).unwrap();
        for (&t, &v) in m.nodes().iter().zip(x.values()) {
            assert_abs_diff_eq!(v, t * t / 4.0, epsilon = 1e-14);
        }
        let (x, end) = solve_model_plus(1.0, &unit(), &GridFunction::zeros(&m)).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
        assert_eq!(end, 0.0);
        assert!(solve_model_plus(-1.0, &unit(), &one).is_err());
    }

    #[test]
    fn model_minus_examples() {
        let m = Mesh::graded(64, 2.0).unwrap();
        let zero = GridFunction::zeros(&m);
        let x = solve_model_minus(-1.0, &unit(), &zero, 1.0).unwrap();
        for (&t, &v) in m.nodes().iter().zip(x.values()) {
            assert_abs_diff_eq!(v, t, epsilon = 1e-15);
        }
        let x = solve_model_minus(-1.0, &unit(), &zero, 0.0).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
        // x = t (0.5 - ln(1/t)) solves x' = x/t + 1, x(1) = 0.5
        let one = GridFunction::constant(&m, 1.0);
        let x = solve_model_minus(-1.0, &unit(), &one, 0.5).unwrap();
        for &t in &m.nodes()[1..] {
            assert_abs_diff_eq!(x.eval(t), t * (0.5 + t.ln()), epsilon = 1e-14);
        }
        assert!(solve_model_minus(1.0, &unit(), &one, 0.5).is_err());
    }

    #[test]
    fn lambda_examples() {
        let m = Mesh::graded(32, 1.0).unwrap();
        let one = GridFunction::constant(&m, 1.0);
        let y = lambda_apply(Sign::Minus, -1.0, &unit(), &one).unwrap();
        for &t in &[0.25, 0.5, 1.0] {
            assert_abs_diff_eq!(y.eval(t), -t * (1.0 / t).ln(), epsilon = 1e-14);
        }
        assert!(lambda_apply(Sign::Minus, 1.0, &unit(), &one).is_err());
        assert!(lambda_apply(Sign::Plus, -1.0, &unit(), &one).is_err());
    }

    #[test]
    fn dense_matches_apply() {
        let m = Mesh::graded(12, 2.0).unwrap();
        let z: Vec<f64> = m.nodes().iter().map(|t| (3.0 * t).cos()).collect();
        for dir in [Direction::Forward, Direction::Backward] {
            for p in [unit(), SingularCoefficient::power_law(1.5).unwrap()] {
                let spec = SweepSpec { direction: dir, kappa: 0.7, p, density: Density::Coefficient };
                let s = Sweep::build(&m, &spec);
                let a = s.apply(&z);
                let b = s.dense() * nalgebra::DVector::from_vec(z.clone());
                for (x, y) in a.iter().zip(b.iter()) {
                    assert_abs_diff_eq!(x, y, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn general_path_agrees_with_closed_form() {
        let m = Mesh::graded(24, 2.0).unwrap();
        let near = SingularCoefficient::power_law(1.0 + 1e-13).unwrap();
        let f = GridFunction::from_fn(&m, |s| 1.0 + s * s);
        for k in [0.5, 1.0, 2.5] {
            let a = lambda_apply(Sign::Plus, k, &unit(), &f).unwrap();
            let b = lambda_apply(Sign::Plus, k, &near, &f).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
            let a = lambda_apply(Sign::Minus, -k, &unit(), &f).unwrap();
            let b = lambda_apply(Sign::Minus, -k, &near, &f).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn spectral_zero_operator() {
        let m = Mesh::graded(16, 2.0).unwrap();
        let e = spectral_radius_estimate(Sign::Plus, 1.0, &unit(), &RegularOperator::zero(), &m).unwrap();
        assert_eq!(e.radius, 0.0);
    }

    #[test]
    fn spectral_half_delay() {
        let m = Mesh::graded(64, 2.0).unwrap();
        let q = GridFunction::constant(&m, 0.5);
        let h = Deviation::Function(GridFunction::from_fn(&m, |t| t / 2.0));
        let t = RegularOperator::zero().with_point(PointTerm::new(q, h).unwrap());
        let e = spectral_radius_estimate(Sign::Plus, 1.0, &unit(), &t, &m).unwrap();
        assert!(e.conservative() < 0.5, "{e:?}");
    }

    #[test]
    fn rank_terms_match_dense() {
        let m = Mesh::graded(10, 1.5).unwrap();
        let q = GridFunction::from_fn(&Mesh::graded(7, 1.0).unwrap(), |t| t - 0.4);
        let t = RegularOperator::zero().with_point(PointTerm::at_point(q, 0.37).unwrap());
        let c = lambda_composition(Sign::Minus, -1.3, &unit(), &t, &m).unwrap();
        let x: Vec<f64> = m.nodes().iter().map(|t| t.sin() + 0.2).collect();
        let a = c.apply(&x);
        let b = c.dense() * nalgebra::DVector::from_vec(x);
        for (u, v) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-14);
        }
    }
}
