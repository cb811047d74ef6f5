//! Regular operators `T = T+ - T-` acting from `C[0,1]` to `L[0,1]`.
//!
//! An operator is a finite sum of point-evaluation terms `q(t) x(h(t))` and
//! kernel terms `int K(t,s) x(s) ds` with a piecewise-bilinear kernel.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::quadrature::integrate;
use crate::space::{Extended, WeightFunction};

/// Argument map `h` of a point term.
#[derive(Debug, Clone, PartialEq)]
pub enum Deviation {
    Constant(f64),
    Function(GridFunction),
}

impl Deviation {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Deviation::Constant(c) => *c,
            Deviation::Function(g) => g.eval(t),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            Deviation::Constant(_) => &[],
            Deviation::Function(g) => g.mesh().nodes(),
        }
    }
}

/// `q(t) x(h(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTerm {
    coefficient: GridFunction,
    deviation: Deviation,
}

impl PointTerm {
    pub fn new(coefficient: GridFunction, deviation: Deviation) -> Result<Self> {
        if coefficient.mesh().end() != 1.0 {
            return invalid("point-term coefficient must be defined on [0, 1]");
        }
        if coefficient.values().iter().any(|v| !v.is_finite()) {
            return invalid("point-term coefficient must be finite");
        }
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        match &deviation {
            Deviation::Constant(c) if !in_range(*c) => {
                return invalid(format!("deviation {c} outside [0, 1]"));
            }
            Deviation::Function(g) => {
                if g.mesh().end() != 1.0 {
                    return invalid("deviation must be defined on [0, 1]");
                }
                if g.values().iter().any(|&v| !in_range(v)) {
                    return invalid("deviation values must lie in [0, 1]");
                }
            }
            _ => {}
        }
        Ok(Self { coefficient, deviation })
    }

    /// `q(t) x(theta)` with constant `theta`.
    pub fn at_point(coefficient: GridFunction, theta: f64) -> Result<Self> {
        Self::new(coefficient, Deviation::Constant(theta))
    }

    pub fn coefficient(&self) -> &GridFunction {
        &self.coefficient
    }

    pub fn deviation(&self) -> &Deviation {
        &self.deviation
    }

    fn with_coefficient(&self, coefficient: GridFunction) -> Self {
        Self { coefficient, deviation: self.deviation.clone() }
    }
}

/// Where a kernel is allowed to be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelSupport {
    Full,
    /// `s <= t`.
    Lower,
    /// `s >= t`.
    Upper,
}

/// `int K(t,s) x(s) ds` with `K` bilinear on `mesh x mesh`, restricted to its support.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTerm {
    mesh: Mesh,
    // row-major, values[i * n + j] = K(t_i, s_j)
    values: Vec<f64>,
    support: KernelSupport,
}

impl KernelTerm {
    pub fn new(mesh: Mesh, values: Vec<f64>, support: KernelSupport) -> Result<Self> {
        let n = mesh.len();
        if mesh.end() != 1.0 {
            return invalid("kernel mesh must cover [0, 1]");
        }
        if values.len() != n * n {
            return invalid(format!("kernel needs {} values, got {}", n * n, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("kernel values must be finite");
        }
        Ok(Self { mesh, values, support })
    }

    pub fn from_fn(mesh: &Mesh, support: KernelSupport, k: impl Fn(f64, f64) -> f64) -> Self {
        let t = mesh.nodes();
        let values = t.iter().flat_map(|&ti| t.iter().map(move |&sj| (ti, sj))).map(|(a, b)| k(a, b)).collect();
        Self { mesh: mesh.clone(), values, support }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> KernelSupport {
        self.support
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect(), support: self.support }
    }

    /// Bilinear interpolant, ignoring the support restriction.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let n = self.mesh.len();
        let (i, w) = self.mesh.locate(t);
        let (j, v) = self.mesh.locate(s);
        let k = |a: usize, b: usize| self.values[a * n + b];
        (1.0 - w) * ((1.0 - v) * k(i, j) + v * k(i, j + 1)) + w * ((1.0 - v) * k(i + 1, j) + v * k(i + 1, j + 1))
    }

    /// Node values of `K(t, .)` on the kernel mesh.
    fn row_at(&self, t: f64) -> Vec<f64> {
        let n = self.mesh.len();
        let (i, w) = self.mesh.locate(t);
        (0..n).map(|j| (1.0 - w) * self.values[i * n + j] + w * self.values[(i + 1) * n + j]).collect()
    }

    fn s_range(&self, t: f64) -> (f64, f64) {
        match self.support {
            KernelSupport::Full => (0.0, 1.0),
            KernelSupport::Lower => (0.0, t),
            KernelSupport::Upper => (t, 1.0),
        }
    }

    /// Weights `w_j` with `int K(t,s) x(s) ds = sum_j w_j x(m_j)` for `x`
    /// piecewise linear on `mesh`. Exact (Simpson on a quadratic integrand).
    pub fn functional(&self, t: f64, mesh: &Mesh) -> Vec<(usize, f64)> {
        let (lo, hi) = self.s_range(t);
        let mut out = Vec::new();
        if hi <= lo {
            return out;
        }
        let row = GridFunction::from_parts(self.mesh.clone(), self.row_at(t));
        let mut cuts: Vec<f64> = self
            .mesh
            .nodes()
            .iter()
            .chain(mesh.nodes())
            .copied()
            .filter(|&s| s > lo && s < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let m = mesh.nodes();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c = 0.5 * (a + b);
            let (j, _) = mesh.locate(c);
            let (ml, mr) = (m[j], m[j + 1]);
            let h = mr - ml;
            let mut wl = 0.0;
            let mut wr = 0.0;
            for (s, sw) in [(a, 1.0), (c, 4.0), (b, 1.0)] {
                let k = row.eval(s) * sw;
                wl += k * (mr - s) / h;
                wr += k * (s - ml) / h;
            }
            let scale = (b - a) / 6.0;
            out.push((j, wl * scale));
            out.push((j + 1, wr * scale));
        }
        compress(out)
    }

    /// `int int K` over the support, exact for the bilinear interpolant.
    fn total_integral(&self) -> f64 {
        let n = self.mesh.len();
        let t = self.mesh.nodes();
        let mut acc = 0.0;
        for i in 0..n - 1 {
            let ht = t[i + 1] - t[i];
            for j in 0..n - 1 {
                let hs = t[j + 1] - t[j];
                let k = |a: usize, b: usize| self.values[a * n + b];
                let corners = [k(i, j), k(i, j + 1), k(i + 1, j), k(i + 1, j + 1)];
                let full = ht * hs * corners.iter().sum::<f64>() / 4.0;
                let cell = match (self.support, i.cmp(&j)) {
                    (KernelSupport::Full, _) => full,
                    (KernelSupport::Lower, std::cmp::Ordering::Greater) => full,
                    (KernelSupport::Upper, std::cmp::Ordering::Less) => full,
                    (KernelSupport::Lower, std::cmp::Ordering::Equal) => {
                        let g = |tt: f64| {
                            let (lo, hi) = (t[j], tt);
                            integrate(|s| self.eval(tt, s), lo, hi)
                        };
                        integrate(g, t[i], t[i + 1])
                    }
                    (KernelSupport::Upper, std::cmp::Ordering::Equal) => {
                        let g = |tt: f64| integrate(|s| self.eval(tt, s), tt, t[j + 1]);
                        integrate(g, t[i], t[i + 1])
                    }
                    _ => 0.0,
                };
                acc += cell;
            }
        }
        acc
    }
}

fn compress(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (j, w) in entries {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => out.push((j, w)),
        }
    }
    out
}

/// Volterra structure of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VolterraClass {
    /// `(Tx)(t)` depends only on `x` on `[0, t]`.
    Volterra,
    /// `(Tx)(t)` depends only on `x` on `[t, 1]`.
    AntiVolterra,
    Neither,
    Both,
}

impl VolterraClass {
    pub fn is_volterra(self) -> bool {
        matches!(self, Self::Volterra | Self::Both)
    }

    pub fn is_anti_volterra(self) -> bool {
        matches!(self, Self::AntiVolterra | Self::Both)
    }
}

/// A finite sum of point and kernel terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegularOperator {
    points: Vec<PointTerm>,
    kernels: Vec<KernelTerm>,
}

impl RegularOperator {
    pub fn new(points: Vec<PointTerm>, kernels: Vec<KernelTerm>) -> Self {
        Self { points, kernels }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_point(mut self, term: PointTerm) -> Self {
        self.points.push(term);
        self
    }

    pub fn with_kernel(mut self, term: KernelTerm) -> Self {
        self.kernels.push(term);
        self
    }

    pub fn points(&self) -> &[PointTerm] {
        &self.points
    }

    pub fn kernels(&self) -> &[KernelTerm] {
        &self.kernels
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|p| p.coefficient.values().iter().all(|&v| v == 0.0))
            && self.kernels.iter().all(|k| k.values.iter().all(|&v| v == 0.0))
    }

    /// Every coefficient multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p.with_coefficient(p.coefficient.scaled(a))).collect(),
            kernels: self.kernels.iter().map(|k| k.map_values(|v| a * v)).collect(),
        }
    }

    /// Positive part `T+` (pointwise sign split of the data).
    pub fn plus(&self) -> Self {
        Self {
            points: self.points.iter().map(|p| p.with_coefficient(p.coefficient.positive_part())).collect(),
            kernels: self.kernels.iter().map(|k| k.map_values(|v| v.max(0.0))).collect(),
        }
    }

    /// Negative part `T-`, so that `T = T+ - T-`.
    pub fn minus(&self) -> Self {
        Self {
            points: self.points.iter().map(|p| p.with_coefficient(p.coefficient.negative_part())).collect(),
            kernels: self.kernels.iter().map(|k| k.map_values(|v| (-v).max(0.0))).collect(),
        }
    }

    /// `|T| = T+ + T-`.
    pub fn abs(&self) -> Self {
        Self {
            points: self.points.iter().map(|p| p.with_coefficient(p.coefficient.abs_value())).collect(),
            kernels: self.kernels.iter().map(|k| k.map_values(f64::abs)).collect(),
        }
    }

    /// Sparse representation of `x -> (Tx)(t)` for `x` piecewise linear on `mesh`.
    pub fn functional(&self, t: f64, mesh: &Mesh) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for p in &self.points {
            let q = p.coefficient.eval(t);
            if q == 0.0 {
                continue;
            }
            let (j, w) = mesh.locate(p.deviation.eval(t));
            out.push((j, q * (1.0 - w)));
            out.push((j + 1, q * w));
        }
        for k in &self.kernels {
            out.extend(k.functional(t, mesh));
        }
        compress(out)
    }

    /// `(Tx)(t)` for a grid function `x`.
    pub fn eval(&self, x: &GridFunction, t: f64) -> f64 {
        self.functional(t, x.mesh()).iter().map(|&(j, w)| w * x.values()[j]).sum()
    }

    /// `Tx` sampled at the nodes of `mesh`.
    pub fn apply_on(&self, x: &GridFunction, mesh: &Mesh) -> GridFunction {
        GridFunction::from_parts(mesh.clone(), mesh.nodes().iter().map(|&t| self.eval(x, t)).collect())
    }

    /// `Tx` sampled at the nodes of `x`'s mesh.
    pub fn apply(&self, x: &GridFunction) -> GridFunction {
        self.apply_on(x, x.mesh())
    }

    /// `T 1` at the nodes of `mesh`.
    pub fn unit_response(&self, mesh: &Mesh) -> GridFunction {
        self.apply_on(&GridFunction::constant(mesh, 1.0), mesh)
    }

    /// `int_0^1 (T 1)`, exact for the term data.
    pub fn unit_integral(&self) -> f64 {
        let points: f64 = self.points.iter().map(|p| p.coefficient.integral()).sum();
        let kernels: f64 = self.kernels.iter().map(KernelTerm::total_integral).sum();
        points + kernels
    }

    /// `(||T+||, ||T-||)` as operators `C -> L`.
    pub fn part_norms(&self) -> (f64, f64) {
        (self.plus().unit_integral(), self.minus().unit_integral())
    }

    /// Node-wise Volterra classification.
    pub fn classify_volterra(&self) -> VolterraClass {
        let mut below = true;
        let mut above = true;
        for p in &self.points {
            let nodes = p.coefficient.mesh().merged_with(p.deviation.breakpoints());
            let t = nodes.nodes();
            for i in 0..t.len() - 1 {
                let (a, b) = (t[i], t[i + 1]);
                if p.coefficient.eval(a) == 0.0 && p.coefficient.eval(b) == 0.0 {
                    continue;
                }
                for s in [a, b] {
                    let h = p.deviation.eval(s);
                    below &= h <= s;
                    above &= h >= s;
                }
            }
        }
        for k in &self.kernels {
            let n = k.mesh.len();
            let nonzero = |i: usize, j: usize| k.values[i * n + j] != 0.0;
            let any_nonzero = k.values.iter().any(|&v| v != 0.0);
            if !any_nonzero {
                continue;
            }
            let lower_clean = (0..n).all(|i| (i + 1..n).all(|j| !nonzero(i, j)));
            let upper_clean = (0..n).all(|i| (0..i).all(|j| !nonzero(i, j)));
            below &= k.support == KernelSupport::Lower || lower_clean && k.support != KernelSupport::Upper;
            above &= k.support == KernelSupport::Upper || upper_clean && k.support != KernelSupport::Lower;
            // a lower kernel that is also upper-clean still lives on the diagonal only
            if k.support == KernelSupport::Lower {
                above = false;
            }
            if k.support == KernelSupport::Upper {
                below = false;
            }
        }
        match (below, above) {
            (true, true) => VolterraClass::Both,
            (true, false) => VolterraClass::Volterra,
            (false, true) => VolterraClass::AntiVolterra,
            (false, false) => VolterraClass::Neither,
        }
    }

    /// Nodes at which the operator data changes slope.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            out.extend_from_slice(p.coefficient.mesh().nodes());
            out.extend_from_slice(p.deviation.breakpoints());
        }
        for k in &self.kernels {
            out.extend_from_slice(k.mesh.nodes());
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `(|T| nu)(t)`.
    pub(crate) fn abs_weight_response(&self, nu: &WeightFunction, t: f64) -> f64 {
        let mut acc = 0.0;
        for p in &self.points {
            acc += p.coefficient.eval(t).abs() * nu.eval(p.deviation.eval(t));
        }
        for k in &self.kernels {
            let (lo, hi) = k.s_range(t);
            let cuts: Vec<f64> = std::iter::once(lo)
                .chain(k.mesh.nodes().iter().copied().filter(|&s| s > lo && s < hi))
                .chain(std::iter::once(hi))
                .collect();
            for w in cuts.windows(2) {
                acc += integrate(|s| k.eval(t, s).abs() * nu.eval(s), w[0], w[1]);
            }
        }
        acc
    }

    /// `vraisup_t (|T| nu)(t) / nu(t)`, sampled on the operator breakpoints plus
    /// a geometric refinement toward 0, together with the extrapolated limit
    /// at 0.
    ///
    /// Returns the marker when the ratio keeps growing toward 0.
    pub fn weighted_gain(&self, nu: &WeightFunction) -> Extended {
        if self.is_zero() {
            return Extended::Finite(0.0);
        }
        let mut samples: Vec<f64> = self.breakpoints().into_iter().filter(|&t| t > 0.0).collect();
        samples.extend(Mesh::default_graded().nodes().iter().copied().filter(|&t| t > 0.0));
        let ratio = |t: f64| self.abs_weight_response(nu, t) / nu.eval(t);
        let mut best = samples.iter().map(|&t| ratio(t)).fold(0.0, f64::max);
        let t0 = samples.iter().copied().fold(1.0, f64::min);
        let near: Vec<f64> = (0..=60).map(|j| ratio(t0 * 2f64.powi(-j))).collect();
        if !near.iter().all(|r| r.is_finite()) {
            return Extended::Infinite;
        }
        if near[60] > 1.5 * near[30] && near[30] > 1.5 * near[0] {
            return Extended::Infinite;
        }
        best = near.iter().copied().fold(best, f64::max);
        if let Some(limit) = limit_at_zero(ratio, nu) {
            best = best.max(limit);
        }
        Extended::Finite(best)
    }
}

/// Limit of `ratio(t)` as `t -> 0`, by polynomial extrapolation in
/// `u = 1 / ln(1/t)` from dyadic samples down to `2^-960`.
///
/// Ratios that approach their limit only logarithmically (logarithmic
/// weights) are analytic in `u`; ratios with power-type corrections are flat
/// in `u` near 0, so both extrapolate well.
fn limit_at_zero(ratio: impl Fn(f64) -> f64, nu: &WeightFunction) -> Option<f64> {
    let mut us = Vec::new();
    let mut rs = Vec::new();
    for j in [60, 120, 240, 480, 720, 960] {
        let t = 2f64.powi(-j);
        let r = ratio(t);
        if nu.eval(t) > 1e-200 && r.is_finite() {
            us.push(1.0 / (j as f64 * std::f64::consts::LN_2));
            rs.push(r);
        }
    }
    if us.len() < 3 {
        return None;
    }
    // Neville's scheme evaluated at u = 0
    let n = us.len();
    for m in 1..n {
        for i in 0..n - m {
            rs[i] = (us[i + m] * rs[i] - us[i] * rs[i + 1]) / (us[i + m] - us[i]);
        }
    }
    rs[0].is_finite().then_some(rs[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_mesh() -> Mesh {
        Mesh::graded(32, 1.0).unwrap()
    }

    fn point(q: f64, h: Deviation) -> PointTerm {
        PointTerm::new(GridFunction::constant(&unit_mesh(), q), h).unwrap()
    }

    fn scaled_argument(b: f64) -> Deviation {
        Deviation::Function(GridFunction::from_fn(&unit_mesh(), |t| b * t))
    }

    #[test]
    fn apply_examples() {
        let m = Mesh::graded(16, 2.0).unwrap();
        let x = GridFunction::from_fn(&m, |t| t);
        let t = RegularOperator::zero().with_point(point(2.0, Deviation::Constant(1.0)));
        assert!(t.apply(&x).values().iter().all(|&v| v == 2.0));
        let t = RegularOperator::zero().with_point(point(1.0, scaled_argument(0.5)));
        for (&ti, &v) in m.nodes().iter().zip(t.apply(&x).values()) {
            assert_abs_diff_eq!(v, ti / 2.0, epsilon = 1e-15);
        }
        let km = Mesh::graded(4, 1.0).unwrap();
        let t = RegularOperator::zero().with_kernel(KernelTerm::from_fn(&km, KernelSupport::Full, |_, _| 1.0));
        for &v in t.apply(&x).values() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn lower_kernel_integrates_up_to_t() {
        let km = Mesh::graded(8, 1.0).unwrap();
        let t = RegularOperator::zero().with_kernel(KernelTerm::from_fn(&km, KernelSupport::Lower, |t, s| t + s));
        let m = Mesh::graded(10, 1.0).unwrap();
        let x = GridFunction::from_fn(&m, |s| s);
        // int_0^t (t + s) s ds = t^3/2 + t^3/3
        for &ti in &[0.0, 0.33, 0.5, 1.0] {
            assert_abs_diff_eq!(t.eval(&x, ti), 5.0 * ti.powi(3) / 6.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn part_norm_examples() {
        let t = RegularOperator::zero()
            .with_point(point(2.0, Deviation::Constant(1.0)))
            .with_point(point(-1.0, scaled_argument(0.5)));
        let (p, n) = t.part_norms();
        assert_abs_diff_eq!(p, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n, 1.0, epsilon = 1e-15);
        assert_eq!(RegularOperator::zero().part_norms(), (0.0, 0.0));
        let q = GridFunction::from_fn(&Mesh::graded(7, 1.0).unwrap(), |t| t - 0.5);
        let t = RegularOperator::zero().with_point(PointTerm::at_point(q, 0.3).unwrap());
        let (p, n) = t.part_norms();
        assert_abs_diff_eq!(p, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(n, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn kernel_norms_respect_support() {
        let km = Mesh::graded(6, 1.0).unwrap();
        let t = RegularOperator::zero().with_kernel(KernelTerm::from_fn(&km, KernelSupport::Lower, |_, _| 1.0));
        assert_abs_diff_eq!(t.part_norms().0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn volterra_examples() {
        let t = RegularOperator::zero().with_point(point(1.0, scaled_argument(0.5)));
        assert_eq!(t.classify_volterra(), VolterraClass::Volterra);
        let t = RegularOperator::zero().with_point(point(1.0, Deviation::Constant(1.0)));
        assert_eq!(t.classify_volterra(), VolterraClass::AntiVolterra);
        let t = RegularOperator::zero().with_point(point(1.0, Deviation::Constant(0.3)));
        assert_eq!(t.classify_volterra(), VolterraClass::Neither);
        let t = RegularOperator::zero().with_point(point(1.0, scaled_argument(1.0)));
        assert_eq!(t.classify_volterra(), VolterraClass::Both);
        let t = RegularOperator::zero().with_point(point(1.0, Deviation::Constant(0.0)));
        assert_eq!(t.classify_volterra(), VolterraClass::Volterra);
    }

    #[test]
    fn weighted_gain_examples() {
        let nu = WeightFunction::power(1.0).unwrap();
        let t = RegularOperator::zero().with_point(point(1.0, scaled_argument(0.5)));
        assert_abs_diff_eq!(t.weighted_gain(&nu).finite().unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(RegularOperator::zero().weighted_gain(&nu), Extended::Finite(0.0));
        let t = RegularOperator::zero().with_point(point(1.0, Deviation::Constant(1.0)));
        assert!(t.weighted_gain(&nu).is_infinite());
        let t = RegularOperator::zero().with_point(point(1.0, Deviation::Constant(1.0)));
        assert!(t.weighted_gain(&WeightFunction::Log).is_infinite());
    }

    #[test]
    fn log_weight_gain_reaches_its_limit() {
        // nu(t/2)/nu(t) = ln(2/t)/ln(4/t) increases to 1 only logarithmically
        for q in [0.5, 1.0] {
            let t = RegularOperator::zero().with_point(point(q, scaled_argument(0.5)));
            let g = t.weighted_gain(&WeightFunction::Log).finite().unwrap();
            assert!((g - q).abs() <= 1e-12, "{g}");
        }
        let nu = WeightFunction::power(0.5).unwrap();
        let t = RegularOperator::zero().with_point(point(1.0, scaled_argument(0.25)));
        assert_abs_diff_eq!(t.weighted_gain(&nu).finite().unwrap(), 0.5, epsilon = 1e-12);
    }
}
