//! Singular coefficients, weights and the norms of the solution spaces.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::quadrature::{improper_at_zero, integrate};

/// A value that may be the explicit `+inf` marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    /// Value as `f64`, mapping the marker to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

/// Tabulated coefficient: piecewise-linear on `[eps, 1]`, `p(eps) (eps/t)^mu` below.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCoefficient {
    table: GridFunction,
    eps: f64,
    tail_mu: f64,
    // int_{t_i}^1 p for every table node
    tail_sums: Vec<f64>,
}

/// The coefficient `p(t) > 0` with a non-integrable singularity at 0.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularCoefficient {
    /// `p(t) = t^-mu`, `mu >= 1`.
    PowerLaw { mu: f64 },
    Tabulated(TabulatedCoefficient),
}

impl SingularCoefficient {
    pub fn power_law(mu: f64) -> Result<Self> {
        if !(mu >= 1.0) || !mu.is_finite() {
            return invalid(format!("power-law exponent must be finite and >= 1, got {mu}"));
        }
        Ok(Self::PowerLaw { mu })
    }

    /// `p(t) = 1/t`.
    pub fn unit() -> Self {
        Self::PowerLaw { mu: 1.0 }
    }

    /// Table on `[nodes[0], 1]` with power-law tail of exponent `tail_mu` below.
    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>, tail_mu: f64) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return invalid("coefficient table needs at least two nodes and matching values");
        }
        let eps = nodes[0];
        if !(eps > 0.0 && eps < 1.0) {
            return invalid("coefficient table must start inside (0, 1)");
        }
        if nodes[nodes.len() - 1] != 1.0 {
            return invalid("coefficient table must end at 1");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("coefficient table nodes must be strictly increasing");
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return invalid("coefficient values must be positive and finite");
        }
        if !(tail_mu >= 1.0) || !tail_mu.is_finite() {
            return invalid("tail exponent must be >= 1 so the integral diverges at 0");
        }
        let mut shifted = Vec::with_capacity(nodes.len() + 1);
        shifted.push(0.0);
        shifted.extend_from_slice(&nodes);
        let mut vals = Vec::with_capacity(values.len() + 1);
        vals.push(values[0]);
        vals.extend_from_slice(&values);
        // the node at 0 is a placeholder; evaluation below eps uses the tail
        let table = GridFunction::new(Mesh::from_nodes(shifted)?, vals)?;
        let n = nodes.len();
        let mut tail_sums = vec![0.0; n];
        for i in (0..n - 1).rev() {
            tail_sums[i] = tail_sums[i + 1] + 0.5 * (nodes[i + 1] - nodes[i]) * (values[i] + values[i + 1]);
        }
        Ok(Self::Tabulated(TabulatedCoefficient { table, eps, tail_mu, tail_sums }))
    }

    pub fn is_unit_power(&self) -> bool {
        matches!(self, Self::PowerLaw { mu } if *mu == 1.0)
    }

    /// Exponent governing the behaviour at 0.
    pub fn singular_exponent(&self) -> f64 {
        match self {
            Self::PowerLaw { mu } => *mu,
            Self::Tabulated(t) => t.tail_mu,
        }
    }

    /// `p(t)` for `t > 0`; `+inf` at 0.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::PowerLaw { mu } => {
                if *mu == 1.0 {
                    1.0 / t
                } else {
                    t.powf(-mu)
                }
            }
            Self::Tabulated(tab) => {
                if t >= tab.eps {
                    tab.table.eval(t)
                } else {
                    tab.table.values()[1] * (tab.eps / t).powf(tab.tail_mu)
                }
            }
        }
    }

    /// `int_s^1 p` for `s > 0`.
    fn potential(tab: &TabulatedCoefficient, s: f64) -> f64 {
        let eps = tab.eps;
        if s >= eps {
            let nodes = &tab.table.mesh().nodes()[1..];
            let vals = &tab.table.values()[1..];
            let i = (nodes.partition_point(|&x| x <= s) - 1).min(nodes.len() - 2);
            let ps = tab.table.eval(s);
            return tab.tail_sums[i + 1] + 0.5 * (nodes[i + 1] - s) * (ps + vals[i + 1]);
        }
        let p0 = tab.table.values()[1];
        let mu = tab.tail_mu;
        let r = (eps / s).ln();
        let tail = if mu == 1.0 { r } else { ((mu - 1.0) * r).exp_m1() / (mu - 1.0) };
        tab.tail_sums[0] + p0 * eps * tail
    }

    /// `int_s^t p` for `0 <= s <= t`, as `f64::INFINITY` when `s = 0 < t`.
    pub(crate) fn primitive_value(&self, s: f64, t: f64) -> f64 {
        if s >= t {
            return 0.0;
        }
        if s <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            Self::PowerLaw { mu } => {
                // ln(s/t) through ln_1p keeps nearby s, t free of cancellation.
                let log_ratio = ((s - t) / t).ln_1p();
                if *mu == 1.0 {
                    -log_ratio
                } else {
                    let e = 1.0 - mu;
                    t.powf(e) * (e * log_ratio).exp_m1() / (mu - 1.0)
                }
            }
            Self::Tabulated(tab) => (Self::potential(tab, s) - Self::potential(tab, t)).max(0.0),
        }
    }

    /// `P(s, t) = int_s^t p` with the `+inf` marker at `s = 0`.
    pub fn primitive(&self, s: f64, t: f64) -> Result<Extended> {
        if !(0.0 <= s && s <= t && t <= 1.0) {
            return invalid(format!("primitive needs 0 <= s <= t <= 1, got s={s}, t={t}"));
        }
        if s == t {
            return Ok(Extended::Finite(0.0));
        }
        if s == 0.0 {
            return Ok(Extended::Infinite);
        }
        Ok(Extended::Finite(self.primitive_value(s, t)))
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            Self::PowerLaw { mu } => format!("t^-{mu}"),
            Self::Tabulated(t) => format!("table on [{}, 1], tail exponent {}", t.eps, t.tail_mu),
        }
    }
}

/// Increasing weight `nu` with `nu(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    /// `t^r`, `r > 0`.
    Power { r: f64 },
    /// `-1 / ln(t/2)`.
    Log,
    Tabulated(GridFunction),
}

impl WeightFunction {
    pub fn power(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return invalid(format!("weight exponent must be positive, got {r}"));
        }
        Ok(Self::Power { r })
    }

    /// The degenerate weight `nu = 1`, for comparisons with unweighted problems.
    pub fn one() -> Self {
        Self::Power { r: 0.0 }
    }

    pub fn tabulated(g: GridFunction) -> Result<Self> {
        if g.values()[0] != 0.0 {
            return invalid("tabulated weight must vanish at 0");
        }
        if g.mesh().end() != 1.0 {
            return invalid("tabulated weight must cover [0, 1]");
        }
        if g.values().windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("tabulated weight must be strictly increasing");
        }
        Ok(Self::Tabulated(g))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Power { r } => t.powf(*r),
            Self::Log => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 / (2.0 / t).ln()
                }
            }
            Self::Tabulated(g) => g.eval(t),
        }
    }

    /// `nu'(t)` for `t > 0`; `None` for tabulated weights.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            Self::Power { r } => Some(r * t.powf(r - 1.0)),
            Self::Log => {
                let v = self.eval(t);
                Some(v * v / t)
            }
            Self::Tabulated(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Power { r } => format!("t^{r}"),
            Self::Log => "-1/ln(t/2)".to_string(),
            Self::Tabulated(_) => "table".to_string(),
        }
    }
}

/// Tags for the spaces used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpaceTag {
    DPlus { k: f64 },
    DMinus { k: f64 },
    Ac,
    C,
    L1,
    LinfPNu,
}

impl SpaceTag {
    /// `D+` for `k > 0`, `D-` for `k < 0`.
    pub fn d_space(k: f64) -> Result<Self> {
        if k > 0.0 {
            Ok(Self::DPlus { k })
        } else if k < 0.0 {
            Ok(Self::DMinus { k })
        } else {
            invalid("k must be nonzero")
        }
    }
}

/// `|x(1)| + int_0^1 |x' + k p x|` for the interpolant.
pub fn d_norm(x: &GridFunction, k: f64, p: &SingularCoefficient) -> Result<Extended> {
    if k == 0.0 || !k.is_finite() {
        return invalid("d_norm needs a finite nonzero k");
    }
    let end_value = x.values()[x.values().len() - 1].abs();
    let mut total = end_value;
    for (i, (a, b, fa, fb)) in x.segments().enumerate() {
        let slope = (fb - fa) / (b - a);
        let g = move |s: f64| {
            let xs = fa + slope * (s - a);
            let drift = if xs == 0.0 { 0.0 } else { k * p.eval(s) * xs };
            (slope + drift).abs()
        };
        if i == 0 && a == 0.0 {
            match improper_at_zero(g, b) {
                Extended::Finite(v) => total += v,
                Extended::Infinite => return Ok(Extended::Infinite),
            }
        } else {
            total += integrate(g, a, b);
        }
    }
    Ok(Extended::Finite(total))
}

/// Why a function fails the membership test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NonMembership {
    NonzeroAtOrigin,
    DivergentIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Member,
    NotMember(NonMembership),
}

impl Membership {
    pub fn is_member(self) -> bool {
        self == Membership::Member
    }
}

/// `int_0^1 |x(t)|/t dt` for the interpolant, exact per segment.
pub fn wac0_integral(x: &GridFunction) -> Extended {
    if x.values()[0] != 0.0 {
        return Extended::Infinite;
    }
    let abs = x.abs_value();
    let mut total = 0.0;
    for (a, b, fa, fb) in abs.segments() {
        let slope = (fb - fa) / (b - a);
        if a == 0.0 {
            total += slope * b;
        } else {
            // int (fa + slope (s - a)) / s ds
            total += (fa - slope * a) * (b / a).ln() + slope * (b - a);
        }
    }
    Extended::Finite(total)
}

/// Membership in the set of functions with `x(0) = 0` and `int |x|/t < inf`.
pub fn wac0_membership(x: &GridFunction) -> Membership {
    if x.values()[0] != 0.0 {
        return Membership::NotMember(NonMembership::NonzeroAtOrigin);
    }
    match wac0_integral(x) {
        Extended::Finite(_) => Membership::Member,
        Extended::Infinite => Membership::NotMember(NonMembership::DivergentIntegral),
    }
}

/// Membership test for a function given in closed form on `[0, 1]`.
///
/// The integral near 0 uses the dyadic-shell divergence test of
/// [`improper_at_zero`].
pub fn wac0_membership_fn(x: impl Fn(f64) -> f64) -> Membership {
    if x(0.0) != 0.0 {
        return Membership::NotMember(NonMembership::NonzeroAtOrigin);
    }
    match improper_at_zero(|t| x(t).abs() / t, 1.0) {
        Extended::Finite(_) => Membership::Member,
        Extended::Infinite => Membership::NotMember(NonMembership::DivergentIntegral),
    }
}

/// `||x||_AC - 2 ||x||_D`; nonpositive on the solution spaces.
pub fn embedding_defect(x: &GridFunction, k: f64, p: &SingularCoefficient) -> Result<Extended> {
    Ok(match d_norm(x, k, p)? {
        Extended::Finite(d) => Extended::Finite(x.ac_norm() - 2.0 * d),
        Extended::Infinite => Extended::Infinite,
    })
}

fn running_mean_pieces(f: &GridFunction) -> Vec<(f64, f64, f64, f64, f64)> {
    // (a, b, F(a), f(a), slope) with F the running integral
    let mut out = Vec::new();
    let mut acc = 0.0;
    for (a, b, fa, fb) in f.segments() {
        let slope = (fb - fa) / (b - a);
        out.push((a, b, acc, fa, slope));
        acc += 0.5 * (b - a) * (fa + fb);
    }
    out
}

fn running_mean(piece: (f64, f64, f64, f64, f64), t: f64) -> f64 {
    let (a, _, big_f, fa, slope) = piece;
    let d = t - a;
    let integral = big_f + fa * d + 0.5 * slope * d * d;
    if t == 0.0 {
        fa
    } else {
        integral / t
    }
}

/// `int_0^1 |(1/t) int_0^t f|`, the L1 norm of the Cesaro mean.
pub fn cesaro_l1(f: &GridFunction) -> f64 {
    running_mean_pieces(f)
        .into_iter()
        .map(|pc| integrate(|t| running_mean(pc, t).abs(), pc.0, pc.1))
        .sum()
}

/// Both sides of the Hardy inequality with exponent 2:
/// `(int_0^1 ((1/t) int_0^t |f|)^2, 4 int_0^1 f^2)`.
pub fn hardy_sides(f: &GridFunction) -> (f64, f64) {
    let abs = f.abs_value();
    let lhs = running_mean_pieces(&abs)
        .into_iter()
        .map(|pc| integrate(|t| running_mean(pc, t).powi(2), pc.0, pc.1))
        .sum();
    let rhs: f64 = f
        .segments()
        .map(|(a, b, fa, fb)| (b - a) * (fa * fa + fa * fb + fb * fb) / 3.0)
        .sum();
    (lhs, 4.0 * rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn primitive_examples() {
        let p1 = SingularCoefficient::unit();
        assert_abs_diff_eq!(p1.primitive(0.25, 1.0).unwrap().finite().unwrap(), 4f64.ln(), epsilon = 1e-15);
        assert_eq!(p1.primitive(0.3, 0.3).unwrap(), Extended::Finite(0.0));
        let p2 = SingularCoefficient::power_law(2.0).unwrap();
        assert_abs_diff_eq!(p2.primitive(0.5, 1.0).unwrap().finite().unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(p2.primitive(0.0, 1.0).unwrap(), Extended::Infinite);
        assert!(p2.primitive(0.6, 0.5).is_err());
        assert!(SingularCoefficient::power_law(0.5).is_err());
    }

    #[test]
    fn tabulated_primitive_matches_power_law_on_table() {
        // a table of 1/t on a fine grid with a unit tail
        let nodes: Vec<f64> = (0..=2000).map(|i| 0.01 + 0.99 * i as f64 / 2000.0).collect();
        let vals: Vec<f64> = nodes.iter().map(|t| 1.0 / t).collect();
        let tab = SingularCoefficient::tabulated(nodes, vals, 1.0).unwrap();
        let got = tab.primitive(0.001, 1.0).unwrap().finite().unwrap();
        assert_abs_diff_eq!(got, 1000f64.ln(), epsilon = 1e-3);
        assert_abs_diff_eq!(tab.eval(0.001), 1000.0, epsilon = 1e-9);
        assert!(SingularCoefficient::tabulated(vec![0.1, 1.0], vec![1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn d_norm_examples() {
        let m = Mesh::graded(64, 2.0).unwrap();
        let p = SingularCoefficient::unit();
        let id = GridFunction::from_fn(&m, |t| t);
        assert_abs_diff_eq!(d_norm(&id, 1.0, &p).unwrap().finite().unwrap(), 3.0, epsilon = 1e-12);
        let zero = GridFunction::zeros(&m);
        assert_eq!(d_norm(&zero, 1.0, &p).unwrap(), Extended::Finite(0.0));
        let m = Mesh::graded(512, 1.0).unwrap();
        let sq = GridFunction::from_fn(&m, |t| t * t);
        assert_abs_diff_eq!(d_norm(&sq, -1.0, &p).unwrap().finite().unwrap(), 1.5, epsilon = 1e-5);
        assert!(d_norm(&sq, 0.0, &p).is_err());
        let one = GridFunction::constant(&m, 1.0);
        assert!(d_norm(&one, 1.0, &p).unwrap().is_infinite());
    }

    #[test]
    fn membership_examples() {
        let m = Mesh::graded(32, 2.0).unwrap();
        let id = GridFunction::from_fn(&m, |t| t);
        assert!(wac0_membership(&id).is_member());
        assert_abs_diff_eq!(wac0_integral(&id).finite().unwrap(), 1.0, epsilon = 1e-14);
        let one = GridFunction::constant(&m, 1.0);
        assert_eq!(wac0_membership(&one), Membership::NotMember(NonMembership::NonzeroAtOrigin));
        let log = WeightFunction::Log;
        assert_eq!(
            wac0_membership_fn(|t| log.eval(t)),
            Membership::NotMember(NonMembership::DivergentIntegral)
        );
        assert!(wac0_membership_fn(|t| t.sqrt()).is_member());
    }

    #[test]
    fn embedding_defect_example() {
        let m = Mesh::graded(16, 2.0).unwrap();
        let id = GridFunction::from_fn(&m, |t| t);
        let p = SingularCoefficient::unit();
        assert_abs_diff_eq!(embedding_defect(&id, 1.0, &p).unwrap().finite().unwrap(), -4.0, epsilon = 1e-12);
        let zero = GridFunction::zeros(&m);
        assert_eq!(embedding_defect(&zero, -1.0, &p).unwrap(), Extended::Finite(0.0));
    }

    #[test]
    fn log_weight_solves_its_equation() {
        let nu = WeightFunction::Log;
        for &t in &[0.01, 0.3, 0.9] {
            let h = 1e-6 * t;
            let fd = (nu.eval(t + h) - nu.eval(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(nu.derivative(t).unwrap(), fd, epsilon = 1e-6);
            assert_abs_diff_eq!(fd, nu.eval(t).powi(2) / t, epsilon = 1e-6);
        }
    }

    #[test]
    fn cesaro_mean_grows_logarithmically() {
        let mut prev = 0.0;
        for &n in &[10usize, 100, 1000] {
            let w = 1.0 / n as f64;
            let m = Mesh::from_nodes(vec![0.0, w, w * 1.001, 1.0]).unwrap();
            let f = GridFunction::new(m, vec![n as f64, n as f64, 0.0, 0.0]).unwrap();
            let v = cesaro_l1(&f);
            assert!((v - (1.0 + (n as f64).ln())).abs() < 0.01, "n={n}: {v}");
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn hardy_example() {
        let m = Mesh::graded(64, 1.0).unwrap();
        let f = GridFunction::from_fn(&m, |t| (7.0 * t).sin());
        let (lhs, rhs) = hardy_sides(&f);
        assert!(lhs <= rhs);
    }
}
