//! Two-point extremal problems behind the sharp regions.
//!
//! Solvability for every operator with given part norms reduces to the
//! two-point problems `x' = -(k/t) x + p1(t) x(t1) + p2(t) x(t2)` and the sign
//! of their 2x2 determinant `Delta`. Concentrating the masses of `p1`, `p2`
//! at the ends of the intervals cut by `t1`, `t2` gives the lower envelope
//! `Delta_1`, a function of finitely many parameters that is minimised here
//! by grid search.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::model::Sign;
use crate::operator::{PointTerm, RegularOperator};
use crate::quadrature::{integrate_power_weighted, integrate_ratio_weighted};
use crate::space::SingularCoefficient;

/// Which end of its interval a concentrated mass sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Concentration {
    Left,
    Right,
}

/// A point of the concentrated family.
///
/// For `k > 0` the masses `t1_*` live on `[0, t1]` and `t2_*` on `[t1, t2]`;
/// for `k < 0` they live on `[t1, t2]` and `(t2, 1]`. The concentration
/// choices place the masses that enter `K+` and `K-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointConfig {
    pub t1: f64,
    pub t2: f64,
    pub t1_plus: f64,
    pub t2_plus: f64,
    pub t1_minus: f64,
    pub t2_minus: f64,
    pub k_plus: Concentration,
    pub k_minus: Concentration,
}

impl TwoPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.t1 && self.t1 < self.t2 && self.t2 <= 1.0) {
            return invalid(format!("need 0 <= t1 < t2 <= 1, got t1={}, t2={}", self.t1, self.t2));
        }
        let masses = [self.t1_plus, self.t2_plus, self.t1_minus, self.t2_minus];
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return invalid("masses must be finite and nonnegative");
        }
        Ok(())
    }

    /// `(T+, T-)` carried by the configuration.
    pub fn norms(&self) -> (f64, f64) {
        (self.t1_plus + self.t2_plus, self.t1_minus + self.t2_minus)
    }

    /// `(K+, K-)` for the case.
    pub fn k_values(&self, sign: Sign, k: f64) -> (f64, f64) {
        match sign {
            Sign::Plus => {
                let kp = if self.k_plus == Concentration::Right { self.t1_plus } else { 0.0 };
                let km = if self.k_minus == Concentration::Right { self.t1_minus } else { 0.0 };
                (kp, km)
            }
            Sign::Minus => {
                let far = self.t2.powf(k.abs());
                let kp = if self.k_plus == Concentration::Right { far } else { 1.0 };
                let km = if self.k_minus == Concentration::Right { far } else { 1.0 };
                (kp, km)
            }
        }
    }
}

fn ratio(t1: f64, t2: f64, k: f64) -> f64 {
    if t1 == 0.0 {
        0.0
    } else {
        (t1 / t2).powf(k.abs())
    }
}

/// Closed-form `Delta_1` of the configuration.
pub fn delta1(sign: Sign, k: f64, cfg: &TwoPointConfig) -> Result<f64> {
    sign.check(k)?;
    cfg.validate()?;
    let (kp, km) = cfg.k_values(sign, k);
    let r = ratio(cfg.t1, cfg.t2, k);
    let det = |a: f64, b: f64, c: f64, d: f64| a * d - b * c;
    Ok(match sign {
        Sign::Plus => det(1.0 - kp, km, -r * kp + cfg.t2_minus, r * km + 1.0 - cfg.t2_plus),
        Sign::Minus => det(
            1.0 - cfg.t1_minus + r * cfg.t2_plus * kp,
            cfg.t1_plus - r * cfg.t2_minus * km,
            cfg.t2_plus * kp,
            1.0 - cfg.t2_minus * km,
        ),
    })
}

/// The extremal configuration from the proofs, attaining `1 - a - b^2/4`.
pub fn extremal_config(sign: Sign, t_plus: f64, t_minus: f64) -> TwoPointConfig {
    match sign {
        Sign::Plus => TwoPointConfig {
            t1: 0.0,
            t2: 1.0,
            t1_plus: 0.0,
            t2_plus: t_plus,
            t1_minus: t_minus / 2.0,
            t2_minus: t_minus / 2.0,
            k_plus: Concentration::Left,
            k_minus: Concentration::Right,
        },
        Sign::Minus => TwoPointConfig {
            t1: 0.0,
            t2: 0.5,
            t1_plus: t_plus / 2.0,
            t2_plus: t_plus / 2.0,
            t1_minus: 0.0,
            t2_minus: t_minus,
            k_plus: Concentration::Left,
            k_minus: Concentration::Left,
        },
    }
}

/// `1 - T+ - (T-)^2/4` for plus, `1 - T- - (T+)^2/4` for minus.
pub fn closed_form_minimum(sign: Sign, t_plus: f64, t_minus: f64) -> f64 {
    match sign {
        Sign::Plus => 1.0 - t_plus - t_minus * t_minus / 4.0,
        Sign::Minus => 1.0 - t_minus - t_plus * t_plus / 4.0,
    }
}

/// The full determinant for explicit `p1`, `p2` and `p = 1/t`.
///
/// `p1`, `p2` must be finite on `[0, 1]`.
pub fn delta_full(sign: Sign, k: f64, p1: &GridFunction, p2: &GridFunction, t1: f64, t2: f64) -> Result<f64> {
    sign.check(k)?;
    if !(0.0 <= t1 && t1 < t2 && t2 <= 1.0) {
        return invalid(format!("need 0 <= t1 < t2 <= 1, got t1={t1}, t2={t2}"));
    }
    check_admissible(p1, p2)?;
    let unit = SingularCoefficient::unit();
    let e = |t: f64, q: &GridFunction| -> Result<f64> {
        match sign {
            Sign::Plus => integrate_power_weighted(q, k, t),
            Sign::Minus => integrate_ratio_weighted(q, &unit, k, t, 1.0, t),
        }
    };
    let (a11, a12, a21, a22) = (e(t1, p1)?, e(t1, p2)?, e(t2, p1)?, e(t2, p2)?);
    Ok(match sign {
        Sign::Plus => (1.0 - a11) * (1.0 - a22) - a12 * a21,
        Sign::Minus => (1.0 + a11) * (1.0 + a22) - a12 * a21,
    })
}

fn check_admissible(p1: &GridFunction, p2: &GridFunction) -> Result<()> {
    // With p+ = p1+ + p2+ and p- = p1- + p2- the bounds -p- <= p_i <= p+ hold
    // pointwise, so only the domain and finiteness can fail.
    for (name, q) in [("p1", p1), ("p2", p2)] {
        if q.values().iter().any(|v| !v.is_finite()) {
            return invalid(format!("{name} has non-finite values"));
        }
        let n = q.mesh().nodes();
        if n[0] != 0.0 || n[n.len() - 1] != 1.0 {
            return invalid(format!("{name} must be defined on [0, 1]"));
        }
    }
    Ok(())
}

/// Result of the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta1Minimum {
    pub min_value: f64,
    pub argmin: TwoPointConfig,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key {
    i1: usize,
    i2: usize,
    kp: Concentration,
    km: Concentration,
    sp: usize,
    sm: usize,
}

impl Key {
    fn tuple(&self) -> (usize, usize, Concentration, Concentration, usize, usize) {
        (self.i1, self.i2, self.kp, self.km, self.sp, self.sm)
    }
}

fn config_of(key: &Key, r: usize, t_plus: f64, t_minus: f64) -> TwoPointConfig {
    let rf = r as f64;
    let t1_plus = t_plus * key.sp as f64 / rf;
    let t1_minus = t_minus * key.sm as f64 / rf;
    TwoPointConfig {
        t1: key.i1 as f64 / rf,
        t2: key.i2 as f64 / rf,
        t1_plus,
        t2_plus: t_plus - t1_plus,
        t1_minus,
        t2_minus: t_minus - t1_minus,
        k_plus: key.kp,
        k_minus: key.km,
    }
}

const CHOICES: [Concentration; 2] = [Concentration::Left, Concentration::Right];

fn better(a: (f64, Key), b: (f64, Key)) -> (f64, Key) {
    if b.0 < a.0 || (b.0 == a.0 && b.1.tuple() < a.1.tuple()) {
        b
    } else {
        a
    }
}

/// Minimum of `Delta_1` over the grid `t = i/R`, mass splits in steps of
/// `1/R` and all concentration choices.
///
/// `Delta_1` is a sum of a term depending only on the `T+` split and a term
/// depending only on the `T-` split, so for each `(t1, t2, K)` cell the two
/// splits are minimised one after the other; this visits the same minimum
/// as the full nested enumeration at a cost of `O(R^3)`.
pub fn minimize_delta1(sign: Sign, k: f64, t_plus: f64, t_minus: f64, resolution: usize) -> Result<Delta1Minimum> {
    sign.check(k)?;
    if resolution < 8 {
        return invalid("grid resolution must be at least 8");
    }
    if !(t_plus >= 0.0 && t_minus >= 0.0) {
        return invalid("operator norms must be nonnegative");
    }
    let r = resolution;
    let eval = |key: &Key| delta1(sign, k, &config_of(key, r, t_plus, t_minus)).expect("grid configurations are valid");
    let best = (0..r)
        .into_par_iter()
        .map(|i1| {
            let mut local: Option<(f64, Key)> = None;
            for i2 in i1 + 1..=r {
                for kp in CHOICES {
                    for km in CHOICES {
                        let mut key = Key { i1, i2, kp, km, sp: 0, sm: 0 };
                        let mut cell = (eval(&key), key);
                        for sp in 1..=r {
                            key.sp = sp;
                            cell = better(cell, (eval(&key), key));
                        }
                        key.sp = cell.1.sp;
                        for sm in 1..=r {
                            key.sm = sm;
                            cell = better(cell, (eval(&key), key));
                        }
                        local = Some(match local {
                            None => cell,
                            Some(l) => better(l, cell),
                        });
                    }
                }
            }
            local.expect("every row has a cell")
        })
        .reduce_with(better)
        .expect("grid is nonempty");
    Ok(Delta1Minimum { min_value: best.0, argmin: config_of(&best.1, r, t_plus, t_minus) })
}

/// Full nested enumeration; `O(R^6)`, used to cross-check [`minimize_delta1`].
pub fn minimize_delta1_exhaustive(sign: Sign, k: f64, t_plus: f64, t_minus: f64, resolution: usize) -> Result<Delta1Minimum> {
    sign.check(k)?;
    let r = resolution;
    let mut best: Option<(f64, Key)> = None;
    for i1 in 0..r {
        for i2 in i1 + 1..=r {
            for kp in CHOICES {
                for km in CHOICES {
                    for sp in 0..=r {
                        for sm in 0..=r {
                            let key = Key { i1, i2, kp, km, sp, sm };
                            let v = delta1(sign, k, &config_of(&key, r, t_plus, t_minus))?;
                            best = Some(match best {
                                None => (v, key),
                                Some(b) => better(b, (v, key)),
                            });
                        }
                    }
                }
            }
        }
    }
    let best = best.expect("grid is nonempty");
    Ok(Delta1Minimum { min_value: best.0, argmin: config_of(&best.1, r, t_plus, t_minus) })
}

/// Two-point operator `q1(t) x(t1) + q2(t) x(t2)` realising a configuration.
#[derive(Debug, Clone)]
pub struct WitnessOperator {
    pub operator: RegularOperator,
    pub q1: GridFunction,
    pub q2: GridFunction,
    /// Evaluation point actually used for `t1` (positive even when `t1 = 0`).
    pub t1: f64,
    pub t2: f64,
}

impl WitnessOperator {
    /// `Delta` of the witness.
    pub fn delta_full(&self, sign: Sign, k: f64) -> Result<f64> {
        delta_full(sign, k, &self.q1, &self.q2, self.t1, self.t2)
    }
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    lo: f64,
    hi: f64,
    mass: f64,
}

fn bump_left_of(c: f64, eps: f64, mass: f64) -> Bump {
    Bump { lo: c - eps, hi: c, mass }
}

fn bump_right_of(c: f64, eps: f64, mass: f64) -> Bump {
    Bump { lo: c, hi: c + eps, mass }
}

/// Signed sum of triangular bumps as a grid function on `[0, 1]`.
fn bumps_to_grid(bumps: &[(Bump, f64)]) -> Result<GridFunction> {
    let live: Vec<(Bump, f64)> = bumps.iter().copied().filter(|(b, _)| b.mass > 0.0).collect();
    for (i, (a, _)) in live.iter().enumerate() {
        if a.lo < -1e-15 || a.hi > 1.0 + 1e-15 {
            return invalid(format!("bump [{}, {}] does not fit in [0, 1]", a.lo, a.hi));
        }
        for (b, _) in &live[i + 1..] {
            if a.lo < b.hi && b.lo < a.hi {
                return invalid(format!("bumps [{}, {}] and [{}, {}] overlap", a.lo, a.hi, b.lo, b.hi));
            }
        }
    }
    let mut nodes = vec![0.0, 1.0];
    for (b, _) in &live {
        nodes.extend([b.lo.max(0.0), 0.5 * (b.lo + b.hi), b.hi.min(1.0)]);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mesh = Mesh::from_nodes(nodes)?;
    let values = mesh
        .nodes()
        .iter()
        .map(|&t| {
            live.iter()
                .map(|(b, s)| {
                    let c = 0.5 * (b.lo + b.hi);
                    let half = 0.5 * (b.hi - b.lo);
                    let height = b.mass / half;
                    s * height * (1.0 - ((t - c) / half).abs()).max(0.0)
                })
                .sum()
        })
        .collect();
    GridFunction::new(mesh, values)
}

/// Bumps of width `eps` placed where the configuration concentrates its masses.
///
/// When `t1 = 0` the first evaluation point is moved to `sqrt(eps)` so that
/// `x(t1)` does not vanish identically; the bumps sit inside the interval
/// they belong to, on the side named by the concentration choice.
pub fn build_witness(sign: Sign, k: f64, cfg: &TwoPointConfig, eps: f64) -> Result<WitnessOperator> {
    sign.check(k)?;
    cfg.validate()?;
    if !(eps > 0.0 && eps < 0.5) {
        return invalid("bump width must lie in (0, 0.5)");
    }
    let t1 = if cfg.t1 == 0.0 { eps.sqrt().min(0.5 * cfg.t2) } else { cfg.t1 };
    let t2 = cfg.t2;
    let (q1, q2) = match sign {
        Sign::Plus => {
            let first = |c: Concentration, m: f64| match c {
                Concentration::Left => bump_right_of(0.0, eps, m),
                Concentration::Right => bump_left_of(t1, eps, m),
            };
            let p1_plus = first(cfg.k_plus, cfg.t1_plus);
            let p1_minus = first(cfg.k_minus, cfg.t1_minus);
            let p2_plus = bump_left_of(t2, eps, cfg.t2_plus);
            let p2_minus = bump_left_of(t2, eps, cfg.t2_minus);
            (
                bumps_to_grid(&[(p1_plus, 1.0), (p2_minus, -1.0)])?,
                bumps_to_grid(&[(p1_minus, -1.0), (p2_plus, 1.0)])?,
            )
        }
        Sign::Minus => {
            let second = |c: Concentration, m: f64| match c {
                Concentration::Left => bump_right_of(t2, eps, m),
                Concentration::Right => bump_left_of(1.0, eps, m),
            };
            let p1_plus = bump_right_of(t1, eps, cfg.t1_plus);
            let p1_minus = bump_right_of(t1, eps, cfg.t1_minus);
            let p2_plus = second(cfg.k_plus, cfg.t2_plus);
            let p2_minus = second(cfg.k_minus, cfg.t2_minus);
            (
                bumps_to_grid(&[(p1_minus, -1.0), (p2_plus, 1.0)])?,
                bumps_to_grid(&[(p1_plus, 1.0), (p2_minus, -1.0)])?,
            )
        }
    };
    let mut operator = RegularOperator::zero();
    for (q, at) in [(&q1, t1), (&q2, t2)] {
        if q.values().iter().any(|&v| v != 0.0) {
            operator = operator.with_point(PointTerm::at_point(q.clone(), at)?);
        }
    }
    Ok(WitnessOperator { operator, q1, q2, t1, t2 })
}
