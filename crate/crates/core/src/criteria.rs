//! Closed-form solvability regions in the `(T+, T-)` plane.
//!
//! For `k > 0` the Cauchy problem is solvable for every operator with
//! `||T+|| = a`, `||T-|| = b` iff `a <= 1` and `b <= 2 sqrt(1 - a)`; for
//! `k < 0` the roles of `a` and `b` swap. The non-singular Cauchy problem
//! needs the strict inequalities `a < 1`, `b < 1 + 2 sqrt(1 - a)`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::space::Extended;

/// Frontier points closer than this (in the margin coordinate) are flagged.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub solvable_for_all: bool,
    pub boundary: bool,
    /// Signed distance to the frontier, positive inside.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionCase {
    Plus,
    Minus,
    Nonsingular,
}

impl RegionCase {
    pub fn name(self) -> &'static str {
        match self {
            RegionCase::Plus => "plus",
            RegionCase::Minus => "minus",
            RegionCase::Nonsingular => "nonsingular",
        }
    }
}

fn check_norms(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return invalid(format!("operator norms must be finite and nonnegative, got ({a}, {b})"));
    }
    Ok(())
}

/// `first <= 1`, `second <= offset + 2 sqrt(1 - first)`, strict or not.
fn verdict(first: f64, second: f64, offset: f64, strict: bool) -> CriterionVerdict {
    let margin = if first > 1.0 { 1.0 - first } else { offset + 2.0 * (1.0 - first).sqrt() - second };
    let boundary = margin.abs() <= BOUNDARY_TOL;
    let solvable_for_all = if strict {
        first < 1.0 && second < offset + 2.0 * (1.0 - first).sqrt()
    } else {
        first <= 1.0 && second <= offset + 2.0 * (1.0 - first).sqrt()
    };
    CriterionVerdict { solvable_for_all, boundary, margin }
}

/// Region for `k > 0` (any admissible `p`).
pub fn solvable_plus(t_plus: f64, t_minus: f64) -> Result<CriterionVerdict> {
    check_norms(t_plus, t_minus)?;
    let mut v = verdict(t_plus, t_minus, 0.0, false);
    v.solvable_for_all |= v.boundary && t_plus <= 1.0;
    Ok(v)
}

/// Region for `k < 0`: the plus region with the norms swapped.
pub fn solvable_minus(t_plus: f64, t_minus: f64) -> Result<CriterionVerdict> {
    check_norms(t_plus, t_minus)?;
    let mut v = verdict(t_minus, t_plus, 0.0, false);
    v.solvable_for_all |= v.boundary && t_minus <= 1.0;
    Ok(v)
}

/// Region for the non-singular Cauchy problem; boundary points are excluded.
pub fn solvable_nonsingular(t_plus: f64, t_minus: f64) -> Result<CriterionVerdict> {
    check_norms(t_plus, t_minus)?;
    let mut v = verdict(t_plus, t_minus, 1.0, true);
    if v.boundary {
        v.solvable_for_all = false;
    }
    Ok(v)
}

/// Weighted criterion `gain < |k|` (strict).
pub fn solvable_weighted(gain: Extended, k: f64) -> Result<CriterionVerdict> {
    if k == 0.0 || !k.is_finite() {
        return invalid("k must be finite and nonzero");
    }
    match gain {
        Extended::Infinite => Ok(CriterionVerdict { solvable_for_all: false, boundary: false, margin: f64::NEG_INFINITY }),
        Extended::Finite(g) => {
            if !(g >= 0.0) {
                return invalid(format!("gain must be nonnegative, got {g}"));
            }
            // the inequality is strict, so a gain numerically on the frontier is refused
            let margin = k.abs() - g;
            let boundary = margin.abs() <= BOUNDARY_TOL;
            Ok(CriterionVerdict { solvable_for_all: g < k.abs() && !boundary, boundary, margin })
        }
    }
}

/// Verdict for the case.
pub fn solvable(case: RegionCase, t_plus: f64, t_minus: f64) -> Result<CriterionVerdict> {
    match case {
        RegionCase::Plus => solvable_plus(t_plus, t_minus),
        RegionCase::Minus => solvable_minus(t_plus, t_minus),
        RegionCase::Nonsingular => solvable_nonsingular(t_plus, t_minus),
    }
}

/// Samples `(T+, T-)` of the frontier for `tau = i/(samples-1)`.
pub fn region_boundary(case: RegionCase, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return invalid("at least two boundary samples are needed");
    }
    let last = (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let tau = i as f64 / last;
            let curve = 2.0 * (1.0 - tau).sqrt();
            match case {
                RegionCase::Plus => (tau, curve),
                RegionCase::Minus => (curve, tau),
                RegionCase::Nonsingular => (tau, 1.0 + curve),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plus_examples() {
        let v = solvable_plus(1.0, 0.0).unwrap();
        assert!(v.solvable_for_all && v.boundary);
        let v = solvable_plus(0.75, 1.0).unwrap();
        assert!(v.solvable_for_all && v.boundary);
        assert!(!solvable_plus(0.5, 1.5).unwrap().solvable_for_all);
        assert!(solvable_plus(-0.1, 0.0).is_err());
    }

    #[test]
    fn minus_examples() {
        let v = solvable_minus(0.0, 1.0).unwrap();
        assert!(v.solvable_for_all && v.boundary);
        let v = solvable_minus(1.0, 0.75).unwrap();
        assert!(v.solvable_for_all && v.boundary);
        assert!(!solvable_minus(2.1, 0.0).unwrap().solvable_for_all);
    }

    #[test]
    fn nonsingular_examples() {
        assert!(solvable_nonsingular(0.5, 2.41).unwrap().solvable_for_all);
        assert!(!solvable_nonsingular(1.0, 0.0).unwrap().solvable_for_all);
        assert!(solvable_nonsingular(0.0, 0.0).unwrap().solvable_for_all);
        let v = solvable_nonsingular(0.0, 3.0).unwrap();
        assert!(v.boundary && !v.solvable_for_all);
    }

    #[test]
    fn weighted_examples() {
        assert!(solvable_weighted(Extended::Finite(0.5), 1.0).unwrap().solvable_for_all);
        assert!(!solvable_weighted(Extended::Finite(1.0), 1.0).unwrap().solvable_for_all);
        assert!(!solvable_weighted(Extended::Finite(1.0 - 1e-13), 1.0).unwrap().solvable_for_all);
        assert!(solvable_weighted(Extended::Finite(0.0), -3.0).unwrap().solvable_for_all);
        assert!(!solvable_weighted(Extended::Infinite, 1.0).unwrap().solvable_for_all);
    }

    #[test]
    fn boundary_samples() {
        let s2 = 2f64.sqrt();
        assert_eq!(region_boundary(RegionCase::Plus, 3).unwrap(), vec![(0.0, 2.0), (0.5, s2), (1.0, 0.0)]);
        assert_eq!(region_boundary(RegionCase::Minus, 3).unwrap(), vec![(2.0, 0.0), (s2, 0.5), (0.0, 1.0)]);
        assert_eq!(region_boundary(RegionCase::Nonsingular, 2).unwrap(), vec![(0.0, 3.0), (1.0, 1.0)]);
        assert!(region_boundary(RegionCase::Plus, 1).is_err());
    }

    proptest! {
        #[test]
        fn duality(a in 0.0f64..3.0, b in 0.0f64..3.0) {
            prop_assert_eq!(solvable_plus(a, b).unwrap(), solvable_minus(b, a).unwrap());
        }

        #[test]
        fn singular_region_inside_nonsingular(a in 0.0f64..0.999, b in 0.0f64..3.0) {
            let s = solvable_plus(a, b).unwrap();
            if s.solvable_for_all && !s.boundary {
                prop_assert!(solvable_nonsingular(a, b).unwrap().solvable_for_all);
            }
        }

        #[test]
        fn antitone(a in 0.0f64..2.0, b in 0.0f64..3.0, da in 0.0f64..0.5, db in 0.0f64..0.5) {
            for case in [RegionCase::Plus, RegionCase::Minus, RegionCase::Nonsingular] {
                let bigger = solvable(case, a + da, b + db).unwrap().solvable_for_all;
                let smaller = solvable(case, a, b).unwrap().solvable_for_all;
                prop_assert!(!bigger || smaller);
            }
        }

        #[test]
        fn boundary_is_monotone(n in 2usize..50) {
            for case in [RegionCase::Plus, RegionCase::Minus, RegionCase::Nonsingular] {
                let pts = region_boundary(case, n).unwrap();
                for w in pts.windows(2) {
                    match case {
                        RegionCase::Minus => prop_assert!(w[1].1 > w[0].1 && w[1].0 <= w[0].0),
                        _ => prop_assert!(w[1].0 > w[0].0 && w[1].1 <= w[0].1),
                    }
                }
            }
        }
    }
}
