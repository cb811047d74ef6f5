//! Solvers for the full problems
//!
//! - `x' = -k p x + T x + f`, `x(0) = 0` with `k > 0`;
//! - `x' = -k p x + T x + f`, `x(1) = c` with `k < 0`,
//!
//! written as `x = Lambda T x + g` and solved on the nodes of the mesh of `f`
//! by Picard iteration, falling back to dense collocation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::model::{lambda_apply, lambda_composition, x1_minus_profile, Composition, Sign, SpectralEstimate};
use crate::operator::{RegularOperator, VolterraClass};
use crate::space::{SingularCoefficient, SpaceTag};

/// Which solver path to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum SolveMode {
    /// Picard when it is known to converge, collocation otherwise.
    #[default]
    Auto,
    Picard,
    Collocation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub mode: SolveMode,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, mode: SolveMode::Auto, max_iterations: 10_000 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// How the reported solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolvePath {
    Picard { iterations: usize },
    /// Picard on growing blocks of nodes followed by a global pass.
    PicardBlocks { iterations: usize },
    Collocation,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFunction,
    /// L1 norm of `x - Lambda T x - g` on the mesh.
    pub residual_l1: f64,
    pub path: SolvePath,
    /// Only set on the collocation path.
    pub min_singular_value: Option<f64>,
    pub determinant_sign: Option<i8>,
    pub converged: bool,
    pub space_tag: SpaceTag,
    pub volterra: VolterraClass,
    /// Estimate used to choose the path, when one was needed.
    pub spectral: Option<SpectralEstimate>,
    /// `x(1)` for the plus problem.
    pub end_value: f64,
    /// Set when Picard hit the iteration cap before falling back.
    pub picard_cap_hit: bool,
}

/// Conditioning of the dense `I - Lambda T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollocationDiagnostic {
    pub matrix_dim: usize,
    pub min_singular_value: f64,
    pub determinant_sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Blocks {
    None,
    Prefix,
    Suffix,
}

fn sup_diff(a: &[f64], b: &[f64], range: std::ops::Range<usize>) -> f64 {
    range.map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

/// Picard iteration; returns the iterate and the iteration count, or `None` at the cap.
fn picard(comp: &Composition, g: &[f64], blocks: Blocks, tol: f64, cap: usize) -> Option<(Vec<f64>, usize)> {
    let n = g.len();
    let stop = tol / 10.0;
    let mut x = vec![0.0; n];
    let mut used = 0;
    let ranges: Vec<std::ops::Range<usize>> = match blocks {
        Blocks::None => Vec::new(),
        Blocks::Prefix => (1..=8).map(|b| 0..(b * n).div_ceil(8)).collect(),
        Blocks::Suffix => (1..=8).map(|b| n - (b * n).div_ceil(8)..n).collect(),
    };
    for range in ranges.into_iter().chain(std::iter::once(0..n)) {
        loop {
            if used >= cap {
                return None;
            }
            let cx = comp.apply(&x);
            used += 1;
            let next: Vec<f64> = cx.iter().zip(g).map(|(a, b)| a + b).collect();
            if next[range.clone()].iter().any(|v| !v.is_finite()) {
                return None;
            }
            let change = sup_diff(&next, &x, range.clone());
            x[range.clone()].copy_from_slice(&next[range.clone()]);
            if change < stop {
                break;
            }
        }
    }
    Some((x, used))
}

struct Collocated {
    x: Vec<f64>,
    min_sv: f64,
    det_sign: i8,
}

fn system_matrix(comp: &Composition) -> DMatrix<f64> {
    let n = comp.dim();
    DMatrix::identity(n, n) - comp.dense()
}

fn determinant_sign(a: &DMatrix<f64>) -> i8 {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return 0;
        }
        sign *= d.signum();
    }
    sign as i8
}

fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn collocate(comp: &Composition, g: &[f64]) -> Collocated {
    let a = system_matrix(comp);
    let min_sv = min_singular_value(&a);
    let det_sign = determinant_sign(&a);
    let x = a
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(g))
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; g.len()]);
    Collocated { x, min_sv, det_sign }
}

fn residual(comp: &Composition, x: &[f64], g: &[f64]) -> f64 {
    let cx = comp.apply(x);
    let r: Vec<f64> = x.iter().zip(&cx).zip(g).map(|((x, c), g)| x - c - g).collect();
    GridFunction::from_parts(comp.mesh().clone(), r).l1_norm()
}

fn run(
    comp: &Composition,
    g: Vec<f64>,
    blocks: Blocks,
    needs_estimate: bool,
    options: &SolveOptions,
) -> (Vec<f64>, SolvePath, Option<Collocated>, Option<SpectralEstimate>, bool) {
    let mut spectral = None;
    let try_picard = match options.mode {
        SolveMode::Collocation => false,
        SolveMode::Picard => true,
        SolveMode::Auto => {
            if needs_estimate {
                let est = comp.spectral_estimate();
                spectral = Some(est);
                est.conservative() < 1.0
            } else {
                true
            }
        }
    };
    let mut cap_hit = false;
    if try_picard {
        match picard(comp, &g, blocks, options.tol, options.max_iterations) {
            Some((x, iterations)) => {
                let path = if blocks == Blocks::None {
                    SolvePath::Picard { iterations }
                } else {
                    SolvePath::PicardBlocks { iterations }
                };
                return (x, path, None, spectral, false);
            }
            None => cap_hit = true,
        }
    }
    let c = collocate(comp, &g);
    (c.x.clone(), SolvePath::Collocation, Some(c), spectral, cap_hit)
}

fn check_inputs(f: &GridFunction, options: &SolveOptions) -> Result<()> {
    if !(options.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if f.mesh().end() != 1.0 {
        return invalid("right-hand side must be given on [0, 1]");
    }
    if f.values().iter().any(|v| !v.is_finite()) {
        return invalid("right-hand side must be finite");
    }
    Ok(())
}

fn finish(
    comp: &Composition,
    g: &[f64],
    outcome: (Vec<f64>, SolvePath, Option<Collocated>, Option<SpectralEstimate>, bool),
    options: &SolveOptions,
    space_tag: SpaceTag,
    volterra: VolterraClass,
) -> SolveReport {
    let (x, path, col, spectral, cap_hit) = outcome;
    let residual_l1 = residual(comp, &x, g);
    let singular_ok = col.as_ref().is_none_or(|c| c.min_sv >= 1e-10);
    let converged = residual_l1.is_finite() && residual_l1 <= options.tol && singular_ok;
    let end_value = x[x.len() - 1];
    SolveReport {
        solution: GridFunction::from_parts(comp.mesh().clone(), x),
        residual_l1,
        path,
        min_singular_value: col.as_ref().map(|c| c.min_sv),
        determinant_sign: col.as_ref().map(|c| c.det_sign),
        converged,
        space_tag,
        volterra,
        spectral,
        end_value,
        picard_cap_hit: cap_hit,
    }
}

/// `x' = -k p x + T x + f`, `x(0) = 0`, `k > 0`, on the mesh of `f`.
pub fn solve_cauchy_plus(
    k: f64,
    p: &SingularCoefficient,
    t: &RegularOperator,
    f: &GridFunction,
    options: &SolveOptions,
) -> Result<SolveReport> {
    Sign::Plus.check(k)?;
    check_inputs(f, options)?;
    let comp = lambda_composition(Sign::Plus, k, p, t, f.mesh())?;
    let g = lambda_apply(Sign::Plus, k, p, f)?.into_values();
    let class = t.classify_volterra();
    let blocks = if class.is_volterra() { Blocks::Prefix } else { Blocks::None };
    let outcome = run(&comp, g.clone(), blocks, !class.is_volterra(), options);
    Ok(finish(&comp, &g, outcome, options, SpaceTag::DPlus { k }, class))
}

/// `x' = -k p x + T x + f`, `x(1) = c`, `k < 0`, on the mesh of `f`.
pub fn solve_bvp_minus(
    k: f64,
    p: &SingularCoefficient,
    t: &RegularOperator,
    f: &GridFunction,
    c: f64,
    options: &SolveOptions,
) -> Result<SolveReport> {
    Sign::Minus.check(k)?;
    check_inputs(f, options)?;
    if !c.is_finite() {
        return invalid("boundary value must be finite");
    }
    let comp = lambda_composition(Sign::Minus, k, p, t, f.mesh())?;
    let lam = lambda_apply(Sign::Minus, k, p, f)?;
    let x1 = x1_minus_profile(f.mesh(), p, k.abs());
    let g: Vec<f64> = lam.values().iter().zip(&x1).map(|(l, w)| c * w + l).collect();
    let class = t.classify_volterra();
    let blocks = if class.is_anti_volterra() { Blocks::Suffix } else { Blocks::None };
    let outcome = run(&comp, g.clone(), blocks, !class.is_anti_volterra(), options);
    Ok(finish(&comp, &g, outcome, options, SpaceTag::DMinus { k }, class))
}

/// Dimension, smallest singular value and determinant sign of `I - Lambda T` on `mesh`.
pub fn collocation_diagnostic(
    sign: Sign,
    k: f64,
    p: &SingularCoefficient,
    t: &RegularOperator,
    mesh: &Mesh,
) -> Result<CollocationDiagnostic> {
    let comp = lambda_composition(sign, k, p, t, mesh)?;
    let a = system_matrix(&comp);
    Ok(CollocationDiagnostic {
        matrix_dim: a.nrows(),
        min_singular_value: min_singular_value(&a),
        determinant_sign: determinant_sign(&a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Deviation, PointTerm};
    use approx::assert_abs_diff_eq;

    fn unit() -> SingularCoefficient {
        SingularCoefficient::unit()
    }

    fn delay(a: f64, b: f64) -> RegularOperator {
        let m = Mesh::graded(8, 1.0).unwrap();
        let q = GridFunction::constant(&m, a);
        let h = Deviation::Function(GridFunction::from_fn(&m, |t| b * t));
        RegularOperator::zero().with_point(PointTerm::new(q, h).unwrap())
    }

    fn at_point(a: f64, theta: f64) -> RegularOperator {
        let q = GridFunction::constant(&Mesh::graded(2, 1.0).unwrap(), a);
        RegularOperator::zero().with_point(PointTerm::at_point(q, theta).unwrap())
    }

    #[test]
    fn zero_operator_reduces_to_model() {
        let m = Mesh::graded(64, 2.0).unwrap();
        let f = GridFunction::constant(&m, 1.0);
        let r = solve_cauchy_plus(1.0, &unit(), &RegularOperator::zero(), &f, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        for (&t, &v) in m.nodes().iter().zip(r.solution.values()) {
            assert_abs_diff_eq!(v, t / 2.0, epsilon = 1e-13);
        }
        let r = solve_bvp_minus(-1.0, &unit(), &RegularOperator::zero(), &f, 0.5, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        for &t in &m.nodes()[1..] {
            assert_abs_diff_eq!(r.solution.eval(t), t * (0.5 + t.ln()), epsilon = 1e-13);
        }
    }

    #[test]
    fn half_delay_converges_by_picard() {
        let m = Mesh::graded(128, 2.0).unwrap();
        let f = GridFunction::constant(&m, 1.0);
        let r = solve_cauchy_plus(1.0, &unit(), &delay(0.5, 0.5), &f, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(matches!(r.path, SolvePath::PicardBlocks { .. }));
        assert!(r.residual_l1 <= 1e-8);
        assert_eq!(r.solution.values()[0], 0.0);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = Mesh::graded(32, 2.0).unwrap();
        let f = GridFunction::zeros(&m);
        let r = solve_cauchy_plus(1.0, &unit(), &at_point(0.4, 0.6), &f, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.solution.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn minus_with_end_evaluation() {
        // x' = x/t + 0.5 x(1), x(1) = 1  =>  x(t) = t (1 + 0.5 ln t)
        let m = Mesh::graded(64, 2.0).unwrap();
        let f = GridFunction::zeros(&m);
        let r = solve_bvp_minus(-1.0, &unit(), &at_point(0.5, 1.0), &f, 1.0, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        for &t in &m.nodes()[1..] {
            assert_abs_diff_eq!(r.solution.eval(t), t * (1.0 + 0.5 * t.ln()), epsilon = 1e-12);
        }
    }

    #[test]
    fn picard_and_collocation_agree() {
        let m = Mesh::graded(48, 2.0).unwrap();
        let f = GridFunction::from_fn(&m, |t| 1.0 + t);
        let t = at_point(0.6, 0.3);
        let a = solve_cauchy_plus(1.0, &unit(), &t, &f, &SolveOptions { mode: SolveMode::Picard, ..Default::default() }).unwrap();
        let b = solve_cauchy_plus(1.0, &unit(), &t, &f, &SolveOptions { mode: SolveMode::Collocation, ..Default::default() }).unwrap();
        assert!(a.converged && b.converged);
        let diff = a.solution.values().iter().zip(b.solution.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-7, "{diff}");
    }

    #[test]
    fn large_norm_outside_region_is_flagged_by_conditioning() {
        let m = Mesh::graded(48, 2.0).unwrap();
        let d = collocation_diagnostic(Sign::Minus, -1.0, &unit(), &at_point(2.5, 0.9), &m).unwrap();
        assert_eq!(d.matrix_dim, 49);
        let z = collocation_diagnostic(Sign::Minus, -1.0, &unit(), &RegularOperator::zero(), &m).unwrap();
        assert_abs_diff_eq!(z.min_singular_value, 1.0, epsilon = 1e-12);
        assert_eq!(z.determinant_sign, 1);
    }

    #[test]
    fn rejects_wrong_sign() {
        let m = Mesh::graded(4, 1.0).unwrap();
        let f = GridFunction::zeros(&m);
        assert!(solve_cauchy_plus(-1.0, &unit(), &RegularOperator::zero(), &f, &SolveOptions::default()).is_err());
        assert!(solve_bvp_minus(1.0, &unit(), &RegularOperator::zero(), &f, 0.0, &SolveOptions::default()).is_err());
    }
}
