//! Equations with the singularity at the derivative,
//! `x' = -k p x + p [nu] T x + p nu f`, solved by contraction in the norm
//! `sup |x| / nu`.
//!
//! With `nu_on_operator` the operator term carries the factor `nu` and the
//! map is `x -> A(T x + f)` with `A z = int [x1(t)/x1(s)] p nu z`; without it
//! the map is `x -> A'(T x) + A(f)` where `A'` has no `nu`, and solvability
//! rests on the gain `vraisup (|T| nu)/nu < |k|`.

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::solvable_weighted;
use crate::error::{invalid, Error, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::model::{decay, x1_minus_profile, Composition, Density, Direction, Sign, Sweep, SweepSpec};
use crate::operator::{Deviation, PointTerm, RegularOperator};
use crate::quadrature::{improper_at_zero, integrate};
use crate::solver::SolveOptions;
use crate::space::{Extended, SingularCoefficient, WeightFunction};

/// Slack in the `(1 + eps0)/|k|` admissibility test for `K_alpha / nu`.
pub const DEFAULT_EPS0: f64 = 0.1;

const PROFILE_NODES: usize = 512;
const PROFILE_GRADING: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct WeightedProblem {
    pub k: f64,
    pub p: SingularCoefficient,
    pub nu: WeightFunction,
    pub t: RegularOperator,
    /// Right-hand side on `[0, 1]`, read as an element of `L_inf`.
    pub f: GridFunction,
    /// `x(alpha)` for `k < 0`.
    pub c: f64,
    pub nu_on_operator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaReport {
    pub alpha: f64,
    /// `max K_alpha`.
    pub max_k_alpha: f64,
    /// `max K_alpha / nu`, the quantity compared with `(1 + eps0)/|k|`.
    pub max_ratio: f64,
    pub argmax: f64,
    /// `|k| max_ratio / (1 + eps0)`: the contraction factor of `A_alpha T`
    /// for the largest gain the slack covers.
    pub contraction_factor: f64,
    pub admissible: bool,
    pub diagnostic: Option<String>,
}

/// Result of a weighted solve.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedReport {
    #[serde(skip)]
    pub solution: GridFunction,
    /// `max |x - A T x - g| / nu` over the nodes with `t > 0`.
    pub weighted_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A priori contraction factor in the weighted norm, when one is known.
    pub contraction_factor: Option<f64>,
    /// `vraisup (|T| nu)/nu` when the operator term has no `nu` factor.
    pub gain: Option<f64>,
    /// `sup |x| / nu` of the solution.
    pub weighted_sup: f64,
    /// Radius `C` of the invariant ball, when the contraction factor is known.
    pub omega_radius: Option<f64>,
    /// Weighted sup norms of successive Picard differences.
    pub differences: Vec<f64>,
    /// Right end of the interval the problem was solved on.
    pub alpha: f64,
}

fn check_common(prob: &WeightedProblem, options: &SolveOptions) -> Result<()> {
    if !(options.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if prob.f.mesh().end() != 1.0 {
        return invalid("right-hand side must be given on [0, 1]");
    }
    if prob.f.values().iter().any(|v| !v.is_finite()) {
        return invalid("right-hand side must be finite");
    }
    Ok(())
}

fn weighted_sup(x: &[f64], nodes: &[f64], nu: &WeightFunction) -> f64 {
    x.iter().zip(nodes).filter(|(_, &t)| t > 0.0).map(|(v, &t)| v.abs() / nu.eval(t)).fold(0.0, f64::max)
}

/// `sup |(|T| 1)(t)|`, the norm of `T` from `C` to `L_inf`.
fn linf_norm(t: &RegularOperator, mesh: &Mesh) -> f64 {
    let fine = mesh.merged_with(&t.breakpoints());
    t.abs().unit_response(&fine).sup_norm()
}

fn operator_density(prob: &WeightedProblem) -> Density {
    if prob.nu_on_operator {
        Density::CoefficientWeighted(prob.nu.clone())
    } else {
        Density::Coefficient
    }
}

fn gain_of(prob: &WeightedProblem) -> Result<f64> {
    let gain = prob.t.weighted_gain(&prob.nu);
    if !solvable_weighted(gain, prob.k)?.solvable_for_all {
        return Err(Error::CriterionRefused {
            criterion: format!("weighted gain {gain} must be below |k| = {}", prob.k.abs()),
            largest_admissible_alpha: None,
        });
    }
    Ok(gain.to_f64())
}

struct Iteration {
    x: Vec<f64>,
    iterations: usize,
    differences: Vec<f64>,
    settled: bool,
}

/// Picard iteration `x -> C x + g` with the stop test in the weighted norm.
/// `prefix` runs it on growing initial blocks of nodes first.
fn picard(comp: &Composition, g: &[f64], nu: &WeightFunction, prefix: bool, options: &SolveOptions) -> Iteration {
    let nodes = comp.mesh().nodes().to_vec();
    let n = g.len();
    let stop = options.tol / 10.0;
    let mut x = vec![0.0; n];
    let mut differences = Vec::new();
    let mut used = 0;
    let ends: Vec<usize> = if prefix { (1..=8).map(|b| (b * n).div_ceil(8)).collect() } else { vec![n] };
    for end in ends {
        loop {
            if used >= options.max_iterations {
                return Iteration { x, iterations: used, differences, settled: false };
            }
            let cx = comp.apply(&x);
            used += 1;
            let next: Vec<f64> = cx.iter().zip(g).map(|(a, b)| a + b).collect();
            if next[..end].iter().any(|v| !v.is_finite()) {
                return Iteration { x, iterations: used, differences, settled: false };
            }
            let diff: Vec<f64> = next[..end].iter().zip(&x[..end]).map(|(a, b)| a - b).collect();
            let change = weighted_sup(&diff, &nodes[..end], nu);
            if end == n {
                differences.push(change);
            }
            x[..end].copy_from_slice(&next[..end]);
            if change < stop {
                break;
            }
        }
    }
    Iteration { x, iterations: used, differences, settled: true }
}

fn weighted_residual(comp: &Composition, x: &[f64], g: &[f64], nu: &WeightFunction) -> f64 {
    let cx = comp.apply(x);
    let r: Vec<f64> = x.iter().zip(&cx).zip(g).map(|((x, c), g)| x - c - g).collect();
    weighted_sup(&r, comp.mesh().nodes(), nu)
}

#[allow(clippy::too_many_arguments)]
fn report(
    comp: &Composition,
    g: &[f64],
    nu: &WeightFunction,
    it: Iteration,
    options: &SolveOptions,
    factor: Option<f64>,
    gain: Option<f64>,
    base: f64,
) -> WeightedReport {
    let residual = weighted_residual(comp, &it.x, g, nu);
    let sup = weighted_sup(&it.x, comp.mesh().nodes(), nu);
    let omega_radius = factor.filter(|q| *q < 1.0).map(|q| base / (1.0 - q));
    WeightedReport {
        weighted_residual: residual,
        iterations: it.iterations,
        converged: it.settled && residual.is_finite() && residual <= options.tol,
        contraction_factor: factor,
        gain,
        weighted_sup: sup,
        omega_radius,
        differences: it.differences,
        alpha: comp.mesh().end(),
        solution: GridFunction::from_parts(comp.mesh().clone(), it.x),
    }
}

/// `k > 0`: `x' = -k p x + p [nu] T x + p nu f`, `x(0) = 0`, on the mesh of `f`.
pub fn solve_weighted_plus(prob: &WeightedProblem, options: &SolveOptions) -> Result<WeightedReport> {
    Sign::Plus.check(prob.k)?;
    check_common(prob, options)?;
    let mesh = prob.f.mesh().merged_with(&prob.t.breakpoints());
    let f = prob.f.resample(&mesh);
    let k = prob.k;
    let volterra = prob.t.classify_volterra().is_volterra();
    let (factor, gain) = if prob.nu_on_operator {
        let bound = prob.nu.eval(1.0) * linf_norm(&prob.t, &mesh) / k;
        if !volterra && bound > 1.0 {
            return Err(Error::CriterionRefused {
                criterion: format!("non-Volterra operator needs nu(1) ||T|| / k <= 1, got {bound}"),
                largest_admissible_alpha: None,
            });
        }
        ((!volterra || bound < 1.0).then_some(bound), None)
    } else {
        let gain = gain_of(prob)?;
        (Some(gain / k), Some(gain))
    };
    let spec = |density| SweepSpec { direction: Direction::Forward, kappa: k, p: prob.p.clone(), density };
    let forcing = Sweep::build(&mesh, &spec(Density::CoefficientWeighted(prob.nu.clone())));
    let g = forcing.apply(f.values());
    let comp = Composition::new(&mesh, &spec(operator_density(prob)), 1.0, &prob.t);
    let it = picard(&comp, &g, &prob.nu, volterra && factor.is_none(), options);
    let base = f.sup_norm() / k;
    Ok(report(&comp, &g, &prob.nu, it, options, factor, gain, base))
}

/// `k < 0` on `[0, alpha]`: `x' = -k p x + p [nu] T x + p nu f`, `x(alpha) = c`.
///
/// For `alpha < 1` the operator must be Volterra so that the problem on
/// `[0, alpha]` is closed. An inadmissible `alpha` is refused with the
/// largest admissible `2^-m` found by [`choose_alpha`].
pub fn solve_weighted_minus(prob: &WeightedProblem, alpha: f64, options: &SolveOptions) -> Result<WeightedReport> {
    Sign::Minus.check(prob.k)?;
    check_common(prob, options)?;
    if !prob.c.is_finite() {
        return invalid("boundary value must be finite");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if alpha < 1.0 && !prob.t.classify_volterra().is_volterra() {
        return invalid("on [0, alpha] with alpha < 1 the operator must be Volterra");
    }
    let kappa = prob.k.abs();
    let mesh = Mesh::graded_on(PROFILE_NODES, PROFILE_GRADING, alpha)?
        .merged_with(prob.f.mesh().nodes())
        .merged_with(&prob.t.breakpoints());
    let gain = if prob.nu_on_operator { None } else { Some(gain_of(prob)?) };
    let verdict = alpha_verdict(prob, alpha, gain, &mesh)?;
    let factor = match verdict {
        Some(q) => q,
        None => {
            return Err(Error::CriterionRefused {
                criterion: format!("alpha = {alpha} is not admissible"),
                largest_admissible_alpha: choose_alpha(prob)?.map(|r| r.alpha),
            })
        }
    };
    let x_alpha = x1_minus_profile(&mesh, &prob.p, kappa);
    let mut pnu_bound = 0.0;
    if prob.c != 0.0 {
        pnu_bound = match profile_over_weight(&prob.p, &prob.nu, kappa, alpha) {
            Extended::Finite(v) => v,
            Extended::Infinite => {
                return Err(Error::Inadmissible(format!(
                    "x_alpha / nu is unbounded near 0 for nu = {}, so c = {} cannot be matched",
                    prob.nu.describe(),
                    prob.c
                )))
            }
        };
    }
    let spec = |density| SweepSpec { direction: Direction::Backward, kappa, p: prob.p.clone(), density };
    let forcing = Sweep::build(&mesh, &spec(Density::CoefficientWeighted(prob.nu.clone())));
    let f: Vec<f64> = mesh.nodes().iter().map(|&t| prob.f.eval(t)).collect();
    let lam = forcing.apply(&f);
    let g: Vec<f64> = lam.iter().zip(&x_alpha).map(|(l, w)| prob.c * w - l).collect();
    let comp = Composition::new(&mesh, &spec(operator_density(prob)), -1.0, &prob.t);
    let it = picard(&comp, &g, &prob.nu, false, options);
    let sup_f = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let base = sup_f / kappa + prob.c.abs() * pnu_bound;
    Ok(report(&comp, &g, &prob.nu, it, options, Some(factor), gain, base))
}

/// Contraction factor for `alpha` if it is admissible.
fn alpha_verdict(prob: &WeightedProblem, alpha: f64, gain: Option<f64>, mesh: &Mesh) -> Result<Option<f64>> {
    let kappa = prob.k.abs();
    if prob.nu_on_operator {
        let q = prob.nu.eval(alpha) * linf_norm(&prob.t, mesh) / kappa;
        return Ok((q < 1.0).then_some(q));
    }
    let gain = gain.expect("gain is known without the nu factor");
    if gain == 0.0 {
        return Ok(Some(0.0));
    }
    let profile = k_alpha_profile(&prob.p, &prob.nu, prob.k, alpha)?;
    let q = gain * profile.max_ratio;
    Ok((profile.admissible && q < 1.0).then_some(q))
}

/// Largest `alpha = 2^-m`, `m = 0..=40`, admissible for the problem.
pub fn choose_alpha(prob: &WeightedProblem) -> Result<Option<AlphaReport>> {
    Sign::Minus.check(prob.k)?;
    let gain = if prob.nu_on_operator { None } else { Some(gain_of(prob)?) };
    let candidates: Vec<f64> = (0..=40).map(|m| 2f64.powi(-m)).collect();
    let verdicts: Vec<Result<Option<AlphaReport>>> = candidates
        .par_iter()
        .map(|&alpha| {
            let mesh = Mesh::graded_on(PROFILE_NODES, PROFILE_GRADING, alpha)?.merged_with(&prob.t.breakpoints());
            Ok(match alpha_verdict(prob, alpha, gain, &mesh)? {
                Some(_) => Some(k_alpha_profile(&prob.p, &prob.nu, prob.k, alpha)?),
                None => None,
            })
        })
        .collect();
    for v in verdicts {
        if let Some(r) = v? {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// `sup x_alpha / nu` on `(0, alpha]`, or the marker when it grows toward 0.
fn profile_over_weight(p: &SingularCoefficient, nu: &WeightFunction, kappa: f64, alpha: f64) -> Extended {
    let ratio = |t: f64| decay(p, kappa, t, alpha) / nu.eval(t);
    let near: Vec<f64> = (0..=60).map(|j| ratio(alpha * 2f64.powi(-j))).collect();
    if near.iter().any(|r| !r.is_finite()) || (near[60] > 1.5 * near[30] && near[30] > 1.5 * near[0]) {
        return Extended::Infinite;
    }
    let mesh = Mesh::graded_on(PROFILE_NODES, PROFILE_GRADING, alpha).expect("alpha lies in (0, 1]");
    let best = mesh.nodes()[1..].iter().map(|&t| ratio(t)).fold(0.0, f64::max);
    Extended::Finite(near.iter().copied().fold(best, f64::max))
}

/// `K_alpha(t) = int_t^alpha [x_alpha(t)/x_alpha(s)] p(s) nu(s) ds` and the
/// maximum of `K_alpha / nu` on `(0, alpha]`.
pub fn k_alpha_profile(p: &SingularCoefficient, nu: &WeightFunction, k: f64, alpha: f64) -> Result<AlphaReport> {
    Sign::Minus.check(k)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    let kappa = k.abs();
    let mesh = Mesh::graded_on(PROFILE_NODES, PROFILE_GRADING, alpha)?;
    let spec = SweepSpec {
        direction: Direction::Backward,
        kappa,
        p: p.clone(),
        density: Density::CoefficientWeighted(nu.clone()),
    };
    let values = Sweep::build(&mesh, &spec).apply(&vec![1.0; mesh.len()]);
    let t = mesh.nodes();
    let refuse = |msg: String| AlphaReport {
        alpha,
        max_k_alpha: f64::INFINITY,
        max_ratio: f64::INFINITY,
        argmax: f64::NAN,
        contraction_factor: f64::INFINITY,
        admissible: false,
        diagnostic: Some(msg),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Ok(refuse(format!("K_alpha is not finite at t = {}", t[i])));
    }
    let at = |s: f64| -> f64 {
        let (j, _) = mesh.locate(s);
        let right = t[j + 1];
        let head = integrate(|u| decay(p, kappa, s, u) * p.eval(u) * nu.eval(u), s, right);
        head + decay(p, kappa, s, right) * values[j + 1]
    };
    let ratio = |s: f64| at(s) / nu.eval(s);
    let (mut best_i, mut best) = (1, f64::NEG_INFINITY);
    for i in 1..t.len() {
        let r = values[i] / nu.eval(t[i]);
        if r > best {
            best = r;
            best_i = i;
        }
    }
    let lo = t[best_i - 1].max(t[1] * 1e-3);
    let hi = t[(best_i + 1).min(t.len() - 1)];
    let (argmax, refined) = golden_max(ratio, lo, hi);
    let (argmax, max_ratio) = if refined > best { (argmax, refined) } else { (t[best_i], best) };
    if !max_ratio.is_finite() {
        return Ok(refuse(format!("K_alpha / nu is not finite near t = {argmax}")));
    }
    let max_k_alpha = values.iter().copied().fold(0.0, f64::max);
    let admissible = max_ratio < (1.0 + DEFAULT_EPS0) / kappa;
    Ok(AlphaReport {
        alpha,
        max_k_alpha,
        max_ratio,
        argmax,
        contraction_factor: kappa * max_ratio / (1.0 + DEFAULT_EPS0),
        admissible,
        diagnostic: None,
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-14 * b {
            break;
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `lim nu'(t) / (p(t) nu(t)) = 0`, judged from `t = 1e-2 .. 1e-5`.
///
/// Accepts when the ratios decrease strictly and either end below `1e-2` or
/// at most half the first sample; slowly vanishing ratios such as
/// `1/ln(2/t)` pass by the second rule.
pub fn nu_condition_check(p: &SingularCoefficient, nu: &WeightFunction) -> Result<bool> {
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&t| {
            let d = nu.derivative(t).ok_or_else(|| Error::InvalidArgument("weight has no derivative".into()))?;
            Ok((d / (p.eval(t) * nu.eval(t))).abs())
        })
        .collect::<Result<_>>()?;
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let last = ratios[3];
    Ok(decreasing && (last < 1e-2 || last <= 0.5 * ratios[0]))
}

/// `max (|T| nu)(t) / nu(t)` over `t = 2^-j`, `j = 20..=60`: the limsup form
/// of the gain. Diagnostic only.
pub fn gain_near_origin(t: &RegularOperator, nu: &WeightFunction) -> f64 {
    (20..=60)
        .map(|j| {
            let s = 2f64.powi(-j);
            t.abs_weight_response(nu, s) / nu.eval(s)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct EssentialityReport {
    /// False when `p nu` is integrable and the demonstration does not apply.
    pub applicable: bool,
    /// Weighted sup norms of the Picard iterates.
    pub iterate_norms: Vec<f64>,
    pub nondecreasing: bool,
    pub non_convergence: bool,
    pub explanation: String,
}

/// Picard iteration for `T = k I`, `f = 1`, where the gain equals `|k|`.
///
/// With `T x = k x` the equation collapses to `x' = p nu f`, whose only
/// candidate `int_0^t p nu` is infinite when `p nu` is not integrable.
pub fn essentiality_demo(k: f64, p: &SingularCoefficient, nu: &WeightFunction) -> Result<EssentialityReport> {
    let sign = Sign::of(k)?;
    let integral = improper_at_zero(|s| p.eval(s) * nu.eval(s), 0.5);
    if let Extended::Finite(v) = integral {
        return Ok(EssentialityReport {
            applicable: false,
            iterate_norms: Vec::new(),
            nondecreasing: false,
            non_convergence: false,
            explanation: format!("p nu is integrable near 0 (int_0^0.5 p nu = {v}); the demonstration does not apply"),
        });
    }
    // The weighted growth of the iterates happens where nu(t) < 1/n, so the
    // mesh is refined geometrically far toward 0.
    let geometric: Vec<f64> = (1..=600).map(|j| 2f64.powi(-j)).collect();
    let mesh = Mesh::default_graded().merged_with(&geometric);
    let ident = PointTerm::new(GridFunction::constant(&mesh, k), Deviation::Function(GridFunction::linear(0.0, 1.0)))?;
    let t = RegularOperator::zero().with_point(ident);
    let (direction, factor) = match sign {
        Sign::Plus => (Direction::Forward, 1.0),
        Sign::Minus => (Direction::Backward, -1.0),
    };
    let spec = |density| SweepSpec { direction, kappa: k.abs(), p: p.clone(), density };
    let comp = Composition::new(&mesh, &spec(Density::Coefficient), factor, &t);
    let g: Vec<f64> = Sweep::build(&mesh, &spec(Density::CoefficientWeighted(nu.clone())))
        .apply(&vec![1.0; mesh.len()])
        .into_iter()
        .map(|v| factor * v)
        .collect();
    let mut x = vec![0.0; mesh.len()];
    let mut norms = Vec::with_capacity(200);
    let mut diffs = Vec::with_capacity(200);
    for _ in 0..200 {
        let next: Vec<f64> = comp.apply(&x).iter().zip(&g).map(|(a, b)| a + b).collect();
        let d: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        diffs.push(weighted_sup(&d, mesh.nodes(), nu));
        x = next;
        norms.push(weighted_sup(&x, mesh.nodes(), nu));
    }
    let nondecreasing = norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let non_convergence = nondecreasing && diffs[diffs.len() - 1] > 1e-3 * diffs[0];
    Ok(EssentialityReport {
        applicable: true,
        iterate_norms: norms,
        nondecreasing,
        non_convergence,
        explanation: "with T = k I the equation reduces to x' = p nu f; int_0^t p nu diverges, so no solution vanishes at 0"
            .to_string(),
    })
}
