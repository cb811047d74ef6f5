//! Weighted integration of piecewise-linear functions.
//!
//! Power weights `(s/t)^k` are integrated in closed form segment by segment.
//! Weights built from a general singular coefficient go through adaptive
//! Gauss-Kronrod quadrature on each segment.

use crate::error::{invalid, Result};
use crate::mesh::GridFunction;
use crate::space::{Extended, SingularCoefficient};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// Intervals are bisected until the local error estimate drops below
/// `max(abs_tol, rel_tol * |local value|)`; the absolute budget is halved with
/// each bisection. Integrands whose rounding noise exceeds the tolerance stop
/// refining after `MAX_INTERVALS` subintervals.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut visited = 0;
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    while let Some((u, v, tol, depth)) = stack.pop() {
        let (val, err) = gk15(&f, u, v);
        let m = 0.5 * (u + v);
        visited += 1;
        if err <= tol.max(rel_tol * val.abs()) || depth >= 48 || m <= u || m >= v || visited > MAX_INTERVALS {
            total += val;
        } else {
            stack.push((m, v, 0.5 * tol, depth + 1));
            stack.push((u, m, 0.5 * tol, depth + 1));
        }
    }
    total
}

/// [`integrate_adaptive`] with tolerances suited to node-level accuracy.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate_adaptive(f, a, b, 1e-15 * (b - a).max(1e-300), 1e-13)
}

/// `expm1(x) / x`, continuous at 0.
fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// `int_a^b (s/c)^e ds` for `0 <= a <= b`, `c > 0`. Infinite when `a = 0` and `e <= -1`.
pub fn power_integral(e: f64, a: f64, b: f64, c: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a == 0.0 {
        if e <= -1.0 {
            return f64::INFINITY;
        }
        return c * (b / c).powf(e + 1.0) / (e + 1.0);
    }
    let l = (b / a).ln();
    let x = (e + 1.0) * l;
    if x > 600.0 {
        return c * ((b / c).powf(e + 1.0) - (a / c).powf(e + 1.0)) / (e + 1.0);
    }
    (a / c).powf(e) * a * l * exprel(x)
}

/// Integrals of the hat pieces `(b - s)/h` and `(s - a)/h` against `(s/c)^e` on `[a, b]`.
pub(crate) fn power_hat_moments(e: f64, a: f64, b: f64, c: f64) -> (f64, f64) {
    let h = b - a;
    let m0 = power_integral(e, a, b, c);
    let m1 = c * power_integral(e + 1.0, a, b, c);
    let upper = ((m1 - a * m0) / h).max(0.0);
    let lower = ((b * m0 - m1) / h).max(0.0);
    (lower, upper)
}

/// `int_0^t (s/t)^k f(s) ds` for the piecewise-linear `f`.
///
/// Requires `k > -1`; `t = 0` gives the limit value `0`.
pub fn integrate_power_weighted(f: &GridFunction, k: f64, t: f64) -> Result<f64> {
    if !(k > -1.0) {
        return invalid(format!("power weight exponent must exceed -1, got {k}"));
    }
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("upper limit {t} outside [0, 1]"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (u, v, fu, fv) in f.segments_within(0.0, t) {
        let (lo, up) = power_hat_moments(k, u, v, t);
        acc += fu * lo + fv * up;
    }
    Ok(acc)
}

/// `int_a^b [x1(anchor) / x1(s)] f(s) ds` with `x1(t) = exp(k int_t^1 p)`.
///
/// The ratio is evaluated as `exp(-k int_s^anchor p)`, never through `x1`
/// itself.
pub fn integrate_ratio_weighted(
    f: &GridFunction,
    p: &SingularCoefficient,
    k: f64,
    a: f64,
    b: f64,
    anchor: f64,
) -> Result<f64> {
    if a > b {
        return invalid(format!("lower limit {a} exceeds upper limit {b}"));
    }
    if a < 0.0 || b > 1.0 || !(0.0..=1.0).contains(&anchor) {
        return invalid("limits and anchor must lie in [0, 1]");
    }
    if k > 0.0 && anchor == 0.0 && b > 0.0 {
        return invalid("weight unbounded: anchor 0 with k > 0");
    }
    if k < 0.0 && a == 0.0 && anchor > 0.0 {
        return invalid("weight unbounded near 0 for k < 0 with a positive anchor");
    }
    if a == b {
        return Ok(0.0);
    }
    if anchor == 0.0 {
        // k < 0 (or k = 0): weight exp(-|k| int_0^s p) vanishes for s > 0
        if k < 0.0 {
            return Ok(0.0);
        }
    }
    let mut acc = 0.0;
    if p.is_unit_power() && anchor > 0.0 {
        for (u, v, fu, fv) in f.segments_within(a, b) {
            let (lo, up) = power_hat_moments(k, u, v, anchor);
            acc += fu * lo + fv * up;
        }
        return Ok(acc);
    }
    let weight = |s: f64| -> f64 {
        if s == anchor {
            return 1.0;
        }
        let (lo, hi) = if s < anchor { (s, anchor) } else { (anchor, s) };
        let prim = p.primitive_value(lo, hi);
        let expo = if s < anchor { -k * prim } else { k * prim };
        if expo == f64::NEG_INFINITY || expo.is_nan() {
            0.0
        } else {
            expo.exp()
        }
    };
    for (u, v, fu, fv) in f.segments_within(a, b) {
        let h = v - u;
        let g = |s: f64| weight(s) * (fu * (v - s) + fv * (s - u)) / h;
        acc += integrate(g, u, v);
    }
    Ok(acc)
}

/// Improper integral `int_0^a g` computed over dyadic shells
/// `[a 2^-(j+1), a 2^-j]`.
///
/// Divergence is declared when the shell sums over the blocks
/// `[J, 2J)` for `J = 32, 64, 128` fail to decay (each block ratio above
/// `0.75`). Integrands behaving like `s^(c-1)` with `c` below roughly `0.01`
/// are misclassified as divergent.
pub fn improper_at_zero(g: impl Fn(f64) -> f64, a: f64) -> Extended {
    if a <= 0.0 {
        return Extended::Finite(0.0);
    }
    let shell = |j: i32| -> f64 {
        let hi = a * 2f64.powi(-j);
        integrate(&g, 0.5 * hi, hi)
    };
    let mut shells: Vec<f64> = (0..256).map(shell).collect();
    if shells.iter().any(|v| !v.is_finite()) {
        return Extended::Infinite;
    }
    let block = |s: &[f64], j: usize| -> f64 { s[j..2 * j].iter().map(|v| v.abs()).sum() };
    let (b32, b64, b128) = (block(&shells, 32), block(&shells, 64), block(&shells, 128));
    let head: f64 = shells.iter().map(|v| v.abs()).sum();
    if b128 > 1e-14 * head.max(1e-300) && b64 > 0.75 * b32 && b128 > 0.75 * b64 {
        return Extended::Infinite;
    }
    let mut j = 256;
    let mut quiet = 0;
    let mut total: f64 = shells.iter().sum();
    while j < 1000 && quiet < 5 {
        let s = shell(j);
        if !s.is_finite() {
            return Extended::Infinite;
        }
        shells.push(s);
        total += s;
        if s.abs() <= 1e-17 * total.abs().max(1e-300) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        j += 1;
    }
    Extended::Finite(total)
}
