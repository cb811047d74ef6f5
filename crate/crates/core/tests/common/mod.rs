#![allow(dead_code)]

use rand::Rng;
use singfde::operator::KernelSupport;
use singfde::{Deviation, GridFunction, KernelTerm, Mesh, PointTerm, RegularOperator};

/// Random operator with `||T+|| + ||T-|| = norm`, built from delay terms,
/// point evaluations and constant kernels.
pub fn random_operator(rng: &mut impl Rng, norm: f64, volterra: bool) -> RegularOperator {
    let mesh = Mesh::graded(4, 1.0).unwrap();
    let terms = rng.gen_range(1..=3);
    let shares: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = shares.iter().sum();
    let mut t = RegularOperator::zero();
    for share in shares {
        let mass = norm * share / total;
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match rng.gen_range(0..3) {
            0 => {
                let b = rng.gen_range(0.05..1.0);
                let h = if volterra { GridFunction::linear(0.0, b) } else { GridFunction::linear(1.0, -b) };
                t = t.with_point(PointTerm::new(GridFunction::constant(&mesh, sign * mass), Deviation::Function(h)).unwrap());
            }
            1 if !volterra => {
                let theta = rng.gen_range(0.0..1.0);
                t = t.with_point(PointTerm::at_point(GridFunction::constant(&mesh, sign * mass), theta).unwrap());
            }
            _ => {
                let support = if volterra { KernelSupport::Lower } else { KernelSupport::Full };
                // |K| integrates to `mass` over the unit square for the lower support as well.
                let scale = if volterra { 2.0 * mass } else { mass };
                t = t.with_kernel(KernelTerm::from_fn(&mesh, support, |_, _| sign * scale));
            }
        }
    }
    t
}

/// Random operator with prescribed `(||T+||, ||T-||)`.
pub fn operator_with_parts(rng: &mut impl Rng, plus: f64, minus: f64) -> RegularOperator {
    let mesh = Mesh::graded(4, 1.0).unwrap();
    let mut t = RegularOperator::zero();
    for (mass, sign) in [(plus, 1.0), (minus, -1.0)] {
        if mass == 0.0 {
            continue;
        }
        let split = rng.gen_range(0.0..1.0);
        let theta = rng.gen_range(0.0..1.0);
        let b = rng.gen_range(0.05..1.0);
        t = t
            .with_point(PointTerm::at_point(GridFunction::constant(&mesh, sign * mass * split), theta).unwrap())
            .with_point(
                PointTerm::new(GridFunction::constant(&mesh, sign * mass * (1.0 - split)), Deviation::Function(GridFunction::linear(0.0, b)))
                    .unwrap(),
            );
    }
    t
}
