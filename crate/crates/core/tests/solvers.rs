mod common;

use common::{operator_with_parts, random_operator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singfde::criteria::{solvable, RegionCase};
use singfde::solver::{solve_bvp_minus, solve_cauchy_plus, SolveMode, SolveOptions};
use singfde::weighted::{k_alpha_profile, nu_condition_check, solve_weighted_plus, WeightedProblem};
use singfde::{Deviation, GridFunction, Mesh, PointTerm, RegularOperator, SingularCoefficient, WeightFunction};

fn data(rng: &mut impl Rng, mesh: &Mesh) -> GridFunction {
    let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..4.0));
    GridFunction::from_fn(mesh, |t| a + b * (c * t).sin())
}

#[test]
fn volterra_operators_always_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = SingularCoefficient::unit();
    let mesh = Mesh::graded(64, 2.0).unwrap();
    for i in 0..200 {
        let norm = rng.gen_range(0.1..3.0);
        let t = random_operator(&mut rng, norm, true);
        let (a, b) = t.part_norms();
        assert!(a + b <= 3.0 + 1e-12);
        assert!(t.classify_volterra().is_volterra());
        let k = rng.gen_range(0.2..2.5);
        let r = solve_cauchy_plus(k, &p, &t, &data(&mut rng, &mesh), &SolveOptions::default()).unwrap();
        assert!(r.converged, "case {i}: residual {}", r.residual_l1);
    }
}

#[test]
fn operators_inside_the_regions_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = SingularCoefficient::unit();
    let mesh = Mesh::graded(64, 2.0).unwrap();
    let mut done = 0;
    while done < 50 {
        let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
        let plus = solvable(RegionCase::Plus, a, b).unwrap();
        if !plus.solvable_for_all || plus.margin < 0.05 {
            continue;
        }
        let k = rng.gen_range(0.3..2.0);
        let f = data(&mut rng, &mesh);
        let t = operator_with_parts(&mut rng, a, b);
        let r = solve_cauchy_plus(k, &p, &t, &f, &SolveOptions::default()).unwrap();
        assert!(r.converged, "plus ({a}, {b}) k={k}: residual {}", r.residual_l1);
        let t = operator_with_parts(&mut rng, b, a);
        let r = solve_bvp_minus(-k, &p, &t, &f, rng.gen_range(-1.0..1.0), &SolveOptions::default()).unwrap();
        assert!(r.converged, "minus ({b}, {a}) k={k}: residual {}", r.residual_l1);
        done += 1;
    }
}

#[test]
fn solutions_scale_with_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = SingularCoefficient::unit();
    let mesh = Mesh::graded(64, 2.0).unwrap();
    for _ in 0..10 {
        let t = random_operator(&mut rng, 0.6, false);
        let f = data(&mut rng, &mesh);
        let (lam, c) = (rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
        let opts = SolveOptions::with_tol(1e-10);
        let base = solve_bvp_minus(-1.0, &p, &t, &f, c, &opts).unwrap();
        let scaled = solve_bvp_minus(-1.0, &p, &t, &f.scaled(lam), lam * c, &opts).unwrap();
        for (u, v) in base.solution.values().iter().zip(scaled.solution.values()) {
            assert!((lam * u - v).abs() <= 1e-9 * (1.0 + lam.abs()));
        }
        let base = solve_cauchy_plus(1.0, &p, &t, &f, &opts).unwrap();
        let scaled = solve_cauchy_plus(1.0, &p, &t, &f.scaled(lam), &opts).unwrap();
        for (u, v) in base.solution.values().iter().zip(scaled.solution.values()) {
            assert!((lam * u - v).abs() <= 1e-9 * (1.0 + lam.abs()));
        }
    }
}

#[test]
fn picard_and_collocation_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = SingularCoefficient::unit();
    let mesh = Mesh::graded(64, 2.0).unwrap();
    let tol = 1e-9;
    for _ in 0..10 {
        let t = random_operator(&mut rng, 0.5, false);
        let f = data(&mut rng, &mesh);
        let picard = SolveOptions { mode: SolveMode::Picard, ..SolveOptions::with_tol(tol) };
        let colloc = SolveOptions { mode: SolveMode::Collocation, ..SolveOptions::with_tol(tol) };
        let a = solve_cauchy_plus(1.5, &p, &t, &f, &picard).unwrap();
        let b = solve_cauchy_plus(1.5, &p, &t, &f, &colloc).unwrap();
        assert!(a.converged && b.converged);
        let gap = a.solution.combine(1.0, &b.solution, -1.0).sup_norm();
        assert!(gap <= 10.0 * tol, "gap {gap}");
    }
}

fn delay(a: f64, b: f64) -> RegularOperator {
    let m = Mesh::graded(4, 1.0).unwrap();
    RegularOperator::zero()
        .with_point(PointTerm::new(GridFunction::constant(&m, a), Deviation::Function(GridFunction::linear(0.0, b))).unwrap())
}

#[test]
fn weighted_solutions_respect_a_priori_bound_and_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mesh = Mesh::default_graded();
    for _ in 0..12 {
        let k = rng.gen_range(0.5..2.0);
        let nu = if rng.gen_bool(0.5) { WeightFunction::Log } else { WeightFunction::power(rng.gen_range(0.3..1.5)).unwrap() };
        let p = if rng.gen_bool(0.5) { SingularCoefficient::unit() } else { SingularCoefficient::power_law(1.5).unwrap() };
        let t = delay(rng.gen_range(-0.9..0.9) * k, rng.gen_range(0.1..1.0));
        let f = data(&mut rng, &mesh);
        let prob = WeightedProblem { k, p, nu: nu.clone(), t, f: f.clone(), c: 0.0, nu_on_operator: false };
        let r = solve_weighted_plus(&prob, &SolveOptions::with_tol(1e-9)).unwrap();
        assert!(r.converged);
        let gain = r.gain.unwrap();
        let bound = f.sup_norm() / k + gain * r.weighted_sup;
        for (&t, &x) in r.solution.mesh().nodes().iter().zip(r.solution.values()) {
            assert!(x.abs() <= nu.eval(t) * bound * (1.0 + 1e-9) + 1e-15, "t={t}");
        }
        assert!(r.weighted_sup <= r.omega_radius.unwrap() * (1.0 + 1e-9));
        let q = r.contraction_factor.unwrap();
        for w in r.differences.windows(2) {
            if w[0] > 1e-12 {
                assert!(w[1] <= (q + 0.05) * w[0], "rate {} vs factor {q}", w[1] / w[0]);
            }
        }
    }
}

#[test]
fn weighted_solver_matches_unweighted_with_unit_weight() {
    // nu = 1, p = 1/t: x' = -k x/t + (1/t)(T x) + f/t with T x = 0.5 t x(1/2)
    // and f = t is the unweighted problem with T' x = 0.5 x(1/2) and f' = 1.
    let mesh = Mesh::default_graded().merged_with(&[0.5]);
    let unit = SingularCoefficient::unit();
    let tol = 1e-10;
    for k in [0.75, 1.0, 2.0] {
        let t = RegularOperator::zero().with_point(PointTerm::at_point(GridFunction::linear(0.0, 0.5), 0.5).unwrap());
        let prob = WeightedProblem {
            k,
            p: unit.clone(),
            nu: WeightFunction::one(),
            t,
            f: GridFunction::from_fn(&mesh, |s| s),
            c: 0.0,
            nu_on_operator: false,
        };
        let w = solve_weighted_plus(&prob, &SolveOptions::with_tol(tol)).unwrap();
        let t2 = RegularOperator::zero().with_point(PointTerm::at_point(GridFunction::constant(&mesh, 0.5), 0.5).unwrap());
        let u = solve_cauchy_plus(k, &unit, &t2, &GridFunction::constant(&mesh, 1.0), &SolveOptions::with_tol(tol)).unwrap();
        assert!(w.converged && u.converged);
        for &s in mesh.nodes() {
            let gap = (w.solution.eval(s) - u.solution.eval(s)).abs();
            assert!(gap <= 10.0 * tol, "k={k} t={s}: {gap}");
        }
    }
}

#[test]
fn k_alpha_vanishes_as_alpha_shrinks() {
    let cases = [
        (SingularCoefficient::unit(), WeightFunction::Log),
        (SingularCoefficient::power_law(2.0).unwrap(), WeightFunction::power(0.5).unwrap()),
        (SingularCoefficient::power_law(1.5).unwrap(), WeightFunction::power(1.0).unwrap()),
    ];
    for (p, nu) in cases {
        assert!(nu_condition_check(&p, &nu).unwrap());
        let alphas = [0.4, 0.1, 0.025, 0.00625, 1e-4];
        let maxima: Vec<f64> = alphas.iter().map(|&a| k_alpha_profile(&p, &nu, -1.0, a).unwrap().max_k_alpha).collect();
        assert!(maxima.windows(2).all(|w| w[1] < w[0]), "{maxima:?}");
        // K_alpha <= nu(alpha) (1 - x_alpha) / |k| since nu increases.
        for (&a, &m) in alphas.iter().zip(&maxima) {
            assert!(m <= nu.eval(a), "alpha={a}: {m}");
        }
    }
}
