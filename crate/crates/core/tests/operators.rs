use drlab::lab::scenario;
use drlab::operators::{drlambda_select, drlambda_step, phi_zeta_residual, t_zeta_step, DifferenceVector, TwoSetProblem};
use drlab::parallel::sample_rng;
use drlab::{SetDescriptor, Vector};
use rand::Rng;

fn v(x: f64, y: f64) -> Vector {
    Vector::from([x, y])
}

fn probes(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<Vector> {
    let mut rng = sample_rng(seed, 0);
    (0..n).map(|_| v(rng.random_range(lo..hi), rng.random_range(lo..hi))).collect()
}

#[test]
fn unrelaxed_step_is_the_reflection_average() {
    let s = scenario::two_intersecting_circles(-1.5, 1.0).unwrap();
    let problem = s.problem(1.0).unwrap();
    for x in probes(1, 100, -3.0, 3.0) {
        let Ok(rb) = problem.set_b().reflect(&x) else { continue };
        let Ok(rb) = rb.first().cloned() else { continue };
        let Ok(ra) = problem.set_a().reflect(&rb) else { continue };
        let Ok(ra) = ra.first().cloned() else { continue };
        let expected = (&ra + &x).scaled(0.5);
        let step = drlambda_select(&problem, &x).unwrap();
        assert!(step.distance(&expected) <= 1e-12 * (1.0 + x.norm()), "at {x}");
    }
}

#[test]
fn convex_step_is_nonexpansive() {
    let problems = [
        scenario::two_balls().unwrap().problem(0.5).unwrap(),
        TwoSetProblem::new(
            SetDescriptor::halfspace(v(0.0, 1.0), 0.0).unwrap(),
            SetDescriptor::ball(v(1.0, 2.0), 1.0).unwrap(),
            0.8,
        )
        .unwrap(),
    ];
    for problem in &problems {
        let xs = probes(2, 500, -4.0, 4.0);
        let ys = probes(3, 500, -4.0, 4.0);
        for (x, y) in xs.iter().zip(&ys) {
            let tx = drlambda_select(problem, x).unwrap();
            let ty = drlambda_select(problem, y).unwrap();
            assert!(tx.distance(&ty) <= x.distance(y) + 1e-12);
        }
    }
}

#[test]
fn lifted_step_keeps_block_offsets() {
    let s = scenario::separable_circles(1.0).unwrap();
    let problem = s.problem(0.5).unwrap();
    let zeta = DifferenceVector::from_gap(&v(1.0, 0.0), problem.lambda()).unwrap();
    let z = zeta.blocks();
    for u1 in probes(4, 200, -3.0, 3.0) {
        let Ok(images) = t_zeta_step(&problem, &zeta, &zeta.lift(&u1)) else { continue };
        for w in &images {
            let first = w.block(0);
            assert!(w.block(1).distance(&(first - &z[0])) < 1e-12);
            assert!(w.block(2).distance(&(&(first - &z[0]) - &z[1])) < 1e-12);
            assert!(w.block(3).distance(&(first + &z[3])) < 1e-12);
        }
    }
}

#[test]
fn lifted_fixed_point_and_residuals() {
    let s = scenario::separable_circles(1.0).unwrap();
    let problem = s.problem(0.5).unwrap();
    let zeta = DifferenceVector::from_gap(&v(1.0, 0.0), problem.lambda()).unwrap();
    let u = zeta.lift(&v(1.0, 0.0));
    assert_eq!(t_zeta_step(&problem, &zeta, &u).unwrap(), vec![u.clone()]);
    assert_eq!(phi_zeta_residual(&problem, &zeta, &u).unwrap(), 0.0);
    assert!(phi_zeta_residual(&problem, &zeta, &zeta.lift(&v(0.9, 0.1))).unwrap() > 0.0);
}

#[test]
fn consistent_lift_duplicates_the_step() {
    let s = scenario::two_intersecting_circles(-1.5, 1.0).unwrap();
    let problem = s.problem(0.5).unwrap();
    let zeta = DifferenceVector::from_gap(&v(0.0, 0.0), problem.lambda()).unwrap();
    for u1 in probes(5, 100, -2.0, 2.0) {
        let Ok(steps) = drlambda_step(&problem, &u1) else { continue };
        let images = t_zeta_step(&problem, &zeta, &zeta.lift(&u1)).unwrap();
        assert_eq!(images.len(), steps.len());
        for (w, x) in images.iter().zip(&steps) {
            assert!(w.blocks().iter().all(|b| b == x));
        }
    }
}

#[test]
fn fixed_points_are_exactly_the_zeros_of_the_lifted_residual() {
    let s = scenario::separable_circles(1.0).unwrap();
    for lambda in [0.3, 0.5, 0.7] {
        let problem = s.problem(lambda).unwrap();
        let r = s.reference_point(lambda).unwrap().unwrap();
        let zeta = DifferenceVector::from_gap(&r.gap, problem.lambda()).unwrap();
        assert!(drlambda_step(&problem, &r.xbar).unwrap()[0].distance(&r.xbar) < 1e-12);
        assert!(phi_zeta_residual(&problem, &zeta, &zeta.lift(&r.xbar)).unwrap() < 1e-12);
        let off = &r.xbar + &v(0.05, 0.05);
        assert!(phi_zeta_residual(&problem, &zeta, &zeta.lift(&off)).unwrap() > 1e-3);
    }
}
