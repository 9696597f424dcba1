use drlab::lab::scenario;
use drlab::regularity::{
    check_projector_regularity, estimate_epsilon_super_regular, estimate_kappa_prime, verify_shift_subtransversality,
    with_growth_probe, Neighborhood, NeighborhoodSpec, Restriction,
};
use drlab::{Execution, SetDescriptor, Vector};

fn v(x: f64, y: f64) -> Vector {
    Vector::from([x, y])
}

fn spec(shape: Neighborhood, samples: usize) -> NeighborhoodSpec {
    NeighborhoodSpec::new(shape).with_samples(samples).with_seed(42)
}

#[test]
fn circle_super_regularity_along_the_normal() {
    let circle = SetDescriptor::sphere(v(0.0, 0.0), 1.0).unwrap();
    let ray = Restriction::Ray { origin: v(1.0, 0.0), direction: v(1.0, 0.0) };
    for delta in [0.05, 0.2] {
        let shape = Neighborhood::ball(v(1.0, 0.0), delta).unwrap();
        let report = estimate_epsilon_super_regular(&circle, &ray, &spec(shape, 20_000), Execution::Parallel).unwrap();
        assert!(report.estimate > 0.0);
        assert!(report.estimate <= 1.01 * delta / 2.0, "delta={delta}: {report:?}");
    }
}

#[test]
fn convex_sets_are_super_regular_with_zero_constant() {
    let sets = [
        SetDescriptor::halfspace(v(1.0, 1.0), 0.0).unwrap(),
        SetDescriptor::ball(v(0.0, 0.0), 1.0).unwrap(),
        SetDescriptor::affine(v(0.0, 0.5), vec![v(1.0, 0.0)]).unwrap(),
    ];
    for set in &sets {
        let shape = Neighborhood::ball(v(0.5, 0.5), 1.0).unwrap();
        let report =
            estimate_epsilon_super_regular(set, &Restriction::Whole, &spec(shape, 5_000), Execution::Parallel).unwrap();
        assert!(report.estimate <= 1e-12, "{set:?}: {}", report.estimate);
    }
}

#[test]
fn circle_projector_inequalities_hold_at_the_estimated_constant() {
    let circle = SetDescriptor::sphere(v(0.0, 0.0), 1.0).unwrap();
    let through = v(1.2, 0.0);
    let tube = Neighborhood::normal_tube(&circle, &through, 0.1).unwrap();
    let restriction = Restriction::Ray { origin: v(1.0, 0.0), direction: v(1.0, 0.0) };
    let eps = estimate_epsilon_super_regular(&circle, &restriction, &spec(tube.clone(), 20_000), Execution::Parallel)
        .unwrap()
        .estimate;
    let check = check_projector_regularity(&circle, eps, &restriction, &spec(tube, 20_000), Execution::Parallel).unwrap();
    assert!(check.pass, "{check:?}");
    assert!(check.pairs > 1_000);
}

#[test]
fn tangential_linear_regularity_is_flagged_unbounded() {
    let s = scenario::tangential_circles(1.0).unwrap();
    let sets = [s.set_a.clone(), s.set_b.clone()];
    let intersection = s.intersection.clone().unwrap();
    let base = spec(Neighborhood::ball(v(1.0, 0.0), 0.1).unwrap(), 10_000);
    let report = with_growth_probe(&base, |sp| estimate_kappa_prime(&sets, &intersection, sp, Execution::Parallel)).unwrap();
    assert!(report.unbounded, "{report:?}");

    let t = scenario::two_intersecting_circles(-1.5, 1.0).unwrap();
    let sets = [t.set_a.clone(), t.set_b.clone()];
    let intersection = t.intersection.clone().unwrap();
    let xbar = t.reference_point(0.5).unwrap().unwrap().xbar;
    let base = spec(Neighborhood::ball(xbar, 0.1).unwrap(), 10_000);
    let report = with_growth_probe(&base, |sp| estimate_kappa_prime(&sets, &intersection, sp, Execution::Parallel)).unwrap();
    assert!(!report.unbounded, "{report:?}");
    assert!(report.estimate <= t.bounds.kappa_prime.unwrap());
}

#[test]
fn separable_circles_shift_subtransversality() {
    let s = scenario::separable_circles(1.0).unwrap();
    let lambda = 0.5;
    let problem = s.problem(lambda).unwrap();
    let r = s.reference_point(lambda).unwrap().unwrap();
    let shape = Neighborhood::ball(r.xbar.clone(), 0.1).unwrap();
    let check = verify_shift_subtransversality(
        &problem,
        &r.gap,
        std::slice::from_ref(&r.xbar),
        None,
        0.05,
        &spec(shape, 5_000),
        Execution::Parallel,
    )
    .unwrap();
    assert!(check.pass, "{check:?}");
}
