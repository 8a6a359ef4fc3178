use std::sync::OnceLock;

use fracbvp::grid::{default_grading_exponent, Grading, Mesh};
use fracbvp::kernel::Order;
use fracbvp::ode::Dopri5;
use fracbvp::operator::{assemble, NonlinearityFamily, WeightFamily};
use fracbvp::shooting::*;
use fracbvp::superlinear::{newton_solve, nondegeneracy};

fn params() -> HenonParams {
    HenonParams::new(4.0, 2.0).unwrap()
}

fn crossings() -> &'static CrossingReport {
    static REPORT: OnceLock<CrossingReport> = OnceLock::new();
    REPORT.get_or_init(|| find_crossings(1.0, &params(), &ScanOptions::default(), &Dopri5::default()).unwrap())
}

fn tight() -> Dopri5 {
    Dopri5 {
        rtol: 1e-12,
        atol: 1e-14,
        ..Default::default()
    }
}

#[test]
fn three_crossings_with_even_middle_solution() {
    let rep = crossings();
    let recs = &rep.records;
    assert!(recs.len() >= 3);
    assert_eq!(recs.len() % 2, 1, "z > 1 at the left end and z < 1 at the right end");
    for r in recs {
        assert!((r.z - 1.0).abs() <= 1e-9);
        assert!(r.du_at_z < 0.0);
        assert!(!r.degenerate);
        // w(ζ) ≠ 0 exactly when z' ≠ 0
        assert_eq!(r.w_end_sign == WSign::ZeroIsh, r.z_prime.abs() < DEGENERATE_Z_PRIME);
    }
    for w in recs.windows(2) {
        assert!(w[0].z_prime.signum() != w[1].z_prime.signum());
    }
    let even = even_candidate(recs).unwrap();
    assert_eq!(even.morse_index, 2);
    assert_eq!(even.w_end_sign, WSign::Positive);
    assert!(even.z_prime > 0.0);
    assert!(even.du_at_origin.abs() < 1e-4 * even.beta);
}

#[test]
fn z_prime_at_crossing_matches_finite_difference() {
    let s = Dopri5::default();
    for r in &crossings().records {
        let h = 1e-5;
        let zp = first_zero(r.beta + h, &params(), 5.0, &s).unwrap().z;
        let zm = first_zero(r.beta - h, &params(), 5.0, &s).unwrap().z;
        let fd = (zp - zm) / (2.0 * h);
        assert!(((fd - r.z_prime) / r.z_prime).abs() <= 1e-4, "{fd} vs {}", r.z_prime);
    }
}

#[test]
fn tighter_tolerances_change_nothing() {
    let s = Dopri5::default();
    for r in &crossings().records {
        let a = shoot(r.beta, &params(), 5.0, &s).unwrap();
        let b = shoot(r.beta, &params(), 5.0, &tight()).unwrap();
        assert_eq!(a.morse_index, b.morse_index);
        assert!((a.z - b.z).abs() <= 1e-7);
    }
    for beta in [0.3, 3.0, 30.0, 300.0] {
        let a = first_zero(beta, &params(), 50.0, &s).unwrap();
        let b = first_zero(beta, &params(), 50.0, &tight()).unwrap();
        assert!((a.z - b.z).abs() <= 1e-7);
        assert!((first_zero(beta + 1e-6, &params(), 50.0, &s).unwrap().z - a.z).abs() <= 1e-4);
    }
}

#[test]
fn solution_is_concave_while_positive() {
    let r = &crossings().records[1];
    let t = &r.trajectory;
    let eta = 1e-3;
    for k in 1..200 {
        let x = -1.0 + 2.0 * k as f64 / 200.0;
        let (a, b, c) = (t.state(x - eta).unwrap()[0], t.state(x).unwrap()[0], t.state(x + eta).unwrap()[0]);
        assert!(b > 0.0);
        assert!(a + c - 2.0 * b <= 1e-9 * b, "x = {x}");
    }
    // u' decreasing along step endpoints
    let du: Vec<f64> = t.segments.iter().map(|s| s.y1[1]).collect();
    assert!(du.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn rescaled_solutions_are_discrete_solutions() {
    let ord = Order::classical();
    let h = WeightFamily::PowerOffset { l: 4.0, t0: 0.5 };
    let mesh = h.adapt_mesh(&Mesh::new(800, Grading::Graded(default_grading_exponent(ord))).unwrap());
    let op = assemble(&mesh, ord, &h).unwrap();
    let f = NonlinearityFamily::Power { c: 1.0, p: 2.0 };
    for r in &crossings().records {
        let u = rescale_to_unit(r, 1.0, &params(), op.mesh()).unwrap();
        assert_eq!(u.delta, 0.0);
        assert_eq!(u.scale_exponent_used, 6.0);
        assert!(u.residual <= RESCALE_TOL);
        let n = newton_solve(&op, &f, &u.profile, 1e-9, 5).unwrap();
        assert!(n.converged);
        let rel = n.solution.sup_distance(&u.profile).unwrap() / u.profile.sup_norm();
        assert!(rel <= 1e-4, "{rel:e}");
        // both views agree that the solution is nondegenerate
        let nd = nondegeneracy(&op, &f, &n.solution, None).unwrap();
        assert!(!nd.degenerate && r.w_end_sign != WSign::ZeroIsh);
    }
}
