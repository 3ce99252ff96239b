use dayahead::qp::{check_kkt, solve_qp, ConstraintRef, QpProblem, QpStatus, DEFAULT_TOL};
use proptest::prelude::*;

mod common;
use common::qp::{face_enumeration, grid_search, random_qp};

#[test]
fn concave_parabola_in_box() {
    let mut p = QpProblem::new();
    p.add_var(-1.0, 1.0, 0.0, -2.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    assert_eq!(s.status, QpStatus::Optimal);
    assert!(s.x[0].abs() < 1e-12);
    assert!(s.objective.abs() < 1e-12);
    assert!(s.upper_duals[0].abs() < 1e-12 && s.lower_duals[0].abs() < 1e-12);
}

#[test]
fn active_inequality_has_unit_multiplier() {
    let mut p = QpProblem::new();
    let x = p.add_var(0.0, f64::INFINITY, 3.0, -1.0);
    p.add_le(vec![(x, 1.0)], 2.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    assert_eq!(s.status, QpStatus::Optimal);
    assert!((s.x[0] - 2.0).abs() < 1e-12);
    assert!((s.ineq_duals[0] - 1.0).abs() < 1e-12);
    assert!(check_kkt(&p, &s, DEFAULT_TOL).pass);
}

#[test]
fn contradictory_rows_are_certified() {
    let mut p = QpProblem::new();
    let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0, 0.0);
    p.add_le(vec![(x, 1.0)], 0.0);
    p.add_ge(vec![(x, 1.0)], 1.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    assert_eq!(s.status, QpStatus::Infeasible);
    assert_eq!(s.certificate, vec![ConstraintRef::Ineq(0), ConstraintRef::Ineq(1)]);
}

#[test]
fn unbounded_linear_direction() {
    let mut p = QpProblem::new();
    let x = p.add_var(0.0, f64::INFINITY, 1.0, 0.0);
    let y = p.add_var(0.0, 5.0, 0.0, -1.0);
    p.add_le(vec![(x, -1.0), (y, 1.0)], 1.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    assert_eq!(s.status, QpStatus::Unbounded);
    let ray = s.ray.unwrap();
    assert!(ray[0] > 0.0);
}

#[test]
fn equality_multiplier_sign() {
    // max -x^2/2 - y^2/2 s.t. x + y = 2: gradient (-1,-1) = y_eq * (1,1)
    let mut p = QpProblem::new();
    let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0, -1.0);
    let y = p.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0, -1.0);
    p.add_eq(vec![(x, 1.0), (y, 1.0)], 2.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    assert!((s.eq_duals[0] + 1.0).abs() < 1e-12);
}

#[test]
fn perturbed_solutions_fail_the_check() {
    let mut p = QpProblem::new();
    let x = p.add_var(0.0, f64::INFINITY, 3.0, -1.0);
    p.add_le(vec![(x, 1.0)], 2.0);
    let s = solve_qp(&p, DEFAULT_TOL).unwrap();
    let mut moved = s.clone();
    moved.x[0] += 1e-3;
    let r = check_kkt(&p, &moved, DEFAULT_TOL);
    assert!(!r.pass);
    assert!((r.primal - 1e-3).abs() < 1e-9);
    let mut flipped = s;
    flipped.ineq_duals[0] = -1.0;
    let r = check_kkt(&p, &flipped, DEFAULT_TOL);
    assert!(!r.pass);
    assert!(r.dual >= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn solutions_satisfy_kkt(n in 1usize..=20, seed in proptest::collection::vec(0.0f64..1.0, 64)) {
        let p = random_qp(n, &seed);
        let s = solve_qp(&p, DEFAULT_TOL).unwrap();
        prop_assert_eq!(s.status, QpStatus::Optimal);
        let r = check_kkt(&p, &s, DEFAULT_TOL);
        prop_assert!(r.pass, "{:?}", r);
        let again = solve_qp(&p, DEFAULT_TOL).unwrap();
        prop_assert_eq!(s, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn objective_matches_grid_search(
        n in 1usize..=3,
        x0 in proptest::collection::vec(-2.0f64..2.0, 3),
        width in proptest::collection::vec(0.5f64..3.0, 3),
        lin in proptest::collection::vec(-5.0f64..5.0, 3),
        quad in proptest::collection::vec(-3.0f64..0.0, 3),
        flat in proptest::collection::vec(proptest::bool::ANY, 3),
    ) {
        let mut p = QpProblem::new();
        for j in 0..n {
            let d = if flat[j] { 0.0 } else { quad[j] };
            p.add_var(x0[j] - width[j], x0[j] + width[j], lin[j], d);
        }
        let s = solve_qp(&p, DEFAULT_TOL).unwrap();
        prop_assert_eq!(s.status, QpStatus::Optimal);
        let g = grid_search(&p);
        prop_assert!(s.objective >= g - 1e-9, "solver {} below grid {}", s.objective, g);
        prop_assert!((s.objective - g).abs() <= 1e-4, "solver {} grid {}", s.objective, g);
    }

    #[test]
    fn objective_matches_face_enumeration(
        n in 1usize..=3,
        x0 in proptest::collection::vec(-2.0f64..2.0, 3),
        width in proptest::collection::vec(0.5f64..3.0, 3),
        lin in proptest::collection::vec(-5.0f64..5.0, 3),
        quad in proptest::collection::vec(-3.0f64..-0.1, 3),
        rows in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, 0.1f64..2.0), 0..3),
    ) {
        let mut p = QpProblem::new();
        for j in 0..n {
            p.add_var(x0[j] - width[j], x0[j] + width[j], lin[j], quad[j]);
        }
        for (a, b, c, slack) in rows {
            let coef = [a, b, c];
            let row: Vec<(usize, f64)> = (0..n).map(|j| (j, coef[j])).collect();
            let ax: f64 = row.iter().map(|&(j, v)| v * x0[j]).sum();
            p.add_le(row, ax + slack);
        }
        let s = solve_qp(&p, DEFAULT_TOL).unwrap();
        prop_assert_eq!(s.status, QpStatus::Optimal);
        prop_assert!(check_kkt(&p, &s, DEFAULT_TOL).pass);
        let e = face_enumeration(&p);
        prop_assert!((s.objective - e).abs() <= 1e-9 * e.abs().max(1.0), "solver {} faces {}", s.objective, e);
    }
}
