mod common;

use common::{fixture, link_consistent_block_selections, num, random_instance, reference, select_blocks};
use dayahead::io::InstanceDocument;
use dayahead::model::BidSelection;
use dayahead::relaxation::{assemble_qprelax, solve_relaxation};
use dayahead::verify::{check_filling, check_flow_price};
use dayahead::Error;

#[test]
fn empty_selection_on_flat_curve_has_no_free_fill() {
    let inst = fixture("four_blocks");
    let (qp, terms) = assemble_qprelax(&inst, &BidSelection::empty(&inst)).unwrap();
    // the only segment is horizontal, so nothing is left to decide
    assert_eq!(qp.n(), 0);
    assert_eq!(qp.eq_rows.len(), 1);
    assert_eq!(terms.constant, 0.0);
    assert_eq!(terms.volume.at(0, 0), 0.0);
}

#[test]
fn selected_blocks_enter_as_constants() {
    let inst = fixture("four_blocks");
    let (_, terms) = assemble_qprelax(&inst, &select_blocks(&inst, &["c", "d"])).unwrap();
    assert_eq!(terms.volume.at(0, 0), 0.0);
    assert_eq!(terms.constant, 2.0);
}

#[test]
fn two_area_assembly() {
    let inst = fixture("two_area_open");
    let (qp, _) = assemble_qprelax(&inst, &BidSelection::empty(&inst)).unwrap();
    assert_eq!(qp.eq_rows.len(), 2);
    assert!(qp.in_rows.is_empty());
    let flows: Vec<usize> = (0..qp.n()).filter(|&j| qp.lower[j] == -100.0).collect();
    assert_eq!(flows.len(), 1);
    assert_eq!(qp.upper[flows[0]], 100.0);
}

#[test]
fn ramp_rows_include_the_initial_hour() {
    let inst = fixture("ramp");
    let (qp, _) = assemble_qprelax(&inst, &BidSelection::empty(&inst)).unwrap();
    assert_eq!(qp.in_rows.len(), 4);
}

#[test]
fn broken_link_is_rejected() {
    let inst = common::single_hour((-10.0, 10.0), vec![(-10.0, 0.0), (10.0, 0.0)], &[("p", 1.0, 1.0), ("c", 1.0, -1.0)]);
    let doc = InstanceDocument::from_instance(&inst);
    let mut json = serde_json::to_value(&doc).unwrap();
    json["links"] = serde_json::json!([{"child": "c", "parent": "p"}]);
    let inst = dayahead::io::parse_instance(&json.to_string()).unwrap();
    let err = solve_relaxation(&inst, &select_blocks(&inst, &["c"])).unwrap_err();
    assert!(matches!(err, Error::LinkViolation { .. }), "{err:?}");
}

#[test]
fn four_blocks_solution_b() {
    let inst = fixture("four_blocks");
    let out = solve_relaxation(&inst, &select_blocks(&inst, &["c", "d"])).unwrap();
    // the flat curve leaves the shadow price free; bid prices narrow it later
    assert!(check_filling(&inst, &out.solution.delta, &out.prices, 1e-9).pass);
    assert!((out.objective - 2.0).abs() < 1e-9);
}

#[test]
fn unclearable_volume_is_infeasible() {
    // demand block of 5 against a curve that supplies at most 1
    let inst = common::single_hour((0.0, 10.0), vec![(0.0, 0.0), (5.0, -1.0), (10.0, -1.0)], &[("d", 9.0, 5.0)]);
    let err = solve_relaxation(&inst, &select_blocks(&inst, &["d"])).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err:?}");
}

#[test]
fn two_area_fixtures_match_reference() {
    let r = reference();
    for name in ["two_area_open", "two_area_congested"] {
        let inst = fixture(name);
        let out = solve_relaxation(&inst, &BidSelection::empty(&inst)).unwrap();
        let want = &r[name];
        assert!((out.solution.flows.at(0, 0) - num(&want["flows"][0])).abs() < 1e-6, "{name}");
        assert!((out.prices.at(0, 0) - num(&want["prices"]["R"][0])).abs() < 1e-6, "{name}");
        assert!((out.prices.at(1, 0) - num(&want["prices"]["S"][0])).abs() < 1e-6, "{name}");
        assert!((out.objective - num(&want["welfare"])).abs() < 1e-6, "{name}");
    }
}

#[test]
fn outcomes_satisfy_equilibrium_checks() {
    let mut checked = 0;
    for seed in 0..60 {
        let inst = random_instance(seed);
        for sel in link_consistent_block_selections(&inst).into_iter().take(8) {
            let Ok(out) = solve_relaxation(&inst, &sel) else { continue };
            let f = check_filling(&inst, &out.solution.delta, &out.prices, 1e-6);
            assert!(f.pass, "seed {seed}: {:?}", f.violations);
            let g = check_flow_price(&inst, &out.solution.flows, &out.prices, 1e-6);
            assert!(g.pass, "seed {seed}: {:?}", g.violations);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn objective_ignores_area_order() {
    for seed in 0..40 {
        let inst = random_instance(seed);
        if inst.n_areas() < 2 {
            continue;
        }
        let mut doc = InstanceDocument::from_instance(&inst);
        doc.areas.reverse();
        doc.curves.reverse();
        let permuted = doc.into_instance().unwrap();
        let a = solve_relaxation(&inst, &BidSelection::empty(&inst));
        let b = solve_relaxation(&permuted, &BidSelection::empty(&permuted));
        match (a, b) {
            (Ok(a), Ok(b)) => assert!((a.objective - b.objective).abs() < 1e-9, "seed {seed}"),
            (Err(_), Err(_)) => {}
            (a, b) => panic!("seed {seed}: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn strictly_concave_fills_are_reproducible() {
    for seed in 0..30 {
        let inst = random_instance(seed);
        let sel = BidSelection::empty(&inst);
        let Ok(a) = solve_relaxation(&inst, &sel) else { continue };
        let b = solve_relaxation(&inst, &sel).unwrap();
        for (h, _, s) in inst.segments() {
            if s.quantity_span != 0.0 && s.price_span != 0.0 {
                assert_eq!(a.solution.delta[h], b.solution.delta[h]);
            }
        }
    }
}
