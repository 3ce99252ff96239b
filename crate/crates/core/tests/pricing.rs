mod common;

use common::{fixture, link_consistent_block_selections, random_instance, select_blocks, single_hour};
use dayahead::io::InstanceDocument;
use dayahead::model::{big_m, welfare, BidSelection, Grid, Instance, InstanceSpec, PriceInterval};
use dayahead::pricing::{clamp_prices, solve_fixflow, solve_qpprice};
use dayahead::relaxation::solve_relaxation;
use dayahead::verify::{check_bid_prices, check_filling, check_flow_price};

fn relaxed(inst: &Instance, sel: &BidSelection) -> dayahead::model::PrimalSolution {
    solve_relaxation(inst, sel).unwrap().solution
}

#[test]
fn single_interconnector_flows_are_kept() {
    for name in ["two_area_open", "two_area_congested", "ramp"] {
        let inst = fixture(name);
        let sol = relaxed(&inst, &BidSelection::empty(&inst));
        let fixed = solve_fixflow(&inst, &sol).unwrap();
        for (a, b) in sol.flows.as_slice().iter().zip(fixed.flows.as_slice()) {
            assert!((a - b).abs() < 1e-9, "{name}: {a} vs {b}");
        }
    }
    let inst = fixture("two_area_congested");
    let fixed = solve_fixflow(&inst, &relaxed(&inst, &BidSelection::empty(&inst))).unwrap();
    assert!((fixed.flows.at(0, 0) - 20.0).abs() < 1e-9);
}

#[test]
fn diamond_routes_split_evenly() {
    let inst = fixture("diamond");
    let sel = BidSelection::empty(&inst);
    let sol = relaxed(&inst, &sel);
    let fixed = solve_fixflow(&inst, &sol).unwrap();
    for f in fixed.flows.as_slice() {
        assert!((f - 50.0).abs() < 1e-6, "{:?}", fixed.flows);
    }
    let before = welfare(&inst, &sol.delta, &sel).unwrap();
    let after = welfare(&inst, &fixed.delta, &sel).unwrap();
    assert!((before - after).abs() < 1e-9);

    // every other split of the 100 MW has a larger squared norm
    let norm = |x: f64| 2.0 * x * x + 2.0 * (100.0 - x) * (100.0 - x);
    let best = norm(50.0);
    for k in 0..=100 {
        assert!(norm(k as f64) >= best);
    }
}

#[test]
fn fixflow_is_idempotent_and_welfare_neutral() {
    let inst = fixture("diamond");
    let sel = BidSelection::empty(&inst);
    let once = solve_fixflow(&inst, &relaxed(&inst, &sel)).unwrap();
    let twice = solve_fixflow(&inst, &once).unwrap();
    for (a, b) in once.flows.as_slice().iter().zip(twice.flows.as_slice()) {
        assert!((a - b).abs() < 1e-9);
    }
    for seed in 0..40 {
        let inst = random_instance(seed);
        let sel = BidSelection::empty(&inst);
        let Ok(out) = solve_relaxation(&inst, &sel) else { continue };
        let fixed = solve_fixflow(&inst, &out.solution).unwrap();
        let w0 = welfare(&inst, &out.solution.delta, &sel).unwrap();
        let w1 = welfare(&inst, &fixed.delta, &sel).unwrap();
        assert!((w0 - w1).abs() <= 1e-9 * w0.abs().max(1.0), "seed {seed}: {w0} vs {w1}");
    }
}

#[test]
fn four_blocks_solution_b_prices_at_three() {
    let inst = fixture("four_blocks");
    let sol = relaxed(&inst, &select_blocks(&inst, &["c", "d"]));
    let out = solve_qpprice(&inst, &sol, false).unwrap();
    assert!((out.prices.at(0, 0) - 3.0).abs() < 1e-9);
    assert_eq!(out.total_loss, 0.0);
    assert!(out.block_losses.iter().all(|&l| l == 0.0));
}

#[test]
fn four_blocks_solution_a_needs_losses() {
    let inst = fixture("four_blocks");
    let all = select_blocks(&inst, &["a", "b", "c", "d"]);
    let sol = relaxed(&inst, &all);
    let out = solve_qpprice(&inst, &sol, true).unwrap();
    assert!(out.total_loss > 0.0);
    for (b, &l) in out.block_losses.iter().enumerate() {
        assert!((0.0..=-big_m(&inst.blocks[b], inst.price_interval)).contains(&l));
    }
    assert!(matches!(solve_qpprice(&inst, &sol, false), Err(dayahead::Error::Infeasible(_))));
}

#[test]
fn indifferent_stretch_prices_at_zero() {
    // horizontal stretch at the clearing volume spans [-5, 7]
    let inst = single_hour((-10.0, 10.0), vec![(-10.0, 5.0), (-5.0, 0.0), (7.0, 0.0), (10.0, -5.0)], &[]);
    let sol = relaxed(&inst, &BidSelection::empty(&inst));
    let out = solve_qpprice(&inst, &sol, false).unwrap();
    assert!(out.prices.at(0, 0).abs() < 1e-9, "{:?}", out.prices);
}

fn nordic() -> Instance {
    Instance::new(InstanceSpec {
        price_interval: Some(PriceInterval::new(-3000.0, 3000.0).unwrap()),
        areas: vec![
            ("N".into(), Some(PriceInterval::new(-200.0, 2000.0).unwrap())),
            ("C".into(), None),
        ],
        hours: 2,
        curves: vec![
            (0, 0, vec![(-200.0, 50.0), (2000.0, -50.0)]),
            (0, 1, vec![(-200.0, 50.0), (2000.0, -50.0)]),
            (1, 0, vec![(-3000.0, 10.0), (3000.0, -10.0)]),
            (1, 1, vec![(-3000.0, 10.0), (3000.0, -10.0)]),
        ],
        ..InstanceSpec::default()
    })
    .unwrap()
}

#[test]
fn clamping_projects_onto_area_intervals() {
    let inst = nordic();
    let mut p = Grid::new(2, 2, 0.0);
    p.set(0, 0, 2500.0);
    p.set(0, 1, -250.0);
    p.set(1, 0, 2500.0);
    let (q, warnings) = clamp_prices(&inst, &p);
    assert_eq!(q.at(0, 0), 2000.0);
    assert_eq!(q.at(0, 1), -200.0);
    assert_eq!(q.at(1, 0), 2500.0);
    assert_eq!(warnings.len(), 2);

    let mut inside = Grid::new(2, 2, 0.0);
    inside.set(0, 0, 1999.0);
    let (same, warnings) = clamp_prices(&inst, &inside);
    assert_eq!(same, inside);
    assert!(warnings.is_empty());
}

#[test]
fn loss_free_prices_pass_the_checkers() {
    let mut priced = 0;
    for seed in 0..60 {
        let inst = random_instance(seed);
        for sel in link_consistent_block_selections(&inst).into_iter().take(6) {
            let Ok(out) = solve_relaxation(&inst, &sel) else { continue };
            let sol = solve_fixflow(&inst, &out.solution).unwrap();
            let Ok(p) = solve_qpprice(&inst, &sol, true) else { continue };
            if p.total_loss > 0.0 {
                continue;
            }
            assert!(check_filling(&inst, &sol.delta, &p.prices, 1e-6).pass, "seed {seed}");
            assert!(check_flow_price(&inst, &sol.flows, &p.prices, 1e-6).pass, "seed {seed}");
            assert!(check_bid_prices(&inst, &sol.selection, &p.prices, 1e-6).pass, "seed {seed}");
            priced += 1;
        }
    }
    assert!(priced > 50, "only {priced} loss-free selections");
}

#[test]
fn prices_do_not_depend_on_area_order() {
    for seed in 0..40 {
        let inst = random_instance(seed);
        if inst.n_areas() < 2 {
            continue;
        }
        let mut doc = InstanceDocument::from_instance(&inst);
        doc.areas.reverse();
        let permuted = doc.into_instance().unwrap();
        let price = |i: &Instance| {
            let out = solve_relaxation(i, &BidSelection::empty(i)).ok()?;
            let sol = solve_fixflow(i, &out.solution).ok()?;
            solve_qpprice(i, &sol, true).ok().map(|p| p.prices)
        };
        let (Some(a), Some(b)) = (price(&inst), price(&permuted)) else { continue };
        for t in 0..inst.hours {
            for area in 0..2 {
                let other = permuted.area_index(&inst.areas[area].id).unwrap();
                assert!((a.at(area, t) - b.at(other, t)).abs() < 1e-8, "seed {seed}");
            }
        }
    }
}
