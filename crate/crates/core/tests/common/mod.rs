#![allow(dead_code)]

pub mod qp;

use std::path::PathBuf;

use dayahead::io::parse_instance;
use dayahead::model::{BlockBid, FlexBid, Instance, InstanceSpec, Interconnector, Link, PriceInterval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Instance {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_instance(&text).expect("fixture is valid")
}

/// Frozen values computed independently by `tools/reference_values.py`.
pub fn reference() -> serde_json::Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/reference.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn num(v: &serde_json::Value) -> f64 {
    v.as_f64().expect("number")
}

/// Small random order book: at most 2 areas, 3 hours, 6 blocks, 2 flex bids
/// and 4 curve segments per curve, with jittered prices.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_areas = rng.random_range(1..=2);
    let hours = rng.random_range(1..=3);
    let global = PriceInterval::new(-100.0, 200.0).unwrap();
    let areas = (0..n_areas)
        .map(|a| (format!("A{a}"), None))
        .collect::<Vec<_>>();

    let mut curves = Vec::new();
    for a in 0..n_areas {
        for t in 0..hours {
            let pieces = rng.random_range(1..=4);
            let mut p: f64 = rng.random_range(0.0..20.0);
            let mut q: f64 = rng.random_range(5.0..40.0);
            let mut nodes = vec![(p, q)];
            for _ in 0..pieces {
                if rng.random_bool(0.2) {
                    // vertical step
                    q -= rng.random_range(2.0..15.0);
                } else {
                    p += rng.random_range(5.0..40.0) + rng.random::<f64>() * 1e-3;
                    q -= rng.random_range(2.0..20.0);
                }
                nodes.push((p, q));
            }
            let p_end = nodes.last().unwrap().0;
            if p_end > 200.0 {
                for n in nodes.iter_mut() {
                    n.0 *= 199.0 / p_end;
                }
            }
            curves.push((a, t, nodes));
        }
    }

    let n_blocks = rng.random_range(0..=6);
    let mut blocks = Vec::new();
    for b in 0..n_blocks {
        let demand = rng.random_bool(0.5);
        let sign = if demand { 1.0 } else { -1.0 };
        let mut quantities: Vec<f64> = (0..hours)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    sign * rng.random_range(1.0..15.0)
                }
            })
            .collect();
        if quantities.iter().all(|q| *q == 0.0) {
            quantities[0] = sign * 5.0;
        }
        blocks.push(BlockBid {
            id: format!("b{b}"),
            area: rng.random_range(0..n_areas),
            limit_price: rng.random_range(10.0..90.0) + rng.random::<f64>() * 1e-3,
            quantities,
        });
    }
    let mut links = Vec::new();
    for b in 1..n_blocks {
        if rng.random_bool(0.15) {
            links.push(Link {
                child: b,
                parent: rng.random_range(0..b),
            });
        }
    }
    let n_flex = rng.random_range(0..=2);
    let flex = (0..n_flex)
        .map(|f| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            FlexBid {
                id: format!("f{f}"),
                area: rng.random_range(0..n_areas),
                limit_price: rng.random_range(10.0..90.0) + rng.random::<f64>() * 1e-3,
                quantity: sign * rng.random_range(1.0..10.0),
            }
        })
        .collect();
    let mut interconnectors = Vec::new();
    if n_areas == 2 {
        let cap = rng.random_range(5.0..30.0);
        let ramp = (hours > 1 && rng.random_bool(0.3)).then(|| rng.random_range(3.0..15.0));
        interconnectors.push(Interconnector {
            id: "c0".into(),
            from: 0,
            to: 1,
            lower: vec![-cap; hours],
            upper: vec![cap; hours],
            ramp,
            initial_flow: 0.0,
        });
    }
    Instance::new(InstanceSpec {
        price_interval: Some(global),
        areas,
        hours,
        curves,
        blocks,
        links,
        flex,
        interconnectors,
    })
    .expect("generated instance is valid")
}

/// Selection executing the named blocks and nothing else.
pub fn select_blocks(instance: &Instance, ids: &[&str]) -> dayahead::model::BidSelection {
    let mut sel = dayahead::model::BidSelection::empty(instance);
    for id in ids {
        sel.blocks[instance.block_index(id).expect("known block")] = true;
    }
    sel
}

/// Every link-consistent selection, blocks only, flex bids left out.
pub fn link_consistent_block_selections(instance: &Instance) -> Vec<dayahead::model::BidSelection> {
    let n = instance.blocks.len();
    (0u32..1 << n)
        .map(|mask| {
            let mut sel = dayahead::model::BidSelection::empty(instance);
            for b in 0..n {
                sel.blocks[b] = mask >> b & 1 == 1;
            }
            sel
        })
        .filter(|s| s.check_links(instance).is_ok())
        .collect()
}

/// One-area, one-hour order book with the given curve and blocks `(id, limit, quantity)`.
pub fn single_hour(interval: (f64, f64), nodes: Vec<(f64, f64)>, blocks: &[(&str, f64, f64)]) -> Instance {
    Instance::new(InstanceSpec {
        price_interval: Some(PriceInterval::new(interval.0, interval.1).unwrap()),
        areas: vec![("X".into(), None)],
        hours: 1,
        curves: vec![(0, 0, nodes)],
        blocks: blocks
            .iter()
            .map(|&(id, p, q)| BlockBid {
                id: id.into(),
                area: 0,
                limit_price: p,
                quantities: vec![q],
            })
            .collect(),
        ..InstanceSpec::default()
    })
    .expect("valid instance")
}
