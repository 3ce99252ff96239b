use dayahead::model::{build_net_curve, PriceInterval};
use dayahead::Error;

fn iv(lower: f64, upper: f64) -> PriceInterval {
    PriceInterval { lower, upper }
}

#[test]
fn flat_zero_curve_is_one_horizontal_segment() {
    let c = build_net_curve(&[(0.0, 0.0), (100.0, 0.0)], iv(0.0, 100.0), iv(0.0, 100.0)).unwrap();
    assert_eq!(c.segments.len(), 1);
    assert!(c.segments[0].is_horizontal());
    assert!(!c.segments[0].is_curtailment);
    assert_eq!(c.min_net_demand, 0.0);
}

#[test]
fn step_curve_has_vertical_segment_at_forty() {
    let c = build_net_curve(
        &[(0.0, 30.0), (40.0, 30.0), (40.0, 0.0), (100.0, 0.0)],
        iv(0.0, 100.0),
        iv(0.0, 100.0),
    )
    .unwrap();
    assert_eq!(c.segments.len(), 3);
    let v: Vec<_> = c.segments.iter().filter(|s| !s.is_horizontal()).collect();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].base_price, 40.0);
    assert_eq!(v[0].price_span, 0.0);
    assert_eq!(v[0].quantity_span, 30.0);
    assert_eq!(v[0].lower_quantity, 0.0);
    assert_eq!(c.min_net_demand, 0.0);
    assert!(c.segments.iter().all(|s| !s.is_curtailment));
    // descending price order
    assert!(c.segments.windows(2).all(|w| w[0].base_price >= w[1].base_price));
}

#[test]
fn small_area_interval_is_extended_horizontally() {
    let c = build_net_curve(
        &[(-200.0, 50.0), (2000.0, -50.0)],
        iv(-200.0, 2000.0),
        iv(-3000.0, 3000.0),
    )
    .unwrap();
    let nodes = c.nodes();
    assert_eq!(
        nodes,
        vec![(-3000.0, 50.0), (-200.0, 50.0), (2000.0, -50.0), (3000.0, -50.0)]
    );
    assert_eq!(c.min_net_demand, -50.0);
    assert!(c.segments.iter().all(|s| !s.is_curtailment));
}

#[test]
fn demand_above_supply_gets_curtailment_segment() {
    let c = build_net_curve(&[(0.0, 80.0), (50.0, 20.0)], iv(0.0, 50.0), iv(-100.0, 100.0)).unwrap();
    let curt: Vec<_> = c.segments.iter().filter(|s| s.is_curtailment).collect();
    assert_eq!(curt.len(), 1);
    assert_eq!(curt[0].base_price, 50.0);
    assert!(curt[0].is_vertical());
    assert_eq!(curt[0].quantity_span, 20.0);
    assert!(curt[0].base_quantity > 0.0);
    assert_eq!(c.min_net_demand, 0.0);
    assert_eq!(c.nodes().last().unwrap(), &(100.0, 0.0));
}

#[test]
fn supply_above_demand_gets_supply_curtailment() {
    let c = build_net_curve(&[(0.0, -10.0), (50.0, -40.0)], iv(0.0, 50.0), iv(0.0, 50.0)).unwrap();
    let curt: Vec<_> = c.segments.iter().filter(|s| s.is_curtailment).collect();
    assert_eq!(curt.len(), 1);
    assert_eq!(curt[0].base_price, 0.0);
    assert!(curt[0].base_quantity <= 0.0);
    assert_eq!(curt[0].quantity_span, 10.0);
    assert_eq!(c.min_net_demand, -40.0);
}

#[test]
fn redundant_nodes_are_collapsed() {
    let c = build_net_curve(
        &[(0.0, 10.0), (5.0, 10.0), (10.0, 10.0), (10.0, 5.0), (10.0, 0.0), (20.0, 0.0)],
        iv(0.0, 20.0),
        iv(0.0, 20.0),
    )
    .unwrap();
    assert_eq!(c.nodes(), vec![(0.0, 10.0), (10.0, 10.0), (10.0, 0.0), (20.0, 0.0)]);
}

#[test]
fn rejects_bad_node_lists() {
    assert_eq!(build_net_curve(&[], iv(0.0, 1.0), iv(0.0, 1.0)), Err(Error::EmptyCurve));
    assert!(matches!(
        build_net_curve(&[(0.0, 0.0), (1.0, 5.0)], iv(0.0, 1.0), iv(0.0, 1.0)),
        Err(Error::NonMonotoneCurve { index: 1, .. })
    ));
    assert!(matches!(
        build_net_curve(&[(5.0, 0.0), (1.0, -5.0)], iv(0.0, 10.0), iv(0.0, 10.0)),
        Err(Error::NonMonotoneCurve { .. })
    ));
    assert!(matches!(
        build_net_curve(&[(0.0, 0.0), (20.0, 0.0)], iv(0.0, 10.0), iv(0.0, 20.0)),
        Err(Error::NodeOutsideInterval { .. })
    ));
}

#[test]
fn lower_quantity_follows_case_rule() {
    // straddling segment: quantity 10 at price 0 down to -10 at price 20
    let c = build_net_curve(&[(0.0, 10.0), (20.0, -10.0)], iv(0.0, 20.0), iv(0.0, 20.0)).unwrap();
    let s = &c.segments[0];
    assert_eq!(s.base_quantity, 10.0);
    assert_eq!(s.quantity_span, 20.0);
    assert_eq!(s.lower_quantity, -10.0);
    assert!((s.zero_crossing() - 0.5).abs() < 1e-12);
    assert_eq!(s.quantity_at(0.0), -10.0);
    assert_eq!(s.price_at(0.5), 10.0);
}

#[test]
fn quantity_range_and_price_band() {
    let c = build_net_curve(
        &[(0.0, 30.0), (40.0, 30.0), (40.0, 0.0), (100.0, 0.0)],
        iv(0.0, 100.0),
        iv(0.0, 100.0),
    )
    .unwrap();
    assert_eq!(c.quantity_range_at(40.0), (0.0, 30.0));
    assert_eq!(c.quantity_range_at(39.0), (30.0, 30.0));
    assert_eq!(c.quantity_range_at(41.0), (0.0, 0.0));
    let band = c.price_band(0.0, 0.0, iv(0.0, 100.0));
    assert_eq!((band.lower, band.upper), (40.0, 100.0));
    let band = c.price_band(10.0, 20.0, iv(0.0, 100.0));
    assert_eq!((band.lower, band.upper), (40.0, 40.0));
    let band = c.price_band(30.0, 30.0, iv(0.0, 100.0));
    assert_eq!((band.lower, band.upper), (0.0, 40.0));
}
