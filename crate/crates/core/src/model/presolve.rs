use super::{Grid, Instance, PriceInterval};

/// Price range that contains every equilibrium price of each (area, hour).
///
/// The hourly curve has to absorb whatever the combinatorial bids and the
/// interconnectors leave over, so its executed quantity lies in a band; the
/// prices at which the curve can sit inside that band bound the clearing price.
pub fn presolve_price_bounds(instance: &Instance) -> Grid<PriceInterval> {
    let global = instance.price_interval;
    let mut out = Grid::new(instance.n_areas(), instance.hours, global);
    for a in 0..instance.n_areas() {
        for t in 0..instance.hours {
            // executed curve quantity = net import - combinatorial volume
            let mut q_low = 0.0;
            let mut q_high = 0.0;
            for bid in instance.blocks.iter().filter(|b| b.area == a) {
                let q = bid.quantities[t];
                q_low -= q.max(0.0);
                q_high -= q.min(0.0);
            }
            for bid in instance.flex.iter().filter(|f| f.area == a) {
                q_low -= bid.quantity.max(0.0);
                q_high -= bid.quantity.min(0.0);
            }
            for ic in &instance.interconnectors {
                if ic.to == a {
                    q_low += ic.lower[t];
                    q_high += ic.upper[t];
                }
                if ic.from == a {
                    q_low -= ic.upper[t];
                    q_high -= ic.lower[t];
                }
            }
            out.set(a, t, instance.curve(a, t).price_band(q_low, q_high, global));
        }
    }
    out
}

/// Binaries that are zero in every equilibrium.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresolveFixings {
    pub blocks_off: Vec<bool>,
    /// Indexed `[flex][hour]`.
    pub flex_off: Vec<Vec<bool>>,
}

impl PresolveFixings {
    pub fn none(instance: &Instance) -> Self {
        Self {
            blocks_off: vec![false; instance.blocks.len()],
            flex_off: vec![vec![false; instance.hours]; instance.flex.len()],
        }
    }

    pub fn count(&self) -> usize {
        self.blocks_off.iter().filter(|b| **b).count()
            + self.flex_off.iter().flatten().filter(|b| **b).count()
    }
}

/// Fixes to zero every bid that loses money at all prices inside the bounds.
///
/// Bids that never lose are left free: executing them can still be
/// impossible, so fixing them to one would cut off equilibria.
pub fn presolve_fixings(instance: &Instance, bounds: &Grid<PriceInterval>) -> PresolveFixings {
    let mut fix = PresolveFixings::none(instance);
    for (b, bid) in instance.blocks.iter().enumerate() {
        let best: f64 = bid
            .quantities
            .iter()
            .enumerate()
            .map(|(t, &q)| {
                let iv = bounds.get(bid.area, t);
                ((bid.limit_price - iv.lower) * q).max((bid.limit_price - iv.upper) * q)
            })
            .sum();
        let scale = bid.quantities.iter().map(|q| q.abs()).sum::<f64>().max(1.0);
        fix.blocks_off[b] = best < -1e-6 * scale;
    }
    for (f, bid) in instance.flex.iter().enumerate() {
        for t in 0..instance.hours {
            let iv = bounds.get(bid.area, t);
            let best = ((bid.limit_price - iv.lower) * bid.quantity)
                .max((bid.limit_price - iv.upper) * bid.quantity);
            fix.flex_off[f][t] = best < -1e-6 * bid.quantity.abs().max(1.0);
        }
    }
    fix
}
