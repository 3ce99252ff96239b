use super::{BidSelection, BlockBid, FixedSelectionTerms, Grid, Instance, PriceInterval, PrimalSolution, PriceVector};
use crate::error::{Error, Result};

/// Residual of the clearing rows above which surplus identities no longer hold.
const CLEARING_TOL: f64 = 1e-6;

/// Constant welfare and fixed net demand of the executed combinatorial bids.
pub fn fixed_selection_terms(instance: &Instance, selection: &BidSelection) -> FixedSelectionTerms {
    let mut constant = 0.0;
    let mut volume = Grid::new(instance.n_areas(), instance.hours, 0.0);
    for (b, bid) in instance.blocks.iter().enumerate() {
        if selection.blocks.get(b).copied().unwrap_or(false) {
            for (t, &q) in bid.quantities.iter().enumerate() {
                constant += bid.limit_price * q;
                *volume.get_mut(bid.area, t) += q;
            }
        }
    }
    for (f, bid) in instance.flex.iter().enumerate() {
        if let Some(Some(t)) = selection.flex.get(f) {
            constant += bid.limit_price * bid.quantity;
            *volume.get_mut(bid.area, *t) += bid.quantity;
        }
    }
    FixedSelectionTerms { constant, volume }
}

/// Economic surplus of an execution state, up to an additive constant.
pub fn welfare(instance: &Instance, delta: &[f64], selection: &BidSelection) -> Result<f64> {
    if delta.len() != instance.segment_count() {
        return Err(Error::UnknownId(format!(
            "fill vector has {} entries, order book has {} segments",
            delta.len(),
            instance.segment_count()
        )));
    }
    selection.check_shape(instance)?;
    let curves: f64 = instance.segments().map(|(h, _, s)| s.welfare(delta[h])).sum();
    Ok(curves + fixed_selection_terms(instance, selection).constant)
}

/// Smallest possible total surplus of a block over all prices in `interval`.
pub fn big_m(block: &BlockBid, interval: PriceInterval) -> f64 {
    block
        .quantities
        .iter()
        .map(|&q| ((block.limit_price - interval.lower) * q).min((block.limit_price - interval.upper) * q))
        .sum::<f64>()
        .min(0.0)
}

/// Per-participant surpluses at given prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SurplusReport {
    pub segments: Vec<f64>,
    pub blocks: Vec<f64>,
    pub flex: Vec<f64>,
    /// Congestion rent per (interconnector, hour).
    pub rents: Grid<f64>,
    pub total: f64,
    /// Sum of the constants that make segment surpluses absolute.
    pub offset: f64,
    /// `total - offset`, comparable with [`welfare`].
    pub relative_total: f64,
}

pub fn surplus_report(
    instance: &Instance,
    solution: &PrimalSolution,
    prices: &PriceVector,
) -> Result<SurplusReport> {
    solution.selection.check_shape(instance)?;
    let (residual, a, t) = solution.clearing_residual(instance);
    if residual > CLEARING_TOL {
        return Err(Error::ClearingViolated {
            area: instance.areas[a].id.clone(),
            hour: t,
            residual,
        });
    }
    let mut segments = Vec::with_capacity(instance.segment_count());
    let mut offset = 0.0;
    for (h, curve, seg) in instance.segments() {
        let pi = prices.at(curve.area, curve.hour);
        let d = solution.delta[h];
        let k = -seg.welfare(seg.zero_crossing());
        offset += k;
        segments.push(seg.welfare(d) + k - pi * seg.quantity_at(d));
    }
    let blocks = instance
        .blocks
        .iter()
        .enumerate()
        .map(|(b, bid)| {
            if solution.selection.blocks[b] {
                bid.quantities
                    .iter()
                    .enumerate()
                    .map(|(t, q)| (bid.limit_price - prices.at(bid.area, t)) * q)
                    .sum()
            } else {
                0.0
            }
        })
        .collect::<Vec<f64>>();
    let flex = instance
        .flex
        .iter()
        .enumerate()
        .map(|(f, bid)| match solution.selection.flex[f] {
            Some(t) => (bid.limit_price - prices.at(bid.area, t)) * bid.quantity,
            None => 0.0,
        })
        .collect::<Vec<f64>>();
    let mut rents = Grid::new(instance.interconnectors.len(), instance.hours, 0.0);
    for (c, ic) in instance.interconnectors.iter().enumerate() {
        for t in 0..instance.hours {
            let spread = prices.at(ic.to, t) - prices.at(ic.from, t);
            rents.set(c, t, spread * solution.flows.at(c, t));
        }
    }
    let total = segments.iter().sum::<f64>()
        + blocks.iter().sum::<f64>()
        + flex.iter().sum::<f64>()
        + rents.as_slice().iter().sum::<f64>();
    Ok(SurplusReport {
        segments,
        blocks,
        flex,
        rents,
        total,
        offset,
        relative_total: total - offset,
    })
}
