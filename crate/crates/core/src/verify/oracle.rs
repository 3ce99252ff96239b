//! Ground truth by enumerating every bid selection.

use crate::driver::{finish, strict_prices, ClearingResult, ClearingStatus, Mode};
use crate::error::{Error, Result};
use crate::model::{BidSelection, Instance};
use crate::pricing::solve_fixflow;
use crate::relaxation::solve_relaxation;

use super::check_curtailment;

/// Default limit on the number of binary decisions.
pub const ORACLE_CAP: usize = 12;

/// Welfare ties closer than this are broken by the selection order.
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub selection: BidSelection,
    /// Welfare of the selection with optimal continuous execution.
    pub welfare: f64,
    /// `None` when the selection was never priced because a better one cleared.
    pub price_feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub result: ClearingResult,
    /// Every clearable selection, best welfare first.
    pub frontier: Vec<FrontierPoint>,
}

fn link_consistent_selections(instance: &Instance) -> Vec<BidSelection> {
    let nb = instance.blocks.len();
    let mut blocks_only = Vec::new();
    for mask in 0u64..(1u64 << nb) {
        let mut sel = BidSelection::empty(instance);
        for (b, x) in sel.blocks.iter_mut().enumerate() {
            *x = mask >> b & 1 == 1;
        }
        if sel.check_links(instance).is_ok() {
            blocks_only.push(sel);
        }
    }
    let mut all = blocks_only;
    for f in 0..instance.flex.len() {
        let mut next = Vec::with_capacity(all.len() * (instance.hours + 1));
        for sel in &all {
            for choice in std::iter::once(None).chain((0..instance.hours).map(Some)) {
                let mut s = sel.clone();
                s.flex[f] = choice;
                next.push(s);
            }
        }
        all = next;
    }
    all
}

/// Best price-feasible selection by exhaustive enumeration.
pub fn oracle_clear(instance: &Instance, cap: usize) -> Result<OracleResult> {
    let binaries = instance.binary_count();
    if binaries > cap {
        return Err(Error::TooLarge { binaries, cap });
    }
    let mut frontier = Vec::new();
    let mut solutions = Vec::new();
    for sel in link_consistent_selections(instance) {
        match solve_relaxation(instance, &sel) {
            Ok(out) => {
                frontier.push(FrontierPoint {
                    selection: sel,
                    welfare: out.objective,
                    price_feasible: None,
                });
                solutions.push(out.solution);
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut order: Vec<usize> = (0..frontier.len()).collect();
    order.sort_by(|&i, &j| {
        frontier[j]
            .welfare
            .total_cmp(&frontier[i].welfare)
            .then_with(|| {
                frontier[i]
                    .selection
                    .to_bits(instance)
                    .cmp(&frontier[j].selection.to_bits(instance))
            })
    });

    let mut best: Option<(usize, f64)> = None;
    let mut winner = None;
    for &i in &order {
        if let Some((_, w)) = best {
            if frontier[i].welfare < w - TIE {
                break;
            }
        }
        let sol = solve_fixflow(instance, &solutions[i])?;
        let feasible = if check_curtailment(instance, &sol).pass {
            strict_prices(instance, &sol)?
        } else {
            None
        };
        frontier[i].price_feasible = Some(feasible.is_some());
        if let Some(p) = feasible {
            let better = match best {
                None => true,
                Some((k, _)) => {
                    frontier[i].selection.to_bits(instance) < frontier[k].selection.to_bits(instance)
                }
            };
            if better {
                best = Some((i, frontier[i].welfare));
                winner = Some((sol, p));
            }
        }
    }

    let Some((sol, pricing)) = winner else {
        return Err(Error::Infeasible("no bid selection clears at linear prices".into()));
    };
    let bound = frontier[order[0]].welfare;
    let result = finish(
        instance,
        Mode::Exact,
        ClearingStatus::Optimal,
        sol,
        pricing,
        bound,
        Vec::new(),
        Vec::new(),
        false,
    )?;
    let frontier = order.into_iter().map(|i| frontier[i].clone()).collect();
    Ok(OracleResult { result, frontier })
}
