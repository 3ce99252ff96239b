//! Cuts over the binary bid variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BidSelection, Binary, Instance, PriceVector, PrimalSolution};

/// Default strictness for "incurs a loss".
pub const LOSS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutKind {
    BidCut,
    NoGood,
    Curtailment,
}

/// `sum coeff * x <= rhs` over binary bid variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub coeffs: Vec<(Binary, f64)>,
    pub rhs: f64,
    pub kind: CutKind,
}

impl Cut {
    pub fn lhs(&self, selection: &BidSelection) -> f64 {
        self.coeffs
            .iter()
            .filter(|(v, _)| selection.value(*v))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn is_satisfied(&self, selection: &BidSelection) -> bool {
        self.lhs(selection) <= self.rhs + 1e-9
    }

    /// Fails when the cut names a bid or hour the instance does not have.
    pub fn check(&self, instance: &Instance) -> Result<()> {
        for (v, _) in &self.coeffs {
            let ok = match *v {
                Binary::Block(b) => b < instance.blocks.len(),
                Binary::Flex { flex, hour } => flex < instance.flex.len() && hour < instance.hours,
            };
            if !ok {
                return Err(Error::UnknownId(format!("cut references {v:?}")));
            }
        }
        Ok(())
    }
}

/// Executed bids that lose money at the given prices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LossSets {
    pub blocks: Vec<usize>,
    /// `(flex, hour)` pairs.
    pub flex: Vec<(usize, usize)>,
}

impl LossSets {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty() && self.flex.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blocks.len() + self.flex.len()
    }
}

pub fn block_surplus(instance: &Instance, b: usize, prices: &PriceVector) -> f64 {
    let bid = &instance.blocks[b];
    bid.quantities
        .iter()
        .enumerate()
        .map(|(t, q)| (bid.limit_price - prices.at(bid.area, t)) * q)
        .sum()
}

pub fn flex_surplus(instance: &Instance, f: usize, hour: usize, prices: &PriceVector) -> f64 {
    let bid = &instance.flex[f];
    (bid.limit_price - prices.at(bid.area, hour)) * bid.quantity
}

pub fn loss_sets(instance: &Instance, selection: &BidSelection, prices: &PriceVector, tol: f64) -> LossSets {
    let mut out = LossSets::default();
    for b in 0..instance.blocks.len() {
        if selection.blocks[b] && block_surplus(instance, b, prices) < -tol {
            out.blocks.push(b);
        }
    }
    for f in 0..instance.flex.len() {
        if let Some(t) = selection.flex[f] {
            if flex_surplus(instance, f, t, prices) < -tol {
                out.flex.push((f, t));
            }
        }
    }
    out
}

/// Forbids executing every member of the loss sets at once.
pub fn bid_cut(sets: &LossSets) -> Result<Cut> {
    if sets.is_empty() {
        return Err(Error::EmptyLossSets);
    }
    let coeffs = sets
        .blocks
        .iter()
        .map(|&b| (Binary::Block(b), 1.0))
        .chain(sets.flex.iter().map(|&(flex, hour)| (Binary::Flex { flex, hour }, 1.0)))
        .collect();
    Ok(Cut {
        coeffs,
        rhs: sets.len() as f64 - 1.0,
        kind: CutKind::BidCut,
    })
}

/// Excludes exactly the given selection.
pub fn no_good_cut(instance: &Instance, selection: &BidSelection) -> Cut {
    let mut coeffs = Vec::new();
    let mut ones = 0.0;
    for v in BidSelection::binaries(instance) {
        if selection.value(v) {
            coeffs.push((v, 1.0));
            ones += 1.0;
        } else {
            coeffs.push((v, -1.0));
        }
    }
    Cut {
        coeffs,
        rhs: ones - 1.0,
        kind: CutKind::NoGood,
    }
}

/// Executed combinatorial bids that would have to yield to curtailed hourly bids.
#[derive(Debug, Clone, PartialEq)]
pub struct CurtailmentViolation {
    pub area: usize,
    pub hour: usize,
    pub segment: usize,
    pub blocks: Vec<usize>,
    pub flex: Vec<usize>,
}

impl CurtailmentViolation {
    pub fn as_loss_sets(&self) -> LossSets {
        LossSets {
            blocks: self.blocks.clone(),
            flex: self.flex.iter().map(|&f| (f, self.hour)).collect(),
        }
    }
}

/// While hourly demand is curtailed no demand block or flex bid may execute
/// in that area and hour; symmetrically for supply.
pub fn curtailment_violations(instance: &Instance, solution: &PrimalSolution) -> Vec<CurtailmentViolation> {
    const TOL: f64 = 1e-7;
    let mut out = Vec::new();
    for (h, curve, seg) in instance.segments() {
        if !seg.is_curtailment || seg.is_horizontal() {
            continue;
        }
        let d = solution.delta[h];
        let demand = seg.base_quantity > 0.0;
        let active = if demand { d < 1.0 - TOL } else { d > TOL };
        if !active {
            continue;
        }
        let same_side = |q: f64| if demand { q > 0.0 } else { q < 0.0 };
        let blocks: Vec<usize> = instance
            .blocks
            .iter()
            .enumerate()
            .filter(|(b, bid)| {
                solution.selection.blocks[*b]
                    && bid.area == curve.area
                    && same_side(bid.quantities[curve.hour])
            })
            .map(|(b, _)| b)
            .collect();
        let flex: Vec<usize> = instance
            .flex
            .iter()
            .enumerate()
            .filter(|(f, bid)| {
                solution.selection.flex[*f] == Some(curve.hour)
                    && bid.area == curve.area
                    && same_side(bid.quantity)
            })
            .map(|(f, _)| f)
            .collect();
        if !blocks.is_empty() || !flex.is_empty() {
            out.push(CurtailmentViolation {
                area: curve.area,
                hour: curve.hour,
                segment: h,
                blocks,
                flex,
            });
        }
    }
    out
}
