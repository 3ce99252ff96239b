//! Independent checks of the equilibrium conditions and a brute-force oracle.

mod oracle;

pub use oracle::{oracle_clear, FrontierPoint, OracleResult, ORACLE_CAP};

use serde::{Deserialize, Serialize};

use crate::cuts::{block_surplus, curtailment_violations, flex_surplus};
use crate::model::{BidSelection, Binary, FlowSchedule, Instance, PriceVector, PrimalSolution};
use crate::qp::{solve_qp, QpProblem, QpStatus, DEFAULT_TOL};

/// A bound or ramp constraint counts as tight within this distance.
const TIGHT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Filling,
    MeritOrder,
    FlowPrice,
    BlockPrice,
    FlexPrice,
    Curtailment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub location: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            pass: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(reports: impl IntoIterator<Item = ConditionReport>) -> Self {
        Self::from_violations(reports.into_iter().flat_map(|r| r.violations).collect())
    }

    pub fn worst(&self) -> f64 {
        self.violations.iter().map(|v| v.amount).fold(0.0, f64::max)
    }
}

/// How the filling condition is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillingMode {
    /// Price rule per fill state: at least the top price when empty, at most the
    /// bottom price when full, the segment price in between.
    CaseRule,
    /// Build the bound multipliers and test complementarity.
    Kkt,
    /// Case rule plus an auxiliary 0/1 assignment certifying merit order.
    Gamma,
}

fn segment_location(instance: &Instance, h: usize) -> String {
    let (curve, _) = instance.segment(h);
    format!("area {} hour {} segment {h}", instance.areas[curve.area].id, curve.hour)
}

/// Distance of `pi` from the prices admissible for fill level `d`.
fn case_violation(seg: &crate::model::NetCurveSegment, d: f64, pi: f64, tol: f64) -> f64 {
    let mut best = f64::INFINITY;
    if d <= tol {
        best = best.min((seg.top_price() - pi).max(0.0));
    }
    if d >= 1.0 - tol {
        best = best.min((pi - seg.base_price).max(0.0));
    }
    if d > 0.0 && d < 1.0 {
        best = best.min((pi - seg.price_at(d)).abs());
    }
    best
}

/// Multiplier form: `dq (p(d) - pi) = v_up - v_low` with `v_up (1 - d) = 0`
/// and `v_low d = 0`; returns the complementarity residual per unit of volume.
fn kkt_violation(seg: &crate::model::NetCurveSegment, d: f64, pi: f64) -> f64 {
    let r = seg.quantity_span * (seg.price_at(d) - pi);
    let v_up = r.max(0.0);
    let v_low = (-r).max(0.0);
    (v_up * (1.0 - d)).max(v_low * d) / seg.quantity_span
}

pub fn check_filling(instance: &Instance, delta: &[f64], prices: &PriceVector, tol: f64) -> ConditionReport {
    check_filling_with(instance, delta, prices, tol, FillingMode::CaseRule)
}

pub fn check_filling_with(
    instance: &Instance,
    delta: &[f64],
    prices: &PriceVector,
    tol: f64,
    mode: FillingMode,
) -> ConditionReport {
    let mut out = Vec::new();
    for (h, curve, seg) in instance.segments() {
        if seg.is_horizontal() {
            continue;
        }
        let pi = prices.at(curve.area, curve.hour);
        let d = delta[h];
        let amount = match mode {
            FillingMode::Kkt => kkt_violation(seg, d, pi),
            FillingMode::CaseRule | FillingMode::Gamma => case_violation(seg, d, pi, tol),
        };
        if amount > tol {
            out.push(Violation {
                condition: Condition::Filling,
                location: segment_location(instance, h),
                amount,
            });
        }
    }
    if mode == FillingMode::Gamma {
        for a in 0..instance.n_areas() {
            for t in 0..instance.hours {
                if gamma_assignment(instance, a, t, delta, tol).is_none() {
                    out.push(Violation {
                        condition: Condition::MeritOrder,
                        location: format!("area {} hour {t}", instance.areas[a].id),
                        amount: 1.0,
                    });
                }
            }
        }
    }
    ConditionReport::from_violations(out)
}

/// Auxiliary assignment with `delta_h <= gamma_h <= delta_next` along the
/// volume-carrying segments of one curve in ascending price order.
pub fn gamma_assignment(instance: &Instance, area: usize, hour: usize, delta: &[f64], tol: f64) -> Option<Vec<bool>> {
    // stored order is descending in price, so walk it backwards
    let hs: Vec<usize> = instance
        .segment_range(area, hour)
        .rev()
        .filter(|&h| !instance.segment(h).1.is_horizontal())
        .collect();
    let mut gamma = Vec::with_capacity(hs.len().saturating_sub(1));
    for w in hs.windows(2) {
        let (lo, hi) = (delta[w[0]], delta[w[1]]);
        if lo <= tol {
            gamma.push(false);
        } else if hi >= 1.0 - tol {
            gamma.push(true);
        } else {
            return None;
        }
    }
    Some(gamma)
}

/// How multiplier existence for the flow price condition is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowPriceMode {
    /// Feasibility problem over the multipliers of tight constraints.
    General,
    /// Closed-form test, valid only without ramping; falls back to
    /// [`FlowPriceMode::General`] on interconnectors that ramp.
    FastPath,
}

pub fn check_flow_price(instance: &Instance, flows: &FlowSchedule, prices: &PriceVector, tol: f64) -> ConditionReport {
    check_flow_price_with(instance, flows, prices, tol, FlowPriceMode::FastPath)
}

pub fn check_flow_price_with(
    instance: &Instance,
    flows: &FlowSchedule,
    prices: &PriceVector,
    tol: f64,
    mode: FlowPriceMode,
) -> ConditionReport {
    let mut out = Vec::new();
    for (c, ic) in instance.interconnectors.iter().enumerate() {
        if mode == FlowPriceMode::FastPath && ic.ramp.is_none() {
            for t in 0..instance.hours {
                let spread = prices.at(ic.to, t) - prices.at(ic.from, t);
                let f = flows.at(c, t);
                let amount = if spread > tol && f < ic.upper[t] - TIGHT {
                    spread
                } else if spread < -tol && f > ic.lower[t] + TIGHT {
                    -spread
                } else {
                    0.0
                };
                if amount > 0.0 {
                    out.push(Violation {
                        condition: Condition::FlowPrice,
                        location: format!("interconnector {} hour {t}", ic.id),
                        amount,
                    });
                }
            }
        } else {
            let residual = multiplier_residual(instance, c, flows, prices);
            if residual > tol {
                out.push(Violation {
                    condition: Condition::FlowPrice,
                    location: format!("interconnector {}", ic.id),
                    amount: residual,
                });
            }
        }
    }
    ConditionReport::from_violations(out)
}

/// Smallest achievable max-norm residual of the stationarity rows of one
/// interconnector, with multipliers allowed only on tight constraints.
fn multiplier_residual(instance: &Instance, c: usize, flows: &FlowSchedule, prices: &PriceVector) -> f64 {
    let ic = &instance.interconnectors[c];
    let hours = instance.hours;
    let mut qp = QpProblem::new();
    let s = qp.add_var(0.0, f64::INFINITY, -1.0, 0.0);
    let free = |tight: bool, qp: &mut QpProblem| -> Option<usize> {
        tight.then(|| qp.add_var(0.0, f64::INFINITY, 0.0, 0.0))
    };
    let mut mu_up = Vec::with_capacity(hours);
    let mut mu_low = Vec::with_capacity(hours);
    let mut r_up = Vec::with_capacity(hours);
    let mut r_down = Vec::with_capacity(hours);
    for t in 0..hours {
        let f = flows.at(c, t);
        mu_up.push(free(f >= ic.upper[t] - TIGHT, &mut qp));
        mu_low.push(free(f <= ic.lower[t] + TIGHT, &mut qp));
        let prev = if t == 0 { ic.initial_flow } else { flows.at(c, t - 1) };
        match ic.ramp {
            Some(r) => {
                r_up.push(free(f - prev >= r - TIGHT, &mut qp));
                r_down.push(free(prev - f >= r - TIGHT, &mut qp));
            }
            None => {
                r_up.push(None);
                r_down.push(None);
            }
        }
    }
    for t in 0..hours {
        let mut row = Vec::new();
        let mut push = |v: Option<usize>, a: f64| {
            if let Some(j) = v {
                row.push((j, a));
            }
        };
        push(mu_up[t], 1.0);
        push(mu_low[t], -1.0);
        push(r_up[t], 1.0);
        push(r_down[t], -1.0);
        if t + 1 < hours {
            push(r_down[t + 1], 1.0);
            push(r_up[t + 1], -1.0);
        }
        let spread = prices.at(ic.from, t) - prices.at(ic.to, t);
        // |spread + row| <= s
        let mut le = row.clone();
        le.push((s, -1.0));
        qp.add_le(le, -spread);
        let mut ge = row;
        ge.push((s, 1.0));
        qp.add_ge(ge, -spread);
    }
    match solve_qp(&qp, DEFAULT_TOL) {
        Ok(sol) if sol.status == QpStatus::Optimal => sol.x[s],
        _ => f64::INFINITY,
    }
}

/// Executed bids must not lose money: blocks in total, flex bids per unit.
pub fn check_bid_prices(instance: &Instance, selection: &BidSelection, prices: &PriceVector, tol: f64) -> ConditionReport {
    let mut out = Vec::new();
    for (b, bid) in instance.blocks.iter().enumerate() {
        if !selection.blocks[b] {
            continue;
        }
        let s = block_surplus(instance, b, prices);
        if s < -tol {
            out.push(Violation {
                condition: Condition::BlockPrice,
                location: format!("block {}", bid.id),
                amount: -s,
            });
        }
    }
    for (f, bid) in instance.flex.iter().enumerate() {
        let Some(t) = selection.flex[f] else { continue };
        let s = (bid.limit_price - prices.at(bid.area, t)) * bid.quantity.signum();
        if s < -tol {
            out.push(Violation {
                condition: Condition::FlexPrice,
                location: format!("flex bid {} hour {t}", bid.id),
                amount: -s,
            });
        }
    }
    ConditionReport::from_violations(out)
}

pub fn check_curtailment(instance: &Instance, solution: &PrimalSolution) -> ConditionReport {
    let out = curtailment_violations(instance, solution)
        .into_iter()
        .map(|v| Violation {
            condition: Condition::Curtailment,
            location: segment_location(instance, v.segment),
            amount: (v.blocks.len() + v.flex.len()) as f64,
        })
        .collect();
    ConditionReport::from_violations(out)
}

/// All four equilibrium checks at once.
pub fn check_all(instance: &Instance, solution: &PrimalSolution, prices: &PriceVector, tol: f64) -> ConditionReport {
    ConditionReport::merge([
        check_filling(instance, &solution.delta, prices, tol),
        check_flow_price(instance, &solution.flows, prices, tol),
        check_bid_prices(instance, &solution.selection, prices, tol),
        check_curtailment(instance, solution),
    ])
}

/// Rejected bids that would have been profitable at the given prices.
///
/// A flex bid is reported once, in its most profitable hour.
pub fn list_prbs(instance: &Instance, selection: &BidSelection, prices: &PriceVector, tol: f64) -> Vec<Binary> {
    let mut out = Vec::new();
    for b in 0..instance.blocks.len() {
        if !selection.blocks[b] && block_surplus(instance, b, prices) > tol {
            out.push(Binary::Block(b));
        }
    }
    for f in 0..instance.flex.len() {
        if selection.flex[f].is_some() {
            continue;
        }
        let best = (0..instance.hours)
            .map(|t| (t, flex_surplus(instance, f, t, prices)))
            .fold(None::<(usize, f64)>, |acc, (t, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((t, s)),
            });
        if let Some((hour, s)) = best {
            if s > tol {
                out.push(Binary::Flex { flex: f, hour });
            }
        }
    }
    out
}

/// Every equilibrium check for one candidate, as written by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub pass: bool,
    pub clearing_residual: f64,
    pub welfare: f64,
    pub filling: ConditionReport,
    pub flow_price: ConditionReport,
    pub bid_prices: ConditionReport,
    pub curtailment: ConditionReport,
}

pub fn verify_solution(
    instance: &Instance,
    solution: &PrimalSolution,
    prices: &PriceVector,
    tol: f64,
) -> crate::Result<SolutionReport> {
    let filling = check_filling(instance, &solution.delta, prices, tol);
    let flow_price = check_flow_price(instance, &solution.flows, prices, tol);
    let bid_prices = check_bid_prices(instance, &solution.selection, prices, tol);
    let curtailment = check_curtailment(instance, solution);
    let (residual, _, _) = solution.clearing_residual(instance);
    Ok(SolutionReport {
        pass: filling.pass && flow_price.pass && bid_prices.pass && curtailment.pass && residual <= tol,
        clearing_residual: residual,
        welfare: crate::model::welfare(instance, &solution.delta, &solution.selection)?,
        filling,
        flow_price,
        bid_prices,
        curtailment,
    })
}
