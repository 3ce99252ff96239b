//! The market as a concave QP for a fixed (or relaxed) bid selection.

use crate::error::{Error, Result};
use crate::model::{
    fixed_selection_terms, BidSelection, DualCertificate, FixedSelectionTerms, FlowSchedule, Grid,
    Instance, PriceVector, PrimalSolution,
};
use crate::qp::{solve_qp, QpProblem, QpSolution, QpStatus, DEFAULT_TOL};

/// Where each market quantity lives inside an assembled [`QpProblem`].
#[derive(Debug, Clone)]
pub struct MarketLayout {
    /// Variable of each segment, `None` for horizontal segments (fixed at 0).
    pub delta: Vec<Option<usize>>,
    pub flow: Grid<usize>,
    /// Clearing row per (area, hour).
    pub clearing: Grid<usize>,
    /// `tau_t - tau_{t-1} <= ramp` rows per (interconnector, hour).
    pub ramp_up: Grid<Option<usize>>,
    /// `tau_{t-1} - tau_t <= ramp` rows.
    pub ramp_down: Grid<Option<usize>>,
    /// Binary columns when the selection is relaxed.
    pub blocks: Vec<usize>,
    /// Indexed `[flex][hour]`.
    pub flex: Vec<Vec<usize>>,
}

/// Builds the market QP. With `selection` the combinatorial volume is fixed
/// data; without it every block and flex bid gets a `[0, 1]` column together
/// with its link and single-hour rows.
pub(crate) fn build_market_qp(
    instance: &Instance,
    selection: Option<&BidSelection>,
) -> (QpProblem, MarketLayout) {
    let mut qp = QpProblem::new();
    let hours = instance.hours;
    let n_ic = instance.interconnectors.len();

    let mut delta = Vec::with_capacity(instance.segment_count());
    for (_, _, s) in instance.segments() {
        if s.is_horizontal() {
            delta.push(None);
        } else {
            let lin = s.top_price() * s.quantity_span;
            let quad = -s.price_span * s.quantity_span;
            delta.push(Some(qp.add_var(0.0, 1.0, lin, quad)));
        }
    }
    let mut flow = Grid::new(n_ic, hours, 0);
    for (c, ic) in instance.interconnectors.iter().enumerate() {
        for t in 0..hours {
            flow.set(c, t, qp.add_var(ic.lower[t], ic.upper[t], 0.0, 0.0));
        }
    }

    let mut blocks = Vec::new();
    let mut flex = Vec::new();
    let volume = match selection {
        Some(sel) => fixed_selection_terms(instance, sel).volume,
        None => {
            for bid in &instance.blocks {
                let value: f64 = bid.quantities.iter().map(|q| bid.limit_price * q).sum();
                blocks.push(qp.add_var(0.0, 1.0, value, 0.0));
            }
            for bid in &instance.flex {
                let cols: Vec<usize> = (0..hours)
                    .map(|_| qp.add_var(0.0, 1.0, bid.limit_price * bid.quantity, 0.0))
                    .collect();
                flex.push(cols);
            }
            Grid::new(instance.n_areas(), hours, 0.0)
        }
    };

    let mut clearing = Grid::new(instance.n_areas(), hours, 0);
    for a in 0..instance.n_areas() {
        for t in 0..hours {
            let mut row = Vec::new();
            for h in instance.segment_range(a, t) {
                if let Some(v) = delta[h] {
                    row.push((v, instance.segment(h).1.quantity_span));
                }
            }
            for (c, ic) in instance.interconnectors.iter().enumerate() {
                if ic.from == a {
                    row.push((*flow.get(c, t), 1.0));
                }
                if ic.to == a {
                    row.push((*flow.get(c, t), -1.0));
                }
            }
            if selection.is_none() {
                for (b, bid) in instance.blocks.iter().enumerate() {
                    if bid.area == a && bid.quantities[t] != 0.0 {
                        row.push((blocks[b], bid.quantities[t]));
                    }
                }
                for (f, bid) in instance.flex.iter().enumerate() {
                    if bid.area == a {
                        row.push((flex[f][t], bid.quantity));
                    }
                }
            }
            let rhs = -instance.curve(a, t).min_net_demand - volume.at(a, t);
            clearing.set(a, t, qp.add_eq(row, rhs));
        }
    }

    let mut ramp_up = Grid::new(n_ic, hours, None);
    let mut ramp_down = Grid::new(n_ic, hours, None);
    for (c, ic) in instance.interconnectors.iter().enumerate() {
        let Some(ramp) = ic.ramp else { continue };
        for t in 0..hours {
            let cur = *flow.get(c, t);
            if t == 0 {
                ramp_up.set(c, t, Some(qp.add_le(vec![(cur, 1.0)], ramp + ic.initial_flow)));
                ramp_down.set(c, t, Some(qp.add_le(vec![(cur, -1.0)], ramp - ic.initial_flow)));
            } else {
                let prev = *flow.get(c, t - 1);
                ramp_up.set(c, t, Some(qp.add_le(vec![(cur, 1.0), (prev, -1.0)], ramp)));
                ramp_down.set(c, t, Some(qp.add_le(vec![(cur, -1.0), (prev, 1.0)], ramp)));
            }
        }
    }

    if selection.is_none() {
        for l in &instance.links {
            qp.add_le(vec![(blocks[l.child], 1.0), (blocks[l.parent], -1.0)], 0.0);
        }
        for cols in &flex {
            qp.add_le(cols.iter().map(|&v| (v, 1.0)).collect(), 1.0);
        }
    }

    let layout = MarketLayout {
        delta,
        flow,
        clearing,
        ramp_up,
        ramp_down,
        blocks,
        flex,
    };
    (qp, layout)
}

impl MarketLayout {
    pub(crate) fn delta_values(&self, x: &[f64]) -> Vec<f64> {
        self.delta
            .iter()
            .map(|v| v.map_or(0.0, |j| x[j].clamp(0.0, 1.0)))
            .collect()
    }

    pub(crate) fn flow_values(&self, x: &[f64]) -> FlowSchedule {
        let mut f = Grid::new(self.flow.rows(), self.flow.cols(), 0.0);
        for (o, &j) in f.as_mut_slice().iter_mut().zip(self.flow.as_slice()) {
            *o = x[j];
        }
        f
    }

    pub(crate) fn prices(&self, sol: &QpSolution) -> PriceVector {
        let mut p = Grid::new(self.clearing.rows(), self.clearing.cols(), 0.0);
        for (o, &r) in p.as_mut_slice().iter_mut().zip(self.clearing.as_slice()) {
            *o = sol.eq_duals[r];
        }
        p
    }

    pub(crate) fn certificate(&self, instance: &Instance, sol: &QpSolution) -> DualCertificate {
        let mut cert = DualCertificate::zeros(instance);
        for (h, v) in self.delta.iter().enumerate() {
            if let Some(j) = *v {
                cert.v_upper[h] = sol.upper_duals[j];
                cert.v_lower[h] = sol.lower_duals[j];
            }
        }
        for c in 0..self.flow.rows() {
            for t in 0..self.flow.cols() {
                let j = *self.flow.get(c, t);
                cert.mu_upper.set(c, t, sol.upper_duals[j]);
                cert.mu_lower.set(c, t, sol.lower_duals[j]);
                if let Some(r) = *self.ramp_up.get(c, t) {
                    cert.ramp_up.set(c, t, sol.ineq_duals[r]);
                }
                if let Some(r) = *self.ramp_down.get(c, t) {
                    cert.ramp_down.set(c, t, sol.ineq_duals[r]);
                }
            }
        }
        cert
    }
}

/// Optimal continuous execution and shadow prices for a fixed selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationOutcome {
    pub solution: PrimalSolution,
    pub prices: PriceVector,
    pub certificate: DualCertificate,
    /// Economic surplus (relative) including the fixed bids.
    pub objective: f64,
}

/// QP of the market with the bid selection fixed, plus the constant
/// welfare and volume the selection contributes.
pub fn assemble_qprelax(
    instance: &Instance,
    selection: &BidSelection,
) -> Result<(QpProblem, FixedSelectionTerms)> {
    check_selection(instance, selection)?;
    let (qp, _) = build_market_qp(instance, Some(selection));
    Ok((qp, fixed_selection_terms(instance, selection)))
}

pub(crate) fn check_selection(instance: &Instance, selection: &BidSelection) -> Result<()> {
    selection.check_shape(instance)?;
    selection.check_links(instance)
}

pub fn solve_relaxation(instance: &Instance, selection: &BidSelection) -> Result<RelaxationOutcome> {
    check_selection(instance, selection)?;
    let (qp, layout) = build_market_qp(instance, Some(selection));
    let sol = solve_qp(&qp, DEFAULT_TOL)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => {
            return Err(Error::Infeasible(
                "the selected block and flex volume cannot be cleared".into(),
            ))
        }
        QpStatus::Unbounded => {
            return Err(Error::Numerical("relaxation reported an unbounded objective".into()))
        }
    }
    let terms = fixed_selection_terms(instance, selection);
    Ok(RelaxationOutcome {
        solution: PrimalSolution {
            selection: selection.clone(),
            delta: layout.delta_values(&sol.x),
            flows: layout.flow_values(&sol.x),
        },
        prices: layout.prices(&sol),
        certificate: layout.certificate(instance, &sol),
        objective: sol.objective + terms.constant,
    })
}
