//! Unique flows, unique prices and price clamping for a cleared selection.

use crate::error::{Error, Result};
use crate::model::{big_m, DualCertificate, FlowSchedule, Grid, Instance, PriceVector, PrimalSolution};
use crate::qp::{solve_qp, QpProblem, QpStatus, SparseRow, DEFAULT_TOL};
use crate::relaxation::build_market_qp;

/// A bound or ramp row counts as tight within this distance.
pub const TIGHTNESS_TOL: f64 = 1e-7;

// Room left for the loss total when prices are minimized. Kept far below the
// loss tolerance so the price cannot drift into a spurious loss.
const STAGE_SLACK: f64 = 1e-12;

/// Redistributes flow over the vertical segments so that the squared flow is
/// minimal while welfare and every clearing row are preserved.
///
/// Returns the new solution; the selection and every sloped segment keep
/// their values.
pub fn solve_fixflow(instance: &Instance, solution: &PrimalSolution) -> Result<PrimalSolution> {
    if instance.interconnectors.is_empty() {
        return Ok(solution.clone());
    }
    let (mut qp, layout) = build_market_qp(instance, Some(&solution.selection));
    // objective: minimize sum tau^2 only
    qp.linear.iter_mut().for_each(|c| *c = 0.0);
    qp.quadratic.iter_mut().for_each(|d| *d = 0.0);
    for &j in layout.flow.as_slice() {
        qp.quadratic[j] = -2.0;
    }
    let mut welfare_row: SparseRow = Vec::new();
    let mut welfare_rhs = 0.0;
    for (h, _, seg) in instance.segments() {
        let Some(j) = layout.delta[h] else { continue };
        let d = solution.delta[h];
        if seg.is_vertical() {
            welfare_row.push((j, seg.base_price * seg.quantity_span));
            welfare_rhs += seg.base_price * seg.quantity_span * d;
        } else {
            qp.lower[j] = d;
            qp.upper[j] = d;
        }
    }
    if !welfare_row.is_empty() {
        qp.add_eq(welfare_row, welfare_rhs);
    }
    let sol = solve_qp(&qp, DEFAULT_TOL)?;
    if sol.status != QpStatus::Optimal {
        // the input is always feasible; fall back to it if round-off says otherwise
        return Ok(solution.clone());
    }
    let mut delta = layout.delta_values(&sol.x);
    for (h, _, seg) in instance.segments() {
        if !seg.is_vertical() {
            delta[h] = solution.delta[h];
        }
    }
    Ok(PrimalSolution {
        selection: solution.selection.clone(),
        delta,
        flows: layout.flow_values(&sol.x),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingOutcome {
    pub prices: PriceVector,
    /// Loss slack of each block (zero when not executed).
    pub block_losses: Vec<f64>,
    pub flex_losses: Vec<f64>,
    pub certificate: DualCertificate,
    pub total_loss: f64,
}

/// Price of the segment at its current fill level and the sides on which the
/// price may deviate from it.
enum FillRule {
    Below(f64),
    Above(f64),
    Equal(f64),
}

fn fill_rule(seg: &crate::model::NetCurveSegment, d: f64) -> FillRule {
    let p = seg.price_at(d);
    if d >= 1.0 - TIGHTNESS_TOL {
        FillRule::Below(p)
    } else if d <= TIGHTNESS_TOL {
        FillRule::Above(p)
    } else {
        FillRule::Equal(p)
    }
}

struct PriceModel {
    qp: QpProblem,
    pi: Grid<usize>,
    mu_upper: Grid<Option<usize>>,
    mu_lower: Grid<Option<usize>>,
    ramp_up: Grid<Option<usize>>,
    ramp_down: Grid<Option<usize>>,
    block_loss: Vec<Option<usize>>,
    flex_loss: Vec<Option<usize>>,
}

fn build_price_model(instance: &Instance, solution: &PrimalSolution, relax_losses: bool) -> PriceModel {
    let mut qp = QpProblem::new();
    let hours = instance.hours;
    let global = instance.price_interval;
    let mut pi = Grid::new(instance.n_areas(), hours, 0);
    for v in pi.as_mut_slice() {
        *v = qp.add_var(global.lower, global.upper, 0.0, 0.0);
    }

    // filling condition at the fixed fill levels
    for (h, curve, seg) in instance.segments() {
        if seg.is_horizontal() {
            continue;
        }
        let v = *pi.get(curve.area, curve.hour);
        match fill_rule(seg, solution.delta[h]) {
            FillRule::Below(p) => {
                qp.add_le(vec![(v, 1.0)], p);
            }
            FillRule::Above(p) => {
                qp.add_ge(vec![(v, 1.0)], p);
            }
            FillRule::Equal(p) => {
                qp.add_eq(vec![(v, 1.0)], p);
            }
        }
    }

    // flow price condition: multipliers only for tight constraints
    let n_ic = instance.interconnectors.len();
    let mut mu_upper = Grid::new(n_ic, hours, None);
    let mut mu_lower = Grid::new(n_ic, hours, None);
    let mut ramp_up = Grid::new(n_ic, hours, None);
    let mut ramp_down = Grid::new(n_ic, hours, None);
    let flows = &solution.flows;
    for (c, ic) in instance.interconnectors.iter().enumerate() {
        for t in 0..hours {
            let f = flows.at(c, t);
            if f >= ic.upper[t] - TIGHTNESS_TOL {
                mu_upper.set(c, t, Some(qp.add_var(0.0, f64::INFINITY, 0.0, 0.0)));
            }
            if f <= ic.lower[t] + TIGHTNESS_TOL {
                mu_lower.set(c, t, Some(qp.add_var(0.0, f64::INFINITY, 0.0, 0.0)));
            }
            if let Some(ramp) = ic.ramp {
                let prev = if t == 0 { ic.initial_flow } else { flows.at(c, t - 1) };
                if f - prev >= ramp - TIGHTNESS_TOL {
                    ramp_up.set(c, t, Some(qp.add_var(0.0, f64::INFINITY, 0.0, 0.0)));
                }
                if prev - f >= ramp - TIGHTNESS_TOL {
                    ramp_down.set(c, t, Some(qp.add_var(0.0, f64::INFINITY, 0.0, 0.0)));
                }
            }
        }
        for t in 0..hours {
            let mut row: SparseRow = vec![(*pi.get(ic.from, t), 1.0), (*pi.get(ic.to, t), -1.0)];
            let mut push = |v: Option<usize>, s: f64| {
                if let Some(j) = v {
                    row.push((j, s));
                }
            };
            push(*mu_upper.get(c, t), 1.0);
            push(*mu_lower.get(c, t), -1.0);
            push(*ramp_up.get(c, t), 1.0);
            push(*ramp_down.get(c, t), -1.0);
            if t + 1 < hours {
                push(*ramp_down.get(c, t + 1), 1.0);
                push(*ramp_up.get(c, t + 1), -1.0);
            }
            qp.add_eq(row, 0.0);
        }
    }

    // executed bids must not lose money, up to the loss slack
    let mut block_loss = vec![None; instance.blocks.len()];
    for (b, bid) in instance.blocks.iter().enumerate() {
        if !solution.selection.blocks[b] {
            continue;
        }
        let mut row: SparseRow = Vec::new();
        let mut rhs = 0.0;
        for (t, &q) in bid.quantities.iter().enumerate() {
            if q != 0.0 {
                row.push((*pi.get(bid.area, t), -q));
                rhs -= bid.limit_price * q;
            }
        }
        if relax_losses {
            let lam = qp.add_var(0.0, -big_m(bid, global), 0.0, 0.0);
            row.push((lam, 1.0));
            block_loss[b] = Some(lam);
        }
        qp.add_ge(row, rhs);
    }
    let mut flex_loss = vec![None; instance.flex.len()];
    for (f, bid) in instance.flex.iter().enumerate() {
        let Some(t) = solution.selection.flex[f] else { continue };
        let mut row: SparseRow = vec![(*pi.get(bid.area, t), -bid.quantity)];
        if relax_losses {
            let worst = ((bid.limit_price - global.lower) * bid.quantity)
                .min((bid.limit_price - global.upper) * bid.quantity)
                .min(0.0);
            let lam = qp.add_var(0.0, -worst, 0.0, 0.0);
            row.push((lam, 1.0));
            flex_loss[f] = Some(lam);
        }
        qp.add_ge(row, -bid.limit_price * bid.quantity);
    }

    PriceModel {
        qp,
        pi,
        mu_upper,
        mu_lower,
        ramp_up,
        ramp_down,
        block_loss,
        flex_loss,
    }
}

/// Minimum-norm prices supporting a cleared solution.
///
/// With `relax_losses` executed bids may lose money; the total loss is
/// minimized first and the squared prices second. Without it losses are
/// forbidden and `Error::Infeasible` signals that no such price exists.
pub fn solve_qpprice(
    instance: &Instance,
    solution: &PrimalSolution,
    relax_losses: bool,
) -> Result<PricingOutcome> {
    let mut model = build_price_model(instance, solution, relax_losses);
    let lambdas: Vec<usize> = model
        .block_loss
        .iter()
        .chain(&model.flex_loss)
        .flatten()
        .copied()
        .collect();

    if !lambdas.is_empty() {
        let mut stage1 = model.qp.clone();
        for &j in &lambdas {
            stage1.linear[j] = -1.0;
        }
        let s1 = solve_qp(&stage1, DEFAULT_TOL)?;
        match s1.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => {
                return Err(Error::Infeasible(
                    "no price inside the interval supports the cleared quantities".into(),
                ))
            }
            QpStatus::Unbounded => return Err(Error::Numerical("loss minimization is unbounded".into())),
        }
        let best: f64 = lambdas.iter().map(|&j| s1.x[j]).sum::<f64>().max(0.0);
        model.qp.add_le(
            lambdas.iter().map(|&j| (j, 1.0)).collect(),
            best + STAGE_SLACK * best.max(1.0),
        );
    }
    for &j in model.pi.as_slice() {
        model.qp.quadratic[j] = -2.0;
    }
    let sol = solve_qp(&model.qp, DEFAULT_TOL)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => {
            return Err(Error::Infeasible(
                "no linear price lets every executed bid break even".into(),
            ))
        }
        QpStatus::Unbounded => return Err(Error::Numerical("price problem is unbounded".into())),
    }

    let mut prices = Grid::new(instance.n_areas(), instance.hours, 0.0);
    for (o, &j) in prices.as_mut_slice().iter_mut().zip(model.pi.as_slice()) {
        *o = sol.x[j];
    }
    let value = |v: &Option<usize>| v.map_or(0.0, |j| sol.x[j].max(0.0));
    let block_losses: Vec<f64> = model.block_loss.iter().map(value).collect();
    let flex_losses: Vec<f64> = model.flex_loss.iter().map(value).collect();
    let total_loss = block_losses.iter().chain(&flex_losses).sum();

    let mut cert = DualCertificate::zeros(instance);
    for (dst, src) in [
        (&mut cert.mu_upper, &model.mu_upper),
        (&mut cert.mu_lower, &model.mu_lower),
        (&mut cert.ramp_up, &model.ramp_up),
        (&mut cert.ramp_down, &model.ramp_down),
    ] {
        for (o, v) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
            *o = value(v);
        }
    }
    for (h, curve, seg) in instance.segments() {
        let r = seg.quantity_span * (seg.price_at(solution.delta[h]) - prices.at(curve.area, curve.hour));
        cert.v_upper[h] = r.max(0.0);
        cert.v_lower[h] = (-r).max(0.0);
    }

    Ok(PricingOutcome {
        prices,
        block_losses,
        flex_losses,
        certificate: cert,
        total_loss,
    })
}

/// Projects every price onto its area's interval.
pub fn clamp_prices(instance: &Instance, prices: &PriceVector) -> (PriceVector, Vec<String>) {
    let mut out = prices.clone();
    let mut warnings = Vec::new();
    for (a, area) in instance.areas.iter().enumerate() {
        for t in 0..instance.hours {
            let p = prices.at(a, t);
            let c = area.price_interval.clamp(p);
            if c != p {
                out.set(a, t, c);
                warnings.push(format!(
                    "price of area {} hour {t} moved from {p} to {c}; the flow price condition might no longer hold",
                    area.id
                ));
            }
        }
    }
    (out, warnings)
}

/// Flows after redistribution, for callers that only need the schedule.
pub fn fixflow_schedule(instance: &Instance, solution: &PrimalSolution) -> Result<FlowSchedule> {
    Ok(solve_fixflow(instance, solution)?.flows)
}
