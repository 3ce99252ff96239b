//! The outer cutting loops: the bid cut heuristic and the exact no-good loop.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cuts::{bid_cut, curtailment_violations, loss_sets, no_good_cut, LossSets, LOSS_TOL};
use crate::error::{Error, Result};
use crate::master::{solve_master, CutPool, MasterOptions, MasterStatus};
use crate::model::{welfare, BidSelection, Binary, DualCertificate, Instance, PriceVector, PrimalSolution};
use crate::pricing::{clamp_prices, solve_fixflow, solve_qpprice, PricingOutcome};
use crate::relaxation::solve_relaxation;
use crate::verify::list_prbs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Heuristic,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClearingStatus {
    /// Exact mode proved optimality; the heuristic converged.
    Optimal,
    /// The heuristic ran out of iterations and fell back to its best price-feasible iterate.
    IterationLimit,
    /// Time limit reached; the result is the incumbent.
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct ClearingOptions {
    pub abs_gap: f64,
    pub time_limit: Option<Duration>,
    /// Defaults to `10 * (blocks + flex)`, at least 1.
    pub max_iterations: Option<usize>,
    pub presolve: bool,
}

impl Default for ClearingOptions {
    fn default() -> Self {
        Self {
            abs_gap: 1e-9,
            time_limit: None,
            max_iterations: None,
            presolve: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub master_objective: f64,
    pub loss_blocks: Vec<usize>,
    /// `(flex, hour)`.
    pub loss_flex: Vec<(usize, usize)>,
    /// Curtailment segments that were violated.
    pub curtailment_segments: Vec<usize>,
    pub cuts_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    pub mode: Mode,
    pub status: ClearingStatus,
    pub solution: PrimalSolution,
    /// Final prices after projection onto the area intervals.
    pub prices: PriceVector,
    pub certificate: DualCertificate,
    pub welfare: f64,
    pub bound: f64,
    pub gap: f64,
    pub iterations: Vec<IterationRecord>,
    pub prbs: Vec<Binary>,
    pub warnings: Vec<String>,
    /// Set when curtailment cuts were added; such cuts may remove the optimum.
    pub curtailment_cuts: bool,
}

impl IterationRecord {
    fn from_priced(master_objective: f64, priced: &Priced) -> Self {
        Self {
            master_objective,
            loss_blocks: priced.losses.blocks.clone(),
            loss_flex: priced.losses.flex.clone(),
            curtailment_segments: priced.curtailment.iter().map(|v| v.segment).collect(),
            cuts_added: 0,
        }
    }

    /// A candidate whose quantities admit no price at all; cut by a no-good.
    fn unpriced(master_objective: f64) -> Self {
        Self {
            master_objective,
            loss_blocks: vec![],
            loss_flex: vec![],
            curtailment_segments: vec![],
            cuts_added: 1,
        }
    }
}

pub(crate) fn relative_gap(bound: f64, welfare: f64) -> f64 {
    ((bound - welfare) / bound.abs().max(1.0)).max(0.0)
}

/// Outcome of pricing a master solution.
pub(crate) struct Priced {
    pub solution: PrimalSolution,
    pub relaxed: PricingOutcome,
    pub losses: LossSets,
    pub curtailment: Vec<crate::cuts::CurtailmentViolation>,
}

/// `None` when even loss-relaxed pricing fails: the quantities themselves
/// have no supporting price in the interval.
pub(crate) fn price_solution(instance: &Instance, solution: &PrimalSolution) -> Result<Option<Priced>> {
    let solution = solve_fixflow(instance, solution)?;
    let relaxed = match solve_qpprice(instance, &solution, true) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let losses = loss_sets(instance, &solution.selection, &relaxed.prices, LOSS_TOL);
    let curtailment = curtailment_violations(instance, &solution);
    Ok(Some(Priced {
        solution,
        relaxed,
        losses,
        curtailment,
    }))
}

/// Strict prices for a solution, `None` when no loss-free linear price exists.
pub(crate) fn strict_prices(instance: &Instance, solution: &PrimalSolution) -> Result<Option<PricingOutcome>> {
    match solve_qpprice(instance, solution, false) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn finish(
    instance: &Instance,
    mode: Mode,
    status: ClearingStatus,
    solution: PrimalSolution,
    pricing: PricingOutcome,
    bound: f64,
    iterations: Vec<IterationRecord>,
    mut warnings: Vec<String>,
    curtailment_cuts: bool,
) -> Result<ClearingResult> {
    let welfare = welfare(instance, &solution.delta, &solution.selection)?;
    let (prices, clamp_warnings) = clamp_prices(instance, &pricing.prices);
    warnings.extend(clamp_warnings);
    let prbs = list_prbs(instance, &solution.selection, &prices, LOSS_TOL);
    let bound = bound.max(welfare);
    Ok(ClearingResult {
        mode,
        status,
        solution,
        prices,
        certificate: pricing.certificate,
        welfare,
        bound,
        gap: relative_gap(bound, welfare),
        iterations,
        prbs,
        warnings,
        curtailment_cuts,
    })
}

fn deadline_left(start: Instant, limit: Option<Duration>) -> Option<Duration> {
    limit.map(|l| l.saturating_sub(start.elapsed()))
}

/// Price-feasible fallback: the empty selection, priced strictly.
fn empty_fallback(instance: &Instance) -> Result<(PrimalSolution, PricingOutcome)> {
    let out = solve_relaxation(instance, &BidSelection::empty(instance))?;
    let sol = solve_fixflow(instance, &out.solution)?;
    let pricing = solve_qpprice(instance, &sol, false)?;
    Ok((sol, pricing))
}

/// Iterative bid cut heuristic.
pub fn clear_heuristic(instance: &Instance, options: &ClearingOptions) -> Result<ClearingResult> {
    let start = Instant::now();
    let max_iter = options
        .max_iterations
        .unwrap_or(10 * (instance.blocks.len() + instance.flex.len()))
        .max(1);
    let mut pool = CutPool::new();
    let mut log = Vec::new();
    let mut bound = f64::INFINITY;
    let mut curtailment_cuts = false;
    let mut warnings = Vec::new();

    for it in 0..max_iter {
        let master = solve_master(
            instance,
            &pool,
            &MasterOptions {
                abs_gap: options.abs_gap,
                time_limit: deadline_left(start, options.time_limit),
                incumbent: None,
                presolve: options.presolve,
            },
        )?;
        if it == 0 {
            bound = master.bound;
        }
        let Some(candidate) = master.solution else {
            return match master.status {
                MasterStatus::Limit => time_limited(instance, Mode::Heuristic, bound, log, curtailment_cuts),
                _ => Err(Error::Infeasible("no bid selection satisfies the cuts".into())),
            };
        };
        let Some(priced) = price_solution(instance, &candidate)? else {
            pool.push(no_good_cut(instance, &candidate.selection));
            log.push(IterationRecord::unpriced(master.objective));
            continue;
        };
        let mut record = IterationRecord::from_priced(master.objective, &priced);

        let mut new_cuts = Vec::new();
        if !priced.losses.is_empty() {
            new_cuts.push(bid_cut(&priced.losses)?);
        }
        for v in &priced.curtailment {
            let mut cut = bid_cut(&v.as_loss_sets())?;
            cut.kind = crate::cuts::CutKind::Curtailment;
            new_cuts.push(cut);
            curtailment_cuts = true;
        }

        if new_cuts.is_empty() {
            match strict_prices(instance, &priced.solution)? {
                Some(pricing) => {
                    log.push(record);
                    if master.status == MasterStatus::Limit {
                        warnings.push("master search stopped at the time limit".into());
                    }
                    let status = if master.status == MasterStatus::Limit {
                        ClearingStatus::TimeLimit
                    } else {
                        ClearingStatus::Optimal
                    };
                    return finish(
                        instance,
                        Mode::Heuristic,
                        status,
                        priced.solution,
                        pricing,
                        bound,
                        log,
                        warnings,
                        curtailment_cuts,
                    );
                }
                None => {
                    // losses below the loss tolerance still block strict prices
                    let tiny = loss_sets(instance, &priced.solution.selection, &priced.relaxed.prices, 0.0);
                    let cut = if tiny.is_empty() {
                        no_good_cut(instance, &priced.solution.selection)
                    } else {
                        bid_cut(&tiny)?
                    };
                    new_cuts.push(cut);
                }
            }
        }
        record.cuts_added = new_cuts.len();
        log.push(record);
        for c in new_cuts {
            pool.push(c);
        }
        if options.time_limit.is_some_and(|l| start.elapsed() >= l) {
            return time_limited(instance, Mode::Heuristic, bound, log, curtailment_cuts);
        }
    }

    let (sol, pricing) = empty_fallback(instance)?;
    finish(
        instance,
        Mode::Heuristic,
        ClearingStatus::IterationLimit,
        sol,
        pricing,
        bound,
        log,
        vec![format!("no convergence within {max_iter} iterations; returning the empty selection")],
        curtailment_cuts,
    )
}

fn time_limited(
    instance: &Instance,
    mode: Mode,
    bound: f64,
    log: Vec<IterationRecord>,
    curtailment_cuts: bool,
) -> Result<ClearingResult> {
    let (sol, pricing) = empty_fallback(instance)?;
    finish(
        instance,
        mode,
        ClearingStatus::TimeLimit,
        sol,
        pricing,
        bound,
        log,
        vec!["time limit reached before a price-feasible selection was found".into()],
        curtailment_cuts,
    )
}

/// Exact decomposition: removes one price-infeasible selection per iteration,
/// seeded with the heuristic's result.
pub fn clear_exact(instance: &Instance, options: &ClearingOptions) -> Result<ClearingResult> {
    let start = Instant::now();
    // a heuristic that finds nothing does not prove infeasibility
    let incumbent = match clear_heuristic(instance, options) {
        Ok(r) => Some(r),
        Err(Error::Infeasible(_)) => None,
        Err(e) => return Err(e),
    };
    let mut pool = CutPool::new();
    let mut log = Vec::new();
    let mut curtailment_cuts = false;

    loop {
        let master = solve_master(
            instance,
            &pool,
            &MasterOptions {
                abs_gap: options.abs_gap,
                time_limit: deadline_left(start, options.time_limit),
                incumbent: incumbent.as_ref().map(|r| r.solution.selection.clone()),
                presolve: options.presolve,
            },
        )?;
        let limit = master.status == MasterStatus::Limit;
        let Some(candidate) = master.solution else {
            if limit {
                return stop_at_limit(instance, incumbent, master.bound, log, curtailment_cuts);
            }
            if let Some(inc) = incumbent {
                return Ok(relabel(inc, master.bound, log, ClearingStatus::Optimal, curtailment_cuts));
            }
            return Err(Error::Infeasible("no bid selection satisfies the cuts".into()));
        };

        if let Some(inc) = incumbent.as_ref().filter(|r| r.solution.selection == candidate.selection) {
            let status = if limit {
                ClearingStatus::TimeLimit
            } else {
                ClearingStatus::Optimal
            };
            log.push(IterationRecord {
                master_objective: master.objective,
                loss_blocks: vec![],
                loss_flex: vec![],
                curtailment_segments: vec![],
                cuts_added: 0,
            });
            return Ok(relabel(inc.clone(), master.bound, log, status, curtailment_cuts));
        }

        let Some(priced) = price_solution(instance, &candidate)? else {
            pool.push(no_good_cut(instance, &candidate.selection));
            log.push(IterationRecord::unpriced(master.objective));
            continue;
        };
        let mut record = IterationRecord::from_priced(master.objective, &priced);
        let strict = if priced.curtailment.is_empty() {
            strict_prices(instance, &priced.solution)?
        } else {
            curtailment_cuts = true;
            None
        };
        match strict {
            Some(pricing) => {
                // the master's candidate beats the incumbent and clears at linear prices
                log.push(record);
                let status = if limit {
                    ClearingStatus::TimeLimit
                } else {
                    ClearingStatus::Optimal
                };
                return finish(
                    instance,
                    Mode::Exact,
                    status,
                    priced.solution,
                    pricing,
                    master.bound,
                    log,
                    incumbent.as_ref().map_or_else(Vec::new, |r| r.warnings.clone()),
                    curtailment_cuts || incumbent.as_ref().is_some_and(|r| r.curtailment_cuts),
                );
            }
            None => {
                pool.push(no_good_cut(instance, &priced.solution.selection));
                record.cuts_added = 1;
                log.push(record);
            }
        }
        if options.time_limit.is_some_and(|l| start.elapsed() >= l) {
            return stop_at_limit(instance, incumbent, master.bound, log, curtailment_cuts);
        }
    }
}

fn stop_at_limit(
    instance: &Instance,
    incumbent: Option<ClearingResult>,
    bound: f64,
    log: Vec<IterationRecord>,
    curtailment_cuts: bool,
) -> Result<ClearingResult> {
    match incumbent {
        Some(inc) => Ok(relabel(inc, bound, log, ClearingStatus::TimeLimit, curtailment_cuts)),
        None => time_limited(instance, Mode::Exact, bound, log, curtailment_cuts),
    }
}

fn relabel(
    mut res: ClearingResult,
    bound: f64,
    log: Vec<IterationRecord>,
    status: ClearingStatus,
    curtailment_cuts: bool,
) -> ClearingResult {
    res.mode = Mode::Exact;
    res.status = status;
    res.bound = if bound.is_finite() { bound.max(res.welfare) } else { bound };
    res.gap = relative_gap(res.bound, res.welfare);
    res.iterations = log;
    res.curtailment_cuts |= curtailment_cuts;
    res
}
