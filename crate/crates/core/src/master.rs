//! Welfare maximization over the bid selection by branch and bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::cuts::Cut;
use crate::error::{Error, Result};
use crate::model::{presolve_fixings, presolve_price_bounds, BidSelection, Binary, Instance, PrimalSolution};
use crate::qp::{solve_qp, QpProblem, QpStatus, DEFAULT_TOL};
use crate::relaxation::{build_market_qp, solve_relaxation};

/// Distance from 0/1 under which a relaxed binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Cuts accumulated by the outer loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutPool {
    pub cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, cut: Cut) {
        self.cuts.push(cut);
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn admits(&self, selection: &BidSelection) -> bool {
        self.cuts.iter().all(|c| c.is_satisfied(selection))
    }
}

#[derive(Debug, Clone)]
pub struct MasterOptions {
    pub abs_gap: f64,
    pub time_limit: Option<Duration>,
    /// Selection evaluated before the search to seed the incumbent.
    pub incumbent: Option<BidSelection>,
    /// Fix bids that lose money at every admissible price.
    pub presolve: bool,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            abs_gap: 1e-9,
            time_limit: None,
            incumbent: None,
            presolve: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterStatus {
    Optimal,
    Infeasible,
    Limit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterResult {
    /// Best selection found with its optimal continuous part.
    pub solution: Option<PrimalSolution>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub status: MasterStatus,
}

struct Node {
    id: usize,
    bound: f64,
    /// Per binary: `None` free, otherwise fixed value.
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: higher bound first, then lower id
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn selection_from_bits(instance: &Instance, binaries: &[Binary], bits: &[bool]) -> BidSelection {
    let mut sel = BidSelection::empty(instance);
    for (v, &on) in binaries.iter().zip(bits) {
        if !on {
            continue;
        }
        match *v {
            Binary::Block(b) => sel.blocks[b] = true,
            Binary::Flex { flex, hour } => sel.flex[flex] = Some(hour),
        }
    }
    sel
}

/// Maximizes welfare subject to the market constraints, integrality and the
/// cuts, ignoring price feasibility.
pub fn solve_master(instance: &Instance, cuts: &CutPool, options: &MasterOptions) -> Result<MasterResult> {
    for c in &cuts.cuts {
        c.check(instance)?;
    }
    let start = Instant::now();
    let (mut base, layout) = build_market_qp(instance, None);
    let binaries = BidSelection::binaries(instance);
    let columns: Vec<usize> = binaries
        .iter()
        .map(|v| match *v {
            Binary::Block(b) => layout.blocks[b],
            Binary::Flex { flex, hour } => layout.flex[flex][hour],
        })
        .collect();
    let column_of = |v: Binary| -> usize {
        match v {
            Binary::Block(b) => layout.blocks[b],
            Binary::Flex { flex, hour } => layout.flex[flex][hour],
        }
    };
    for c in &cuts.cuts {
        base.add_le(c.coeffs.iter().map(|&(v, a)| (column_of(v), a)).collect(), c.rhs);
    }

    let mut root_fixed: Vec<Option<bool>> = vec![None; binaries.len()];
    if options.presolve {
        let fix = presolve_fixings(instance, &presolve_price_bounds(instance));
        for (i, v) in binaries.iter().enumerate() {
            let off = match *v {
                Binary::Block(b) => fix.blocks_off[b],
                Binary::Flex { flex, hour } => fix.flex_off[flex][hour],
            };
            if off {
                root_fixed[i] = Some(false);
            }
        }
    }

    let mut incumbent: Option<PrimalSolution> = None;
    let mut best = f64::NEG_INFINITY;
    if let Some(sel) = &options.incumbent {
        if cuts.admits(sel) && sel.check_shape(instance).is_ok() && sel.check_links(instance).is_ok() {
            if let Ok(out) = solve_relaxation(instance, sel) {
                best = out.objective;
                incumbent = Some(out.solution);
            }
        }
    }

    let node_qp = |fixed: &[Option<bool>]| -> QpProblem {
        let mut qp = base.clone();
        for (i, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                let x = if *v { 1.0 } else { 0.0 };
                qp.lower[columns[i]] = x;
                qp.upper[columns[i]] = x;
            }
        }
        qp
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::INFINITY,
        fixed: root_fixed,
    });
    let mut next_id = 1;
    let mut nodes = 0;
    let mut limit_hit = false;

    while let Some(node) = heap.pop() {
        if node.bound <= best + options.abs_gap {
            // best-first: every remaining node is dominated as well
            heap.clear();
            break;
        }
        if let Some(limit) = options.time_limit {
            if start.elapsed() >= limit {
                heap.push(node);
                limit_hit = true;
                break;
            }
        }
        nodes += 1;
        let qp = node_qp(&node.fixed);
        let sol = solve_qp(&qp, DEFAULT_TOL)?;
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => continue,
            QpStatus::Unbounded => {
                return Err(Error::Numerical("node relaxation is unbounded".into()))
            }
        }
        let value = sol.objective;
        if value <= best + options.abs_gap {
            continue;
        }

        let mut branch: Option<(usize, f64)> = None;
        for (i, &j) in columns.iter().enumerate() {
            if node.fixed[i].is_some() {
                continue;
            }
            let x = sol.x[j];
            let frac = x.min(1.0 - x);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((i, frac));
            }
        }

        match branch {
            None => {
                let bits: Vec<bool> = columns.iter().map(|&j| sol.x[j] > 0.5).collect();
                let sel = selection_from_bits(instance, &binaries, &bits);
                if !cuts.admits(&sel) {
                    continue;
                }
                match solve_relaxation(instance, &sel) {
                    Ok(out) if out.objective > best => {
                        best = out.objective;
                        incumbent = Some(out.solution);
                    }
                    Ok(_) | Err(Error::Infeasible(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Some((i, _)) => {
                for v in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed[i] = Some(v);
                    heap.push(Node {
                        id: next_id,
                        bound: value,
                        fixed,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let status = if limit_hit {
        MasterStatus::Limit
    } else if incumbent.is_some() {
        MasterStatus::Optimal
    } else {
        MasterStatus::Infeasible
    };
    let bound = if limit_hit { open_bound.max(best) } else { best };
    Ok(MasterResult {
        solution: incumbent,
        objective: best,
        bound,
        nodes,
        status,
    })
}
