//! Order book domain types.

mod curve;
mod presolve;
mod surplus;

pub use curve::{build_net_curve, NetCurve, NetCurveSegment};
pub use presolve::{presolve_fixings, presolve_price_bounds, PresolveFixings};
pub use surplus::{big_m, fixed_selection_terms, surplus_report, welfare, SurplusReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for equality tests on prices and quantities.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PriceInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lower - EPS && p <= self.upper + EPS
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.lower, self.upper)
    }

    pub fn is_within(&self, outer: &PriceInterval) -> bool {
        self.lower >= outer.lower - EPS && self.upper <= outer.upper + EPS
    }
}

/// Dense row-major table, used for per (area, hour) and per
/// (interconnector, hour) quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(rows: usize, cols: usize, fill: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![fill; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>, cols: usize) -> Self {
        let n = rows.len();
        let data: Vec<T> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), n * cols, "ragged grid");
        Self {
            rows: n,
            cols,
            data,
        }
    }
}

impl<T> Grid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl Grid<f64> {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Clearing prices per (area, hour).
pub type PriceVector = Grid<f64>;
/// Interconnector flows per (interconnector, hour).
pub type FlowSchedule = Grid<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Area {
    pub id: String,
    pub price_interval: PriceInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockBid {
    pub id: String,
    pub area: usize,
    pub limit_price: f64,
    /// Per-hour quantity, positive for demand.
    pub quantities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexBid {
    pub id: String,
    pub area: usize,
    pub limit_price: f64,
    pub quantity: f64,
}

/// `child` may only execute if `parent` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub child: usize,
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interconnector {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `None` when the flow may change freely between hours.
    pub ramp: Option<f64>,
    pub initial_flow: f64,
}

/// Raw description of an order book before curve construction.
#[derive(Debug, Clone, Default)]
pub struct InstanceSpec {
    pub price_interval: Option<PriceInterval>,
    /// `(id, optional area interval)`.
    pub areas: Vec<(String, Option<PriceInterval>)>,
    pub hours: usize,
    /// `(area index, hour, nodes)`.
    pub curves: Vec<(usize, usize, Vec<(f64, f64)>)>,
    pub blocks: Vec<BlockBid>,
    pub links: Vec<Link>,
    pub flex: Vec<FlexBid>,
    pub interconnectors: Vec<Interconnector>,
}

/// A validated order book. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub price_interval: PriceInterval,
    pub areas: Vec<Area>,
    pub hours: usize,
    curves: Vec<NetCurve>,
    segment_offsets: Vec<usize>,
    pub blocks: Vec<BlockBid>,
    pub links: Vec<Link>,
    pub flex: Vec<FlexBid>,
    pub interconnectors: Vec<Interconnector>,
}

fn invalid(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::Validation {
        invariant,
        detail: detail.into(),
    }
}

impl Instance {
    pub fn new(spec: InstanceSpec) -> Result<Self> {
        let global = spec
            .price_interval
            .ok_or_else(|| invalid("PriceInterval", "missing global price interval"))?;
        PriceInterval::new(global.lower, global.upper)?;
        if spec.hours == 0 {
            return Err(invalid("Hours", "at least one hour is required"));
        }
        let n_areas = spec.areas.len();
        if n_areas == 0 {
            return Err(invalid("Areas", "at least one area is required"));
        }
        let mut areas = Vec::with_capacity(n_areas);
        for (id, iv) in &spec.areas {
            if areas.iter().any(|a: &Area| &a.id == id) {
                return Err(invalid("UniqueIds", format!("duplicate area {id}")));
            }
            let iv = iv.unwrap_or(global);
            PriceInterval::new(iv.lower, iv.upper)?;
            if !iv.is_within(&global) {
                return Err(invalid(
                    "AreaInterval",
                    format!("interval of area {id} exceeds the global interval"),
                ));
            }
            areas.push(Area {
                id: id.clone(),
                price_interval: iv,
            });
        }

        let hours = spec.hours;
        let mut slots: Vec<Option<NetCurve>> = vec![None; n_areas * hours];
        for (area, hour, nodes) in &spec.curves {
            if *area >= n_areas || *hour >= hours {
                return Err(invalid(
                    "CurveCoverage",
                    format!("curve for unknown area/hour ({area}, {hour})"),
                ));
            }
            let slot = &mut slots[area * hours + hour];
            if slot.is_some() {
                return Err(invalid(
                    "CurveCoverage",
                    format!("duplicate curve for area {} hour {hour}", areas[*area].id),
                ));
            }
            let mut curve = build_net_curve(nodes, areas[*area].price_interval, global)?;
            curve.area = *area;
            curve.hour = *hour;
            *slot = Some(curve);
        }
        let mut curves = Vec::with_capacity(slots.len());
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(c) => curves.push(c),
                None => {
                    return Err(invalid(
                        "CurveCoverage",
                        format!(
                            "missing curve for area {} hour {}",
                            areas[i / hours].id,
                            i % hours
                        ),
                    ))
                }
            }
        }
        let mut segment_offsets = Vec::with_capacity(curves.len() + 1);
        let mut acc = 0;
        for c in &curves {
            segment_offsets.push(acc);
            acc += c.segments.len();
        }
        segment_offsets.push(acc);

        let mut seen = std::collections::BTreeSet::new();
        for b in &spec.blocks {
            if !seen.insert(("block", b.id.clone())) {
                return Err(invalid("UniqueIds", format!("duplicate block {}", b.id)));
            }
            if b.area >= n_areas {
                return Err(Error::UnknownId(format!("area of block {}", b.id)));
            }
            if b.quantities.len() != hours {
                return Err(invalid(
                    "BlockShape",
                    format!("block {} needs {hours} hourly quantities", b.id),
                ));
            }
            if b.quantities.iter().all(|q| q.abs() <= EPS) || b.quantities.iter().any(|q| !q.is_finite()) {
                return Err(invalid(
                    "BlockQuantity",
                    format!("block {} needs a nonzero finite quantity", b.id),
                ));
            }
            if !global.contains(b.limit_price) {
                return Err(invalid(
                    "LimitPrice",
                    format!("limit price of block {} outside the price interval", b.id),
                ));
            }
        }
        for l in &spec.links {
            if l.child >= spec.blocks.len() || l.parent >= spec.blocks.len() {
                return Err(Error::UnknownId("link references a missing block".into()));
            }
            if l.child == l.parent {
                return Err(invalid("Link", "a block cannot link to itself"));
            }
        }
        for f in &spec.flex {
            if !seen.insert(("flex", f.id.clone())) {
                return Err(invalid("UniqueIds", format!("duplicate flex bid {}", f.id)));
            }
            if f.area >= n_areas {
                return Err(Error::UnknownId(format!("area of flex bid {}", f.id)));
            }
            if f.quantity.abs() <= EPS || !f.quantity.is_finite() {
                return Err(invalid(
                    "FlexQuantity",
                    format!("flex bid {} needs a nonzero quantity", f.id),
                ));
            }
            if !global.contains(f.limit_price) {
                return Err(invalid(
                    "LimitPrice",
                    format!("limit price of flex bid {} outside the price interval", f.id),
                ));
            }
        }
        for c in &spec.interconnectors {
            if !seen.insert(("interconnector", c.id.clone())) {
                return Err(invalid("UniqueIds", format!("duplicate interconnector {}", c.id)));
            }
            if c.from >= n_areas || c.to >= n_areas {
                return Err(Error::UnknownId(format!("endpoint of interconnector {}", c.id)));
            }
            if c.from == c.to {
                return Err(invalid(
                    "InterconnectorEndpoints",
                    format!("interconnector {} connects an area to itself", c.id),
                ));
            }
            if c.lower.len() != hours || c.upper.len() != hours {
                return Err(invalid(
                    "InterconnectorShape",
                    format!("interconnector {} needs {hours} hourly bounds", c.id),
                ));
            }
            if c.lower.iter().zip(&c.upper).any(|(l, u)| !(l <= u)) {
                return Err(invalid(
                    "InterconnectorBounds",
                    format!("interconnector {} has lower bound above upper bound", c.id),
                ));
            }
            if let Some(r) = c.ramp {
                if !(r >= 0.0) {
                    return Err(invalid(
                        "RampRate",
                        format!("interconnector {} has a negative ramp rate", c.id),
                    ));
                }
            }
        }

        Ok(Self {
            price_interval: global,
            areas,
            hours,
            curves,
            segment_offsets,
            blocks: spec.blocks,
            links: spec.links,
            flex: spec.flex,
            interconnectors: spec.interconnectors,
        })
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn curve(&self, area: usize, hour: usize) -> &NetCurve {
        &self.curves[area * self.hours + hour]
    }

    pub fn curves(&self) -> &[NetCurve] {
        &self.curves
    }

    /// Global ids of the segments of curve `(area, hour)`.
    pub fn segment_range(&self, area: usize, hour: usize) -> std::ops::Range<usize> {
        let i = area * self.hours + hour;
        self.segment_offsets[i]..self.segment_offsets[i + 1]
    }

    pub fn segment_count(&self) -> usize {
        *self.segment_offsets.last().unwrap_or(&0)
    }

    /// Iterates `(global id, curve, segment)` over every segment.
    pub fn segments(&self) -> impl Iterator<Item = (usize, &NetCurve, &NetCurveSegment)> {
        self.curves.iter().enumerate().flat_map(move |(i, c)| {
            let off = self.segment_offsets[i];
            c.segments.iter().enumerate().map(move |(j, s)| (off + j, c, s))
        })
    }

    pub fn segment(&self, h: usize) -> (&NetCurve, &NetCurveSegment) {
        let i = match self.segment_offsets.binary_search(&h) {
            Ok(mut i) => {
                // skip curves without segments
                while self.segment_offsets[i + 1] == h {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        };
        let c = &self.curves[i];
        (c, &c.segments[h - self.segment_offsets[i]])
    }

    /// Number of binary decisions: blocks plus one per flex bid and hour.
    pub fn binary_count(&self) -> usize {
        self.blocks.len() + self.flex.len() * self.hours
    }

    pub fn area_index(&self, id: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.id == id)
    }

    pub fn block_index(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn flex_index(&self, id: &str) -> Option<usize> {
        self.flex.iter().position(|f| f.id == id)
    }

    pub fn interconnector_index(&self, id: &str) -> Option<usize> {
        self.interconnectors.iter().position(|c| c.id == id)
    }

    /// Net import of `area` in `hour` under the given flows.
    pub fn net_import(&self, flows: &FlowSchedule, area: usize, hour: usize) -> f64 {
        self.interconnectors
            .iter()
            .enumerate()
            .map(|(c, ic)| {
                let f = flows.at(c, hour);
                if ic.to == area {
                    f
                } else if ic.from == area {
                    -f
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Binary decision in the combinatorial part of the order book.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Binary {
    Block(usize),
    Flex { flex: usize, hour: usize },
}

/// Execution state of the block and flex bids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BidSelection {
    pub blocks: Vec<bool>,
    /// Hour in which each flex bid executes, if any.
    pub flex: Vec<Option<usize>>,
}

impl BidSelection {
    pub fn empty(instance: &Instance) -> Self {
        Self {
            blocks: vec![false; instance.blocks.len()],
            flex: vec![None; instance.flex.len()],
        }
    }

    pub fn value(&self, var: Binary) -> bool {
        match var {
            Binary::Block(b) => self.blocks[b],
            Binary::Flex { flex, hour } => self.flex[flex] == Some(hour),
        }
    }

    pub fn phi(&self, flex: usize, hour: usize) -> bool {
        self.flex[flex] == Some(hour)
    }

    /// All binaries in canonical order: blocks, then flex bids by hour.
    pub fn binaries(instance: &Instance) -> Vec<Binary> {
        let mut v: Vec<Binary> = (0..instance.blocks.len()).map(Binary::Block).collect();
        for f in 0..instance.flex.len() {
            for t in 0..instance.hours {
                v.push(Binary::Flex { flex: f, hour: t });
            }
        }
        v
    }

    /// 0/1 vector over [`BidSelection::binaries`].
    pub fn to_bits(&self, instance: &Instance) -> Vec<bool> {
        Self::binaries(instance).into_iter().map(|v| self.value(v)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|b| !b) && self.flex.iter().all(Option::is_none)
    }

    /// Checks the link constraints.
    pub fn check_links(&self, instance: &Instance) -> Result<()> {
        for l in &instance.links {
            if self.blocks[l.child] && !self.blocks[l.parent] {
                return Err(Error::LinkViolation {
                    child: instance.blocks[l.child].id.clone(),
                    parent: instance.blocks[l.parent].id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn check_shape(&self, instance: &Instance) -> Result<()> {
        if self.blocks.len() != instance.blocks.len() || self.flex.len() != instance.flex.len() {
            return Err(Error::UnknownId("selection does not match the order book".into()));
        }
        if self.flex.iter().flatten().any(|&t| t >= instance.hours) {
            return Err(Error::UnknownId("flex execution hour out of range".into()));
        }
        Ok(())
    }
}

/// Execution state of the whole market.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub selection: BidSelection,
    /// Fill level per segment (global segment id).
    pub delta: Vec<f64>,
    pub flows: FlowSchedule,
}

impl PrimalSolution {
    /// Largest absolute clearing residual over all (area, hour).
    pub fn clearing_residual(&self, instance: &Instance) -> (f64, usize, usize) {
        let terms = fixed_selection_terms(instance, &self.selection);
        let mut worst = (0.0, 0, 0);
        for a in 0..instance.n_areas() {
            for t in 0..instance.hours {
                let r = instance.segment_range(a, t);
                let curve = instance.curve(a, t);
                let lhs = curve.executed_quantity(&self.delta[r]) + terms.volume.at(a, t)
                    - instance.net_import(&self.flows, a, t);
                if lhs.abs() > worst.0 {
                    worst = (lhs.abs(), a, t);
                }
            }
        }
        worst
    }
}

/// KKT multipliers certifying the flow price and filling conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub mu_upper: FlowSchedule,
    pub mu_lower: FlowSchedule,
    pub ramp_up: FlowSchedule,
    pub ramp_down: FlowSchedule,
    pub v_upper: Vec<f64>,
    pub v_lower: Vec<f64>,
}

impl DualCertificate {
    pub fn zeros(instance: &Instance) -> Self {
        let g = Grid::new(instance.interconnectors.len(), instance.hours, 0.0);
        Self {
            mu_upper: g.clone(),
            mu_lower: g.clone(),
            ramp_up: g.clone(),
            ramp_down: g,
            v_upper: vec![0.0; instance.segment_count()],
            v_lower: vec![0.0; instance.segment_count()],
        }
    }
}

/// Welfare constant and fixed volume contributed by a bid selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSelectionTerms {
    pub constant: f64,
    /// Executed combinatorial net demand per (area, hour).
    pub volume: Grid<f64>,
}
