//! JSON documents for order books and clearing results.

use serde::{Deserialize, Serialize};

use crate::driver::{ClearingResult, ClearingStatus, IterationRecord, Mode};
use crate::error::{Error, Result};
use crate::model::{
    BidSelection, Binary, BlockBid, FlexBid, Grid, Instance, InstanceSpec, Interconnector, Link, PriceInterval,
    PriceVector, PrimalSolution,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub version: u32,
    pub price_interval: [f64; 2],
    pub hours: usize,
    pub areas: Vec<AreaDoc>,
    pub curves: Vec<CurveDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flex: Vec<FlexDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interconnectors: Vec<InterconnectorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDoc {
    pub area: String,
    pub hour: usize,
    /// `[price, quantity]` in ascending price order.
    pub nodes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    pub id: String,
    pub area: String,
    pub limit_price: f64,
    pub quantities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub child: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexDoc {
    pub id: String,
    pub area: String,
    pub limit_price: f64,
    pub quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectorDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<f64>,
    #[serde(default)]
    pub initial_flow: f64,
}

fn interval([lower, upper]: [f64; 2]) -> Result<PriceInterval> {
    PriceInterval::new(lower, upper)
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::Schema {
        path,
        message: e.into_inner().to_string(),
    }
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(schema_error)
}

fn lookup(ids: &[String], id: &str, what: &str) -> Result<usize> {
    ids.iter()
        .position(|x| x == id)
        .ok_or_else(|| Error::UnknownId(format!("{what} {id}")))
}

impl InstanceDocument {
    pub fn into_instance(self) -> Result<Instance> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Schema {
                path: "version".into(),
                message: format!("unsupported version {}", self.version),
            });
        }
        let area_ids: Vec<String> = self.areas.iter().map(|a| a.id.clone()).collect();
        let block_ids: Vec<String> = self.blocks.iter().map(|b| b.id.clone()).collect();
        let areas = self
            .areas
            .iter()
            .map(|a| Ok((a.id.clone(), a.price_interval.map(interval).transpose()?)))
            .collect::<Result<Vec<_>>>()?;
        let curves = self
            .curves
            .iter()
            .map(|c| {
                let nodes = c.nodes.iter().map(|&[p, q]| (p, q)).collect();
                Ok((lookup(&area_ids, &c.area, "area")?, c.hour, nodes))
            })
            .collect::<Result<Vec<_>>>()?;
        let blocks = self
            .blocks
            .into_iter()
            .map(|b| {
                Ok(BlockBid {
                    area: lookup(&area_ids, &b.area, "area")?,
                    id: b.id,
                    limit_price: b.limit_price,
                    quantities: b.quantities,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let links = self
            .links
            .iter()
            .map(|l| {
                Ok(Link {
                    child: lookup(&block_ids, &l.child, "block")?,
                    parent: lookup(&block_ids, &l.parent, "block")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let flex = self
            .flex
            .into_iter()
            .map(|f| {
                Ok(FlexBid {
                    area: lookup(&area_ids, &f.area, "area")?,
                    id: f.id,
                    limit_price: f.limit_price,
                    quantity: f.quantity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let interconnectors = self
            .interconnectors
            .into_iter()
            .map(|c| {
                Ok(Interconnector {
                    from: lookup(&area_ids, &c.from, "area")?,
                    to: lookup(&area_ids, &c.to, "area")?,
                    id: c.id,
                    lower: c.lower,
                    upper: c.upper,
                    ramp: c.ramp,
                    initial_flow: c.initial_flow,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(InstanceSpec {
            price_interval: Some(interval(self.price_interval)?),
            areas,
            hours: self.hours,
            curves,
            blocks,
            links,
            flex,
            interconnectors,
        })
    }

    pub fn from_instance(instance: &Instance) -> Self {
        let area_id = |a: usize| instance.areas[a].id.clone();
        let global = instance.price_interval;
        Self {
            version: FORMAT_VERSION,
            price_interval: [global.lower, global.upper],
            hours: instance.hours,
            areas: instance
                .areas
                .iter()
                .map(|a| AreaDoc {
                    id: a.id.clone(),
                    price_interval: (a.price_interval != global)
                        .then_some([a.price_interval.lower, a.price_interval.upper]),
                })
                .collect(),
            curves: instance
                .curves()
                .iter()
                .map(|c| CurveDoc {
                    area: area_id(c.area),
                    hour: c.hour,
                    nodes: c.input_nodes.iter().map(|&(p, q)| [p, q]).collect(),
                })
                .collect(),
            blocks: instance
                .blocks
                .iter()
                .map(|b| BlockDoc {
                    id: b.id.clone(),
                    area: area_id(b.area),
                    limit_price: b.limit_price,
                    quantities: b.quantities.clone(),
                })
                .collect(),
            links: instance
                .links
                .iter()
                .map(|l| LinkDoc {
                    child: instance.blocks[l.child].id.clone(),
                    parent: instance.blocks[l.parent].id.clone(),
                })
                .collect(),
            flex: instance
                .flex
                .iter()
                .map(|f| FlexDoc {
                    id: f.id.clone(),
                    area: area_id(f.area),
                    limit_price: f.limit_price,
                    quantity: f.quantity,
                })
                .collect(),
            interconnectors: instance
                .interconnectors
                .iter()
                .map(|c| InterconnectorDoc {
                    id: c.id.clone(),
                    from: area_id(c.from),
                    to: area_id(c.to),
                    lower: c.lower.clone(),
                    upper: c.upper.clone(),
                    ramp: c.ramp,
                    initial_flow: c.initial_flow,
                })
                .collect(),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    from_json::<InstanceDocument>(text)?.into_instance()
}

pub fn write_instance(instance: &Instance) -> String {
    to_pretty(&InstanceDocument::from_instance(instance))
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexExecution {
    pub id: String,
    pub hour: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionDoc {
    /// Ids of the executed blocks.
    pub blocks: Vec<String>,
    pub flex: Vec<FlexExecution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillDoc {
    pub area: String,
    pub hour: usize,
    /// One entry per curve segment, highest price first.
    pub fill: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesDoc {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrbDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hour: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationDoc {
    pub master_objective: f64,
    pub loss_blocks: Vec<String>,
    pub loss_flex: Vec<FlexExecution>,
    pub curtailment_segments: Vec<usize>,
    pub cuts_added: usize,
}

/// Output of `clear` and `oracle`; `verify` reads it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ClearingStatus>,
    pub selection: SelectionDoc,
    pub delta: Vec<FillDoc>,
    #[serde(default)]
    pub flows: Vec<SeriesDoc>,
    /// Per area, one price per hour.
    pub prices: Vec<SeriesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default)]
    pub prbs: Vec<PrbDoc>,
    #[serde(default)]
    pub iterations: Vec<IterationDoc>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub curtailment_cuts: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl SolutionDocument {
    pub fn from_parts(instance: &Instance, solution: &PrimalSolution, prices: &PriceVector) -> Self {
        let sel = &solution.selection;
        Self {
            version: FORMAT_VERSION,
            mode: None,
            status: None,
            selection: SelectionDoc {
                blocks: instance
                    .blocks
                    .iter()
                    .zip(&sel.blocks)
                    .filter(|(_, on)| **on)
                    .map(|(b, _)| b.id.clone())
                    .collect(),
                flex: instance
                    .flex
                    .iter()
                    .zip(&sel.flex)
                    .filter_map(|(f, t)| t.map(|hour| FlexExecution { id: f.id.clone(), hour }))
                    .collect(),
            },
            delta: instance
                .curves()
                .iter()
                .map(|c| FillDoc {
                    area: instance.areas[c.area].id.clone(),
                    hour: c.hour,
                    fill: solution.delta[instance.segment_range(c.area, c.hour)].to_vec(),
                })
                .collect(),
            flows: instance
                .interconnectors
                .iter()
                .enumerate()
                .map(|(c, ic)| SeriesDoc {
                    id: ic.id.clone(),
                    values: solution.flows.row(c).to_vec(),
                })
                .collect(),
            prices: instance
                .areas
                .iter()
                .enumerate()
                .map(|(a, area)| SeriesDoc {
                    id: area.id.clone(),
                    values: prices.row(a).to_vec(),
                })
                .collect(),
            welfare: None,
            bound: None,
            gap: None,
            prbs: Vec::new(),
            iterations: Vec::new(),
            warnings: Vec::new(),
            curtailment_cuts: false,
        }
    }

    pub fn from_result(instance: &Instance, result: &ClearingResult) -> Self {
        let mut doc = Self::from_parts(instance, &result.solution, &result.prices);
        doc.mode = Some(result.mode);
        doc.status = Some(result.status);
        doc.welfare = Some(result.welfare);
        doc.bound = finite(result.bound);
        doc.gap = finite(result.gap);
        doc.prbs = result.prbs.iter().map(|v| prb_doc(instance, *v)).collect();
        doc.iterations = result.iterations.iter().map(|r| iteration_doc(instance, r)).collect();
        doc.warnings = result.warnings.clone();
        doc.curtailment_cuts = result.curtailment_cuts;
        doc
    }

    /// Execution state and prices described by the document.
    pub fn to_parts(&self, instance: &Instance) -> Result<(PrimalSolution, PriceVector)> {
        let mut sel = BidSelection::empty(instance);
        for id in &self.selection.blocks {
            let b = instance
                .block_index(id)
                .ok_or_else(|| Error::UnknownId(format!("block {id}")))?;
            sel.blocks[b] = true;
        }
        for fe in &self.selection.flex {
            let f = instance
                .flex_index(&fe.id)
                .ok_or_else(|| Error::UnknownId(format!("flex bid {}", fe.id)))?;
            if sel.flex[f].is_some() {
                return Err(Error::FlexMultiplicity(fe.id.clone()));
            }
            sel.flex[f] = Some(fe.hour);
        }
        sel.check_shape(instance)?;

        let mut delta = vec![0.0; instance.segment_count()];
        let mut seen = Grid::new(instance.n_areas(), instance.hours, false);
        for fd in &self.delta {
            let a = instance
                .area_index(&fd.area)
                .ok_or_else(|| Error::UnknownId(format!("area {}", fd.area)))?;
            if fd.hour >= instance.hours {
                return Err(Error::UnknownId(format!("hour {}", fd.hour)));
            }
            let range = instance.segment_range(a, fd.hour);
            if fd.fill.len() != range.len() {
                return Err(Error::Schema {
                    path: format!("delta[{} {}]", fd.area, fd.hour),
                    message: format!("expected {} fill levels, found {}", range.len(), fd.fill.len()),
                });
            }
            delta[range].copy_from_slice(&fd.fill);
            seen.set(a, fd.hour, true);
        }
        if seen.as_slice().iter().any(|s| !s) && instance.segment_count() > 0 {
            return Err(Error::Schema {
                path: "delta".into(),
                message: "every area and hour needs fill levels".into(),
            });
        }

        let mut flows = Grid::new(instance.interconnectors.len(), instance.hours, 0.0);
        for s in &self.flows {
            let c = instance
                .interconnector_index(&s.id)
                .ok_or_else(|| Error::UnknownId(format!("interconnector {}", s.id)))?;
            if s.values.len() != instance.hours {
                return Err(Error::Schema {
                    path: format!("flows[{}]", s.id),
                    message: format!("expected {} values", instance.hours),
                });
            }
            for (t, v) in s.values.iter().enumerate() {
                flows.set(c, t, *v);
            }
        }
        let mut prices = Grid::new(instance.n_areas(), instance.hours, f64::NAN);
        for s in &self.prices {
            let a = instance
                .area_index(&s.id)
                .ok_or_else(|| Error::UnknownId(format!("area {}", s.id)))?;
            if s.values.len() != instance.hours {
                return Err(Error::Schema {
                    path: format!("prices[{}]", s.id),
                    message: format!("expected {} values", instance.hours),
                });
            }
            for (t, v) in s.values.iter().enumerate() {
                prices.set(a, t, *v);
            }
        }
        if prices.as_slice().iter().any(|p| p.is_nan()) {
            return Err(Error::Schema {
                path: "prices".into(),
                message: "every area needs prices".into(),
            });
        }
        Ok((
            PrimalSolution {
                selection: sel,
                delta,
                flows,
            },
            prices,
        ))
    }
}

fn prb_doc(instance: &Instance, v: Binary) -> PrbDoc {
    match v {
        Binary::Block(b) => PrbDoc {
            id: instance.blocks[b].id.clone(),
            hour: None,
        },
        Binary::Flex { flex, hour } => PrbDoc {
            id: instance.flex[flex].id.clone(),
            hour: Some(hour),
        },
    }
}

fn iteration_doc(instance: &Instance, r: &IterationRecord) -> IterationDoc {
    IterationDoc {
        master_objective: r.master_objective,
        loss_blocks: r.loss_blocks.iter().map(|&b| instance.blocks[b].id.clone()).collect(),
        loss_flex: r
            .loss_flex
            .iter()
            .map(|&(f, hour)| FlexExecution {
                id: instance.flex[f].id.clone(),
                hour,
            })
            .collect(),
        curtailment_segments: r.curtailment_segments.clone(),
        cuts_added: r.cuts_added,
    }
}

pub fn parse_solution(text: &str) -> Result<SolutionDocument> {
    from_json(text)
}

pub fn write_solution(doc: &SolutionDocument) -> String {
    to_pretty(doc)
}

pub fn write_json<T: Serialize>(value: &T) -> String {
    to_pretty(value)
}
