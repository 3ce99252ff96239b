//! Hourly net demand curves.
//!
//! A curve is stored as a list of segments sorted by descending price. Filling a
//! segment (`delta` from 0 to 1) walks it from its high-price end to its
//! low-price end and adds `quantity_span` of net demand.

use serde::{Deserialize, Serialize};

use super::{PriceInterval, EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCurveSegment {
    /// Price at the low-price end (`delta = 1`).
    pub base_price: f64,
    pub price_span: f64,
    /// Curve quantity at `base_price`.
    pub base_quantity: f64,
    pub quantity_span: f64,
    pub is_curtailment: bool,
    /// Net quantity contributed by the segment when `delta = 0`.
    pub lower_quantity: f64,
}

impl NetCurveSegment {
    fn between(low: (f64, f64), high: (f64, f64), is_curtailment: bool) -> Self {
        let base_quantity = low.1;
        let quantity_span = low.1 - high.1;
        let lower_quantity = if base_quantity > 0.0 {
            (base_quantity - quantity_span).min(0.0)
        } else {
            -quantity_span
        };
        Self {
            base_price: low.0,
            price_span: high.0 - low.0,
            base_quantity,
            quantity_span,
            is_curtailment,
            lower_quantity,
        }
    }

    /// Segment price at fill level `z`.
    pub fn price_at(&self, z: f64) -> f64 {
        self.base_price + (1.0 - z) * self.price_span
    }

    /// Net quantity contributed at fill level `z`.
    pub fn quantity_at(&self, z: f64) -> f64 {
        self.lower_quantity + self.quantity_span * z
    }

    pub fn top_price(&self) -> f64 {
        self.base_price + self.price_span
    }

    /// No volume: the curve only moves in price.
    pub fn is_horizontal(&self) -> bool {
        self.quantity_span <= EPS
    }

    /// No price change: the curve only moves in quantity.
    pub fn is_vertical(&self) -> bool {
        self.price_span <= EPS
    }

    /// `quantity_span * integral_0^z price_at`, the segment's welfare
    /// contribution up to the additive constant.
    pub fn welfare(&self, z: f64) -> f64 {
        self.top_price() * self.quantity_span * z
            - 0.5 * self.price_span * self.quantity_span * z * z
    }

    /// Fill level at which the segment contributes zero net quantity.
    pub fn zero_crossing(&self) -> f64 {
        if self.is_horizontal() {
            0.0
        } else {
            (-self.lower_quantity / self.quantity_span).clamp(0.0, 1.0)
        }
    }

    /// Fill level implied by a price, for the range of fills consistent with it.
    fn fill_range_at(&self, price: f64) -> (f64, f64) {
        if self.is_vertical() {
            if price < self.base_price - EPS {
                (1.0, 1.0)
            } else if price > self.base_price + EPS {
                (0.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else {
            let z = ((self.top_price() - price) / self.price_span).clamp(0.0, 1.0);
            (z, z)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetCurve {
    pub area: usize,
    pub hour: usize,
    /// Net demand at the upper end of the global price interval (never positive).
    pub min_net_demand: f64,
    /// Segments in descending price order.
    pub segments: Vec<NetCurveSegment>,
    /// Nodes exactly as submitted.
    pub input_nodes: Vec<(f64, f64)>,
}

impl NetCurve {
    /// Executed net demand of the curve for the given fill levels.
    pub fn executed_quantity(&self, delta: &[f64]) -> f64 {
        self.min_net_demand
            + self
                .segments
                .iter()
                .zip(delta)
                .map(|(s, d)| s.quantity_span * d)
                .sum::<f64>()
    }

    /// Range of net demand the curve admits at `price`.
    pub fn quantity_range_at(&self, price: f64) -> (f64, f64) {
        let mut lo = self.min_net_demand;
        let mut hi = self.min_net_demand;
        for s in &self.segments {
            let (a, b) = s.fill_range_at(price);
            lo += s.quantity_span * a;
            hi += s.quantity_span * b;
        }
        (lo, hi)
    }

    /// Nodes of the extended curve in ascending price order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut nodes = Vec::with_capacity(self.segments.len() + 1);
        for s in self.segments.iter().rev() {
            if nodes.is_empty() {
                nodes.push((s.base_price, s.base_quantity));
            }
            nodes.push((s.top_price(), s.base_quantity - s.quantity_span));
        }
        nodes
    }

    /// Widest price interval on which the curve can take a quantity in
    /// `[q_low, q_high]`. Flat stretches at either end are included whole.
    pub fn price_band(&self, q_low: f64, q_high: f64, global: PriceInterval) -> PriceInterval {
        let nodes = self.nodes();
        let lowest = lowest_price_with_quantity_at_most(&nodes, q_high).unwrap_or(global.upper);
        let highest = highest_price_with_quantity_at_least(&nodes, q_low).unwrap_or(global.lower);
        if lowest <= highest {
            PriceInterval {
                lower: lowest,
                upper: highest,
            }
        } else {
            PriceInterval {
                lower: highest,
                upper: lowest,
            }
        }
    }
}

fn lowest_price_with_quantity_at_most(nodes: &[(f64, f64)], q: f64) -> Option<f64> {
    if nodes[0].1 <= q + EPS {
        return Some(nodes[0].0);
    }
    for w in nodes.windows(2) {
        let ((p0, q0), (p1, q1)) = (w[0], w[1]);
        if q1 <= q + EPS {
            // q0 > q >= q1
            if (q0 - q1).abs() <= EPS {
                return Some(p0);
            }
            let t = ((q0 - q) / (q0 - q1)).clamp(0.0, 1.0);
            return Some(p0 + t * (p1 - p0));
        }
    }
    None
}

fn highest_price_with_quantity_at_least(nodes: &[(f64, f64)], q: f64) -> Option<f64> {
    let last = nodes[nodes.len() - 1];
    if last.1 >= q - EPS {
        return Some(last.0);
    }
    for w in nodes.windows(2).rev() {
        let ((p0, q0), (p1, q1)) = (w[0], w[1]);
        if q0 >= q - EPS {
            if (q0 - q1).abs() <= EPS {
                return Some(p1);
            }
            let t = ((q0 - q) / (q0 - q1)).clamp(0.0, 1.0);
            return Some(p0 + t * (p1 - p0));
        }
    }
    None
}

#[derive(Clone, Copy)]
struct Node {
    price: f64,
    quantity: f64,
    /// The segment ending at this node (from the previous node) is curtailment.
    curtailment_in: bool,
}

/// Builds a net curve from `(price, quantity)` nodes given in ascending price
/// order, extending it over `global` and inserting a curtailment segment when
/// the submitted curve never reaches zero net demand.
pub fn build_net_curve(
    nodes: &[(f64, f64)],
    area_interval: PriceInterval,
    global: PriceInterval,
) -> Result<NetCurve> {
    if nodes.is_empty() {
        return Err(Error::EmptyCurve);
    }
    for (i, &(p, q)) in nodes.iter().enumerate() {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::NonMonotoneCurve {
                index: i,
                detail: "non-finite coordinate".into(),
            });
        }
        if p < area_interval.lower - EPS || p > area_interval.upper + EPS {
            return Err(Error::NodeOutsideInterval {
                price: p,
                lower: area_interval.lower,
                upper: area_interval.upper,
            });
        }
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if w[1].0 < w[0].0 - EPS {
            return Err(Error::NonMonotoneCurve {
                index: i + 1,
                detail: format!("price decreases from {} to {}", w[0].0, w[1].0),
            });
        }
        if w[1].1 > w[0].1 + EPS {
            return Err(Error::NonMonotoneCurve {
                index: i + 1,
                detail: format!("quantity increases from {} to {}", w[0].1, w[1].1),
            });
        }
    }

    let mut pts: Vec<Node> = nodes
        .iter()
        .map(|&(price, quantity)| Node {
            price,
            quantity,
            curtailment_in: false,
        })
        .collect();

    // Cover the area interval first so curtailment sits at the area's limits.
    let first = pts[0];
    if first.price > area_interval.lower + EPS {
        pts.insert(
            0,
            Node {
                price: area_interval.lower,
                quantity: first.quantity,
                curtailment_in: false,
            },
        );
    }
    let last = pts[pts.len() - 1];
    if last.price < area_interval.upper - EPS {
        pts.push(Node {
            price: area_interval.upper,
            quantity: last.quantity,
            curtailment_in: false,
        });
    }

    // Vertical curtailment segments, then horizontal extension to the global interval.
    let last = pts[pts.len() - 1];
    if last.quantity > EPS {
        pts.push(Node {
            price: last.price,
            quantity: 0.0,
            curtailment_in: true,
        });
    }
    let first = pts[0];
    if first.quantity < -EPS {
        pts[0].curtailment_in = true;
        pts.insert(
            0,
            Node {
                price: first.price,
                quantity: 0.0,
                curtailment_in: false,
            },
        );
    }
    let first = pts[0];
    if first.price > global.lower + EPS {
        pts.insert(
            0,
            Node {
                price: global.lower,
                quantity: first.quantity,
                curtailment_in: false,
            },
        );
    }
    let last = pts[pts.len() - 1];
    if last.price < global.upper - EPS {
        pts.push(Node {
            price: global.upper,
            quantity: last.quantity,
            curtailment_in: false,
        });
    }

    let pts = collapse(pts);

    let mut segments: Vec<NetCurveSegment> = pts
        .windows(2)
        .map(|w| {
            NetCurveSegment::between(
                (w[0].price, w[0].quantity),
                (w[1].price, w[1].quantity),
                w[1].curtailment_in,
            )
        })
        .filter(|s| !(s.price_span <= EPS && s.quantity_span <= EPS))
        .collect();
    segments.reverse();

    let min_net_demand = pts[pts.len() - 1].quantity;
    Ok(NetCurve {
        area: 0,
        hour: 0,
        min_net_demand,
        segments,
        input_nodes: nodes.to_vec(),
    })
}

/// Drops duplicate nodes and the middle node of any constant-price or
/// constant-quantity triple.
fn collapse(pts: Vec<Node>) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::with_capacity(pts.len());
    for p in pts {
        if let Some(last) = out.last_mut() {
            if (last.price - p.price).abs() <= EPS && (last.quantity - p.quantity).abs() <= EPS {
                last.curtailment_in |= p.curtailment_in;
                continue;
            }
        }
        out.push(p);
        while out.len() >= 3 {
            let n = out.len();
            let (a, b, c) = (out[n - 3], out[n - 2], out[n - 1]);
            let same_q = (a.quantity - b.quantity).abs() <= EPS
                && (b.quantity - c.quantity).abs() <= EPS;
            let same_p =
                (a.price - b.price).abs() <= EPS && (b.price - c.price).abs() <= EPS;
            if same_q || same_p {
                out[n - 1].curtailment_in |= b.curtailment_in;
                out.remove(n - 2);
            } else {
                break;
            }
        }
    }
    out
}
