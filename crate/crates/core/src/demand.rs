//! Buyer demand under shard prices, and the univariate transforms that turn
//! an arbitrary monotone piecewise-linear price curve into shard form.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bundle, Instance, Shard, ShardCurve, ShardSet};
use crate::revenue::interested;
use crate::TOL;

/// Largest prefix of the dataset over which every shard slope is at most
/// `beta`: the point where a buyer with per-unit value `beta` stops buying.
pub fn rate_threshold(c: &ShardCurve, beta: f64) -> f64 {
    let x: f64 = c
        .shards()
        .iter()
        .take_while(|s| s.slope <= beta + TOL)
        .map(|s| s.size)
        .sum();
    x.min(1.0)
}

/// A purchasable unit for the fractional knapsack: `cost` to buy it whole,
/// `surplus` the utility gained over cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnapsackItem {
    pub cost: f64,
    pub surplus: f64,
}

/// Utility-maximizing fractional purchase of `items` under `budget`, paying
/// as much as possible among maximizers.
///
/// When everything fits, everything is bought. Otherwise items go in
/// decreasing surplus/cost order (free items first); items with zero surplus
/// come last, in input order, and only while budget remains. The marginal
/// item is bought fractionally. Returns one fraction per item.
pub fn fractional_knapsack(items: &[KnapsackItem], budget: f64) -> Vec<f64> {
    let total: f64 = items.iter().map(|it| it.cost).sum();
    if total <= budget {
        return vec![1.0; items.len()];
    }

    let positive = |it: &KnapsackItem| it.surplus > TOL * it.cost.max(1.0) || it.cost <= 0.0;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, ib) = (&items[a], &items[b]);
        match (positive(ia), positive(ib)) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => a.cmp(&b),
            (true, true) => {
                // surplus_a / cost_a > surplus_b / cost_b, cross-multiplied so
                // zero-cost items sort first.
                let lhs = ia.surplus * ib.cost;
                let rhs = ib.surplus * ia.cost;
                rhs.partial_cmp(&lhs).unwrap_or(Ordering::Equal).then(a.cmp(&b))
            }
        }
    });

    let mut fractions = vec![0.0; items.len()];
    let mut left = budget;
    for idx in order {
        let cost = items[idx].cost;
        if cost <= left {
            fractions[idx] = 1.0;
            left -= cost;
        } else {
            fractions[idx] = (left / cost).clamp(0.0, 1.0);
            break;
        }
    }
    fractions
}

/// Buyer `i`'s demand bundle under shard prices.
///
/// Every shard whose slope does not exceed the buyer's value for its dataset
/// is a knapsack item (cost `slope·size`, surplus `(v − slope)·size`). The
/// payment equals `min(b_i, cost of all such shards)`.
pub fn optimal_demand(inst: &Instance, buyer: usize, s: &ShardSet) -> Result<Bundle> {
    inst.check_buyer(buyer)?;
    inst.check_shards(s)?;

    let mut owners = Vec::new();
    let mut items = Vec::new();
    for (j, curve) in s.curves.iter().enumerate() {
        let v = inst.value(buyer, j);
        for sh in curve.shards().iter().filter(|sh| interested(v, sh.slope)) {
            owners.push((j, sh.size));
            items.push(KnapsackItem {
                cost: sh.slope * sh.size,
                surplus: ((v - sh.slope) * sh.size).max(0.0),
            });
        }
    }

    let budget = inst.budget(buyer);
    let take = if budget.is_infinite() {
        vec![1.0; items.len()]
    } else {
        fractional_knapsack(&items, budget.value())
    };

    let mut bundle = Bundle::empty(inst.m());
    for ((&(j, size), it), f) in owners.iter().zip(&items).zip(&take) {
        bundle.fractions[j] += f * size;
        bundle.payment += f * it.cost;
    }
    for x in &mut bundle.fractions {
        *x = x.clamp(0.0, 1.0);
    }
    // The knapsack spends exactly min(b, total); summing partial costs can
    // drift from that by a few ulps.
    let spend: f64 = items.iter().map(|it| it.cost).sum();
    bundle.payment = budget.cap(spend);
    Ok(bundle)
}

/// A continuous, monotone price curve given by its breakpoints and linear
/// interpolation between them. Not necessarily convex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseCurve {
    points: Vec<(f64, f64)>,
}

impl PiecewiseCurve {
    /// `points` must start at `(0, 0)`, end at `x = 1`, have strictly
    /// increasing `x` and non-decreasing finite prices.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |reason: String| Err(Error::invalid("piecewise curve", reason));
        if points.len() < 2 {
            return bad(format!("{} breakpoints, need at least 2", points.len()));
        }
        if points[0] != (0.0, 0.0) {
            return bad(format!("first breakpoint {:?} is not (0, 0)", points[0]));
        }
        if points[points.len() - 1].0 != 1.0 {
            return bad("last breakpoint is not at x = 1".into());
        }
        for w in points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1.partial_cmp(&x0) != Some(Ordering::Greater) {
                return bad(format!("breakpoints at {x0} and {x1} are not increasing"));
            }
            if !y1.is_finite() || y1 < y0 {
                return bad(format!("price decreases from {y0} to {y1} at x = {x1}"));
            }
        }
        Ok(PiecewiseCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Price of the first `x` fraction.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let k = self.points.partition_point(|&(px, _)| px < x);
        if k == 0 {
            return self.points[0].1;
        }
        let (x0, y0) = self.points[k - 1];
        let (x1, y1) = self.points[k.min(self.points.len() - 1)];
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseCurve {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        PiecewiseCurve::new(points)
    }
}

impl From<PiecewiseCurve> for Vec<(f64, f64)> {
    fn from(c: PiecewiseCurve) -> Self {
        c.points
    }
}

impl From<&ShardCurve> for PiecewiseCurve {
    fn from(c: &ShardCurve) -> Self {
        let mut points = c.breakpoints();
        // Accumulated sizes can land an ulp away from 1.
        if let Some(last) = points.last_mut() {
            last.0 = 1.0;
        }
        PiecewiseCurve { points }
    }
}

/// Lower convex envelope of a piecewise curve, as shards.
///
/// Monotone-chain lower hull over the breakpoints; the envelope matches the
/// curve at `x = 0` and `x = 1` and lies on or below it everywhere else.
pub fn convexify(c: &PiecewiseCurve) -> ShardCurve {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(c.points.len());
    for &p in &c.points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b unless a → b → p turns strictly left.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let shards = hull
        .windows(2)
        .map(|w| {
            let size = w[1].0 - w[0].0;
            Shard {
                size,
                slope: ((w[1].1 - w[0].1) / size).max(0.0),
            }
        })
        .collect();
    ShardCurve::new(shards).expect("hull of a monotone curve on [0, 1] is a valid shard curve")
}

/// Piecewise-linearization of a convex shard curve onto the slope grid
/// `slopes`: with `α_1 < … < α_k`, shard `t` runs from
/// `rate_threshold(c, α_{t-1})` to `rate_threshold(c, α_t)` at slope `α_t`,
/// and the last shard runs to 1 at `α_k`.
pub fn piecewise_linearize(c: &ShardCurve, slopes: &[f64]) -> Result<ShardCurve> {
    if slopes.is_empty() {
        return Err(Error::invalid("slope set", "empty"));
    }
    if let Some(a) = slopes.iter().find(|a| !a.is_finite() || **a < 0.0) {
        return Err(Error::invalid(
            "slope set",
            format!("slope {a} is not finite and non-negative"),
        ));
    }
    let mut grid = slopes.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut shards = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    for (t, &alpha) in grid.iter().enumerate() {
        let end = if t + 1 == grid.len() {
            1.0
        } else {
            rate_threshold(c, alpha).max(prev)
        };
        shards.push(Shard {
            size: end - prev,
            slope: alpha,
        });
        prev = end;
    }
    ShardCurve::new(shards)
}
