//! Optimal separable piecewise-linear convex pricing via the sharding LP.
//!
//! Every dataset is cut into shards, one per distinct buyer value in its
//! column, and shard `t` of dataset `j` is priced at that value per unit. The
//! LP chooses the shard sizes `z` (summing to one per dataset) and the
//! per-buyer revenue `r_i`, capped by the budget and by what the buyer is
//! willing to pay for all shards priced at or below her value.

use serde::Serialize;

use crate::demand::optimal_demand;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation};
use crate::model::{Allocation, Instance, Shard, ShardCurve, ShardSet};
use crate::revenue::{interested, shard_revenue};

/// Where each quantity of the sharding LP lives in its variable vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricingLayout {
    /// `slopes[j][t]` is the per-unit price of shard variable `z_vars[j][t]`;
    /// ascending within each dataset.
    pub slopes: Vec<Vec<f64>>,
    pub z_vars: Vec<Vec<usize>>,
    /// `r_vars[i]` is `None` for buyers with infinite budget.
    pub r_vars: Vec<Option<usize>>,
}

impl PricingLayout {
    pub fn num_vars(&self) -> usize {
        let z: usize = self.z_vars.iter().map(Vec::len).sum();
        z + self.r_vars.iter().flatten().count()
    }
}

/// Builds the sharding LP together with its variable layout.
///
/// Variables are the shard sizes (dataset-major, ascending slope) followed by
/// one revenue variable per finite-budget buyer. Rows come per finite buyer
/// as `r_i ≤ b_i` then `r_i ≤ desire_i(z)`, followed by one `Σ_t z_{t,j} = 1`
/// per dataset. Infinite-budget buyers add their desire directly to the
/// objective.
pub fn build_pricing_lp(inst: &Instance) -> (LpProblem, PricingLayout) {
    let (n, m) = (inst.n(), inst.m());
    let slopes: Vec<Vec<f64>> = (0..m).map(|j| inst.distinct_values(j)).collect();

    let mut next = 0;
    let z_vars: Vec<Vec<usize>> = slopes
        .iter()
        .map(|col| {
            let ids = (next..next + col.len()).collect();
            next += col.len();
            ids
        })
        .collect();
    let r_vars: Vec<Option<usize>> = inst
        .budgets()
        .iter()
        .map(|b| {
            (!b.is_infinite()).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    let layout = PricingLayout {
        slopes,
        z_vars,
        r_vars,
    };
    let num_vars = next;

    // Coefficients of buyer i's desire as a linear form in z.
    let desire = |i: usize| {
        let mut row = vec![0.0; num_vars];
        for j in 0..m {
            let v = inst.value(i, j);
            for (&alpha, &var) in layout.slopes[j].iter().zip(&layout.z_vars[j]) {
                if interested(v, alpha) {
                    row[var] = alpha;
                }
            }
        }
        row
    };

    let mut p = LpProblem::new(vec![0.0; num_vars]);
    for i in 0..n {
        match layout.r_vars[i] {
            Some(r) => {
                p.objective[r] = 1.0;
                let mut cap = vec![0.0; num_vars];
                cap[r] = 1.0;
                p.push(cap, Relation::Le, inst.budget(i).value());
                let mut row: Vec<f64> = desire(i).into_iter().map(|a| -a).collect();
                row[r] = 1.0;
                p.push(row, Relation::Le, 0.0);
            }
            None => {
                for (o, a) in p.objective.iter_mut().zip(desire(i)) {
                    *o += a;
                }
            }
        }
    }
    for vars in &layout.z_vars {
        let mut row = vec![0.0; num_vars];
        for &v in vars {
            row[v] = 1.0;
        }
        p.push(row, Relation::Eq, 1.0);
    }
    (p, layout)
}

/// Revenue-maximizing separable PLC prices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlcSolution {
    #[serde(flatten)]
    pub shards: ShardSet,
    pub per_buyer_revenue: Vec<f64>,
    pub total_revenue: f64,
    pub positive_shard_count: usize,
}

/// Solves the sharding LP and reads off the optimal shard curves.
pub fn solve_plc(inst: &Instance) -> Result<PlcSolution> {
    let (p, layout) = build_pricing_lp(inst);
    let sol = solve_lp(&p)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Lp("infeasible")),
        LpStatus::Unbounded => return Err(Error::Lp("unbounded")),
    }

    let mut curves = Vec::with_capacity(inst.m());
    for (slopes, vars) in layout.slopes.iter().zip(&layout.z_vars) {
        let sizes: Vec<f64> = vars.iter().map(|&v| sol.x[v].max(0.0)).collect();
        // Remove the LP's rounding residue so the sizes sum to one exactly.
        let total: f64 = sizes.iter().sum();
        let shards = slopes
            .iter()
            .zip(&sizes)
            .map(|(&slope, &z)| Shard {
                size: z / total,
                slope,
            })
            .collect();
        curves.push(ShardCurve::new(shards)?);
    }
    let shards = ShardSet::new(curves);
    let rev = shard_revenue(inst, &shards);
    Ok(PlcSolution {
        positive_shard_count: shards.shard_count(),
        per_buyer_revenue: rev.per_buyer,
        total_revenue: rev.total,
        shards,
    })
}

/// Each buyer's optimal bundle under shard prices `s`.
pub fn extract_allocation(inst: &Instance, s: &ShardSet) -> Result<Allocation> {
    let bundles = (0..inst.n())
        .map(|i| optimal_demand(inst, i, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Allocation::from_bundles(bundles))
}
