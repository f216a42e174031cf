//! Closed-form revenue.
//!
//! Under linear prices each buyer pays `min(b_i, d_i(p))`, where the desire
//! `d_i(p)` sums the prices of every dataset she values at least at its price.
//! Shard prices and dataset partitions reduce to the same formula. A buyer at
//! exact indifference (`v == p` within [`TOL`]) buys.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Instance, Partition, PriceVector, ShardSet};
use crate::TOL;

#[inline]
pub(crate) fn interested(value: f64, price: f64) -> bool {
    value >= price - TOL
}

/// `d_i(p)`: the sum of prices of the datasets buyer `i` values at least at their price.
pub fn buyer_desire(inst: &Instance, buyer: usize, p: &PriceVector) -> Result<f64> {
    inst.check_buyer(buyer)?;
    inst.check_prices(p)?;
    Ok(desire(inst.values()[buyer].as_slice(), p.as_slice()))
}

pub(crate) fn desire(values: &[f64], prices: &[f64]) -> f64 {
    values
        .iter()
        .zip(prices)
        .filter(|(v, p)| interested(**v, **p))
        .map(|(_, p)| *p)
        .sum()
}

/// Revenue from each buyer under linear prices.
///
/// # Panics
/// If `p` does not have one price per dataset.
pub fn linear_revenue_per_buyer(inst: &Instance, p: &PriceVector) -> Vec<f64> {
    assert_eq!(p.len(), inst.m(), "price vector length");
    inst.values()
        .iter()
        .zip(inst.budgets())
        .map(|(row, b)| b.cap(desire(row, p.as_slice())))
        .collect()
}

/// `r(p) = Σ_i min(b_i, d_i(p))`.
///
/// # Panics
/// If `p` does not have one price per dataset.
pub fn linear_revenue(inst: &Instance, p: &PriceVector) -> f64 {
    assert_eq!(p.len(), inst.m(), "price vector length");
    revenue_at(inst, p.as_slice())
}

/// [`linear_revenue`] on a raw slice, for hot loops.
pub(crate) fn revenue_at(inst: &Instance, prices: &[f64]) -> f64 {
    inst.values()
        .iter()
        .zip(inst.budgets())
        .map(|(row, b)| b.cap(desire(row, prices)))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShardRevenue {
    pub per_buyer: Vec<f64>,
    pub total: f64,
}

/// Uncapped spend of a buyer with per-dataset `values` under shard prices:
/// every shard priced at or below her value is bought in full.
pub(crate) fn shard_desire(values: &[f64], s: &ShardSet) -> f64 {
    values
        .iter()
        .zip(&s.curves)
        .map(|(&v, curve)| {
            curve
                .shards()
                .iter()
                .filter(|sh| interested(v, sh.slope))
                .map(|sh| sh.slope * sh.size)
                .sum::<f64>()
        })
        .sum()
}

/// Per-buyer and total revenue under shard (piecewise-linear convex) prices.
///
/// # Panics
/// If `s` does not have one curve per dataset.
pub fn shard_revenue(inst: &Instance, s: &ShardSet) -> ShardRevenue {
    assert_eq!(s.len(), inst.m(), "shard set length");
    let per_buyer: Vec<f64> = inst
        .values()
        .iter()
        .zip(inst.budgets())
        .map(|(row, b)| b.cap(shard_desire(row, s)))
        .collect();
    let total = per_buyer.iter().sum();
    ShardRevenue { per_buyer, total }
}

/// Revenue of the linear prices a partition induces.
///
/// # Panics
/// If the partition does not cover every dataset.
pub fn partition_revenue(inst: &Instance, part: &Partition) -> f64 {
    assert_eq!(part.len(), inst.m(), "partition length");
    linear_revenue(inst, &part.prices(inst))
}

/// Set of buyer copies `j^(ℓ)` of datasets: copy `ℓ` of dataset `j` stands for
/// pricing `j` at `v_{ℓ,j}`. Several copies of one dataset may be present.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct CopySet(BTreeSet<(usize, usize)>);

impl CopySet {
    pub fn new() -> Self {
        CopySet(BTreeSet::new())
    }

    /// Validates every `(dataset, copy)` pair against the instance shape.
    pub fn from_pairs(inst: &Instance, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (j, l) in pairs {
            if j >= inst.m() {
                return Err(Error::IndexOutOfRange {
                    kind: "dataset",
                    index: j,
                    count: inst.m(),
                });
            }
            if l >= inst.n() {
                return Err(Error::IndexOutOfRange {
                    kind: "buyer copy",
                    index: l,
                    count: inst.n(),
                });
            }
            set.insert((j, l));
        }
        Ok(CopySet(set))
    }

    /// Copies of a partition: one per assigned dataset.
    pub fn from_partition(part: &Partition) -> Self {
        CopySet(
            part.assignment()
                .iter()
                .enumerate()
                .filter_map(|(j, a)| a.map(|l| (j, l)))
                .collect(),
        )
    }

    pub fn insert(&mut self, dataset: usize, copy: usize) -> bool {
        self.0.insert((dataset, copy))
    }

    pub fn remove(&mut self, dataset: usize, copy: usize) -> bool {
        self.0.remove(&(dataset, copy))
    }

    pub fn contains(&self, dataset: usize, copy: usize) -> bool {
        self.0.contains(&(dataset, copy))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when no dataset has more than one copy (partition-matroid independent).
    pub fn is_independent(&self) -> bool {
        let mut last = None;
        self.0.iter().all(|&(j, _)| {
            let fresh = last != Some(j);
            last = Some(j);
            fresh
        })
    }

    /// The partition for an independent set; `None` if two copies share a dataset.
    pub fn to_partition(&self, m: usize) -> Option<Partition> {
        if !self.is_independent() {
            return None;
        }
        let mut part = Partition::unassigned(m);
        for &(j, l) in &self.0 {
            part.set(j, Some(l));
        }
        Some(part)
    }
}

/// Contribution of copy `j^(ℓ)` to buyer `i`'s inner sum: `v_{ℓ,j}` if buyer `i`
/// would buy dataset `j` at that price, else zero.
#[inline]
pub(crate) fn copy_weight(inst: &Instance, buyer: usize, dataset: usize, copy: usize) -> f64 {
    let price = inst.value(copy, dataset);
    if interested(inst.value(buyer, dataset), price) {
        price
    } else {
        0.0
    }
}

/// Submodular extension of partition revenue to arbitrary copy sets:
/// `r̂(S) = Σ_i min(b_i, Σ_{j^(ℓ) ∈ S} v_{i,ℓ,j})`.
///
/// # Panics
/// If a pair in `s` is out of range for `inst`.
pub fn extension_value(inst: &Instance, s: &CopySet) -> f64 {
    (0..inst.n())
        .map(|i| {
            let inner: f64 = s.iter().map(|(j, l)| copy_weight(inst, i, j, l)).sum();
            inst.budget(i).cap(inner)
        })
        .sum()
}

/// Outcome of sampling a diminishing-returns inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest amount by which the larger-set marginal exceeded the smaller-set one.
    pub max_excess: f64,
}

impl PropertyReport {
    fn record(&mut self, excess: f64) {
        self.samples += 1;
        if excess > TOL {
            self.violations += 1;
        }
        if excess > self.max_excess {
            self.max_excess = excess;
        }
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

impl Default for PropertyReport {
    fn default() -> Self {
        PropertyReport {
            samples: 0,
            violations: 0,
            max_excess: f64::NEG_INFINITY,
        }
    }
}

/// Samples `samples` nested partition pairs `T ⊆ S` with a dataset `j` left
/// unassigned by `S`, and checks that assigning `j` to a random buyer gains
/// no more under `S` than under `T`.
pub fn sample_n_submodularity<R: Rng>(inst: &Instance, samples: usize, rng: &mut R) -> PropertyReport {
    let (n, m) = (inst.n(), inst.m());
    let mut report = PropertyReport::default();
    for _ in 0..samples {
        let j = rng.random_range(0..m);
        let buyer = rng.random_range(0..n);
        let mut big = Partition::unassigned(m);
        let mut small = Partition::unassigned(m);
        for k in (0..m).filter(|&k| k != j) {
            if rng.random_bool(0.7) {
                let i = rng.random_range(0..n);
                big.set(k, Some(i));
                if rng.random_bool(0.5) {
                    small.set(k, Some(i));
                }
            }
        }
        let gain = |part: &Partition| {
            let mut with = part.clone();
            with.set(j, Some(buyer));
            partition_revenue(inst, &with) - partition_revenue(inst, part)
        };
        report.record(gain(&big) - gain(&small));
    }
    report
}

/// Samples `samples` triples `T ⊆ S ⊆ ground`, `e ∉ S` over the copy ground
/// set and checks `r̂(S+e) − r̂(S) ≤ r̂(T+e) − r̂(T)`.
pub fn sample_extension_submodularity<R: Rng>(
    inst: &Instance,
    samples: usize,
    rng: &mut R,
) -> PropertyReport {
    let ground: Vec<(usize, usize)> = (0..inst.m())
        .flat_map(|j| (0..inst.n()).map(move |l| (j, l)))
        .collect();
    let mut report = PropertyReport::default();
    let mut order = ground.clone();
    for _ in 0..samples {
        order.shuffle(rng);
        let (e, rest) = order.split_first().expect("ground set is non-empty");
        let mut big = CopySet::new();
        let mut small = CopySet::new();
        for &(j, l) in rest {
            if rng.random_bool(0.5) {
                big.insert(j, l);
                if rng.random_bool(0.5) {
                    small.insert(j, l);
                }
            }
        }
        let gain = |s: &CopySet| {
            let mut with = s.clone();
            with.insert(e.0, e.1);
            extension_value(inst, &with) - extension_value(inst, s)
        };
        report.record(gain(&big) - gain(&small));
    }
    report
}
