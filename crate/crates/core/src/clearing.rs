//! Supply-side market clearing.
//!
//! Prices are clearable when every positively priced item is wanted by some
//! buyer whose desire fits her budget; such a buyer takes the whole item, so
//! nothing goes unsold. [`clearabilize`] lowers prices one item at a time
//! until that holds, without reducing any buyer's payment.
//!
//! The market is stated over generic items so the same procedure clears
//! datasets under linear prices and shards under piecewise-linear prices.

use serde::Serialize;

use crate::demand::{fractional_knapsack, KnapsackItem};
use crate::error::{Error, Result};
use crate::model::{Allocation, Budget, Bundle, Instance, PriceVector, ShardSet};
use crate::TOL;

/// Where an item came from when it is a shard of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ItemOrigin {
    pub dataset: usize,
    pub shard: usize,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemMarket {
    /// Item prices `q`.
    pub prices: Vec<f64>,
    /// `values[i][k]`: buyer `i`'s value for the whole item `k`.
    pub values: Vec<Vec<f64>>,
    pub budgets: Vec<Budget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<ItemOrigin>>,
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

impl ItemMarket {
    pub fn new(prices: Vec<f64>, values: Vec<Vec<f64>>, budgets: Vec<Budget>) -> Result<Self> {
        if values.len() != budgets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} value rows for {} budgets",
                values.len(),
                budgets.len()
            )));
        }
        if let Some(i) = values.iter().position(|r| r.len() != prices.len()) {
            return Err(Error::DimensionMismatch(format!(
                "buyer {i} has {} item values for {} items",
                values[i].len(),
                prices.len()
            )));
        }
        if !prices.iter().chain(values.iter().flatten()).all(|&x| finite_nonneg(x)) {
            return Err(Error::invalid("item market", "prices and values must be finite and non-negative"));
        }
        Ok(ItemMarket {
            prices,
            values,
            budgets,
            origin: None,
        })
    }

    /// Datasets as items under linear prices.
    pub fn from_prices(inst: &Instance, p: &PriceVector) -> Result<Self> {
        inst.check_prices(p)?;
        ItemMarket::new(p.as_slice().to_vec(), inst.values().to_vec(), inst.budgets().to_vec())
    }

    pub fn num_items(&self) -> usize {
        self.prices.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.budgets.len()
    }

    pub fn with_prices(&self, prices: Vec<f64>) -> Result<Self> {
        let mut m = ItemMarket::new(prices, self.values.clone(), self.budgets.clone())?;
        m.origin = self.origin.clone();
        Ok(m)
    }

    /// Per-dataset fractions held, folding shard items back onto datasets.
    /// `None` for a market not built from shards.
    pub fn dataset_fractions(&self, bundle: &Bundle, m: usize) -> Option<Vec<f64>> {
        let origin = self.origin.as_ref()?;
        let mut out = vec![0.0; m];
        for (o, f) in origin.iter().zip(&bundle.fractions) {
            out[o.dataset] += o.size * f;
        }
        Some(out.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
    }
}

/// One item per shard: a shard of size `z` and slope `α` costs `α·z`, and
/// buyer `i` values it at `v_{i,j}·z`.
pub fn shards_to_items(inst: &Instance, s: &ShardSet) -> Result<ItemMarket> {
    inst.check_shards(s)?;
    let mut prices = Vec::new();
    let mut origin = Vec::new();
    for (j, curve) in s.curves.iter().enumerate() {
        for (t, sh) in curve.shards().iter().enumerate() {
            prices.push(sh.slope * sh.size);
            origin.push(ItemOrigin {
                dataset: j,
                shard: t,
                size: sh.size,
            });
        }
    }
    let values = (0..inst.n())
        .map(|i| origin.iter().map(|o| inst.value(i, o.dataset) * o.size).collect())
        .collect();
    let mut mkt = ItemMarket::new(prices, values, inst.budgets().to_vec())?;
    mkt.origin = Some(origin);
    Ok(mkt)
}

fn interested(w: f64, q: f64) -> bool {
    w >= q - TOL
}

fn priced(q: f64) -> bool {
    q > TOL
}

fn desires(values: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|row| row.iter().zip(q).filter(|(w, q)| interested(**w, **q)).map(|(_, q)| q).sum())
        .collect()
}

fn satisfied(b: Budget, d: f64) -> bool {
    b.is_infinite() || d <= b.value() + TOL
}

/// Per-buyer revenue `min(b_i, d_i(q))`.
pub fn item_revenues(mkt: &ItemMarket, q: &[f64]) -> Vec<f64> {
    desires(&mkt.values, q)
        .into_iter()
        .zip(&mkt.budgets)
        .map(|(d, b)| b.cap(d))
        .collect()
}

/// First item that blocks clearability at prices `q`: positively priced, and
/// every interested buyer is budget-constrained.
fn violating_item(mkt: &ItemMarket, q: &[f64], d: &[f64]) -> Option<usize> {
    (0..q.len()).find(|&k| {
        priced(q[k])
            && !(0..mkt.num_buyers())
                .any(|i| interested(mkt.values[i][k], q[k]) && satisfied(mkt.budgets[i], d[i]))
    })
}

pub fn is_clearable_at(mkt: &ItemMarket, q: &[f64]) -> bool {
    let d = desires(&mkt.values, q);
    violating_item(mkt, q, &d).is_none()
}

pub fn is_clearable(mkt: &ItemMarket) -> bool {
    is_clearable_at(mkt, &mkt.prices)
}

/// `(n+1)·φ₁ + φ₂`, where `φ₁` counts priced items plus uninterested
/// (buyer, item) pairs, and `φ₂` counts budget-constrained buyers.
pub fn potential(mkt: &ItemMarket, q: &[f64]) -> u64 {
    let n = mkt.num_buyers() as u64;
    let phi1: u64 = (0..q.len())
        .map(|k| {
            let uninterested = mkt.values.iter().filter(|row| !interested(row[k], q[k])).count();
            priced(q[k]) as u64 + uninterested as u64
        })
        .sum();
    let phi2 = desires(&mkt.values, q)
        .iter()
        .zip(&mkt.budgets)
        .filter(|(d, b)| !satisfied(**b, **d))
        .count() as u64;
    (n + 1) * phi1 + phi2
}

/// Upper bound on [`clearabilize`] iterations: `(M'+1)(n+1)²`.
pub fn iteration_bound(mkt: &ItemMarket) -> u64 {
    let (items, n) = (mkt.num_items() as u64, mkt.num_buyers() as u64);
    (items + 1) * (n + 1) * (n + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clearing {
    pub prices: Vec<f64>,
    pub iterations: u64,
    /// Potential before the first and after every iteration.
    pub potentials: Vec<u64>,
}

/// Lowers prices until they are clearable, never decreasing any buyer's
/// revenue and never raising a price.
///
/// Each round takes the lowest-index blocking item `k` and sets its price to
/// `max(0, β)` with `β = max_i (q_k − d_i + b_i)` over budget-constrained
/// buyers interested in `k` (price zero when there are none).
pub fn clearabilize(mkt: &ItemMarket) -> Clearing {
    let mut q = mkt.prices.clone();
    let mut potentials = vec![potential(mkt, &q)];
    let bound = iteration_bound(mkt);
    let mut iterations = 0;
    loop {
        let d = desires(&mkt.values, &q);
        let Some(k) = violating_item(mkt, &q, &d) else {
            break;
        };
        assert!(iterations < bound, "clearing exceeded {bound} iterations");
        // Every interested buyer is constrained here, so C∖U_k is exactly the
        // set of interested buyers.
        let beta = (0..mkt.num_buyers())
            .filter(|&i| interested(mkt.values[i][k], q[k]))
            .map(|i| q[k] - d[i] + mkt.budgets[i].value())
            .fold(f64::NEG_INFINITY, f64::max);
        q[k] = beta.max(0.0);
        iterations += 1;
        potentials.push(potential(mkt, &q));
    }
    Clearing {
        prices: q,
        iterations,
        potentials,
    }
}

/// A market-clearing allocation at clearable prices `q`.
///
/// Satisfied buyers take every item they are interested in; budget-constrained
/// buyers spend their budget via the fractional knapsack. Clearability makes
/// every positively priced item wholly held by a satisfied buyer, and free
/// items are held by everyone.
pub fn clearing_allocation(mkt: &ItemMarket, q: &[f64]) -> Result<Allocation> {
    if q.len() != mkt.num_items() {
        return Err(Error::DimensionMismatch(format!(
            "{} prices for {} items",
            q.len(),
            mkt.num_items()
        )));
    }
    let d = desires(&mkt.values, q);
    if let Some(k) = violating_item(mkt, q, &d) {
        return Err(Error::Precondition(format!(
            "prices are not clearable: item {k} has no satisfied interested buyer"
        )));
    }
    let bundles = mkt
        .values
        .iter()
        .zip(&mkt.budgets)
        .zip(&d)
        .map(|((row, &b), &desire)| {
            let wanted: Vec<usize> = (0..q.len()).filter(|&k| interested(row[k], q[k])).collect();
            let mut bundle = Bundle::empty(q.len());
            if satisfied(b, desire) {
                for &k in &wanted {
                    bundle.fractions[k] = 1.0;
                }
            } else {
                let items: Vec<KnapsackItem> = wanted
                    .iter()
                    .map(|&k| KnapsackItem {
                        cost: q[k],
                        surplus: (row[k] - q[k]).max(0.0),
                    })
                    .collect();
                for (&k, f) in wanted.iter().zip(fractional_knapsack(&items, b.value())) {
                    bundle.fractions[k] = f;
                }
            }
            bundle.payment = b.cap(desire);
            bundle
        })
        .collect();
    Ok(Allocation::from_bundles(bundles))
}
