//! Market instances, price representations and file I/O.
//!
//! All quantities are `f64`. Budgets may be infinite; values, prices and
//! shard slopes are always finite and non-negative.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::TOL;

/// Shard sizes at or below this are treated as empty and dropped.
pub const MIN_SHARD_SIZE: f64 = 1e-12;

/// A buyer budget. `Budget::INFINITE` caps nothing.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Budget(f64);

impl Budget {
    pub const INFINITE: Budget = Budget(f64::INFINITY);

    /// Finite, non-negative budget. Negative or NaN amounts are rejected.
    pub fn finite(amount: f64) -> Result<Self> {
        if amount.is_finite() && amount >= 0.0 {
            Ok(Budget(amount))
        } else {
            Err(Error::invalid("budget", format!("{amount} is not a finite non-negative amount")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `min(budget, amount)`; infinite budgets return `amount` untouched.
    pub fn cap(self, amount: f64) -> f64 {
        if self.is_infinite() {
            amount
        } else {
            self.0.min(amount)
        }
    }
}

impl Serialize for Budget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// Wire form of a budget: a JSON number or the string `"inf"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum BudgetRepr {
    Number(f64),
    Text(String),
}

fn parse_budget_repr(r: BudgetRepr) -> std::result::Result<f64, String> {
    match r {
        BudgetRepr::Number(x) => Ok(x),
        BudgetRepr::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
        BudgetRepr::Text(s) => Err(format!("budget string {s:?} is not \"inf\"")),
    }
}

fn deserialize_budgets<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let raw = Vec::<BudgetRepr>::deserialize(d)?;
    raw.into_iter()
        .map(parse_budget_repr)
        .collect::<std::result::Result<_, _>>()
        .map_err(serde::de::Error::custom)
}

/// An instance invariant that does not hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoBuyers,
    NoDatasets,
    RowCount {
        rows: usize,
        budgets: usize,
    },
    RowLength {
        buyer: usize,
        len: usize,
        expected: usize,
    },
    NegativeValue {
        buyer: usize,
        dataset: usize,
    },
    NonFiniteValue {
        buyer: usize,
        dataset: usize,
    },
    NegativeBudget {
        buyer: usize,
    },
    NanBudget {
        buyer: usize,
    },
    NoPositiveBudget,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBuyers => write!(f, "no buyers"),
            Violation::NoDatasets => write!(f, "no datasets"),
            Violation::RowCount { rows, budgets } => write!(
                f,
                "dimension mismatch: {rows} value rows for {budgets} budgets"
            ),
            Violation::RowLength { buyer, len, expected } => write!(
                f,
                "dimension mismatch: buyer {buyer} has {len} values, expected {expected}"
            ),
            Violation::NegativeValue { buyer, dataset } => {
                write!(f, "negative value at ({buyer}, {dataset})")
            }
            Violation::NonFiniteValue { buyer, dataset } => {
                write!(f, "non-finite value at ({buyer}, {dataset})")
            }
            Violation::NegativeBudget { buyer } => write!(f, "negative budget for buyer {buyer}"),
            Violation::NanBudget { buyer } => write!(f, "NaN budget for buyer {buyer}"),
            Violation::NoPositiveBudget => write!(f, "no positive budget"),
        }
    }
}

/// Unvalidated instance data, exactly as it appears in an instance file.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
pub struct RawInstance {
    #[serde(deserialize_with = "deserialize_budgets")]
    pub budgets: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Checks every instance invariant and returns the ones that fail.
pub fn validate_instance(raw: &RawInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    if raw.budgets.is_empty() {
        out.push(Violation::NoBuyers);
    }
    let m = raw.values.first().map_or(0, Vec::len);
    if m == 0 {
        out.push(Violation::NoDatasets);
    }
    if raw.values.len() != raw.budgets.len() {
        out.push(Violation::RowCount {
            rows: raw.values.len(),
            budgets: raw.budgets.len(),
        });
    }
    for (i, row) in raw.values.iter().enumerate() {
        if row.len() != m {
            out.push(Violation::RowLength {
                buyer: i,
                len: row.len(),
                expected: m,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFiniteValue { buyer: i, dataset: j });
            } else if v < 0.0 {
                out.push(Violation::NegativeValue { buyer: i, dataset: j });
            }
        }
    }
    for (i, &b) in raw.budgets.iter().enumerate() {
        if b.is_nan() {
            out.push(Violation::NanBudget { buyer: i });
        } else if b < 0.0 {
            out.push(Violation::NegativeBudget { buyer: i });
        }
    }
    if !raw.budgets.is_empty() && !raw.budgets.iter().any(|&b| b > 0.0) {
        out.push(Violation::NoPositiveBudget);
    }
    out
}

/// A validated market: `n` buyers with budgets and an `n × m` value matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    budgets: Vec<Budget>,
    values: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(budgets: Vec<Budget>, values: Vec<Vec<f64>>) -> Result<Self> {
        let raw = RawInstance {
            budgets: budgets.iter().map(|b| b.value()).collect(),
            values,
        };
        Instance::try_from(raw)
    }

    pub fn n(&self) -> usize {
        self.budgets.len()
    }

    pub fn m(&self) -> usize {
        self.values[0].len()
    }

    pub fn budgets(&self) -> &[Budget] {
        &self.budgets
    }

    pub fn budget(&self, buyer: usize) -> Budget {
        self.budgets[buyer]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, buyer: usize, dataset: usize) -> f64 {
        self.values[buyer][dataset]
    }

    /// Value column of one dataset, in buyer order.
    pub fn column(&self, dataset: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |row| row[dataset])
    }

    /// Distinct values of a dataset column, ascending.
    pub fn distinct_values(&self, dataset: usize) -> Vec<f64> {
        let mut col: Vec<f64> = self.column(dataset).collect();
        col.sort_by(f64::total_cmp);
        col.dedup();
        col
    }

    pub fn check_buyer(&self, buyer: usize) -> Result<()> {
        if buyer < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                kind: "buyer",
                index: buyer,
                count: self.n(),
            })
        }
    }

    pub fn check_prices(&self, p: &PriceVector) -> Result<()> {
        if p.len() == self.m() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{} prices for {} datasets",
                p.len(),
                self.m()
            )))
        }
    }

    pub fn check_shards(&self, s: &ShardSet) -> Result<()> {
        if s.len() == self.m() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{} shard curves for {} datasets",
                s.len(),
                self.m()
            )))
        }
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            budgets: self.budgets.iter().map(|b| b.value()).collect(),
            values: self.values.clone(),
        }
    }
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        let violations = validate_instance(&raw);
        if !violations.is_empty() {
            return Err(Error::InvalidInstance(violations));
        }
        Ok(Instance {
            budgets: raw.budgets.into_iter().map(Budget).collect(),
            values: raw.values,
        })
    }
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            budgets: &'a [Budget],
            values: &'a [Vec<f64>],
        }
        Wire {
            budgets: &self.budgets,
            values: &self.values,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawInstance::deserialize(d)?;
        Instance::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// One non-negative price per dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriceVectorRepr")]
pub struct PriceVector {
    prices: Vec<f64>,
}

#[derive(Deserialize)]
struct PriceVectorRepr {
    prices: Vec<f64>,
}

impl TryFrom<PriceVectorRepr> for PriceVector {
    type Error = Error;

    fn try_from(r: PriceVectorRepr) -> Result<Self> {
        PriceVector::new(r.prices)
    }
}

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if let Some((j, p)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::invalid(
                "price vector",
                format!("price {p} of dataset {j} is not finite and non-negative"),
            ));
        }
        Ok(PriceVector { prices })
    }

    pub fn zeros(m: usize) -> Self {
        PriceVector { prices: vec![0.0; m] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.prices[j]
    }
}

/// A contiguous fraction of a dataset sold at one per-unit price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shard {
    pub size: f64,
    pub slope: f64,
}

/// Piecewise-linear convex pricing of one dataset as shards of increasing
/// slope whose sizes sum to one.
///
/// Construction canonicalizes: empty shards are dropped and adjacent shards
/// whose slopes agree within [`TOL`] are merged, so slopes are strictly
/// increasing afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Shard>", into = "Vec<Shard>")]
pub struct ShardCurve {
    shards: Vec<Shard>,
}

impl ShardCurve {
    pub fn new(shards: Vec<Shard>) -> Result<Self> {
        let mut total = 0.0;
        for (t, s) in shards.iter().enumerate() {
            if !s.size.is_finite() || s.size < 0.0 || s.size > 1.0 + TOL {
                return Err(Error::invalid(
                    "shard curve",
                    format!("shard {t} has size {} outside [0, 1]", s.size),
                ));
            }
            if !s.slope.is_finite() || s.slope < 0.0 {
                return Err(Error::invalid(
                    "shard curve",
                    format!("shard {t} has slope {} (must be finite and non-negative)", s.slope),
                ));
            }
            total += s.size;
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::invalid(
                "shard curve",
                format!("shard sizes sum to {total}, not 1"),
            ));
        }

        let mut canon: Vec<Shard> = Vec::with_capacity(shards.len());
        for s in shards.into_iter().filter(|s| s.size > MIN_SHARD_SIZE) {
            match canon.last_mut() {
                Some(last) if s.slope < last.slope - TOL => {
                    return Err(Error::invalid(
                        "shard curve",
                        format!("slope {} follows larger slope {} (not convex)", s.slope, last.slope),
                    ));
                }
                Some(last) if s.slope <= last.slope + TOL => last.size += s.size,
                _ => canon.push(s),
            }
        }
        if canon.is_empty() {
            return Err(Error::invalid("shard curve", "no shard with positive size"));
        }
        Ok(ShardCurve { shards: canon })
    }

    /// Linear pricing at `slope` per unit.
    pub fn linear(slope: f64) -> Result<Self> {
        ShardCurve::new(vec![Shard { size: 1.0, slope }])
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    pub fn len(&self) -> usize {
        self.shards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.is_empty()
    }

    /// Price of the first `x` fraction of the dataset.
    pub fn price_at(&self, x: f64) -> f64 {
        let mut rest = x.clamp(0.0, 1.0);
        let mut price = 0.0;
        for s in &self.shards {
            let take = rest.min(s.size);
            price += take * s.slope;
            rest -= take;
            if rest <= 0.0 {
                break;
            }
        }
        price
    }

    /// Shard end points `(x, price(x))`, starting at `(0, 0)`.
    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        let mut pts = vec![(0.0, 0.0)];
        let (mut x, mut y) = (0.0, 0.0);
        for s in &self.shards {
            x += s.size;
            y += s.size * s.slope;
            pts.push((x, y));
        }
        pts
    }
}

impl TryFrom<Vec<Shard>> for ShardCurve {
    type Error = Error;

    fn try_from(shards: Vec<Shard>) -> Result<Self> {
        ShardCurve::new(shards)
    }
}

impl From<ShardCurve> for Vec<Shard> {
    fn from(c: ShardCurve) -> Self {
        c.shards
    }
}

/// One shard curve per dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardSet {
    pub curves: Vec<ShardCurve>,
}

impl ShardSet {
    pub fn new(curves: Vec<ShardCurve>) -> Self {
        ShardSet { curves }
    }

    /// Linear prices as single-shard curves.
    pub fn from_prices(p: &PriceVector) -> Self {
        let curves = p
            .as_slice()
            .iter()
            .map(|&slope| ShardCurve {
                shards: vec![Shard { size: 1.0, slope }],
            })
            .collect();
        ShardSet { curves }
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn shard_count(&self) -> usize {
        self.curves.iter().map(ShardCurve::len).sum()
    }
}

/// Assignment of each dataset either to the buyer whose value becomes its
/// price, or to nobody (price zero).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    assignment: Vec<Option<usize>>,
}

impl Partition {
    pub fn new(assignment: Vec<Option<usize>>, n: usize) -> Result<Self> {
        if let Some(&Some(i)) = assignment.iter().find(|a| matches!(a, Some(i) if *i >= n)) {
            return Err(Error::IndexOutOfRange {
                kind: "buyer",
                index: i,
                count: n,
            });
        }
        Ok(Partition { assignment })
    }

    pub fn unassigned(m: usize) -> Self {
        Partition {
            assignment: vec![None; m],
        }
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn get(&self, j: usize) -> Option<usize> {
        self.assignment[j]
    }

    pub fn set(&mut self, j: usize, buyer: Option<usize>) {
        self.assignment[j] = buyer;
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// `p_j = v_{i,j}` for datasets assigned to buyer `i`, zero otherwise.
    pub fn prices(&self, inst: &Instance) -> PriceVector {
        let prices = self
            .assignment
            .iter()
            .enumerate()
            .map(|(j, a)| a.map_or(0.0, |i| inst.value(i, j)))
            .collect();
        PriceVector { prices }
    }

    /// Partition inducing `p`: each dataset goes to the lowest-index buyer whose
    /// value equals its price; zero or off-grid prices map to no buyer.
    pub fn from_prices(inst: &Instance, p: &PriceVector) -> Self {
        let assignment = (0..inst.m())
            .map(|j| {
                let pj = p.get(j);
                if pj <= 0.0 {
                    return None;
                }
                (0..inst.n()).find(|&i| inst.value(i, j) == pj)
            })
            .collect();
        Partition { assignment }
    }
}

/// Fractions of each dataset (or item) a buyer holds, and what she pays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub fractions: Vec<f64>,
    pub payment: f64,
}

impl Bundle {
    pub fn empty(m: usize) -> Self {
        Bundle {
            fractions: vec![0.0; m],
            payment: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
    pub total_revenue: f64,
}

impl Allocation {
    pub fn from_bundles(bundles: Vec<Bundle>) -> Self {
        let total_revenue = bundles.iter().map(|b| b.payment).sum();
        Allocation {
            bundles,
            total_revenue,
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text)
}

/// Parses JSON, surfacing instance validation failures as
/// [`Error::InvalidInstance`] rather than a parse error.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = to_json_string(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON. Floats use the shortest representation that parses back to
/// the identical `f64`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text)
}

/// Parses instance JSON; malformed text is a parse error, well-formed text
/// breaking an invariant is [`Error::InvalidInstance`].
pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance = from_json_str(text)?;
    Instance::try_from(raw)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, inst)
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceVector> {
    read_json(path)
}

pub fn load_shards(path: impl AsRef<Path>) -> Result<ShardSet> {
    read_json(path)
}
