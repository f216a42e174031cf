//! Revenue-maximizing pricing for non-rivalrous data markets.
//!
//! Buyers have linear valuations over fractions of datasets, quasi-linear
//! utility and a budget. Because data is non-rivalrous, every buyer can be
//! sold every dataset, and the revenue a seller collects is a per-buyer sum:
//!
//! - [`revenue`] evaluates revenue in closed form for linear prices, shard
//!   (piecewise-linear convex) prices, dataset partitions, and the submodular
//!   extension over buyer copies of each dataset.
//! - [`demand`] computes buyer demand under shard prices and the univariate
//!   convexification / piecewise-linearization transforms.
//! - [`plc_opt`] builds and solves the sharding linear program that yields
//!   optimal separable convex pricing, on top of the dense simplex in [`lp`].
//! - [`linear_opt`] maximizes revenue over linear price vectors, exactly by
//!   enumeration or approximately via greedy and continuous greedy.
//! - [`clearing`] turns any price vector into a clearable one without revenue
//!   loss and emits a clearing allocation.
//! - [`gaussian`] is a Monte Carlo check of the Gaussian posterior-precision
//!   utility model.
//! - [`fixtures`] generates the worked instances used in tests and the CLI.

pub mod clearing;
pub mod demand;
pub mod error;
pub mod fixtures;
pub mod gaussian;
pub mod linear_opt;
pub mod lp;
pub mod model;
pub mod plc_opt;
pub mod revenue;

pub use error::{Error, Result};
pub use model::{
    Allocation, Budget, Bundle, Instance, Partition, PriceVector, Shard, ShardCurve, ShardSet,
};

/// Slack used for every money/fraction equality and threshold comparison.
pub const TOL: f64 = 1e-9;

/// Independent, reproducible random stream `stream` under `seed`.
///
/// Parallel work items draw from their own stream so results do not depend
/// on scheduling.
pub fn substream(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
