//! Revenue maximization over linear price vectors.
//!
//! Some optimal price vector prices every dataset at one of its buyers'
//! values, so the search space is the finite grid of column values. The
//! exact solver enumerates it; the approximate solvers work on the
//! equivalent domain of dataset partitions, where revenue is monotone and
//! n-submodular.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Instance, Partition, PriceVector};
use crate::revenue::{copy_weight, linear_revenue, partition_revenue, revenue_at};
use crate::substream;

/// Largest grid `exact_bruteforce` enumerates unless told otherwise.
pub const DEFAULT_GRID_CAP: u128 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "rgreedy")]
    RandomizedGreedy,
    #[serde(rename = "cgreedy")]
    ContinuousGreedy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Grid points, greedy rounds, or continuous-greedy steps.
    pub iterations: u64,
    /// Revenue evaluations or random samples drawn.
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearSolution {
    #[serde(serialize_with = "prices_as_array")]
    pub prices: PriceVector,
    #[serde(rename = "assignment")]
    pub partition: Partition,
    pub revenue: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

fn prices_as_array<S: Serializer>(p: &PriceVector, s: S) -> Result<S::Ok, S::Error> {
    p.as_slice().serialize(s)
}

impl LinearSolution {
    fn new(inst: &Instance, prices: Vec<f64>, method: Method, diagnostics: Diagnostics) -> Self {
        let prices = PriceVector::new(prices).expect("grid prices are valid");
        LinearSolution {
            partition: Partition::from_prices(inst, &prices),
            revenue: linear_revenue(inst, &prices),
            prices,
            method,
            diagnostics,
        }
    }
}

/// Candidate prices per dataset: distinct positive column values, ascending,
/// or just zero for an all-zero column.
fn price_grid(inst: &Instance) -> Vec<Vec<f64>> {
    (0..inst.m())
        .map(|j| {
            let vals: Vec<f64> = inst.distinct_values(j).into_iter().filter(|&v| v > 0.0).collect();
            if vals.is_empty() {
                vec![0.0]
            } else {
                vals
            }
        })
        .collect()
}

fn grid_size(grid: &[Vec<f64>]) -> u128 {
    grid.iter()
        .fold(1u128, |acc, g| acc.saturating_mul(g.len() as u128))
}

/// Writes grid point `k` into `out`; dataset 0 is the most significant digit,
/// so increasing `k` is lexicographic order on index tuples.
fn decode(grid: &[Vec<f64>], mut k: u64, out: &mut [f64]) {
    for (g, p) in grid.iter().zip(out.iter_mut()).rev() {
        let base = g.len() as u64;
        *p = g[(k % base) as usize];
        k /= base;
    }
}

/// [`exact_bruteforce_capped`] with [`DEFAULT_GRID_CAP`].
pub fn exact_bruteforce(inst: &Instance) -> Result<LinearSolution> {
    exact_bruteforce_capped(inst, DEFAULT_GRID_CAP)
}

/// Exhaustive search over the value grid. Among maximizers the
/// lexicographically smallest index tuple wins.
pub fn exact_bruteforce_capped(inst: &Instance, cap: u128) -> Result<LinearSolution> {
    let grid = price_grid(inst);
    let size = grid_size(&grid);
    if size > cap {
        return Err(Error::GridCapExceeded { size, cap });
    }
    let size = size as u64;
    let m = inst.m();
    let eval = |buf: &mut Vec<f64>, k: u64| {
        decode(&grid, k, buf);
        revenue_at(inst, buf)
    };

    let best = (0..size)
        .into_par_iter()
        .map_init(|| vec![0.0; m], |buf, k| eval(buf, k))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    // Revenues are recomputed bit-identically, so the first index reaching
    // the maximum is well defined.
    let k = (0..size)
        .into_par_iter()
        .map_init(|| vec![0.0; m], |buf, k| (k, eval(buf, k)))
        .find_first(|&(_, r)| r >= best)
        .map(|(k, _)| k)
        .expect("grid is non-empty");

    let mut prices = vec![0.0; m];
    decode(&grid, k, &mut prices);
    let diag = Diagnostics {
        iterations: size,
        samples: 2 * size,
    };
    Ok(LinearSolution::new(inst, prices, Method::Exact, diag))
}

fn check_order(order: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    for &j in order {
        if j >= m || std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid("dataset order", format!("{order:?} is not a permutation of 0..{m}")));
        }
    }
    if order.len() != m {
        return Err(Error::invalid("dataset order", format!("{order:?} is not a permutation of 0..{m}")));
    }
    Ok(())
}

/// Marginal revenue of each candidate price for dataset `j`, others fixed.
fn marginals(inst: &Instance, prices: &mut [f64], j: usize, candidates: &[f64]) -> Vec<f64> {
    let base = revenue_at(inst, prices);
    let out = candidates
        .iter()
        .map(|&c| {
            prices[j] = c;
            revenue_at(inst, prices) - base
        })
        .collect();
    prices[j] = 0.0;
    out
}

/// Index of the largest entry; earlier entries win ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] + 1e-12 {
            best = k;
        }
    }
    best
}

/// One pass over datasets in `order`, fixing each price to the candidate
/// with the largest marginal revenue (smallest price on ties).
pub fn greedy(inst: &Instance, order: &[usize]) -> Result<LinearSolution> {
    check_order(order, inst.m())?;
    let grid = price_grid(inst);
    let mut prices = vec![0.0; inst.m()];
    let mut evals = 0;
    for &j in order {
        let gains = marginals(inst, &mut prices, j, &grid[j]);
        evals += gains.len() as u64 + 1;
        prices[j] = grid[j][argmax(&gains)];
    }
    let diag = Diagnostics {
        iterations: order.len() as u64,
        samples: evals,
    };
    Ok(LinearSolution::new(inst, prices, Method::Greedy, diag))
}

/// Greedy in dataset order where each price is drawn with probability
/// proportional to its (non-negative) marginal revenue.
pub fn randomized_greedy(inst: &Instance, seed: u64) -> LinearSolution {
    let grid = price_grid(inst);
    let mut rng = substream(seed, 0);
    let mut prices = vec![0.0; inst.m()];
    let mut evals = 0;
    for j in 0..inst.m() {
        let gains = marginals(inst, &mut prices, j, &grid[j]);
        evals += gains.len() as u64 + 1;
        let k = match WeightedIndex::new(gains.iter().map(|g| g.max(0.0))) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => argmax(&gains),
        };
        prices[j] = grid[j][k];
    }
    let diag = Diagnostics {
        iterations: inst.m() as u64,
        samples: evals,
    };
    LinearSolution::new(inst, prices, Method::RandomizedGreedy, diag)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ContinuousGreedyParams {
    pub steps: usize,
    pub samples: usize,
    pub roundings: usize,
    pub seed: u64,
}

impl Default for ContinuousGreedyParams {
    fn default() -> Self {
        ContinuousGreedyParams {
            steps: 50,
            samples: 64,
            roundings: 32,
            seed: 0,
        }
    }
}

/// Per-buyer weights of every copy: `w[j][l][i]` is what copy `l` of dataset
/// `j` adds to buyer `i`'s uncapped spend.
fn copy_weights(inst: &Instance) -> Vec<Vec<Vec<f64>>> {
    (0..inst.m())
        .map(|j| {
            (0..inst.n())
                .map(|l| (0..inst.n()).map(|i| copy_weight(inst, i, j, l)).collect())
                .collect()
        })
        .collect()
}

/// Estimated marginal of every copy at one random set drawn from `y`.
fn sampled_marginals<R: Rng>(
    inst: &Instance,
    w: &[Vec<Vec<f64>>],
    y: &[Vec<f64>],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let (n, m) = (inst.n(), inst.m());
    let member: Vec<Vec<bool>> = y
        .iter()
        .map(|row| row.iter().map(|&p| rng.random::<f64>() < p).collect())
        .collect();
    let mut spend = vec![0.0; n];
    for j in 0..m {
        for l in 0..n {
            if member[j][l] {
                for (s, wi) in spend.iter_mut().zip(&w[j][l]) {
                    *s += wi;
                }
            }
        }
    }
    let budgets = inst.budgets();
    (0..m)
        .map(|j| {
            (0..n)
                .map(|l| {
                    let sign = if member[j][l] { -1.0 } else { 1.0 };
                    spend
                        .iter()
                        .zip(&w[j][l])
                        .zip(budgets)
                        .map(|((&a, &wi), b)| {
                            let other = a + sign * wi;
                            let (with, without) = if member[j][l] { (a, other) } else { (other, a) };
                            b.cap(with) - b.cap(without)
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Continuous greedy on the multilinear extension of the copy-set revenue
/// over the partition matroid (at most one copy per dataset), followed by
/// independent per-dataset rounding; the best of several roundings is kept.
pub fn continuous_greedy(inst: &Instance, params: ContinuousGreedyParams) -> Result<LinearSolution> {
    let ContinuousGreedyParams {
        steps,
        samples,
        roundings,
        seed,
    } = params;
    if steps == 0 || samples == 0 || roundings == 0 {
        return Err(Error::invalid(
            "continuous greedy parameters",
            "steps, samples and roundings must be at least 1",
        ));
    }
    let (n, m) = (inst.n(), inst.m());
    let w = copy_weights(inst);
    let mut y = vec![vec![0.0; n]; m];
    let step = 1.0 / steps as f64;

    for t in 0..steps {
        // All copies are compared on the same sampled sets.
        let per_sample: Vec<Vec<Vec<f64>>> = (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = substream(seed, (t * samples + k) as u64);
                sampled_marginals(inst, &w, &y, &mut rng)
            })
            .collect();
        for j in 0..m {
            let est: Vec<f64> = (0..n)
                .map(|l| per_sample.iter().map(|s| s[j][l]).sum::<f64>() / samples as f64)
                .collect();
            let l = argmax(&est);
            if est[l] > 0.0 {
                y[j][l] += step;
            }
        }
    }

    let base = (steps * samples) as u64;
    let rounded: Vec<(Partition, f64)> = (0..roundings)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, base + r as u64);
            let assignment = y
                .iter()
                .map(|row| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    row.iter().position(|&p| {
                        acc += p;
                        u < acc
                    })
                })
                .collect();
            let part = Partition::new(assignment, n).expect("copy indices are buyers");
            let rev = partition_revenue(inst, &part);
            (part, rev)
        })
        .collect();
    let mut best = 0;
    for (k, (_, rev)) in rounded.iter().enumerate() {
        if *rev > rounded[best].1 {
            best = k;
        }
    }
    let prices = rounded[best].0.prices(inst).as_slice().to_vec();
    let diag = Diagnostics {
        iterations: steps as u64,
        samples: base + roundings as u64,
    };
    Ok(LinearSolution::new(inst, prices, Method::ContinuousGreedy, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Budget;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(budgets: &[f64], values: &[&[f64]]) -> Instance {
        let budgets = budgets.iter().map(|&b| Budget::finite(b).unwrap()).collect();
        Instance::new(budgets, values.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn nonsub(eps: f64) -> Instance {
        inst(&[1.0, 1.0], &[&[1.0, 1.0], &[eps, 2.0]])
    }

    fn greedy_suboptimal() -> Instance {
        inst(&[1.0, 1.0], &[&[0.2, 0.2, 0.0], &[0.6, 0.6, 0.5]])
    }

    fn greedy_tight(n: usize, eps: f64) -> Instance {
        let mut budgets = vec![1.0 + eps; n];
        budgets.push(n as f64);
        let mut values = vec![vec![1.0 + eps, 1.0]; n];
        values.push(vec![n as f64, 1.0 + eps]);
        let budgets = budgets.into_iter().map(|b| Budget::finite(b).unwrap()).collect();
        Instance::new(budgets, values).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Instance {
        let budgets = (0..n).map(|_| Budget::finite(rng.random_range(0.1..2.0)).unwrap()).collect();
        let values = (0..n)
            .map(|_| (0..m).map(|_| (rng.random_range(0..10) as f64) / 10.0).collect())
            .collect();
        Instance::new(budgets, values).unwrap()
    }

    /// Independent exhaustive search: recursion with the last dataset varying
    /// slowest, grid including zero.
    fn oracle_best(inst: &Instance) -> f64 {
        fn go(inst: &Instance, j: usize, p: &mut Vec<f64>) -> f64 {
            if j == usize::MAX {
                return linear_revenue(inst, &PriceVector::new(p.clone()).unwrap());
            }
            let mut best: f64 = 0.0;
            let mut col: Vec<f64> = (0..inst.n()).map(|i| inst.value(i, j)).collect();
            col.push(0.0);
            for c in col {
                p[j] = c;
                best = best.max(go(inst, j.checked_sub(1).unwrap_or(usize::MAX), p));
            }
            best
        }
        let mut p = vec![0.0; inst.m()];
        go(inst, inst.m() - 1, &mut p)
    }

    #[test]
    fn exact_two_by_two() {
        let s = exact_bruteforce(&nonsub(0.001)).unwrap();
        assert_eq!(s.revenue, 2.0);
        assert_eq!(s.prices.as_slice(), &[0.001, 1.0]);
        assert_eq!(s.method, Method::Exact);
    }

    #[test]
    fn exact_greedy_suboptimal() {
        let s = exact_bruteforce(&greedy_suboptimal()).unwrap();
        assert!((s.revenue - 1.3).abs() < 1e-9);
        assert_eq!(s.prices.as_slice(), &[0.2, 0.2, 0.5]);
        assert_eq!(s.partition.assignment(), &[Some(0), Some(0), Some(1)]);
    }

    #[test]
    fn exact_greedy_tight() {
        let s = exact_bruteforce(&greedy_tight(4, 0.01)).unwrap();
        assert!((s.revenue - 8.0).abs() < 1e-9);
        assert_eq!(s.prices.as_slice(), &[4.0, 1.0]);
    }

    #[test]
    fn grid_cap_is_enforced() {
        let i = greedy_suboptimal();
        assert!(matches!(
            exact_bruteforce_capped(&i, 3),
            Err(Error::GridCapExceeded { size: 4, cap: 3 })
        ));
        assert!(exact_bruteforce_capped(&i, 4).is_ok());
    }

    #[test]
    fn greedy_suboptimal_over_all_orders() {
        let i = greedy_suboptimal();
        for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let s = greedy(&i, &order).unwrap();
            assert!(s.revenue <= 1.2 + 1e-9, "{order:?} gave {}", s.revenue);
        }
    }

    #[test]
    fn greedy_tight_trace() {
        // Dataset 0 goes to 1+ε (marginal (n+1)(1+ε) beats n). Dataset 1 then
        // also goes to 1+ε; the large buyer still has budget for both, so the
        // total is (n+2)(1+ε).
        let (n, eps) = (4, 0.01);
        let s = greedy(&greedy_tight(n, eps), &[0, 1]).unwrap();
        assert_eq!(s.prices.as_slice(), &[1.0 + eps, 1.0 + eps]);
        assert!((s.revenue - (n as f64 + 2.0) * (1.0 + eps)).abs() < 1e-9);
    }

    #[test]
    fn greedy_rejects_bad_orders() {
        let i = greedy_suboptimal();
        assert!(greedy(&i, &[0, 1]).is_err());
        assert!(greedy(&i, &[0, 1, 1]).is_err());
        assert!(greedy(&i, &[0, 1, 3]).is_err());
    }

    #[test]
    fn single_cell() {
        let i = inst(&[0.5], &[&[0.8]]);
        let g = greedy(&i, &[0]).unwrap();
        assert_eq!((g.prices.get(0), g.revenue), (0.8, 0.5));
        for seed in 0..5 {
            assert_eq!(randomized_greedy(&i, seed).prices.get(0), 0.8);
        }
        let params = ContinuousGreedyParams {
            steps: 1,
            samples: 1,
            roundings: 1,
            seed: 3,
        };
        assert_eq!(continuous_greedy(&i, params).unwrap().prices.get(0), 0.8);
    }

    #[test]
    fn randomized_greedy_mean_on_suboptimal_instance() {
        let i = greedy_suboptimal();
        let revs: Vec<f64> = (0..200).map(|s| randomized_greedy(&i, s).revenue).collect();
        let mean = revs.iter().sum::<f64>() / revs.len() as f64;
        assert!((1.0..=1.3).contains(&mean), "mean {mean}");
        assert!(revs.iter().all(|&r| r >= 0.65 - 1e-9));
    }

    #[test]
    fn continuous_greedy_two_by_two() {
        let s = continuous_greedy(&nonsub(0.001), ContinuousGreedyParams::default()).unwrap();
        assert!(s.revenue >= (1.0 - (-1.0f64).exp()) * 2.0 - 0.1);
    }

    #[test]
    fn continuous_greedy_is_reproducible() {
        let i = greedy_suboptimal();
        let p = ContinuousGreedyParams {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(continuous_greedy(&i, p).unwrap(), continuous_greedy(&i, p).unwrap());
        assert!(continuous_greedy(&i, ContinuousGreedyParams { steps: 0, ..p }).is_err());
    }

    #[test]
    fn methods_never_beat_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=3));
            let i = random_instance(&mut rng, n, m);
            let exact = exact_bruteforce(&i).unwrap();
            assert!((exact.revenue - oracle_best(&i)).abs() < 1e-12);
            assert!((exact.revenue - linear_revenue(&i, &exact.prices)).abs() < 1e-9);
            let order: Vec<usize> = (0..m).collect();
            let g = greedy(&i, &order).unwrap();
            let r = randomized_greedy(&i, 1);
            let c = continuous_greedy(&i, ContinuousGreedyParams { steps: 10, samples: 8, roundings: 8, seed: 2 }).unwrap();
            for s in [&g, &r, &c] {
                assert!(s.revenue <= exact.revenue + 1e-9);
            }
            assert!(g.revenue >= 0.5 * exact.revenue - 1e-9);
            assert!(r.revenue >= 0.5 * exact.revenue - 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_matches_oracle(
            budgets in prop::collection::vec(0.05f64..2.0, 1..=3),
            cells in prop::collection::vec(0u8..6, 9),
            m in 1usize..=3,
        ) {
            let n = budgets.len();
            let values: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..m).map(|j| cells[i * 3 + j] as f64 * 0.25).collect())
                .collect();
            let budgets = budgets.into_iter().map(|b| Budget::finite(b).unwrap()).collect();
            let i = Instance::new(budgets, values).unwrap();
            let exact = exact_bruteforce(&i).unwrap();
            prop_assert!((exact.revenue - oracle_best(&i)).abs() < 1e-12);
        }
    }
}
