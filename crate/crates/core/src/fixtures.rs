//! Worked instances: small markets with known revenues, the vertex-cover
//! reduction, random instances, and the k-submodular non-extendability LP.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lp::{check_feasible, LpProblem, Relation};
use crate::model::{Budget, Instance};
use crate::substream;

/// Default for the "sufficiently small" ε parameters.
pub const DEFAULT_EPS: f64 = 1e-3;

fn finite(budgets: &[f64]) -> Vec<Budget> {
    budgets
        .iter()
        .map(|&b| Budget::finite(b).expect("fixture budgets are valid"))
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", format!("{eps} is not in (0, 1)")))
    }
}

fn at_least(what: &'static str, x: usize, min: usize) -> Result<()> {
    if x >= min {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{x} is below the minimum of {min}")))
    }
}

/// Two buyers, two datasets, on which `r(p)` is not submodular.
pub fn gen_nonsub(eps: f64) -> Result<Instance> {
    check_eps(eps)?;
    Instance::new(finite(&[1.0, 1.0]), vec![vec![1.0, 1.0], vec![eps, 2.0]])
}

/// One dataset; the first buyer has budget and value 2, the other `n − 1`
/// have 1.9.
pub fn gen_ce_se(n: usize) -> Result<Instance> {
    at_least("buyer count", n, 1)?;
    let mut col = vec![2.0];
    col.resize(n, 1.9);
    Instance::new(finite(&col), col.iter().map(|&v| vec![v]).collect())
}

/// Two buyers, three datasets, where deterministic greedy loses under every
/// dataset order (best linear revenue 1.3, greedy at most 1.2).
pub fn gen_greedy_suboptimal() -> Instance {
    Instance::new(
        finite(&[1.0, 1.0]),
        vec![vec![0.2, 0.2, 0.0], vec![0.6, 0.6, 0.5]],
    )
    .expect("fixed instance is valid")
}

/// `n` small buyers (budget `1+ε`, values `(1+ε, 1)`) and one large buyer
/// (budget `n`, values `(n, 1+ε)`).
pub fn gen_greedy_tight(n: usize, eps: f64) -> Result<Instance> {
    at_least("buyer count", n, 1)?;
    check_eps(eps)?;
    let nf = n as f64;
    let mut budgets = vec![1.0 + eps; n];
    budgets.push(nf);
    let mut values = vec![vec![1.0 + eps, 1.0]; n];
    values.push(vec![nf, 1.0 + eps]);
    Instance::new(finite(&budgets), values)
}

/// One dataset; `n − 1` buyers with value `ε` and budget `ε(1−ε)`, and one
/// with value `(n−1)(1−ε)` and budget `nε(1−ε)`.
pub fn gen_lingap(n: usize, eps: f64) -> Result<Instance> {
    at_least("buyer count", n, 2)?;
    check_eps(eps)?;
    let nf = n as f64;
    let mut budgets = vec![eps * (1.0 - eps); n - 1];
    budgets.push(nf * eps * (1.0 - eps));
    let mut values = vec![vec![eps]; n - 1];
    values.push(vec![(nf - 1.0) * (1.0 - eps)]);
    Instance::new(finite(&budgets), values)
}

/// `m` picky buyers (value 1 for their own dataset only) followed by `k`
/// flexible buyers (value `1/m` for everything); all budgets infinite.
pub fn gen_sepgap(m: usize, k: usize) -> Result<Instance> {
    at_least("dataset count", m, 1)?;
    at_least("flexible buyer count", k, 1)?;
    let mut values: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    values.extend((0..k).map(|_| vec![1.0 / m as f64; m]));
    Instance::new(vec![Budget::INFINITE; m + k], values)
}

/// Normal-buyer count and edge-buyer value of the vertex-cover reduction:
/// the smallest `t` with `ε·t ≥ 1.1(|E|+|V|)` and `B = 1.1(1+ε)t`.
pub fn vertex_cover_params(num_vertices: usize, num_edges: usize, eps: f64) -> (usize, f64) {
    let t = (1.1 * (num_edges + num_vertices) as f64 / eps).ceil() as usize;
    (t, 1.1 * (1.0 + eps) * t as f64)
}

/// Market whose optimal linear revenue is `|E|·B + t·(|V| − k)` with `k` the
/// minimum vertex cover size. One dataset per vertex; `t` normal buyers
/// (value 1 everywhere, budget `|V|`) come first, then one buyer per edge
/// (value `B` on both endpoints, 0 elsewhere, budget `B`).
pub fn gen_vertex_cover(num_vertices: usize, edges: &[(usize, usize)], eps: f64) -> Result<Instance> {
    at_least("vertex count", num_vertices, 1)?;
    check_eps(eps)?;
    if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= num_vertices || v >= num_vertices || u == v) {
        return Err(Error::invalid("edge", format!("({u}, {v}) is not an edge on {num_vertices} vertices")));
    }
    let (t, big) = vertex_cover_params(num_vertices, edges.len(), eps);
    let mut budgets = vec![num_vertices as f64; t];
    let mut values = vec![vec![1.0; num_vertices]; t];
    for &(u, v) in edges {
        let mut row = vec![0.0; num_vertices];
        row[u] = big;
        row[v] = big;
        values.push(row);
        budgets.push(big);
    }
    Instance::new(finite(&budgets), values)
}

/// Uniform values in `(0, value_scale]` and budgets in `(0, budget_scale]`.
pub fn gen_random(n: usize, m: usize, seed: u64, value_scale: f64, budget_scale: f64) -> Result<Instance> {
    at_least("buyer count", n, 1)?;
    at_least("dataset count", m, 1)?;
    for (what, s) in [("value scale", value_scale), ("budget scale", budget_scale)] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid(what, format!("{s} is not finite and positive")));
        }
    }
    let mut rng = substream(seed, 0);
    // 1 − U with U uniform on [0, 1) lies in (0, 1].
    let mut draw = |scale: f64| scale * (1.0 - rng.random::<f64>());
    let values = (0..n).map(|_| (0..m).map(|_| draw(value_scale)).collect()).collect();
    let budgets: Vec<f64> = (0..n).map(|_| draw(budget_scale)).collect();
    Instance::new(finite(&budgets), values)
}

/// Ground set of the non-extendability example, as bit positions.
pub const A1: u8 = 1 << 0;
pub const A2: u8 = 1 << 1;
pub const B1: u8 = 1 << 2;
pub const B2: u8 = 1 << 3;

/// Values of the 2-submodular function on the nine sets holding at most one
/// copy of each of `a` and `b`.
pub const APPENDIX_B_VALUES: [(u8, f64); 9] = [
    (0, 0.0),
    (B1, 1.0),
    (B2, 4.0),
    (A1, 1.0),
    (A1 | B1, 1.0),
    (A1 | B2, 4.0),
    (A2, 4.0),
    (A2 | B1, 5.0),
    (A2 | B2, 4.0),
];

/// Feasibility LP for a submodular (and optionally monotone) extension of
/// the fixed values to all 16 subsets; variable `S` is `f̂(S)`.
pub fn appendix_b_lp(monotone: bool) -> LpProblem {
    const SETS: usize = 16;
    let mut p = LpProblem::new(vec![0.0; SETS]);
    let unit = |s: usize| {
        let mut row = vec![0.0; SETS];
        row[s] = 1.0;
        row
    };
    for &(s, v) in &APPENDIX_B_VALUES {
        p.push(unit(s as usize), Relation::Eq, v);
    }
    for s in 0..SETS {
        for e in (0..4).map(|k| 1usize << k).filter(|e| s & e == 0) {
            if monotone {
                let mut row = unit(s);
                row[s | e] -= 1.0;
                p.push(row, Relation::Le, 0.0);
            }
            // f̂(S∪e) − f̂(S) ≥ f̂(T∪e) − f̂(T) for every strict superset T of S
            // avoiding e.
            for t in (0..SETS).filter(|&t| t & s == s && t != s && t & e == 0) {
                let mut row = vec![0.0; SETS];
                row[s | e] += 1.0;
                row[s] -= 1.0;
                row[t | e] -= 1.0;
                row[t] += 1.0;
                p.push(row, Relation::Ge, 0.0);
            }
        }
    }
    p
}

/// Whether the fixed values extend to a submodular function on all subsets,
/// monotone as well when `monotone` is set.
pub fn appendix_b_extension_exists(monotone: bool) -> Result<bool> {
    check_feasible(&appendix_b_lp(monotone))
}

/// True when no monotone submodular extension exists.
pub fn appendix_b_check() -> Result<bool> {
    Ok(!appendix_b_extension_exists(true)?)
}
