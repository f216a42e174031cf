//! `dmp`: command-line front end for data-market pricing.
//!
//! Every subcommand prints one JSON document on standard output. Exit status
//! is 0 on success, 1 when an input fails validation (or a check does not
//! hold), and 2 on a usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use dmp_core::clearing::{clearabilize, clearing_allocation, is_clearable_at, item_revenues, shards_to_items, ItemMarket};
use dmp_core::demand::optimal_demand;
use dmp_core::fixtures;
use dmp_core::gaussian::{simulate_posterior_mse, GaussianTask};
use dmp_core::linear_opt::{self, ContinuousGreedyParams, DEFAULT_GRID_CAP};
use dmp_core::model::{load_instance, load_prices, load_shards, save_instance, to_json_string, write_json};
use dmp_core::plc_opt::{extract_allocation, solve_plc};
use dmp_core::revenue::{sample_extension_submodularity, sample_n_submodularity};
use dmp_core::{substream, Error, Instance};

#[derive(Parser)]
#[command(name = "dmp", version, about = "Revenue-maximizing pricing for non-rivalrous data markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal separable piecewise-linear convex pricing.
    SolvePlc {
        #[arg(long)]
        instance: PathBuf,
        /// Also write the solution (curves and revenues) to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include every buyer's optimal bundle.
        #[arg(long)]
        allocate: bool,
    },
    /// Exact or approximate optimal linear pricing.
    SolveLinear(SolveLinear),
    /// One buyer's optimal bundle under given prices.
    Demand {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        pricing: Pricing,
        #[arg(long)]
        buyer: usize,
    },
    /// Lower prices until the market clears, without losing revenue.
    Clear {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        pricing: Pricing,
    },
    /// Generate a fixture instance.
    Gen(Gen),
    /// Sample a structural property, or run the non-extendability check.
    Check {
        #[arg(long, value_enum)]
        property: Property,
        /// Instance to sample on (default: a random 4×4 instance from --seed).
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo check of the Gaussian posterior-precision model.
    ValidateGaussian {
        /// Prior precision.
        #[arg(long)]
        tau0: f64,
        /// Prior mean.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu: f64,
        /// Per-dataset signal precisions.
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
        /// Per-dataset record counts.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Pricing {
    /// Linear prices file {"prices": [...]}.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Shard prices file {"curves": [[{"size", "slope"}]]}.
    #[arg(long)]
    shards: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Greedy,
    Rgreedy,
    Cgreedy,
}

#[derive(Args)]
struct SolveLinear {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Dataset order for greedy (default 0,1,…,m−1).
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 32)]
    roundings: usize,
    /// Largest price grid the exact method will enumerate.
    #[arg(long, default_value_t = DEFAULT_GRID_CAP)]
    cap: u128,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Family {
    Nonsub,
    Cese,
    Greedysub,
    Greedytight,
    Lingap,
    Sepgap,
    Vc,
    Random,
}

#[derive(Args)]
struct Gen {
    #[arg(long, value_enum)]
    family: Family,
    /// Where to write the instance (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = fixtures::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    value_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    budget_scale: f64,
    /// Vertex count for the vertex-cover family.
    #[arg(long)]
    vertices: Option<usize>,
    /// Edges as u-v pairs, comma separated (e.g. 0-1,1-2).
    #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
    edges: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Ksubmodular,
    Extension,
    #[value(name = "appendixB", alias = "appendixb")]
    AppendixB,
}

fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (u, v) = s.split_once('-').ok_or_else(|| format!("edge {s:?} is not of the form u-v"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("edge {s:?}: {e}"));
    Ok((parse(u)?, parse(v)?))
}

/// A run that completed but whose outcome is a failed validation.
struct Failed(Value);

type Outcome = Result<Result<Value, Failed>, Error>;

fn ok<T: Serialize>(v: T) -> Outcome {
    Ok(Ok(serde_json::to_value(v).expect("outputs serialize")))
}

fn verdict(pass: bool, v: Value) -> Outcome {
    Ok(if pass { Ok(v) } else { Err(Failed(v)) })
}

fn solve_linear(a: SolveLinear) -> Outcome {
    let inst = load_instance(&a.instance)?;
    let sol = match a.method {
        Method::Exact => linear_opt::exact_bruteforce_capped(&inst, a.cap)?,
        Method::Greedy => {
            let order = a.order.unwrap_or_else(|| (0..inst.m()).collect());
            linear_opt::greedy(&inst, &order)?
        }
        Method::Rgreedy => linear_opt::randomized_greedy(&inst, a.seed),
        Method::Cgreedy => linear_opt::continuous_greedy(
            &inst,
            ContinuousGreedyParams {
                steps: a.steps,
                samples: a.samples,
                roundings: a.roundings,
                seed: a.seed,
            },
        )?,
    };
    ok(sol)
}

fn load_market(inst: &Instance, pricing: &Pricing) -> Result<ItemMarket, Error> {
    match (&pricing.prices, &pricing.shards) {
        (Some(p), _) => ItemMarket::from_prices(inst, &load_prices(p)?),
        (None, Some(s)) => shards_to_items(inst, &load_shards(s)?),
        (None, None) => unreachable!("clap requires one pricing file"),
    }
}

fn clear(instance: &Path, pricing: &Pricing) -> Outcome {
    let inst = load_instance(instance)?;
    let mkt = load_market(&inst, pricing)?;
    let before = item_revenues(&mkt, &mkt.prices);
    let c = clearabilize(&mkt);
    let after = item_revenues(&mkt, &c.prices);
    let alloc = clearing_allocation(&mkt, &c.prices)?;
    ok(json!({
        "items": mkt.num_items(),
        "prices_before": mkt.prices,
        "prices_after": c.prices,
        "clearable_before": is_clearable_at(&mkt, &mkt.prices),
        "revenue_before": before,
        "revenue_after": after,
        "total_before": before.iter().sum::<f64>(),
        "total_after": after.iter().sum::<f64>(),
        "iterations": c.iterations,
        "allocation": alloc,
    }))
}

fn demand(instance: &Path, pricing: &Pricing, buyer: usize) -> Outcome {
    let inst = load_instance(instance)?;
    let shards = match (&pricing.prices, &pricing.shards) {
        (Some(p), _) => {
            let p = load_prices(p)?;
            inst.check_prices(&p)?;
            dmp_core::ShardSet::from_prices(&p)
        }
        (None, Some(s)) => load_shards(s)?,
        (None, None) => unreachable!("clap requires one pricing file"),
    };
    let b = optimal_demand(&inst, buyer, &shards)?;
    ok(json!({ "buyer": buyer, "fractions": b.fractions, "payment": b.payment }))
}

fn gen(g: Gen) -> Outcome {
    let inst = match g.family {
        Family::Nonsub => fixtures::gen_nonsub(g.eps)?,
        Family::Cese => fixtures::gen_ce_se(g.n)?,
        Family::Greedysub => fixtures::gen_greedy_suboptimal(),
        Family::Greedytight => fixtures::gen_greedy_tight(g.n, g.eps)?,
        Family::Lingap => fixtures::gen_lingap(g.n, g.eps)?,
        Family::Sepgap => fixtures::gen_sepgap(g.m, g.k)?,
        Family::Vc => {
            let v = g
                .vertices
                .ok_or_else(|| Error::Precondition("--vertices is required for the vc family".into()))?;
            fixtures::gen_vertex_cover(v, &g.edges, g.eps)?
        }
        Family::Random => fixtures::gen_random(g.n, g.m, g.seed, g.value_scale, g.budget_scale)?,
    };
    match g.out {
        Some(path) => {
            save_instance(&inst, &path)?;
            ok(json!({ "family": g.family, "n": inst.n(), "m": inst.m(), "out": path }))
        }
        None => ok(&inst),
    }
}

fn check(property: Property, instance: Option<PathBuf>, samples: usize, seed: u64) -> Outcome {
    if let Property::AppendixB = property {
        let infeasible = fixtures::appendix_b_check()?;
        let relaxed = fixtures::appendix_b_extension_exists(false)?;
        return verdict(
            infeasible && relaxed,
            json!({ "extension_infeasible": infeasible, "relaxed_feasible": relaxed }),
        );
    }
    let inst = match instance {
        Some(path) => load_instance(path)?,
        None => fixtures::gen_random(4, 4, seed, 1.0, 1.0)?,
    };
    let mut rng = substream(seed, 1);
    let report = match property {
        Property::Ksubmodular => sample_n_submodularity(&inst, samples, &mut rng),
        Property::Extension => sample_extension_submodularity(&inst, samples, &mut rng),
        Property::AppendixB => unreachable!(),
    };
    let holds = report.holds();
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["holds"] = json!(holds);
    verdict(holds, v)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::SolvePlc {
            instance,
            out,
            allocate,
        } => {
            let inst = load_instance(&instance)?;
            let sol = solve_plc(&inst)?;
            if let Some(path) = out {
                write_json(path, &sol)?;
            }
            let mut v = serde_json::to_value(&sol).expect("solution serializes");
            if allocate {
                v["allocation"] = serde_json::to_value(extract_allocation(&inst, &sol.shards)?).expect("allocation serializes");
            }
            ok(v)
        }
        Command::SolveLinear(a) => solve_linear(a),
        Command::Demand {
            instance,
            pricing,
            buyer,
        } => demand(&instance, &pricing, buyer),
        Command::Clear { instance, pricing } => clear(&instance, &pricing),
        Command::Gen(g) => gen(g),
        Command::Check {
            property,
            instance,
            samples,
            seed,
        } => check(property, instance, samples, seed),
        Command::ValidateGaussian {
            tau0,
            mu,
            tau,
            counts,
            trials,
            seed,
        } => {
            let task = GaussianTask::new(tau0, mu, tau, counts)?;
            let r = simulate_posterior_mse(&task, trials, seed)?;
            let gain = dmp_core::gaussian::theoretical_gain(&task);
            let within = r.z_score.abs() <= 5.0;
            let mut v = serde_json::to_value(&r).expect("report serializes");
            v["theoretical_gain"] = json!(gain);
            v["within_5_se"] = json!(within);
            verdict(within, v)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("DMP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("DMP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn print(v: &Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{}", to_json_string(v).expect("json values serialize"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(Ok(v)) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Ok(Err(Failed(v))) => {
            print(&v);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
