//! Command-line front end.
//!
//! Every run is first resolved into a [`Run`], which is embedded in the
//! output (a `# config:` line for CSV, a `config` object for JSON). The
//! `replay` subcommand reads it back and reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::criteria::{self, ClassifyOptions, CookieConfig, CriticalOptions};
use crate::error::{Error, Result};
use crate::rubin::{self, ClockStore, PercolationOptions};
use crate::stats::median;
use crate::tree::{EdgeRef, ModelSpec, TreeModel, Window};
use crate::walk::{self, Crossing, McSearch, RootRule, TrialParams};

pub const SCHEMA_VERSION: u32 = 1;
const HEADER: &str = "# config: ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "cookie-trees",
    version,
    about = "Excited random walks on trees: criteria, simulation and clock percolation",
    after_help = "Cookie strengths are passed as --lambda1 <x> --lambda2 <y> ... (any number, contiguous from 1)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct ModelArgs {
    /// Model as a JSON file path or an inline JSON document.
    #[arg(long)]
    model: String,
    /// Bias after the cookies are used up.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(clap::Args, Debug, Clone)]
struct AnalyticArgs {
    #[arg(long, default_value_t = 1000)]
    nmax: u64,
    /// Limits are proxied on levels [window_start * nmax, nmax].
    #[arg(long, default_value_t = 0.5)]
    window_start: f64,
}

#[derive(clap::Args, Debug, Clone)]
struct OutArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(clap::Args, Debug, Clone)]
struct WalkArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Returns to the root allowed before a trial counts as returned.
    #[arg(long, default_value_t = 1)]
    excursions: u32,
    #[arg(long, value_enum, default_value_t = RootRuleArg::Uniform)]
    root_rule: RootRuleArg,
    #[arg(long, default_value_t = walk::DEFAULT_STEP_CAP)]
    step_cap: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RootRuleArg {
    Uniform,
    Lazy,
}

impl From<RootRuleArg> for RootRule {
    fn from(r: RootRuleArg) -> Self {
        match r {
            RootRuleArg::Uniform => RootRule::Uniform,
            RootRuleArg::Lazy => RootRule::Lazy,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural and criterion quantities of a model.
    Quantities {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        analytic: AnalyticArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recurrence/transience verdict with the deciding rule.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        analytic: AnalyticArgs,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Depth-D escape probability at one parameter point.
    Escape {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        depth: u32,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Escape probabilities over a grid of (lambda1, lambda, D).
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// `start:stop:step` or a comma list; replaces lambda1.
        #[arg(long)]
        lambda1_grid: Option<String>,
        /// `start:stop:step` or a comma list; replaces lambda.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Comma list of depths.
        #[arg(long)]
        depths: String,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Root cluster of the clock percolation.
    Percolate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = rubin::DEFAULT_MAX_EDGES)]
        max_edges: usize,
        #[arg(long, default_value_t = rubin::DEFAULT_EXTENSION_CAP)]
        step_cap: u64,
        /// Leave per-edge records out of the export.
        #[arg(long)]
        no_edges: bool,
        /// Estimate the quasi-independence ratio of two edges `A,B` (dotted
        /// child-index paths) over `--samples` coupled samples instead of
        /// exporting clusters.
        #[arg(long)]
        qi: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Critical lambda for a cookie vector.
    Critical {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        analytic: AnalyticArgs,
        /// Bisection accuracy of the analytic search.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Use the Monte Carlo escape search even when a closed form exists.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = 20)]
        depth: u32,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Monte Carlo search bracket `lo,hi`.
        #[arg(long, default_value = "0.25,0.95")]
        bracket: String,
        #[arg(long, default_value_t = 2e-3)]
        mc_tol: f64,
        /// Crossing rule: `scaling` or an escape level such as `0.01`.
        #[arg(long, default_value = "scaling")]
        crossing: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-run the configuration embedded in an output file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub schema_version: u32,
    pub format: Format,
    #[serde(flatten)]
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Task {
    Quantities(QuantitiesRun),
    Classify(ClassifyRun),
    Escape(SweepRun),
    Sweep(SweepRun),
    Percolate(PercolateRun),
    Critical(CriticalRun),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantitiesRun {
    pub model: ModelSpec,
    pub excitations: Vec<f64>,
    pub lambda: Option<f64>,
    pub n_max: u64,
    pub window_start: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRun {
    pub model: ModelSpec,
    pub excitations: Vec<f64>,
    pub lambda: f64,
    pub n_max: u64,
    pub window_start: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub model: ModelSpec,
    /// Cookie vectors of the grid, in output order.
    pub excitations: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub depths: Vec<u32>,
    pub n_trials: u64,
    pub seed: u64,
    pub excursions: u32,
    pub root_rule: RootRule,
    pub step_cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolateRun {
    pub model: ModelSpec,
    pub lambda1: f64,
    pub lambda: f64,
    pub depth: u32,
    pub samples: u64,
    pub seed: u64,
    pub max_edges: usize,
    pub step_cap: u64,
    pub edges: bool,
    pub qi_pair: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRun {
    pub model: ModelSpec,
    pub excitations: Vec<f64>,
    pub n_max: u64,
    pub window_start: f64,
    pub tol: f64,
    /// Present when the Monte Carlo search is used.
    pub mc: Option<McSearch>,
}

/// Pulls `--lambdaK <x>` / `--lambdaK=<x>` (K >= 1) out of `args`.
fn split_cookie_flags(args: Vec<String>) -> Result<(Vec<String>, Vec<f64>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut found = BTreeMap::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(tail) = a.strip_prefix("--lambda") else {
            rest.push(a);
            continue;
        };
        let (idx, inline) = match tail.split_once('=') {
            Some((i, v)) => (i, Some(v.to_string())),
            None => (tail, None),
        };
        if idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
            rest.push(a);
            continue;
        }
        let k: usize = idx
            .parse()
            .map_err(|_| Error::param(format!("bad flag {a}")))?;
        if k == 0 {
            return Err(Error::param("cookie flags start at --lambda1"));
        }
        let raw = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::param(format!("--lambda{k} needs a value")))?,
        };
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::param(format!("--lambda{k}: `{raw}` is not a number")))?;
        if found.insert(k, v).is_some() {
            return Err(Error::param(format!("--lambda{k} given twice")));
        }
    }
    let m = found.keys().next_back().copied().unwrap_or(0);
    if found.len() != m {
        return Err(Error::param(format!(
            "cookie flags must be contiguous from --lambda1 to --lambda{m}"
        )));
    }
    Ok((rest, found.into_values().collect()))
}

fn load_model(arg: &str) -> Result<ModelSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg)
            .map_err(|e| Error::ModelSpec(format!("cannot read model file `{arg}`: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Error::ModelSpec(e.to_string()))
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse()
            .map_err(|_| Error::param(format!("`{t}` is not a number in grid `{s}`")))
    };
    if let Some((a, rest)) = s.split_once(':') {
        let (b, c) = rest
            .split_once(':')
            .ok_or_else(|| Error::param(format!("grid `{s}` must be start:stop:step")))?;
        let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
        if !(step > 0.0) || stop < start {
            return Err(Error::param(format!("empty or invalid grid `{s}`")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as u64;
        Ok((0..=n)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn parse_depths(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::param(format!("`{t}` is not a depth")))
        })
        .collect()
}

fn need_lambda(l: Option<f64>) -> Result<f64> {
    l.ok_or_else(|| Error::param("--lambda is required"))
}

fn resolve(cmd: Command, cookies: Vec<f64>) -> Result<(Run, Option<PathBuf>)> {
    let run = |format, task| Run {
        schema_version: SCHEMA_VERSION,
        format,
        task,
    };
    let json_only = |o: &OutArgs| -> Result<Format> {
        match o.format {
            None | Some(Format::Json) => Ok(Format::Json),
            Some(Format::Csv) => Err(Error::param("this command only writes json")),
        }
    };
    Ok(match cmd {
        Command::Quantities {
            model,
            analytic,
            out,
        } => (
            run(
                json_only(&out)?,
                Task::Quantities(QuantitiesRun {
                    model: load_model(&model.model)?,
                    excitations: cookies,
                    lambda: model.lambda,
                    n_max: analytic.nmax,
                    window_start: analytic.window_start,
                }),
            ),
            out.out,
        ),
        Command::Classify {
            model,
            analytic,
            tol,
            out,
        } => (
            run(
                json_only(&out)?,
                Task::Classify(ClassifyRun {
                    model: load_model(&model.model)?,
                    excitations: cookies,
                    lambda: need_lambda(model.lambda)?,
                    n_max: analytic.nmax,
                    window_start: analytic.window_start,
                    tol,
                }),
            ),
            out.out,
        ),
        Command::Escape {
            model,
            depth,
            walk,
            out,
        } => (
            run(
                out.format.unwrap_or(Format::Csv),
                Task::Escape(SweepRun {
                    model: load_model(&model.model)?,
                    excitations: vec![cookies],
                    lambdas: vec![need_lambda(model.lambda)?],
                    depths: vec![depth],
                    n_trials: walk.trials,
                    seed: walk.seed,
                    excursions: walk.excursions,
                    root_rule: walk.root_rule.into(),
                    step_cap: walk.step_cap,
                }),
            ),
            out.out,
        ),
        Command::Sweep {
            model,
            lambda1_grid,
            lambda_grid,
            depths,
            walk,
            out,
        } => {
            let excitations = match lambda1_grid {
                None => vec![cookies],
                Some(g) => {
                    if cookies.is_empty() {
                        return Err(Error::param(
                            "--lambda1-grid needs at least --lambda1 to fix M",
                        ));
                    }
                    parse_grid(&g)?
                        .into_iter()
                        .map(|l1| {
                            let mut c = cookies.clone();
                            c[0] = l1;
                            c
                        })
                        .collect()
                }
            };
            let lambdas = match lambda_grid {
                None => vec![need_lambda(model.lambda)?],
                Some(g) => parse_grid(&g)?,
            };
            (
                run(
                    out.format.unwrap_or(Format::Csv),
                    Task::Sweep(SweepRun {
                        model: load_model(&model.model)?,
                        excitations,
                        lambdas,
                        depths: parse_depths(&depths)?,
                        n_trials: walk.trials,
                        seed: walk.seed,
                        excursions: walk.excursions,
                        root_rule: walk.root_rule.into(),
                        step_cap: walk.step_cap,
                    }),
                ),
                out.out,
            )
        }
        Command::Percolate {
            model,
            depth,
            samples,
            seed,
            max_edges,
            step_cap,
            no_edges,
            qi,
            out,
        } => {
            let qi_pair = match qi {
                None => None,
                Some(q) => {
                    let (a, b) = q
                        .split_once(',')
                        .ok_or_else(|| Error::param("--qi expects two edges `A,B`"))?;
                    Some((a.trim().to_string(), b.trim().to_string()))
                }
            };
            let lambda = need_lambda(model.lambda)?;
            let lambda1 = match cookies.as_slice() {
                [] => lambda,
                [l1] => *l1,
                _ => {
                    return Err(Error::unsupported(
                        "percolation is defined for once-excited walks",
                    ))
                }
            };
            (
                run(
                    json_only(&out)?,
                    Task::Percolate(PercolateRun {
                        model: load_model(&model.model)?,
                        lambda1,
                        lambda,
                        depth,
                        samples,
                        seed,
                        max_edges,
                        step_cap,
                        edges: !no_edges,
                        qi_pair,
                    }),
                ),
                out.out,
            )
        }
        Command::Critical {
            model,
            analytic,
            tol,
            mc,
            depth,
            trials,
            seed,
            bracket,
            mc_tol,
            crossing,
            out,
        } => {
            let digging_m2 = cookies.len() >= 2;
            let search = if mc || digging_m2 {
                let b = parse_grid(&bracket)?;
                let [lo, hi] = b[..] else {
                    return Err(Error::param("--bracket must be lo,hi"));
                };
                let crossing = match crossing.as_str() {
                    "scaling" => Crossing::Scaling,
                    t => Crossing::Threshold(t.parse().map_err(|_| {
                        Error::param(format!("--crossing `{t}`: scaling or a number"))
                    })?),
                };
                Some(McSearch {
                    depth,
                    n_trials: trials,
                    bracket: (lo, hi),
                    tol: mc_tol,
                    crossing,
                    seed,
                    ..McSearch::default()
                })
            } else {
                None
            };
            (
                run(
                    json_only(&out)?,
                    Task::Critical(CriticalRun {
                        model: load_model(&model)?,
                        excitations: cookies,
                        n_max: analytic.nmax,
                        window_start: analytic.window_start,
                        tol,
                        mc: search,
                    }),
                ),
                out.out,
            )
        }
        Command::Replay { file, out } => (read_header(&file)?, out),
    })
}

/// Reads the embedded configuration of an output file.
pub fn read_header(path: &std::path::Path) -> Result<Run> {
    let text = std::fs::read_to_string(path)?;
    if let Some(line) = text.lines().next().and_then(|l| l.strip_prefix(HEADER)) {
        return Ok(serde_json::from_str(line)?);
    }
    let doc: Value = serde_json::from_str(&text)?;
    let cfg = doc
        .get("config")
        .ok_or_else(|| Error::param(format!("{} has no embedded config", path.display())))?;
    Ok(serde_json::from_value(cfg.clone())?)
}

/// Finite numbers as JSON numbers, infinities as strings.
fn num(x: f64) -> Value {
    if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        json!(x)
    }
}

fn window(start: f64) -> Result<Window> {
    if !(start > 0.0 && start < 1.0) {
        return Err(Error::param("--window-start must lie in (0, 1)"));
    }
    Ok(Window {
        start_fraction: start,
    })
}

fn quantities(q: &QuantitiesRun) -> Result<Value> {
    let model = TreeModel::from_spec(q.model.clone())?;
    let w = window(q.window_start)?;
    let mut out = serde_json::Map::new();
    let mut unsupported = serde_json::Map::new();
    out.insert("model_id".into(), json!(model.model_id()));
    let mut put = |key: &str, v: Result<Value>| match v {
        Ok(v) => {
            out.insert(key.into(), v);
        }
        Err(e) => {
            unsupported.insert(key.into(), json!(e.to_string()));
        }
    };
    put(
        "growth_rate",
        model
            .growth_rate(q.n_max, w)
            .map(|g| json!({"lower": num(g.lower), "upper": num(g.upper)})),
    );
    put("br", model.branching_number(q.n_max, w).map(num));
    put("br_r", model.branching_ruin_number(q.n_max, w).map(num));
    let l1 = match q.excitations.as_slice() {
        [] => q.lambda,
        [l1] => Some(*l1),
        _ => {
            put(
                "alpha",
                Err(Error::unsupported("closed-form quantities need M <= 1")),
            );
            None
        }
    };
    if let Some(l1) = l1 {
        if let Some(lambda) = q.lambda {
            put(
                "alpha_beta",
                criteria::alpha_beta(&model, l1, lambda, q.n_max, w)
                    .map(|(a, b)| json!({"alpha": num(a), "beta": num(b)})),
            );
            let rt = CookieConfig::new(vec![l1], lambda)
                .and_then(|cfg| criteria::rt_bracket(&model, &cfg, q.n_max, w));
            put(
                "rt",
                rt.map(|(lo, hi)| json!({"lower": num(lo), "upper": num(hi)})),
            );
        }
        put(
            "gamma_eta",
            criteria::gamma_eta(&model, l1, q.n_max, w).map(|g| {
                json!({
                    "gamma": num(g.gamma),
                    "eta": num(g.eta),
                    "raw_gamma": num(g.raw_gamma),
                    "raw_eta": num(g.raw_eta),
                    "first_index": g.first_index,
                })
            }),
        );
    }
    out.insert("unsupported".into(), Value::Object(unsupported));
    Ok(Value::Object(out))
}

fn classify(c: &ClassifyRun) -> Result<Value> {
    let model = TreeModel::from_spec(c.model.clone())?;
    let cfg = CookieConfig::new(c.excitations.clone(), c.lambda)?;
    let opts = ClassifyOptions {
        n_max: c.n_max,
        window: window(c.window_start)?,
        tol: c.tol,
    };
    Ok(serde_json::to_value(criteria::classify(
        &model, &cfg, &opts,
    )?)?)
}

/// One sweep row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub excitations: Vec<f64>,
    pub lambda: f64,
    pub estimate: walk::EscapeEstimate,
}

/// All grid points sorted by (cookie vector, lambda, depth). Every point uses
/// the run seed, so a one-point sweep equals `escape_probability`.
pub fn sweep_rows(s: &SweepRun) -> Result<Vec<SweepRow>> {
    let model = TreeModel::from_spec(s.model.clone())?;
    let mut depths = s.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    if depths.is_empty() {
        return Err(Error::param("no depths given"));
    }
    let mut rows = Vec::new();
    for exc in &s.excitations {
        for &lambda in &s.lambdas {
            let cfg = CookieConfig::new(exc.clone(), lambda)?;
            for &depth in &depths {
                let p = TrialParams {
                    depth,
                    root_rule: s.root_rule,
                    step_cap: s.step_cap,
                    excursions: s.excursions,
                };
                let estimate = walk::escape_probability(&model, &cfg, &p, s.n_trials, s.seed)?;
                rows.push(SweepRow {
                    excitations: exc.clone(),
                    lambda,
                    estimate,
                });
            }
        }
    }
    Ok(rows)
}

fn sweep_csv(s: &SweepRun, rows: &[SweepRow]) -> String {
    let model_id = TreeModel::from_spec(s.model.clone())
        .map(|m| m.model_id())
        .unwrap_or_default();
    let m = s.excitations.first().map_or(0, Vec::len);
    let mut out = String::new();
    let mut head = vec!["schema_version".to_string(), "model_id".into(), "M".into()];
    head.extend((1..=m).map(|i| format!("lambda{i}")));
    head.extend(
        ["lambda", "D", "n_trials", "p_hat", "ci", "capped", "seed"]
            .iter()
            .map(|s| s.to_string()),
    );
    out.push_str(&head.join(","));
    out.push('\n');
    for r in rows {
        let e = &r.estimate;
        let mut cells = vec![SCHEMA_VERSION.to_string(), model_id.clone(), m.to_string()];
        cells.extend(r.excitations.iter().map(|x| x.to_string()));
        cells.extend([
            r.lambda.to_string(),
            e.depth.to_string(),
            e.n_trials.to_string(),
            e.p_hat.to_string(),
            e.ci_halfwidth.to_string(),
            e.capped.to_string(),
            e.seed.to_string(),
        ]);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn percolate(p: &PercolateRun) -> Result<Value> {
    let model = TreeModel::from_spec(p.model.clone())?;
    let cfg = CookieConfig::oerw(p.lambda1, p.lambda)?;
    if let Some((a, b)) = &p.qi_pair {
        let edge = |s: &str| -> Result<EdgeRef> { EdgeRef::new(s.parse()?) };
        let q =
            rubin::quasi_independence_ratio(&model, &cfg, &edge(a)?, &edge(b)?, p.samples, p.seed)?;
        return Ok(json!({ "quasi_independence": q }));
    }
    let opts = PercolationOptions {
        depth: p.depth,
        step_cap: p.step_cap,
        max_edges: p.max_edges,
        record_edges: p.edges,
    };
    let samples = (0..p.samples)
        .into_par_iter()
        .map(|s| {
            let mut clocks = ClockStore::seeded(&model, p.seed, s);
            rubin::explore_cluster(&model, &cfg, &mut clocks, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let reached: Vec<_> = samples.iter().filter(|s| s.reached_depth()).collect();
    let rays: Vec<f64> = reached.iter().map(|s| s.disjoint_rays as f64).collect();
    let summary = json!({
        "samples": p.samples,
        "reached_depth": reached.len(),
        "median_disjoint_rays": if rays.is_empty() { Value::Null } else { json!(median(&rays)) },
        "truncated": samples.iter().filter(|s| s.truncated).count(),
    });
    let samples: Vec<Value> = samples
        .into_iter()
        .map(|s| {
            let mut v = serde_json::to_value(&s).expect("sample serializes");
            v["max_level"] = json!(s.max_level());
            v
        })
        .collect();
    Ok(json!({ "summary": summary, "samples": samples }))
}

fn critical(c: &CriticalRun) -> Result<Value> {
    let model = TreeModel::from_spec(c.model.clone())?;
    match &c.mc {
        Some(s) => {
            let est = walk::critical_lambda_mc(&model, &c.excitations, s)?;
            Ok(json!({
                "method": "monte_carlo",
                "lambda_c": est.lambda,
                "excursions": est.excursions,
                "probes": est.probes,
            }))
        }
        None => {
            let opts = CriticalOptions {
                tol: c.tol,
                n_max: c.n_max,
                window: window(c.window_start)?,
                ..CriticalOptions::default()
            };
            let l = criteria::critical_lambda(&model, &c.excitations, &opts)?;
            Ok(json!({ "method": "alpha_bisection", "lambda_c": l }))
        }
    }
}

/// Produces the complete output document of a resolved run.
pub fn execute(run: &Run) -> Result<String> {
    let result = match &run.task {
        Task::Quantities(q) => quantities(q)?,
        Task::Classify(c) => classify(c)?,
        Task::Escape(s) | Task::Sweep(s) => {
            let rows = sweep_rows(s)?;
            if run.format == Format::Csv {
                let header = serde_json::to_string(run)?;
                return Ok(format!("{HEADER}{header}\n{}", sweep_csv(s, &rows)));
            }
            serde_json::to_value(rows)?
        }
        Task::Percolate(p) => percolate(p)?,
        Task::Critical(c) => critical(c)?,
    };
    if run.format == Format::Csv {
        return Err(Error::param(
            "csv output is only available for escape and sweep",
        ));
    }
    let doc = json!({ "config": run, "result": result });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Parses `args` (including the program name), runs, and writes the output.
pub fn run_with_args(args: Vec<String>, stdout: &mut dyn Write) -> Result<()> {
    let (rest, cookies) = split_cookie_flags(args)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(Error::param(e.to_string())),
    };
    let (run, out) = resolve(cli.command, cookies)?;
    let text = execute(&run)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    match run_with_args(args, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
