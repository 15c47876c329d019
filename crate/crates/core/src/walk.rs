//! Direct simulation of multi-excited random walks.
//!
//! Two front ends share one decision function ([`choose_move`]): the
//! address-based [`step`] for inspection and a compact arena walker used by
//! the escape estimators.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::CookieConfig;
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::stats::Proportion;
use crate::tree::{Node, TreeModel, VertexId};

pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

/// What the walk does at the root, which has no parent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootRule {
    /// Move to a uniformly chosen child.
    #[default]
    Uniform,
    /// Keep the usual law; the parent weight becomes a hold at the root.
    Lazy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Parent,
    Child(u32),
    Hold,
    Absorbed,
}

/// Maps one uniform `u` in `[0, 1)` to a move. Off the root the parent band is
/// `[0, 1/(1 + d bias))` followed by `d` child bands of width `bias/(1 + d bias)`.
#[inline]
pub fn choose_move(u: f64, children: u32, bias: f64, at_root: bool, rule: RootRule) -> Move {
    if at_root {
        if children == 0 {
            return Move::Absorbed;
        }
        return match rule {
            RootRule::Uniform => Move::Child(((u * children as f64) as u32).min(children - 1)),
            RootRule::Lazy => {
                let total = 1.0 + children as f64 * bias;
                let p_hold = 1.0 / total;
                if u < p_hold {
                    Move::Hold
                } else {
                    let i = ((u - p_hold) / (bias / total)) as u32;
                    Move::Child(i.min(children - 1))
                }
            }
        };
    }
    let total = 1.0 + children as f64 * bias;
    let p_parent = 1.0 / total;
    if u < p_parent || children == 0 {
        Move::Parent
    } else {
        let i = ((u - p_parent) / (bias / total)) as u32;
        Move::Child(i.min(children - 1))
    }
}

/// Walk state addressed by vertex paths.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub position: VertexId,
    /// Visits to each vertex so far, including the current one.
    pub visit_counts: HashMap<VertexId, u64>,
    pub steps: u64,
    pub max_depth_reached: usize,
    pub absorbed: bool,
}

impl Default for WalkState {
    fn default() -> Self {
        Self::new()
    }
}

impl WalkState {
    pub fn new() -> Self {
        let mut visit_counts = HashMap::new();
        visit_counts.insert(VertexId::root(), 1);
        WalkState {
            position: VertexId::root(),
            visit_counts,
            steps: 0,
            max_depth_reached: 0,
            absorbed: false,
        }
    }
}

/// One transition of the walk. Returns the new position.
pub fn step<R: RngCore>(
    model: &TreeModel,
    cfg: &CookieConfig,
    root_rule: RootRule,
    state: &mut WalkState,
    rng: &mut R,
) -> Result<VertexId> {
    if state.absorbed {
        return Ok(state.position.clone());
    }
    let children = model.child_count(&state.position)?;
    let j = state
        .visit_counts
        .get(&state.position)
        .copied()
        .unwrap_or(1);
    let u: f64 = rng.random();
    let next = match choose_move(
        u,
        children,
        cfg.bias(j),
        state.position.is_root(),
        root_rule,
    ) {
        Move::Parent => state.position.parent().expect("not at root"),
        Move::Child(i) => state.position.child(i),
        Move::Hold => state.position.clone(),
        Move::Absorbed => {
            state.absorbed = true;
            return Ok(state.position.clone());
        }
    };
    *state.visit_counts.entry(next.clone()).or_insert(0) += 1;
    state.steps += 1;
    state.max_depth_reached = state.max_depth_reached.max(next.height());
    state.position = next;
    Ok(state.position.clone())
}

const NONE: u32 = u32::MAX;

/// Lazily grown tree of visited vertices, reused across trials.
#[derive(Default)]
pub(crate) struct Arena {
    parent: Vec<u32>,
    first_child: Vec<u32>,
    node: Vec<Node>,
    visits: Vec<u32>,
}

impl Arena {
    fn reset(&mut self, root: Node) {
        self.parent.clear();
        self.first_child.clear();
        self.node.clear();
        self.visits.clear();
        self.push(NONE, root);
    }

    fn push(&mut self, parent: u32, node: Node) {
        self.parent.push(parent);
        self.first_child.push(NONE);
        self.node.push(node);
        self.visits.push(0);
    }

    fn child(&mut self, model: &TreeModel, v: u32, i: u32) -> u32 {
        let mut first = self.first_child[v as usize];
        if first == NONE {
            first = self.node.len() as u32;
            self.first_child[v as usize] = first;
            let node = self.node[v as usize];
            for k in 0..model.node_children(node) {
                self.push(v, model.child_node(node, k));
            }
        }
        first + i
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Escaped,
    Returned,
    Capped,
}

/// Escape-trial parameters shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub depth: u32,
    pub root_rule: RootRule,
    pub step_cap: u64,
    /// A trial escapes if it reaches `depth` before this many returns to the root.
    pub excursions: u32,
}

impl TrialParams {
    pub fn new(depth: u32) -> Self {
        TrialParams {
            depth,
            root_rule: RootRule::Uniform,
            step_cap: DEFAULT_STEP_CAP,
            excursions: 1,
        }
    }
}

/// Runs one trial; returns the outcome and the largest height reached.
pub(crate) fn run_trial<R: RngCore>(
    model: &TreeModel,
    cfg: &CookieConfig,
    p: &TrialParams,
    rng: &mut R,
    arena: &mut Arena,
) -> (Outcome, u32) {
    arena.reset(model.root_node());
    arena.visits[0] = 1;
    let mut pos = 0u32;
    let mut returns = 0u32;
    let mut steps = 0u64;
    let mut reached = 0u32;
    loop {
        if steps >= p.step_cap {
            return (Outcome::Capped, reached);
        }
        let node = arena.node[pos as usize];
        let children = model.node_children(node);
        let bias = cfg.bias(arena.visits[pos as usize] as u64);
        let u: f64 = rng.random();
        steps += 1;
        pos = match choose_move(u, children, bias, pos == 0, p.root_rule) {
            Move::Parent => arena.parent[pos as usize],
            Move::Child(i) => arena.child(model, pos, i),
            Move::Hold => {
                arena.visits[0] = arena.visits[0].saturating_add(1);
                continue;
            }
            Move::Absorbed => return (Outcome::Returned, reached),
        };
        let v = &mut arena.visits[pos as usize];
        *v = v.saturating_add(1);
        let h = arena.node[pos as usize].height;
        reached = reached.max(h);
        if h >= p.depth {
            return (Outcome::Escaped, reached);
        }
        if pos == 0 {
            returns += 1;
            if returns >= p.excursions {
                return (Outcome::Returned, reached);
            }
        }
    }
}

/// Depth-`D` escape estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub depth: u32,
    pub p_hat: f64,
    pub ci_halfwidth: f64,
    pub n_trials: u64,
    pub escapes: u64,
    pub capped: u64,
    pub seed: u64,
}

impl EscapeEstimate {
    pub fn proportion(&self) -> Proportion {
        Proportion::new(self.escapes, self.n_trials)
    }
}

fn check_trials(params: &TrialParams, n_trials: u64) -> Result<()> {
    if params.depth < 1 {
        return Err(Error::param("depth must be >= 1"));
    }
    if n_trials < 1 {
        return Err(Error::param("n_trials must be >= 1"));
    }
    if params.excursions < 1 {
        return Err(Error::param("excursions must be >= 1"));
    }
    Ok(())
}

/// Fraction of independent walks from the root that reach depth `D` before
/// returning. Trial `t` uses stream `t` of the master seed, so the result does
/// not depend on scheduling.
pub fn escape_probability(
    model: &TreeModel,
    cfg: &CookieConfig,
    params: &TrialParams,
    n_trials: u64,
    seed: u64,
) -> Result<EscapeEstimate> {
    let mut v = escape_profile(model, cfg, params, &[params.depth], n_trials, seed)?;
    Ok(v.pop().expect("one depth"))
}

/// Escape estimates for several depths from the same walks: a trial escapes
/// to `d` if it reaches height `d` before its return budget runs out.
/// Simulation stops at `params.depth`, which must be the largest entry.
pub fn escape_profile(
    model: &TreeModel,
    cfg: &CookieConfig,
    params: &TrialParams,
    depths: &[u32],
    n_trials: u64,
    seed: u64,
) -> Result<Vec<EscapeEstimate>> {
    check_trials(params, n_trials)?;
    if depths.iter().any(|&d| d < 1 || d > params.depth) {
        return Err(Error::param(format!(
            "depths must lie in [1, {}]",
            params.depth
        )));
    }
    let k = depths.len();
    let zero = || (vec![0u64; k], 0u64);
    let (escapes, capped) = (0..n_trials)
        .into_par_iter()
        .fold(
            || (Arena::default(), zero()),
            |(mut arena, (mut esc, mut cap)), trial| {
                let mut rng = replica_rng(seed, trial);
                let (outcome, reached) = run_trial(model, cfg, params, &mut rng, &mut arena);
                cap += (outcome == Outcome::Capped) as u64;
                for (e, &d) in esc.iter_mut().zip(depths) {
                    *e += (reached >= d) as u64;
                }
                (arena, (esc, cap))
            },
        )
        .map(|(_, t)| t)
        .reduce(zero, |(mut a, ca), (b, cb)| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            (a, ca + cb)
        });
    Ok(depths
        .iter()
        .zip(escapes)
        .map(|(&depth, esc)| {
            let prop = Proportion::new(esc, n_trials);
            EscapeEstimate {
                depth,
                p_hat: prop.p_hat(),
                ci_halfwidth: prop.ci95(),
                n_trials,
                escapes: esc,
                capped,
                seed,
            }
        })
        .collect())
}

/// How the Monte Carlo search recognises the critical `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// Sign change of `ln p(D) + ln p(D/4) - 2 ln p(D/2)`: negative under
    /// exponential decay in `D`, zero under power-law decay, positive when
    /// `p` levels off.
    Scaling,
    /// `p(D)` crosses the given level.
    Threshold(f64),
}

/// Monte Carlo search for the critical `lambda` of a cookie vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSearch {
    pub depth: u32,
    pub n_trials: u64,
    pub bracket: (f64, f64),
    /// Stop once the bracket is narrower than this.
    pub tol: f64,
    pub crossing: Crossing,
    pub seed: u64,
    /// `None` means `1 + M * (children of the root)` for digging walks, enough
    /// to exhaust the cookies next to the root, and 1 otherwise.
    pub excursions: Option<u32>,
    pub root_rule: RootRule,
    pub step_cap: u64,
}

impl Default for McSearch {
    fn default() -> Self {
        McSearch {
            depth: 20,
            n_trials: 100_000,
            bracket: (0.25, 0.95),
            tol: 2e-3,
            crossing: Crossing::Scaling,
            seed: 1,
            excursions: None,
            root_rule: RootRule::Uniform,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    /// Escape estimate at the search depth.
    pub p_hat: f64,
    /// Signed criterion value; the search looks for its zero.
    pub statistic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub lambda: f64,
    /// Every probe, in evaluation order.
    pub probes: Vec<Probe>,
    pub crossing: Crossing,
    pub excursions: u32,
}

/// Bisection on `lambda` using common random numbers across probes.
pub fn critical_lambda_mc(
    model: &TreeModel,
    excitations: &[f64],
    s: &McSearch,
) -> Result<CriticalEstimate> {
    let (mut lo, mut hi) = s.bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::param(format!("invalid bracket [{lo}, {hi}]")));
    }
    if s.crossing == Crossing::Scaling && s.depth < 4 {
        return Err(Error::param("the scaling criterion needs depth >= 4"));
    }
    let root_children = model.node_children(model.root_node());
    let digging = !excitations.is_empty() && excitations.iter().all(|&l| l == 0.0);
    let excursions = s.excursions.unwrap_or(if digging {
        1 + excitations.len() as u32 * root_children
    } else {
        1
    });
    let params = TrialParams {
        depth: s.depth,
        root_rule: s.root_rule,
        step_cap: s.step_cap,
        excursions,
    };
    let depths = [s.depth.div_ceil(4), s.depth.div_ceil(2), s.depth];
    let mut probes = Vec::new();
    let mut probe = |lambda: f64| -> Result<(f64, Proportion)> {
        let cfg = CookieConfig::new(excitations.to_vec(), lambda)?;
        let est = escape_profile(model, &cfg, &params, &depths, s.n_trials, s.seed)?;
        let p = est[2].proportion();
        let statistic = match s.crossing {
            Crossing::Threshold(t) => p.p_hat() - t,
            Crossing::Scaling if p.successes == 0 => f64::NEG_INFINITY,
            Crossing::Scaling => est[2].p_hat.ln() + est[0].p_hat.ln() - 2.0 * est[1].p_hat.ln(),
        };
        probes.push(Probe {
            lambda,
            p_hat: p.p_hat(),
            statistic,
        });
        Ok((statistic, p))
    };
    let (c_lo, mut p_lo) = probe(lo)?;
    let (c_hi, mut p_hi) = probe(hi)?;
    if !(c_lo < 0.0 && c_hi >= 0.0) {
        return Err(Error::NoSignChange {
            lo,
            hi,
            detail: format!("criterion values {c_lo} and {c_hi} do not change sign"),
        });
    }
    while hi - lo > s.tol {
        let mid = 0.5 * (lo + hi);
        let (c_mid, p_mid) = probe(mid)?;
        let slack = 3.0 * (p_lo.sigma().max(p_mid.sigma()) + p_hi.sigma().max(p_mid.sigma()));
        if p_mid.p_hat() + slack < p_lo.p_hat() || p_mid.p_hat() > p_hi.p_hat() + slack {
            return Err(Error::NonMonotone(format!(
                "p({mid}) = {} outside [p({lo}), p({hi})] = [{}, {}]",
                p_mid.p_hat(),
                p_lo.p_hat(),
                p_hi.p_hat()
            )));
        }
        if c_mid < 0.0 {
            lo = mid;
            p_lo = p_mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
    }
    Ok(CriticalEstimate {
        lambda: 0.5 * (lo + hi),
        probes,
        crossing: s.crossing,
        excursions,
    })
}
