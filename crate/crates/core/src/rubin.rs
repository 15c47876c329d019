//! Rubin's clock construction of the once-excited walk, its coupled
//! extensions on subtrees, and the induced correlated percolation.
//!
//! All randomness of one experiment lives in a [`ClockStore`]: a uniform `U`
//! per vertex and exponential clocks `Z(v, w)`, `Y(v, w, k)` per ordered pair
//! of neighbours, sampled on first access and memoized. Extensions that share
//! a store are coupled.
//!
//! Only relative rates matter for the argmin rules: from a vertex the parent
//! clock runs at rate 1 and each child clock at rate `lambda` (the common
//! factor `lambda^{|v|-1}` cancels).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::criteria::CookieConfig;
use crate::error::{Error, Result};
use crate::rng::replica_rng;
use crate::tree::{EdgeRef, Node, TreeModel, VertexId};

pub const DEFAULT_EXTENSION_CAP: u64 = 10_000_000;
pub const DEFAULT_MAX_EDGES: usize = 5_000_000;

const ROOT: u32 = 0;

/// Memoized clocks for one coupled experiment.
pub struct ClockStore {
    rng: ChaCha8Rng,
    ids: FxHashMap<(u32, u32), u32>,
    parent: Vec<u32>,
    index: Vec<u32>,
    node: Vec<Node>,
    u: Vec<f64>,
    z: FxHashMap<(u32, u32), f64>,
    y: FxHashMap<(u32, u32, u32), f64>,
}

impl ClockStore {
    pub fn new(model: &TreeModel, rng: ChaCha8Rng) -> Self {
        ClockStore {
            rng,
            ids: FxHashMap::default(),
            parent: vec![u32::MAX],
            index: vec![0],
            node: vec![model.root_node()],
            u: vec![f64::NAN],
            z: FxHashMap::default(),
            y: FxHashMap::default(),
        }
    }

    /// Store for replica `stream` of `seed`.
    pub fn seeded(model: &TreeModel, seed: u64, stream: u64) -> Self {
        Self::new(model, replica_rng(seed, stream))
    }

    pub fn root(&self) -> u32 {
        ROOT
    }

    /// Interned id of child `i` of `v`.
    pub fn child(&mut self, model: &TreeModel, v: u32, i: u32) -> u32 {
        if let Some(&id) = self.ids.get(&(v, i)) {
            return id;
        }
        let id = self.node.len() as u32;
        self.ids.insert((v, i), id);
        self.parent.push(v);
        self.index.push(i);
        self.node.push(model.child_node(self.node[v as usize], i));
        self.u.push(f64::NAN);
        id
    }

    pub fn intern(&mut self, model: &TreeModel, v: &VertexId) -> Result<u32> {
        model.node_of(v)?;
        let mut id = ROOT;
        for &i in v.path() {
            id = self.child(model, id, i);
        }
        Ok(id)
    }

    pub fn parent(&self, v: u32) -> u32 {
        self.parent[v as usize]
    }

    pub fn height(&self, v: u32) -> u32 {
        self.node[v as usize].height
    }

    pub fn children_count(&self, model: &TreeModel, v: u32) -> u32 {
        model.node_children(self.node[v as usize])
    }

    pub fn vertex(&self, mut v: u32) -> VertexId {
        let mut path = Vec::with_capacity(self.height(v) as usize);
        while v != ROOT {
            path.push(self.index[v as usize]);
            v = self.parent[v as usize];
        }
        path.reverse();
        VertexId::from_path(path)
    }

    /// `U_v`.
    pub fn u(&mut self, v: u32) -> f64 {
        let slot = &mut self.u[v as usize];
        if slot.is_nan() {
            *slot = self.rng.random::<f64>();
        }
        *slot
    }

    /// `Z(from, to)`.
    pub fn z(&mut self, from: u32, to: u32) -> f64 {
        let rng = &mut self.rng;
        *self.z.entry((from, to)).or_insert_with(|| rng.sample(Exp1))
    }

    /// `Y(from, to, k)`.
    pub fn y(&mut self, from: u32, to: u32, k: u32) -> f64 {
        let rng = &mut self.rng;
        *self
            .y
            .entry((from, to, k))
            .or_insert_with(|| rng.sample(Exp1))
    }

    pub fn len(&self) -> usize {
        self.node.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// First-visit band of `u`: `None` for the parent band, else the child index.
#[inline]
fn first_visit_band(u: f64, children: u32, lambda1: f64) -> Option<u32> {
    let total = 1.0 + children as f64 * lambda1;
    let p_parent = 1.0 / total;
    if u < p_parent || children == 0 {
        None
    } else {
        Some((((u - p_parent) / (lambda1 / total)) as u32).min(children - 1))
    }
}

/// Running clock sum `sum_{i <= k} Y(v, w, i) / r(v, w)` for one directed edge.
#[derive(Clone, Copy, Debug)]
struct Fire {
    to: u32,
    rate: f64,
    k: u32,
    sum: f64,
}

impl Fire {
    fn new(store: &mut ClockStore, from: u32, to: u32, rate: f64) -> Self {
        Fire {
            to,
            rate,
            k: 0,
            sum: store.y(from, to, 0) / rate,
        }
    }

    fn advance(&mut self, store: &mut ClockStore, from: u32) {
        self.k += 1;
        self.sum += store.y(from, self.to, self.k) / self.rate;
    }
}

/// Index of the smallest running sum; ties go to the earlier neighbour.
fn argmin(fires: &[Fire]) -> usize {
    let mut best = 0;
    for (i, f) in fires.iter().enumerate().skip(1) {
        if f.sum < fires[best].sum {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExtensionStatus {
    Running,
    Hit,
    Returned,
    Capped,
}

/// Extension on the root path `[root, target]`. Cloning a walk that has just
/// hit its target and calling [`PathExtension::retarget`] continues it as the
/// extension towards a child of the target: both extensions coincide up to
/// that hitting time.
#[derive(Clone, Debug)]
pub struct PathExtension {
    path: Vec<u32>,
    arrivals: Vec<u32>,
    down: Vec<Option<Fire>>,
    up: Vec<Option<Fire>>,
    pos: usize,
    steps: u64,
    status: ExtensionStatus,
}

impl PathExtension {
    pub fn new(store: &mut ClockStore, model: &TreeModel, target: &EdgeRef) -> Result<Self> {
        model.node_of(target.upper())?;
        let mut path = vec![ROOT];
        for &i in target.upper().path() {
            let last = *path.last().expect("non-empty");
            path.push(store.child(model, last, i));
        }
        let len = path.len();
        Ok(PathExtension {
            path,
            arrivals: vec![0; len],
            down: vec![None; len],
            up: vec![None; len],
            pos: 0,
            steps: 0,
            status: ExtensionStatus::Running,
        })
    }

    pub fn status(&self) -> ExtensionStatus {
        self.status
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn target(&self) -> u32 {
        *self.path.last().expect("non-empty")
    }

    /// Extends the target by one level. Only valid right after a hit.
    pub fn retarget(&mut self, store: &mut ClockStore, model: &TreeModel, child_index: u32) {
        assert_eq!(self.status, ExtensionStatus::Hit, "retarget needs a hit");
        let top = self.target();
        self.path.push(store.child(model, top, child_index));
        self.arrivals.push(0);
        self.down.push(None);
        self.up.push(None);
        self.status = ExtensionStatus::Running;
    }

    pub fn run(
        &mut self,
        store: &mut ClockStore,
        model: &TreeModel,
        lambda1: f64,
        lambda: f64,
        cap: u64,
    ) -> ExtensionStatus {
        let top = self.path.len() - 1;
        while self.status == ExtensionStatus::Running {
            if self.steps >= cap {
                self.status = ExtensionStatus::Capped;
                break;
            }
            let k = self.pos;
            let next = if k == 0 {
                1
            } else {
                let v = self.path[k];
                if self.arrivals[k] <= 1 {
                    let d = store.children_count(model, v);
                    let u = store.u(v);
                    match first_visit_band(u, d, lambda1) {
                        None => k - 1,
                        Some(j) if store.child(model, v, j) == self.path[k + 1] => k + 1,
                        Some(_) => {
                            let zp = store.z(v, self.path[k - 1]);
                            let zc = store.z(v, self.path[k + 1]) / lambda;
                            if zc < zp {
                                k + 1
                            } else {
                                k - 1
                            }
                        }
                    }
                } else {
                    let (pv, cv) = (self.path[k - 1], self.path[k + 1]);
                    let mut down =
                        *self.down[k].get_or_insert_with(|| Fire::new(store, v, pv, 1.0));
                    let mut up = *self.up[k].get_or_insert_with(|| Fire::new(store, v, cv, lambda));
                    let go_up = up.sum < down.sum;
                    if go_up {
                        up.advance(store, v);
                    } else {
                        down.advance(store, v);
                    }
                    self.down[k] = Some(down);
                    self.up[k] = Some(up);
                    if go_up {
                        k + 1
                    } else {
                        k - 1
                    }
                }
            };
            self.steps += 1;
            self.pos = next;
            self.arrivals[next] += 1;
            if next == top {
                self.status = ExtensionStatus::Hit;
            } else if next == 0 {
                self.status = ExtensionStatus::Returned;
            }
        }
        self.status
    }
}

/// Extension on the whole tree.
pub struct FullExtension {
    pos: u32,
    time: u64,
    arrivals: FxHashMap<u32, u32>,
    fires: FxHashMap<u32, Vec<Fire>>,
}

impl Default for FullExtension {
    fn default() -> Self {
        Self::new()
    }
}

impl FullExtension {
    pub fn new() -> Self {
        FullExtension {
            pos: ROOT,
            time: 0,
            arrivals: FxHashMap::default(),
            fires: FxHashMap::default(),
        }
    }

    pub fn position(&self) -> u32 {
        self.pos
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// One transition; returns the new position id.
    pub fn step(
        &mut self,
        store: &mut ClockStore,
        model: &TreeModel,
        lambda1: f64,
        lambda: f64,
    ) -> Result<u32> {
        let v = self.pos;
        let d = store.children_count(model, v);
        let next = if v == ROOT {
            if d == 0 {
                return Err(Error::param("root has no children"));
            }
            if self.time == 0 {
                let u = store.u(v);
                store.child(model, v, ((u * d as f64) as u32).min(d - 1))
            } else {
                self.fire(store, model, v, d, lambda)
            }
        } else if self.arrivals.get(&v).copied().unwrap_or(0) <= 1 {
            let u = store.u(v);
            match first_visit_band(u, d, lambda1) {
                None => store.parent(v),
                Some(j) => store.child(model, v, j),
            }
        } else {
            self.fire(store, model, v, d, lambda)
        };
        self.time += 1;
        self.pos = next;
        *self.arrivals.entry(next).or_insert(0) += 1;
        Ok(next)
    }

    fn fire(
        &mut self,
        store: &mut ClockStore,
        model: &TreeModel,
        v: u32,
        d: u32,
        lambda: f64,
    ) -> u32 {
        let fires = self.fires.entry(v).or_insert_with(|| {
            let mut f = Vec::with_capacity(d as usize + 1);
            if v != ROOT {
                let p = store.parent(v);
                f.push(Fire::new(store, v, p, 1.0));
            }
            // root children all have rate lambda^0
            let child_rate = if v == ROOT { 1.0 } else { lambda };
            for i in 0..d {
                let c = store.child(model, v, i);
                f.push(Fire::new(store, v, c, child_rate));
            }
            f
        });
        let best = argmin(fires);
        let to = fires[best].to;
        fires[best].advance(store, v);
        to
    }
}

/// Which subtree an extension lives on.
#[derive(Clone, Debug, PartialEq)]
pub enum Subtree {
    Full,
    Path(EdgeRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExtensionSummary {
    /// The target `e+` was hit before the root (path extensions only).
    pub hit: bool,
    pub returned: bool,
    pub capped: bool,
    pub steps: u64,
}

fn oerw_params(cfg: &CookieConfig) -> Result<(f64, f64)> {
    let l1 = cfg.oerw_lambda1().ok_or_else(|| {
        Error::unsupported("the clock construction is defined for once-excited walks (M <= 1)")
    })?;
    Ok((l1, cfg.lambda()))
}

/// Runs an extension until it hits its target, returns to the root, or
/// exhausts `step_cap`.
pub fn run_extension(
    model: &TreeModel,
    cfg: &CookieConfig,
    subtree: &Subtree,
    clocks: &mut ClockStore,
    step_cap: u64,
) -> Result<ExtensionSummary> {
    let (l1, lambda) = oerw_params(cfg)?;
    match subtree {
        Subtree::Path(e) => {
            let mut ext = PathExtension::new(clocks, model, e)?;
            let status = ext.run(clocks, model, l1, lambda, step_cap);
            Ok(ExtensionSummary {
                hit: status == ExtensionStatus::Hit,
                returned: status == ExtensionStatus::Returned,
                capped: status == ExtensionStatus::Capped,
                steps: ext.steps(),
            })
        }
        Subtree::Full => {
            let mut ext = FullExtension::new();
            loop {
                if ext.time() >= step_cap {
                    return Ok(ExtensionSummary {
                        hit: false,
                        returned: false,
                        capped: true,
                        steps: ext.time(),
                    });
                }
                if ext.step(clocks, model, l1, lambda)? == ROOT {
                    return Ok(ExtensionSummary {
                        hit: false,
                        returned: true,
                        capped: false,
                        steps: ext.time(),
                    });
                }
            }
        }
    }
}

/// First `n` positions of the full-tree extension (excluding the start).
pub fn full_trajectory(
    model: &TreeModel,
    cfg: &CookieConfig,
    clocks: &mut ClockStore,
    n: usize,
) -> Result<Vec<VertexId>> {
    let (l1, lambda) = oerw_params(cfg)?;
    let mut ext = FullExtension::new();
    (0..n)
        .map(|_| {
            ext.step(clocks, model, l1, lambda)
                .map(|v| clocks.vertex(v))
        })
        .collect()
}

/// Whether `e` is open: the extension on `[root, e+]` hits `e+` before the root.
/// Capped runs count as closed.
pub fn edge_open(
    model: &TreeModel,
    cfg: &CookieConfig,
    clocks: &mut ClockStore,
    e: &EdgeRef,
    step_cap: u64,
) -> Result<bool> {
    Ok(run_extension(model, cfg, &Subtree::Path(e.clone()), clocks, step_cap)?.hit)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeRecord {
    /// Upper endpoint of the edge, dot-separated.
    pub edge: String,
    pub level: u32,
    pub open: bool,
}

/// Root cluster of the correlated percolation, explored to depth `D`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercolationSample {
    pub depth: u32,
    /// Open cluster vertices per level, `0..=depth` (level 0 is the root).
    pub open_per_level: Vec<u64>,
    /// Open vertices at level `ceil(D/2)` with an open descendant at level `D`.
    pub disjoint_rays: u64,
    pub cluster_size: u64,
    pub edges_evaluated: u64,
    pub capped_edges: u64,
    pub truncated: bool,
    /// Per-edge outcomes, when requested.
    pub edges: Vec<EdgeRecord>,
}

impl PercolationSample {
    pub fn reached_depth(&self) -> bool {
        self.open_per_level.last().is_some_and(|&c| c > 0)
    }

    pub fn max_level(&self) -> u32 {
        self.open_per_level
            .iter()
            .rposition(|&c| c > 0)
            .unwrap_or(0) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercolationOptions {
    pub depth: u32,
    pub step_cap: u64,
    /// Stop exploring once this many edges have been evaluated.
    pub max_edges: usize,
    pub record_edges: bool,
}

impl PercolationOptions {
    pub fn new(depth: u32) -> Self {
        PercolationOptions {
            depth,
            step_cap: DEFAULT_EXTENSION_CAP,
            max_edges: DEFAULT_MAX_EDGES,
            record_edges: false,
        }
    }
}

/// Explores the root cluster level by level with one shared store. Each open
/// edge's extension is continued from its parent edge's hitting time, and
/// edges below a closed edge are never evaluated.
pub fn explore_cluster(
    model: &TreeModel,
    cfg: &CookieConfig,
    clocks: &mut ClockStore,
    opts: &PercolationOptions,
) -> Result<PercolationSample> {
    let (l1, lambda) = oerw_params(cfg)?;
    let depth = opts.depth;
    if depth < 1 {
        return Err(Error::param("depth must be >= 1"));
    }
    let anchor_level = depth.div_ceil(2);
    let mut open_per_level = vec![0u64; depth as usize + 1];
    open_per_level[0] = 1;
    let mut edges = Vec::new();
    let mut evaluated = 0u64;
    let mut capped = 0u64;
    let mut truncated = false;

    // (walk that just hit the vertex, anchor id at `anchor_level`)
    let mut frontier: Vec<(PathExtension, u32)> = Vec::new();
    let root_children = clocks.children_count(model, ROOT);
    for i in 0..root_children {
        let e = EdgeRef::new(VertexId::from_path(vec![i])).expect("height 1");
        let mut ext = PathExtension::new(clocks, model, &e)?;
        let status = ext.run(clocks, model, l1, lambda, opts.step_cap);
        debug_assert_eq!(status, ExtensionStatus::Hit);
        evaluated += 1;
        if opts.record_edges {
            edges.push(EdgeRecord {
                edge: i.to_string(),
                level: 1,
                open: true,
            });
        }
        let v = ext.target();
        frontier.push((ext, if anchor_level == 1 { v } else { u32::MAX }));
    }
    open_per_level[1] = frontier.len() as u64;

    for level in 2..=depth {
        let mut next = Vec::new();
        'outer: for (ext, anchor) in &frontier {
            let v = ext.target();
            for i in 0..clocks.children_count(model, v) {
                if evaluated as usize >= opts.max_edges {
                    truncated = true;
                    break 'outer;
                }
                let mut child = ext.clone();
                child.retarget(clocks, model, i);
                let status = child.run(clocks, model, l1, lambda, opts.step_cap);
                evaluated += 1;
                capped += (status == ExtensionStatus::Capped) as u64;
                let open = status == ExtensionStatus::Hit;
                if opts.record_edges {
                    edges.push(EdgeRecord {
                        edge: clocks.vertex(child.target()).to_string(),
                        level,
                        open,
                    });
                }
                if open {
                    let a = if level == anchor_level {
                        child.target()
                    } else {
                        *anchor
                    };
                    next.push((child, a));
                }
            }
        }
        open_per_level[level as usize] = next.len() as u64;
        frontier = next;
        if truncated || frontier.is_empty() {
            break;
        }
    }

    let mut anchors: Vec<u32> = if open_per_level[depth as usize] > 0 {
        frontier.iter().map(|(_, a)| *a).collect()
    } else {
        Vec::new()
    };
    anchors.sort_unstable();
    anchors.dedup();
    Ok(PercolationSample {
        depth,
        cluster_size: open_per_level.iter().skip(1).sum(),
        open_per_level,
        disjoint_rays: anchors.len() as u64,
        edges_evaluated: evaluated,
        capped_edges: capped,
        truncated,
        edges,
    })
}

/// One cluster sample with a fresh store seeded from `seed`.
pub fn sample_ccp_cluster(
    model: &TreeModel,
    cfg: &CookieConfig,
    opts: &PercolationOptions,
    seed: u64,
) -> Result<PercolationSample> {
    let mut clocks = ClockStore::seeded(model, seed, 0);
    explore_cluster(model, cfg, &mut clocks, opts)
}

/// Quasi-independence ratio estimate with a 95% interval from the delta
/// method on `ln R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QiEstimate {
    pub ratio: f64,
    /// Standard error of `ln ratio`.
    pub se_log: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: u64,
    pub n_cond: u64,
    pub n1: u64,
    pub n2: u64,
    pub n12: u64,
}

/// Estimates `P(e1, e2 open | m open) / (P(e1 open | m open) P(e2 open | m open))`
/// where `m` is the edge above `e1 ∧ e2` (always open when the meet is the
/// root). All terms come from one stream of coupled samples.
pub fn quasi_independence_ratio(
    model: &TreeModel,
    cfg: &CookieConfig,
    e1: &EdgeRef,
    e2: &EdgeRef,
    n_samples: u64,
    seed: u64,
) -> Result<QiEstimate> {
    oerw_params(cfg)?;
    if e1.upper().is_ancestor_of(e2.upper()) || e2.upper().is_ancestor_of(e1.upper()) {
        return Err(Error::param(
            "edges must be distinct and not ancestors of each other",
        ));
    }
    model.node_of(e1.upper())?;
    model.node_of(e2.upper())?;
    let meet = e1.upper().meet(e2.upper());
    let meet_edge = (!meet.is_root()).then(|| EdgeRef::new(meet).expect("non-root"));
    let counts = (0..n_samples)
        .into_par_iter()
        .map(|s| -> Result<[u64; 4]> {
            let mut clocks = ClockStore::seeded(model, seed, s);
            let cond = match &meet_edge {
                None => true,
                Some(m) => edge_open(model, cfg, &mut clocks, m, DEFAULT_EXTENSION_CAP)?,
            };
            if !cond {
                return Ok([0; 4]);
            }
            let o1 = edge_open(model, cfg, &mut clocks, e1, DEFAULT_EXTENSION_CAP)?;
            let o2 = edge_open(model, cfg, &mut clocks, e2, DEFAULT_EXTENSION_CAP)?;
            Ok([1, o1 as u64, o2 as u64, (o1 && o2) as u64])
        })
        .try_reduce(
            || [0; 4],
            |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]),
        )?;
    let [n, n1, n2, n12] = counts;
    if n < 100 {
        return Err(Error::InsufficientSamples(format!(
            "conditioning event occurred {n} times (< 100)"
        )));
    }
    if n1 == 0 || n2 == 0 || n12 == 0 {
        return Err(Error::InsufficientSamples(format!(
            "joint counts too small (n1 = {n1}, n2 = {n2}, n12 = {n12})"
        )));
    }
    let nf = n as f64;
    let (p1, p2, p12) = (n1 as f64 / nf, n2 as f64 / nf, n12 as f64 / nf);
    let ratio = p12 / (p1 * p2);
    let var = ((1.0 / p12 - 1.0 / p1 - 1.0 / p2 - 1.0 + 2.0 * ratio) / nf).max(0.0);
    let se_log = var.sqrt();
    let half = crate::stats::Z95 * se_log;
    Ok(QiEstimate {
        ratio,
        se_log,
        ci_low: ratio * (-half).exp(),
        ci_high: ratio * half.exp(),
        n_samples,
        n_cond: n,
        n1,
        n2,
        n12,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RayCount {
    pub reached: bool,
    pub level_vertices: u64,
    pub disjoint_rays: u64,
}

/// Ray statistics of `n_samples` independent clusters explored to depth `D`.
/// Callers condition on `reached`.
pub fn surviving_rays(
    model: &TreeModel,
    cfg: &CookieConfig,
    opts: &PercolationOptions,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<RayCount>> {
    (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut clocks = ClockStore::seeded(model, seed, s);
            let sample = explore_cluster(model, cfg, &mut clocks, opts)?;
            Ok(RayCount {
                reached: sample.reached_depth(),
                level_vertices: *sample.open_per_level.last().expect("depth >= 1"),
                disjoint_rays: sample.disjoint_rays,
            })
        })
        .collect()
}
