//! Lazily addressed rooted trees and their structural invariants.
//!
//! Vertices are addressed by child-index paths from the root, so an infinite
//! tree is never materialized. Level indexing: `x_n` is the number of children
//! of a vertex at height `n`, with the root at height 0. A spherically
//! symmetric model with `period = [p_0, .., p_{k-1}]` has `x_n = p_{n mod k}`;
//! the alternating tree whose root has four children is therefore `[4, 1]`,
//! and `[1, 4]` is the same tree shifted by one level.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sphere sizes saturate here instead of overflowing.
pub const SPHERE_SATURATION: u64 = i64::MAX as u64;

/// Upper bound on vertices produced by level enumeration.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// A vertex, addressed by the child indices along the path from the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(Vec<u32>);

impl VertexId {
    pub fn root() -> Self {
        VertexId(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        VertexId(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<VertexId> {
        if self.0.is_empty() {
            None
        } else {
            Some(VertexId(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, index: u32) -> VertexId {
        let mut path = self.0.clone();
        path.push(index);
        VertexId(path)
    }

    /// Ancestor at the given height (`self` itself when `height == self.height()`).
    pub fn ancestor(&self, height: usize) -> VertexId {
        VertexId(self.0[..height.min(self.0.len())].to_vec())
    }

    /// `self <= other` in the tree order: `self` lies on the path from the root to `other`.
    pub fn is_ancestor_of(&self, other: &VertexId) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Deepest common ancestor.
    pub fn meet(&self, other: &VertexId) -> VertexId {
        let n = self
            .0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count();
        VertexId(self.0[..n].to_vec())
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for VertexId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(VertexId::root());
        }
        s.split('.')
            .map(|p| {
                p.parse::<u32>().map_err(|_| Error::Address {
                    path: s.to_string(),
                    reason: format!("`{p}` is not a child index"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(VertexId)
    }
}

/// An edge, identified by its upper endpoint `e+`; `e-` is its parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    upper: VertexId,
}

impl EdgeRef {
    pub fn new(upper: VertexId) -> Result<Self> {
        if upper.is_root() {
            return Err(Error::Address {
                path: String::new(),
                reason: "the root is not the upper endpoint of any edge".into(),
            });
        }
        Ok(EdgeRef { upper })
    }

    pub fn upper(&self) -> &VertexId {
        &self.upper
    }

    pub fn lower(&self) -> VertexId {
        self.upper.parent().expect("edge height >= 1")
    }

    pub fn height(&self) -> usize {
        self.upper.height()
    }

    /// Edges `g <= self`, from height 1 up to `self`.
    pub fn ancestors(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        (1..=self.height()).map(move |h| EdgeRef {
            upper: self.upper.ancestor(h),
        })
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.upper)
    }
}

/// Child-count rule of a spherically symmetric tree, as a function of height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChildRule {
    /// `x_n = period[n mod period.len()]`.
    Period(Vec<u32>),
    /// `x_n = 2` if `n` is a power of two, else 1.
    Pow2Doubling,
    /// `x_n = 1`.
    Path,
}

impl ChildRule {
    pub fn count(&self, level: u64) -> u32 {
        match self {
            ChildRule::Period(p) => p[(level % p.len() as u64) as usize],
            ChildRule::Pow2Doubling => {
                if level > 0 && level.is_power_of_two() {
                    2
                } else {
                    1
                }
            }
            ChildRule::Path => 1,
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            ChildRule::Period(p) => Some(p.len()),
            ChildRule::Path => Some(1),
            ChildRule::Pow2Doubling => None,
        }
    }

    fn max_count(&self) -> u32 {
        match self {
            ChildRule::Period(p) => p.iter().copied().max().unwrap_or(0),
            ChildRule::Pow2Doubling => 2,
            ChildRule::Path => 1,
        }
    }
}

/// A finite rooted tree stored as child lists; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteTree {
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl FiniteTree {
    /// Builds a tree from a label map: `""` is the root, each entry lists the
    /// labels of that vertex's children in order. Labels that never appear as
    /// keys are leaves.
    pub fn from_labels(map: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut children: Vec<Vec<u32>> = vec![Vec::new()];
        let mut depth = vec![0u32];
        index.insert("", 0);
        let mut queue = vec![""];
        let mut head = 0;
        while head < queue.len() {
            let label = queue[head];
            head += 1;
            let id = index[label];
            let Some(kids) = map.get(label) else { continue };
            for kid in kids {
                if index.contains_key(kid.as_str()) {
                    return Err(Error::ModelSpec(format!(
                        "vertex `{kid}` appears more than once"
                    )));
                }
                let kid_id = children.len() as u32;
                index.insert(kid.as_str(), kid_id);
                children.push(Vec::new());
                depth.push(depth[id as usize] + 1);
                children[id as usize].push(kid_id);
                queue.push(kid.as_str());
            }
        }
        if let Some(orphan) = map.keys().find(|k| !index.contains_key(k.as_str())) {
            return Err(Error::ModelSpec(format!(
                "vertex `{orphan}` is not reachable from the root"
            )));
        }
        Ok(FiniteTree { children, depth })
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn children(&self, node: u32) -> &[u32] {
        &self.children[node as usize]
    }

    pub fn height(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Number of vertices at each level, `0..=height`.
    pub fn level_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.height() as usize + 1];
        for &d in &self.depth {
            counts[d as usize] += 1;
        }
        counts
    }

    fn is_leaf(&self, node: u32) -> bool {
        self.children[node as usize].is_empty()
    }

    fn uniform_leaf_depth(&self) -> Option<u32> {
        let mut leaf_depths = (0..self.len() as u32)
            .filter(|&v| self.is_leaf(v))
            .map(|v| self.depth[v as usize]);
        let first = leaf_depths.next()?;
        leaf_depths.all(|d| d == first).then_some(first)
    }

    /// Child count per level when every vertex of a level has the same count.
    fn spherical_profile(&self) -> Option<Vec<u32>> {
        let height = self.height() as usize;
        let mut profile: Vec<Option<u32>> = vec![None; height];
        for v in 0..self.len() {
            let d = self.depth[v] as usize;
            if d == height {
                continue;
            }
            let c = self.children[v].len() as u32;
            match profile[d] {
                None => profile[d] = Some(c),
                Some(prev) if prev != c => return None,
                _ => {}
            }
        }
        profile.into_iter().collect()
    }

    fn max_children(&self) -> u32 {
        self.children
            .iter()
            .map(|c| c.len() as u32)
            .max()
            .unwrap_or(0)
    }
}

/// Serializable description of a tree model (one JSON document per model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Bary {
        b: u32,
    },
    Ssym {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<Vec<u32>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<String>,
    },
    Periodic {
        base: BTreeMap<String, Vec<String>>,
    },
    Explicit {
        children: BTreeMap<String, Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeKind {
    BAry(u32),
    SphericallySymmetric(ChildRule),
    /// Infinite tree obtained by attaching a copy of the base tree at every
    /// leaf; all base leaves sit at the same depth (the period).
    Periodic(FiniteTree),
    Explicit(FiniteTree),
}

/// Position of a vertex inside a model: its height plus whatever the model
/// needs to answer child-count queries (an index into a base tree).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub height: u32,
    local: u32,
}

/// Exact sphere size `|T_n|`, saturating at [`SPHERE_SATURATION`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SphereSize {
    pub value: u64,
    pub saturated: bool,
}

/// Tail window over which liminf/limsup are proxied by min/max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Window is `[ceil(start_fraction * n_max), n_max]`.
    pub start_fraction: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            start_fraction: 0.5,
        }
    }
}

impl Window {
    /// Levels in the window. For periodic structures only multiples of the
    /// period are sampled (the limit exists, so any subsequence gives it).
    pub fn levels(&self, n_max: u64, period: Option<usize>) -> Vec<u64> {
        let start = ((n_max as f64 * self.start_fraction).ceil() as u64).clamp(1, n_max.max(1));
        let all: Vec<u64> = (start..=n_max).collect();
        match period {
            Some(p) if p > 1 => {
                let aligned: Vec<u64> = all.iter().copied().filter(|n| n % p as u64 == 0).collect();
                if aligned.is_empty() {
                    all
                } else {
                    aligned
                }
            }
            _ => all,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRate {
    pub lower: f64,
    pub upper: f64,
}

/// Coarse growth regime of `|T_n|` over a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GrowthClass {
    /// Some sphere is empty.
    Finite,
    /// `ln |T_n|` grows sublinearly (polynomial, stretched exponential, bounded).
    Subexponential,
    /// `ln |T_n|` grows linearly.
    Exponential,
}

/// Immutable tree model; safe to share between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    kind: TreeKind,
    spec: ModelSpec,
}

impl TreeModel {
    pub fn bary(b: u32) -> Result<Self> {
        Self::from_spec(ModelSpec::Bary { b })
    }

    pub fn ssym_period(period: Vec<u32>) -> Result<Self> {
        Self::from_spec(ModelSpec::Ssym {
            period: Some(period),
            rule: None,
        })
    }

    pub fn ssym_rule(rule: &str) -> Result<Self> {
        Self::from_spec(ModelSpec::Ssym {
            period: None,
            rule: Some(rule.to_string()),
        })
    }

    pub fn path() -> Self {
        Self::ssym_rule("path").expect("built-in rule")
    }

    pub fn pow2_doubling() -> Self {
        Self::ssym_rule("pow2_doubling").expect("built-in rule")
    }

    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        let kind = match &spec {
            ModelSpec::Bary { b } => {
                if *b == 0 {
                    return Err(Error::ModelSpec("b-ary tree needs b >= 1".into()));
                }
                TreeKind::BAry(*b)
            }
            ModelSpec::Ssym { period, rule } => match (period, rule.as_deref()) {
                (Some(p), None) => {
                    if p.is_empty() || p.contains(&0) {
                        return Err(Error::ModelSpec(
                            "ssym period must be non-empty with entries >= 1".into(),
                        ));
                    }
                    TreeKind::SphericallySymmetric(ChildRule::Period(p.clone()))
                }
                (None, Some("pow2_doubling")) => {
                    TreeKind::SphericallySymmetric(ChildRule::Pow2Doubling)
                }
                (None, Some("path")) => TreeKind::SphericallySymmetric(ChildRule::Path),
                (None, Some(other)) => {
                    return Err(Error::ModelSpec(format!("unknown rule `{other}`")))
                }
                _ => {
                    return Err(Error::ModelSpec(
                        "ssym needs exactly one of `period` or `rule`".into(),
                    ))
                }
            },
            ModelSpec::Periodic { base } => {
                let tree = FiniteTree::from_labels(base)?;
                match tree.uniform_leaf_depth() {
                    Some(d) if d >= 1 => {}
                    _ => {
                        return Err(Error::ModelSpec(
                            "periodic base needs all leaves at one depth >= 1".into(),
                        ))
                    }
                }
                TreeKind::Periodic(tree)
            }
            ModelSpec::Explicit { children } => {
                TreeKind::Explicit(FiniteTree::from_labels(children)?)
            }
        };
        Ok(TreeModel { kind, spec })
    }

    /// Parses a JSON model document.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| Error::ModelSpec(e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn kind(&self) -> &TreeKind {
        &self.kind
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Short CSV-safe identifier.
    pub fn model_id(&self) -> String {
        match &self.kind {
            TreeKind::BAry(b) => format!("bary{b}"),
            TreeKind::SphericallySymmetric(ChildRule::Period(p)) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                format!("ssym_period_{}", parts.join("_"))
            }
            TreeKind::SphericallySymmetric(ChildRule::Pow2Doubling) => "ssym_pow2_doubling".into(),
            TreeKind::SphericallySymmetric(ChildRule::Path) => "ssym_path".into(),
            TreeKind::Periodic(base) => format!(
                "periodic_L{}_p{}",
                base.level_counts().last().copied().unwrap_or(0),
                base.height()
            ),
            TreeKind::Explicit(t) => format!("explicit_n{}", t.len()),
        }
    }

    pub fn is_infinite(&self) -> bool {
        !matches!(self.kind, TreeKind::Explicit(_))
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        match &self.kind {
            TreeKind::BAry(_) | TreeKind::SphericallySymmetric(_) => true,
            TreeKind::Periodic(base) => base.spherical_profile().is_some(),
            TreeKind::Explicit(_) => false,
        }
    }

    /// `x_n` for spherically symmetric models.
    pub fn level_child_count(&self, level: u64) -> Option<u32> {
        match &self.kind {
            TreeKind::BAry(b) => Some(*b),
            TreeKind::SphericallySymmetric(rule) => Some(rule.count(level)),
            TreeKind::Periodic(base) => {
                let profile = base.spherical_profile()?;
                Some(profile[(level % profile.len() as u64) as usize])
            }
            TreeKind::Explicit(_) => None,
        }
    }

    /// Period of the level structure, when there is one.
    pub fn period(&self) -> Option<usize> {
        match &self.kind {
            TreeKind::BAry(_) => Some(1),
            TreeKind::SphericallySymmetric(rule) => rule.period(),
            TreeKind::Periodic(base) => Some(base.height() as usize),
            TreeKind::Explicit(_) => None,
        }
    }

    /// Maximum vertex degree (children plus parent).
    pub fn degree_bound(&self) -> u32 {
        let max_children = match &self.kind {
            TreeKind::BAry(b) => *b,
            TreeKind::SphericallySymmetric(rule) => rule.max_count(),
            TreeKind::Periodic(t) | TreeKind::Explicit(t) => t.max_children(),
        };
        max_children + 1
    }

    pub fn root_node(&self) -> Node {
        Node {
            height: 0,
            local: 0,
        }
    }

    pub fn node_children(&self, node: Node) -> u32 {
        match &self.kind {
            TreeKind::BAry(b) => *b,
            TreeKind::SphericallySymmetric(rule) => rule.count(node.height as u64),
            TreeKind::Periodic(t) | TreeKind::Explicit(t) => t.children(node.local).len() as u32,
        }
    }

    /// Child `index` of `node`; the caller guarantees `index < node_children(node)`.
    pub fn child_node(&self, node: Node, index: u32) -> Node {
        let local = match &self.kind {
            TreeKind::BAry(_) | TreeKind::SphericallySymmetric(_) => 0,
            TreeKind::Periodic(t) => {
                let c = t.children(node.local)[index as usize];
                if t.is_leaf(c) {
                    0
                } else {
                    c
                }
            }
            TreeKind::Explicit(t) => t.children(node.local)[index as usize],
        };
        Node {
            height: node.height + 1,
            local,
        }
    }

    /// Resolves a vertex address, validating every child index on the way.
    pub fn node_of(&self, v: &VertexId) -> Result<Node> {
        let mut node = self.root_node();
        for (depth, &i) in v.path().iter().enumerate() {
            let count = self.node_children(node);
            if i >= count {
                return Err(Error::Address {
                    path: v.to_string(),
                    reason: format!(
                        "child index {i} at height {depth} exceeds child count {count}"
                    ),
                });
            }
            node = self.child_node(node, i);
        }
        Ok(node)
    }

    /// Number of children of `v`.
    pub fn child_count(&self, v: &VertexId) -> Result<u32> {
        Ok(self.node_children(self.node_of(v)?))
    }

    pub fn children(&self, v: &VertexId) -> Result<Vec<VertexId>> {
        let count = self.child_count(v)?;
        Ok((0..count).map(|i| v.child(i)).collect())
    }

    /// `|T_n|`, exact up to saturation.
    pub fn sphere_size(&self, n: u64) -> Result<SphereSize> {
        let sat = |value: Option<u64>| match value {
            Some(v) if v <= SPHERE_SATURATION => SphereSize {
                value: v,
                saturated: false,
            },
            _ => SphereSize {
                value: SPHERE_SATURATION,
                saturated: true,
            },
        };
        let size = match &self.kind {
            TreeKind::BAry(b) => {
                let exp = u32::try_from(n).unwrap_or(u32::MAX);
                sat((*b as u64).checked_pow(exp))
            }
            TreeKind::SphericallySymmetric(rule) => {
                let mut acc: Option<u64> = Some(1);
                for i in 0..n {
                    acc = acc.and_then(|a| a.checked_mul(rule.count(i) as u64));
                    if acc.is_none_or(|a| a > SPHERE_SATURATION) {
                        acc = None;
                        break;
                    }
                }
                sat(acc)
            }
            TreeKind::Periodic(base) => {
                let counts = base.level_counts();
                let p = base.height() as u64;
                let leaves = *counts.last().expect("non-empty base");
                let k = u32::try_from(n / p).unwrap_or(u32::MAX);
                let r = (n % p) as usize;
                sat(leaves.checked_pow(k).and_then(|x| x.checked_mul(counts[r])))
            }
            TreeKind::Explicit(t) => {
                let counts = t.level_counts();
                sat(Some(counts.get(n as usize).copied().unwrap_or(0)))
            }
        };
        Ok(size)
    }

    /// `ln |T_n|` for `n = 0..=n_max` (`-inf` for empty spheres), computed
    /// without saturation.
    pub fn log_sphere_sizes(&self, n_max: u64) -> Vec<f64> {
        let len = n_max as usize + 1;
        match &self.kind {
            TreeKind::BAry(b) => (0..len).map(|n| n as f64 * (*b as f64).ln()).collect(),
            TreeKind::SphericallySymmetric(rule) => {
                let mut out = Vec::with_capacity(len);
                let mut acc = 0.0f64;
                out.push(0.0);
                for i in 0..n_max {
                    acc += (rule.count(i) as f64).ln();
                    out.push(acc);
                }
                out
            }
            TreeKind::Periodic(base) => {
                let counts = base.level_counts();
                let p = base.height() as u64;
                let ln_leaves = (*counts.last().expect("non-empty base") as f64).ln();
                (0..len as u64)
                    .map(|n| (n / p) as f64 * ln_leaves + (counts[(n % p) as usize] as f64).ln())
                    .collect()
            }
            TreeKind::Explicit(t) => {
                let counts = t.level_counts();
                (0..len)
                    .map(|n| match counts.get(n) {
                        Some(&c) if c > 0 => (c as f64).ln(),
                        _ => f64::NEG_INFINITY,
                    })
                    .collect()
            }
        }
    }

    /// Lower/upper growth-rate proxies: min/max of `|T_n|^{1/n}` over the window.
    pub fn growth_rate(&self, n_max: u64, window: Window) -> Result<GrowthRate> {
        if n_max < 2 {
            return Err(Error::param("growth_rate needs n_max >= 2"));
        }
        if let TreeKind::BAry(b) = self.kind {
            return Ok(GrowthRate {
                lower: b as f64,
                upper: b as f64,
            });
        }
        let logs = self.log_sphere_sizes(n_max);
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        for n in window.levels(n_max, self.period()) {
            let g = (logs[n as usize] / n as f64).exp();
            lower = lower.min(g);
            upper = upper.max(g);
        }
        Ok(GrowthRate { lower, upper })
    }

    /// Classifies growth by comparing `ln |T_n|` at the two ends of the window:
    /// linear growth roughly doubles it across `[n_max/2, n_max]`, polynomial
    /// growth barely moves it.
    pub fn growth_class(&self, n_max: u64, window: Window) -> GrowthClass {
        let logs = self.log_sphere_sizes(n_max);
        if logs.iter().any(|l| *l == f64::NEG_INFINITY) {
            return GrowthClass::Finite;
        }
        let levels = window.levels(n_max, self.period());
        let (n0, n1) = (levels[0], *levels.last().expect("non-empty window"));
        let (a0, a1) = (logs[n0 as usize], logs[n1 as usize]);
        if a1 <= 0.0 || n1 == n0 {
            return if a1 > 0.0 && n1 == n0 && a1 / n1 as f64 > 1e-3 {
                GrowthClass::Exponential
            } else {
                GrowthClass::Subexponential
            };
        }
        let threshold = 0.5 * (1.0 + n1 as f64 / n0 as f64);
        if a1 >= threshold * a0 {
            GrowthClass::Exponential
        } else {
            GrowthClass::Subexponential
        }
    }

    fn require_infinite(&self, op: &str) -> Result<()> {
        if self.is_infinite() {
            Ok(())
        } else {
            Err(Error::unsupported(format!(
                "{op} needs an infinite spherically symmetric or periodic model; `{}` is finite",
                self.model_id()
            )))
        }
    }

    /// Branching number via sphere cutsets. For spherically symmetric and
    /// periodic trees this is the growth rate; sub-exponential growth gives 1.
    pub fn branching_number(&self, n_max: u64, window: Window) -> Result<f64> {
        self.require_infinite("branching_number")?;
        match self.growth_class(n_max, window) {
            GrowthClass::Exponential => Ok(self.growth_rate(n_max, window)?.lower),
            _ => Ok(1.0),
        }
    }

    /// Branching-ruin number via sphere cutsets: `liminf ln|T_n| / ln n`,
    /// `+inf` whenever the branching number exceeds one.
    pub fn branching_ruin_number(&self, n_max: u64, window: Window) -> Result<f64> {
        self.require_infinite("branching_ruin_number")?;
        if n_max < 2 {
            return Err(Error::param("branching_ruin_number needs n_max >= 2"));
        }
        if self.growth_class(n_max, window) == GrowthClass::Exponential {
            return Ok(f64::INFINITY);
        }
        let logs = self.log_sphere_sizes(n_max);
        let liminf = window
            .levels(n_max, None)
            .into_iter()
            .filter(|&n| n >= 2)
            .map(|n| logs[n as usize] / (n as f64).ln())
            .fold(f64::INFINITY, f64::min);
        Ok(liminf.max(0.0))
    }

    /// Enumerates the vertices at height `depth` in lexicographic order.
    pub fn vertices_at_level(&self, depth: usize) -> Result<LevelIter<'_>> {
        let size = self.sphere_size(depth as u64)?;
        if size.saturated || size.value > ENUMERATION_LIMIT {
            return Err(Error::param(format!(
                "level {depth} has more than {ENUMERATION_LIMIT} vertices"
            )));
        }
        Ok(LevelIter {
            model: self,
            depth,
            stack: vec![(VertexId::root(), self.root_node())],
        })
    }
}

/// Depth-first enumeration of one level.
pub struct LevelIter<'a> {
    model: &'a TreeModel,
    depth: usize,
    stack: Vec<(VertexId, Node)>,
}

impl Iterator for LevelIter<'_> {
    type Item = VertexId;

    fn next(&mut self) -> Option<VertexId> {
        while let Some((v, node)) = self.stack.pop() {
            if v.height() == self.depth {
                return Some(v);
            }
            let count = self.model.node_children(node);
            for i in (0..count).rev() {
                self.stack
                    .push((v.child(i), self.model.child_node(node, i)));
            }
        }
        None
    }
}
