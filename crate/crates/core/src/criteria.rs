//! Analytic criterion functions for once-excited walks and the
//! recurrence/transience classifier.
//!
//! Passage factors follow the gambler's-ruin reading of `psi`: for an edge of
//! height `h >= 2`, `psi(h)` is the probability that a `lambda`-biased walk on
//! a segment, started one step below the top, reaches height `h` before the
//! root. `phi` combines it with the first-visit trichotomy, and `Psi` is the
//! product of `phi` along the root path.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tree::{EdgeRef, TreeModel, Window};
use crate::walk::{self, McSearch};

/// Excitation parameters `(lambda_1, .., lambda_M; lambda)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CookieConfig {
    excitations: Vec<f64>,
    lambda: f64,
}

impl CookieConfig {
    pub fn new(excitations: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if let Some(bad) = excitations.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::param(format!(
                "excitation biases must be >= 0, got {bad}"
            )));
        }
        Ok(CookieConfig {
            excitations,
            lambda,
        })
    }

    pub fn oerw(lambda1: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda1], lambda)
    }

    pub fn biased(lambda: f64) -> Result<Self> {
        Self::new(Vec::new(), lambda)
    }

    pub fn digging(m: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![0.0; m], lambda)
    }

    pub fn excitations(&self) -> &[f64] {
        &self.excitations
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> usize {
        self.excitations.len()
    }

    pub fn is_digging(&self) -> bool {
        !self.excitations.is_empty() && self.excitations.iter().all(|l| *l == 0.0)
    }

    /// Bias used on the `j`-th visit (`j >= 1`) to a vertex.
    #[inline]
    pub fn bias(&self, j: u64) -> f64 {
        match self.excitations.get((j as usize).wrapping_sub(1)) {
            Some(l) if j >= 1 => *l,
            _ => self.lambda,
        }
    }

    /// `lambda_1` of the equivalent once-excited walk (`M = 0` is the
    /// `(lambda, lambda)` walk); `None` for `M >= 2`.
    pub fn oerw_lambda1(&self) -> Option<f64> {
        match self.excitations.as_slice() {
            [] => Some(self.lambda),
            [l1] => Some(*l1),
            _ => None,
        }
    }

    fn require_oerw(&self, op: &str) -> Result<f64> {
        self.oerw_lambda1().ok_or_else(|| {
            Error::unsupported(format!(
                "{op} is defined for once-excited walks; got M = {}",
                self.m()
            ))
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

/// Probability that a `lambda`-biased walk on `{0, .., h}` started at `h - 1`
/// hits `h` before 0. Equals 0 at `h = 1`.
pub(crate) fn ruin(h: u64, lambda: f64) -> f64 {
    let hf = h as f64;
    if lambda == 1.0 {
        return (hf - 1.0) / hf;
    }
    let l = lambda.ln();
    if lambda > 1.0 {
        (-(hf - 1.0) * l).exp_m1() / (-hf * l).exp_m1()
    } else {
        lambda * ((hf - 1.0) * l).exp_m1() / (hf * l).exp_m1()
    }
}

/// `psi(e, lambda)` for an edge of height `h`; 1 at height 1.
pub fn psi(h: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    match h {
        0 => Err(Error::param("edge height must be >= 1")),
        1 => Ok(1.0),
        _ => Ok(ruin(h, lambda)),
    }
}

#[inline]
fn phi_raw(h: u64, d: u32, lambda1: f64, lambda: f64) -> f64 {
    if h == 1 {
        return 1.0;
    }
    let d = d as f64;
    let up = ruin(h, lambda);
    ((lambda1 + up * ruin(h - 1, lambda) + (d - 1.0) * lambda1 * up) / (1.0 + d * lambda1)).min(1.0)
}

/// `phi(e, lambda_1, lambda)` for an edge of height `h` whose lower endpoint has
/// `parent_children` children. The parent-return term uses the passage factor
/// of the edge below, which vanishes for `h = 2` (the walk would be back at
/// the root).
pub fn phi(h: u64, parent_children: u32, lambda1: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(lambda1.is_finite() && lambda1 >= 0.0) {
        return Err(Error::param(format!(
            "lambda_1 must be >= 0, got {lambda1}"
        )));
    }
    if h == 0 {
        return Err(Error::param("edge height must be >= 1"));
    }
    if parent_children == 0 {
        return Err(Error::param("parent child count must be >= 1"));
    }
    Ok(phi_raw(h, parent_children, lambda1, lambda))
}

/// Per-level factor of the closed form for `Psi`.
#[inline]
fn closed_factor(h: u64, d: u32, lambda1: f64, lambda: f64) -> f64 {
    if h == 1 {
        return 1.0;
    }
    let d = d as f64;
    let hf = h as f64;
    let b = 1.0 + d * lambda1;
    if lambda == 1.0 {
        return 1.0 - ((d - 1.0) * lambda1 + 2.0) / (hf * b);
    }
    let a = lambda * lambda + (d - 1.0) * lambda1 * lambda + lambda1;
    // a - b, factored to keep precision near lambda = 1
    let a_minus_b = (lambda - 1.0) * (lambda + 1.0 + (d - 1.0) * lambda1);
    let l = lambda.ln();
    if lambda < 1.0 {
        // (a - lambda^h b) / ((1 - lambda^h) b)
        let t = (hf * l).exp_m1();
        (a_minus_b - b * t) / (-t * b)
    } else {
        // (b - a lambda^-h) / ((1 - lambda^-h) b)
        let s = (-hf * l).exp_m1();
        (-a_minus_b - a * s) / (-s * b)
    }
}

fn edge_child_counts(model: &TreeModel, e: &EdgeRef) -> Result<Vec<u32>> {
    // counts[k] = children of the path vertex at height k
    let mut counts = Vec::with_capacity(e.height());
    let mut cur = model.root_node();
    for &i in e.upper().path() {
        counts.push(model.node_children(cur));
        cur = model.child_node(cur, i);
    }
    Ok(counts)
}

/// `Psi(e)` as the product of `phi` along `[root, e+]`.
pub fn psi_product(model: &TreeModel, e: &EdgeRef, cfg: &CookieConfig) -> Result<f64> {
    let lambda1 = cfg.require_oerw("Psi")?;
    model.node_of(e.upper())?;
    let counts = edge_child_counts(model, e)?;
    Ok((1..=e.height() as u64)
        .map(|h| phi_raw(h, counts[h as usize - 1], lambda1, cfg.lambda()))
        .product())
}

/// `Psi(e)` from the closed-form product.
pub fn psi_closed(model: &TreeModel, e: &EdgeRef, cfg: &CookieConfig) -> Result<f64> {
    let lambda1 = cfg.require_oerw("Psi")?;
    model.node_of(e.upper())?;
    let counts = edge_child_counts(model, e)?;
    Ok((1..=e.height() as u64)
        .map(|h| closed_factor(h, counts[h as usize - 1], lambda1, cfg.lambda()))
        .product())
}

fn level_counts(model: &TreeModel, n_max: u64) -> Result<Vec<u32>> {
    (0..=n_max)
        .map(|n| {
            model.level_child_count(n).ok_or_else(|| {
                Error::unsupported(format!(
                    "`{}` is not spherically symmetric",
                    model.model_id()
                ))
            })
        })
        .collect()
}

/// `ln Psi` at every level `0..=n_max` of a spherically symmetric model.
pub fn log_psi_levels(model: &TreeModel, cfg: &CookieConfig, n_max: u64) -> Result<Vec<f64>> {
    let lambda1 = cfg.require_oerw("Psi")?;
    let x = level_counts(model, n_max)?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for h in 1..=n_max {
        acc += closed_factor(h, x[h as usize - 1], lambda1, cfg.lambda()).ln();
        out.push(acc);
    }
    Ok(out)
}

fn window_min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// `(alpha, beta)`: min/max over the window of the `n`-th root of
/// `prod_{i=1}^n (lambda^2 + (x_i - 1) lambda_1 lambda + lambda_1) / (1 + x_i lambda_1)`.
pub fn alpha_beta(
    model: &TreeModel,
    lambda1: f64,
    lambda: f64,
    n_max: u64,
    window: Window,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if n_max < 10 {
        return Err(Error::param("alpha/beta need n_max >= 10"));
    }
    let x = level_counts(model, n_max)?;
    let mut log_prod = vec![0.0f64; n_max as usize + 1];
    for i in 1..=n_max as usize {
        let xi = x[i] as f64;
        let f = (lambda * lambda + (xi - 1.0) * lambda1 * lambda + lambda1) / (1.0 + xi * lambda1);
        log_prod[i] = log_prod[i - 1] + f.ln();
    }
    Ok(window_min_max(
        window
            .levels(n_max, model.period())
            .into_iter()
            .map(|n| (log_prod[n as usize] / n as f64).exp()),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaEta {
    pub gamma: f64,
    pub eta: f64,
    /// Plain ratio proxies `S(n) / ln n` over the window.
    pub raw_gamma: f64,
    pub raw_eta: f64,
    /// First index of the sum; earlier terms had nonpositive log arguments.
    pub first_index: u64,
}

/// `(gamma, eta)` for `S(n) = -sum_i ln[1 - ((x_i - 1) lambda_1 + 2) / ((1 + x_i lambda_1) i)]`.
///
/// `S(n)` behaves like `c ln n + K`, and the constant `K` biases `S(n) / ln n`
/// by `K / ln n`, which is still about 0.1 at `n = 10^6`. The reported
/// `gamma`/`eta` are therefore min/max over the window of the log-slope
/// `(S(n) - S(m)) / (ln n - ln m)`, with `m` half the window start; the plain
/// ratios are kept as `raw_gamma`/`raw_eta`.
pub fn gamma_eta(model: &TreeModel, lambda1: f64, n_max: u64, window: Window) -> Result<GammaEta> {
    if !(lambda1.is_finite() && lambda1 >= 0.0) {
        return Err(Error::param(format!(
            "lambda_1 must be >= 0, got {lambda1}"
        )));
    }
    if n_max < 10 {
        return Err(Error::param("gamma/eta need n_max >= 10"));
    }
    let x = level_counts(model, n_max)?;
    let args: Vec<f64> = (1..=n_max as usize)
        .map(|i| {
            let xi = x[i] as f64;
            1.0 - ((xi - 1.0) * lambda1 + 2.0) / ((1.0 + xi * lambda1) * i as f64)
        })
        .collect();
    let last_bad = args.iter().rposition(|a| *a <= 0.0);
    let first_index = last_bad.map_or(1, |p| p as u64 + 2);
    // The bracket is at most 2 / i below 1, so only i <= 2 can be nonpositive.
    if first_index > 3 {
        return Err(Error::Domain {
            level: first_index - 1,
            detail: "nonpositive log argument beyond the initial terms".into(),
        });
    }
    let mut sums = vec![0.0f64; n_max as usize + 1];
    for i in 1..=n_max as usize {
        let term = if (i as u64) < first_index {
            0.0
        } else {
            -args[i - 1].ln()
        };
        sums[i] = sums[i - 1] + term;
    }
    let levels: Vec<u64> = window
        .levels(n_max, model.period())
        .into_iter()
        .filter(|&n| n >= 2)
        .collect();
    let (raw_gamma, raw_eta) =
        window_min_max(levels.iter().map(|&n| sums[n as usize] / (n as f64).ln()));
    let m = (levels[0] / 2).max(1);
    let (gamma, eta) = window_min_max(
        levels
            .iter()
            .filter(|&&n| n > m)
            .map(|&n| (sums[n as usize] - sums[m as usize]) / ((n as f64).ln() - (m as f64).ln())),
    );
    Ok(GammaEta {
        gamma,
        eta,
        raw_gamma,
        raw_eta,
        first_index,
    })
}

/// Bracket `(lower, upper)` for `RT` over sphere cutsets: the critical `g`
/// where `ln|T_n| + g ln Psi_n` changes sign, located by bisection for the
/// min and for the max over the window. `+inf` when `Psi` does not decay.
pub fn rt_bracket(
    model: &TreeModel,
    cfg: &CookieConfig,
    n_max: u64,
    window: Window,
) -> Result<(f64, f64)> {
    if n_max < 10 {
        return Err(Error::param("rt_bracket needs n_max >= 10"));
    }
    let log_psi = log_psi_levels(model, cfg, n_max)?;
    let log_t = model.log_sphere_sizes(n_max);
    let levels = window.levels(n_max, model.period());
    let (n0, n1) = (
        levels[0] as usize,
        *levels.last().expect("non-empty window") as usize,
    );
    let decay = log_psi[n0] - log_psi[n1];
    if !(decay > 1e-12 * log_psi[n1].abs().max(1.0)) && log_psi[n1].is_finite() {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let lower = rt_crossing(&log_t, &log_psi, &levels, |a, b| a.min(b), f64::INFINITY);
    let upper = rt_crossing(
        &log_t,
        &log_psi,
        &levels,
        |a, b| a.max(b),
        f64::NEG_INFINITY,
    );
    Ok((lower, upper))
}

fn rt_crossing(
    log_t: &[f64],
    log_psi: &[f64],
    levels: &[u64],
    pick: impl Fn(f64, f64) -> f64,
    init: f64,
) -> f64 {
    let score = |g: f64| {
        levels.iter().fold(init, |acc, &n| {
            let lp = log_psi[n as usize];
            let v = if g == 0.0 {
                log_t[n as usize]
            } else {
                log_t[n as usize] + g * lp
            };
            pick(acc, v)
        })
    };
    if score(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while score(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Recurrent,
    Transient,
    #[serde(rename = "critical_or_inconclusive")]
    Critical,
}

/// Which clause decided the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FiredRule {
    /// `lambda = 1` and `br > 1`: transient for every cookie vector.
    #[serde(rename = "a_br_above_one")]
    BrAboveOne,
    /// `lambda = 1`, once-excited, spherically symmetric: gamma/eta vs `br_r`.
    #[serde(rename = "b_gamma_eta_vs_br_r")]
    GammaEta,
    /// `lambda != 1`, once-excited, `br > 1`: alpha/beta vs `1/br`.
    #[serde(rename = "c_alpha_beta_vs_inv_br")]
    AlphaBeta,
    /// `RT` bracket vs 1.
    #[serde(rename = "d_rt_vs_one")]
    Rt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub n_max: u64,
    pub window: Window,
    /// Relative tolerance around each threshold.
    pub tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_max: 1000,
            window: Window::default(),
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub relative: f64,
    pub window_start_fraction: f64,
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_infinite() && *x > 0.0 => s.serialize_str("inf"),
        Some(x) if x.is_infinite() => s.serialize_str("-inf"),
        Some(x) => s.serialize_f64(*x),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub model_id: String,
    pub excitations: Vec<f64>,
    pub lambda: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub alpha: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub beta: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub gamma: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub eta: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub br: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub br_r: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub rt_lower: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub rt_upper: Option<f64>,
    pub verdict: Verdict,
    pub fired_rule: FiredRule,
    pub n_max: u64,
    pub tolerances: Tolerances,
    /// First summation index used for gamma/eta.
    pub gamma_eta_first_index: Option<u64>,
    pub notes: Vec<String>,
}

impl CriteriaReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn compare(
    low: f64,
    high: f64,
    threshold: f64,
    tol: f64,
    above: Verdict,
    below: Verdict,
) -> Verdict {
    // `low`/`high` are the liminf/limsup proxies of the deciding quantity.
    if low > threshold * (1.0 + tol) {
        above
    } else if high < threshold * (1.0 - tol) {
        below
    } else {
        Verdict::Critical
    }
}

/// Classifies the walk; rules are tried in the fixed order (a), (b), (c), (d).
pub fn classify(
    model: &TreeModel,
    cfg: &CookieConfig,
    opts: &ClassifyOptions,
) -> Result<CriteriaReport> {
    let (n_max, window, tol) = (opts.n_max, opts.window, opts.tol);
    if n_max < 10 {
        return Err(Error::param("classify needs n_max >= 10"));
    }
    let lambda = cfg.lambda();
    let mut notes = Vec::new();
    let br = model.branching_number(n_max, window).ok();
    let br_r = model.branching_ruin_number(n_max, window).ok();
    let ssym = model.is_spherically_symmetric();
    let lambda1 = cfg.oerw_lambda1();

    let (mut alpha, mut beta, mut gamma, mut eta, mut first) = (None, None, None, None, None);
    let (mut rt_lower, mut rt_upper) = (None, None);
    if let (true, Some(l1)) = (ssym, lambda1) {
        let (a, b) = alpha_beta(model, l1, lambda, n_max, window)?;
        alpha = Some(a);
        beta = Some(b);
        match gamma_eta(model, l1, n_max, window) {
            Ok(ge) => {
                gamma = Some(ge.gamma);
                eta = Some(ge.eta);
                first = Some(ge.first_index);
                if ge.first_index > 1 {
                    notes.push(format!(
                        "gamma/eta sums start at i = {} (earlier log arguments are nonpositive)",
                        ge.first_index
                    ));
                }
            }
            Err(e) => notes.push(format!("gamma/eta unavailable: {e}")),
        }
        let (lo, hi) = rt_bracket(model, cfg, n_max, window)?;
        rt_lower = Some(lo);
        rt_upper = Some(hi);
        notes.push("RT bracket uses sphere cutsets only".into());
    }

    let br_above_one = br.is_some_and(|b| b > 1.0 + tol);
    let (verdict, fired_rule) = if lambda == 1.0 && br_above_one {
        (Verdict::Transient, FiredRule::BrAboveOne)
    } else if lambda == 1.0 && ssym && lambda1.is_some() {
        let (Some(g), Some(h), Some(r)) = (gamma, eta, br_r) else {
            return Err(Error::unsupported(
                "gamma/eta or br_r unavailable for this model",
            ));
        };
        let v = if h < r * (1.0 - tol) {
            Verdict::Transient
        } else if g > r * (1.0 + tol) {
            Verdict::Recurrent
        } else {
            Verdict::Critical
        };
        (v, FiredRule::GammaEta)
    } else if lambda != 1.0 && ssym && lambda1.is_some() && br_above_one {
        let b = br.expect("checked above");
        let v = compare(
            alpha.expect("ssym"),
            beta.expect("ssym"),
            1.0 / b,
            tol,
            Verdict::Transient,
            Verdict::Recurrent,
        );
        if v == Verdict::Critical && matches!(model.kind(), crate::tree::TreeKind::BAry(_)) {
            notes.push(
                "threshold equality on a regular tree: recurrent at criticality \
                 (Basdevant-Singh)"
                    .into(),
            );
        }
        (v, FiredRule::AlphaBeta)
    } else if ssym && lambda1.is_some() {
        let v = compare(
            rt_lower.expect("ssym"),
            rt_upper.expect("ssym"),
            1.0,
            tol,
            Verdict::Transient,
            Verdict::Recurrent,
        );
        (v, FiredRule::Rt)
    } else {
        return Err(Error::unsupported(format!(
            "no criterion applies to `{}` with M = {} and lambda = {lambda}",
            model.model_id(),
            cfg.m()
        )));
    };

    Ok(CriteriaReport {
        model_id: model.model_id(),
        excitations: cfg.excitations().to_vec(),
        lambda,
        alpha,
        beta,
        gamma,
        eta,
        br,
        br_r,
        rt_lower,
        rt_upper,
        verdict,
        fired_rule,
        n_max,
        tolerances: Tolerances {
            relative: tol,
            window_start_fraction: window.start_fraction,
        },
        gamma_eta_first_index: first,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    /// Target accuracy `|alpha(lambda*) - 1/br|` for the analytic search.
    pub tol: f64,
    pub n_max: u64,
    pub window: Window,
    /// Monte Carlo search used for digging walks with `M >= 2`.
    pub mc: McSearch,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions {
            tol: 1e-9,
            n_max: 1000,
            window: Window::default(),
            mc: McSearch::default(),
        }
    }
}

/// Critical `lambda`. For once-excited walks (and `M = 0`) this solves
/// `alpha(lambda) = 1/br` by bisection on `(0, 1)`; for digging walks with
/// `M >= 2` it runs the Monte Carlo escape bisection.
pub fn critical_lambda(
    model: &TreeModel,
    excitations: &[f64],
    opts: &CriticalOptions,
) -> Result<f64> {
    match excitations {
        [] | [_] => {}
        _ if excitations.iter().all(|l| *l == 0.0) => {
            return walk::critical_lambda_mc(model, excitations, &opts.mc).map(|r| r.lambda);
        }
        _ => {
            return Err(Error::unsupported(
                "critical lambda for M >= 2 needs a digging walk (all lambda_i = 0)",
            ))
        }
    }
    let br = model.branching_number(opts.n_max, opts.window)?;
    if br <= 1.0 {
        return Err(Error::param(format!(
            "critical lambda needs br > 1, `{}` has br = {br}",
            model.model_id()
        )));
    }
    let target = 1.0 / br;
    let alpha = |lambda: f64| -> Result<f64> {
        let l1 = excitations.first().copied().unwrap_or(lambda);
        Ok(alpha_beta(model, l1, lambda, opts.n_max, opts.window)?.0 - target)
    };
    let (mut lo, mut hi) = (1e-9, 1.0);
    let (f_lo, f_hi) = (alpha(lo)?, alpha(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            detail: format!("alpha - 1/br is {f_lo} and {f_hi} at the ends"),
        });
    }
    let probes: Vec<f64> = (0..=16)
        .map(|k| alpha(lo + (hi - lo) * k as f64 / 16.0))
        .collect::<Result<_>>()?;
    if probes.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(Error::NonMonotone(
            "alpha is not increasing on (0, 1)".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alpha(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let root = 0.5 * (lo + hi);
    let miss = alpha(root)?.abs();
    if miss > opts.tol {
        return Err(Error::param(format!(
            "bisection converged to {root} with |alpha - 1/br| = {miss} > tol {}",
            opts.tol
        )));
    }
    Ok(root)
}
