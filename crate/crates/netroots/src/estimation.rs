//! Parameter estimation: noise rate, approximate EM for `alpha`, and the
//! sampling updates used inside Gibbs chains.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::forest::{Forest, Ordering};
use crate::gibbs::seq::SeqState;
use crate::graph::LabeledGraph;
use crate::likelihood::log_likelihood_forest;
use crate::params::ModelParams;

/// Rate of the exponential priors on `alpha0` and the seq parameters.
pub const PRIOR_RATE: f64 = 0.1;

/// Plug-in noise rate `(m - (n-1)) / (n(n-1)/2 - (n-1))`.
pub fn estimate_theta(n: usize, m: usize) -> Result<f64> {
    if n < 1 || m + 1 < n {
        return Err(Error::InvalidParams(format!("need m >= n-1, got n={n}, m={m}")));
    }
    let pairs = n as u64 * (n as u64 - 1) / 2;
    let free = pairs - (n as u64 - 1);
    if free == 0 {
        return Ok(0.0);
    }
    Ok(((m + 1 - n) as f64 / free as f64).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmConfig {
    pub init: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Upper end of the search interval; a maximizer there means uniform attachment.
    pub cap: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            init: 1.0,
            tol: 1e-3,
            max_iter: 500,
            cap: 200.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EmResult {
    /// `f64::INFINITY` means uniform attachment.
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Normalized expected counts `W(j)` of nodes with tree degree above `j`,
/// indexed from `j = 1` (so `w[0]` is `W(1)`).
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeTailWeights {
    pub w: Vec<f64>,
    pub n: usize,
}

impl DegreeTailWeights {
    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Limiting log-probability that a node has tree degree `s` (`s >= 1`).
pub fn log_limit_degree_prob(s: usize, alpha: f64) -> f64 {
    if alpha.is_infinite() {
        return -(s as f64) * std::f64::consts::LN_2;
    }
    let mut lp = (2.0 + alpha).ln() - (3.0 + 2.0 * alpha).ln();
    for j in 1..s {
        let j = j as f64;
        lp += (j + alpha).ln() - (j + 3.0 + 2.0 * alpha).ln();
    }
    lp
}

fn log_binom_pmf(trials: usize, k: usize, p: f64) -> f64 {
    if k > trials {
        return f64::NEG_INFINITY;
    }
    let lc = ln_gamma(trials as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((trials - k) as f64 + 1.0);
    let term = |count: usize, q: f64| if count == 0 { 0.0 } else { count as f64 * q.ln() };
    lc + term(k, p) + term(trials - k, 1.0 - p)
}

/// E-step: posterior tail weights given observed degrees, normalized to sum to `n - 2`.
pub fn degree_tail_weights(degrees: &[usize], theta: f64, alpha_prev: f64) -> DegreeTailWeights {
    let n = degrees.len();
    let max_k = degrees.iter().copied().max().unwrap_or(0);
    let mut count = vec![0usize; max_k + 1];
    for &k in degrees {
        count[k] += 1;
    }
    let mut w = vec![0.0; max_k.saturating_sub(1)];
    let prior: Vec<f64> = (0..=max_k)
        .map(|s| if s == 0 { f64::NEG_INFINITY } else { log_limit_degree_prob(s, alpha_prev) })
        .collect();
    for k in 1..=max_k {
        if count[k] == 0 || k < 2 {
            continue;
        }
        let lp: Vec<f64> = (1..=k).map(|s| log_binom_pmf(n - s, k - s, theta) + prior[s]).collect();
        let post = crate::util::normalize_log(&lp);
        // tail[j] = P(D > j) for j = 1..k-1
        let mut tail = 0.0;
        for j in (1..k).rev() {
            tail += post[j]; // post index j is s = j + 1
            w[j - 1] += count[k] as f64 * tail;
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 && n >= 2 {
        let scale = (n as f64 - 2.0) / total;
        w.iter_mut().for_each(|x| *x *= scale);
    }
    DegreeTailWeights { w, n }
}

/// M-step objective `sum_j ln(j + a) W(j) - sum_{k=3}^n ln(2(k-2) + (k-1) a)`.
pub fn m_objective(w: &DegreeTailWeights, alpha: f64) -> f64 {
    let gain: f64 = w.w.iter().enumerate().map(|(i, &x)| ((i + 1) as f64 + alpha).ln() * x).sum();
    let cost: f64 = (3..=w.n).map(|k| (2.0 * (k as f64 - 2.0) + (k as f64 - 1.0) * alpha).ln()).sum();
    gain - cost
}

/// Golden-section maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // the ends are never evaluated by the bracket, so check them explicitly
    [(lo, f(lo)), (mid, f(mid)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
        .0
}

fn m_step(w: &DegreeTailWeights, cap: f64) -> f64 {
    let a = golden_section_max(|a| m_objective(w, a), 0.0, cap, 1e-6);
    if a >= cap - 1e-3 {
        f64::INFINITY
    } else {
        a
    }
}

/// Approximate EM estimate of `alpha` with `beta = 1`.
pub fn em_estimate_alpha(g: &LabeledGraph, theta: f64, config: &EmConfig) -> EmResult {
    let degrees: Vec<usize> = (0..g.n()).map(|u| g.degree(u)).collect();
    em_from_degrees(&degrees, theta, config)
}

/// EM on a degree sequence.
pub fn em_from_degrees(degrees: &[usize], theta: f64, config: &EmConfig) -> EmResult {
    if degrees.len() < 3 || degrees.iter().all(|&d| d <= 1) {
        return EmResult {
            alpha: f64::INFINITY,
            iterations: 0,
            converged: true,
        };
    }
    let mut alpha = config.init;
    for it in 1..=config.max_iter {
        let w = degree_tail_weights(degrees, theta, alpha);
        let next = m_step(&w, config.cap);
        let done = if next.is_infinite() || alpha.is_infinite() {
            next == alpha
        } else {
            (next - alpha).abs() < config.tol
        };
        alpha = next;
        if done {
            return EmResult {
                alpha,
                iterations: it,
                converged: true,
            };
        }
    }
    EmResult {
        alpha,
        iterations: config.max_iter,
        converged: false,
    }
}

/// One Gibbs draw of `alpha0` given `k` trees on `n` nodes, under an
/// `Exponential(0.1)` prior.
///
/// Roots are created with probability `alpha0 / (alpha0 + c t)` where
/// `c = 2b + a`, so with `g = alpha0 / c` the likelihood is
/// `g^(k-1) Gamma(g+1) / Gamma(g+n)`. A Beta auxiliary variable makes the
/// conditional of `g` a Gamma.
pub fn sample_alpha0<R: Rng + ?Sized>(current: f64, k: usize, n: usize, params: &ModelParams, rng: &mut R) -> f64 {
    let (a, b) = params.attach();
    let c = 2.0 * b + a;
    let rate = PRIOR_RATE * c;
    if n <= 1 {
        let g: f64 = Gamma::new(1.0, 1.0 / rate).unwrap().sample(rng);
        return (c * g).max(f64::MIN_POSITIVE);
    }
    let gamma = current / c;
    let eta: f64 = Beta::new(gamma + 1.0, (n - 1) as f64).unwrap().sample(rng);
    let eta = eta.max(f64::MIN_POSITIVE);
    let g: f64 = Gamma::new(k.max(1) as f64, 1.0 / (rate - eta.ln())).unwrap().sample(rng);
    (c * g).max(f64::MIN_POSITIVE)
}

/// Proposal scale of the log-normal Metropolis steps.
pub const SEQ_STEP: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqParam {
    Alpha,
    Theta,
    AlphaTilde,
}

fn get(p: &ModelParams, which: SeqParam) -> f64 {
    match which {
        SeqParam::Alpha => p.alpha,
        SeqParam::Theta => p.theta.unwrap_or(0.0),
        SeqParam::AlphaTilde => p.alpha_tilde.unwrap_or(0.0),
    }
}

fn set(p: &mut ModelParams, which: SeqParam, x: f64) {
    match which {
        SeqParam::Alpha => p.alpha = x,
        SeqParam::Theta => p.theta = Some(x),
        SeqParam::AlphaTilde => p.alpha_tilde = Some(x),
    }
}

/// Log acceptance ratio for moving one parameter to `x`, using the cached
/// noise terms for the current value. Leaves `st` holding the proposed terms.
pub fn seq_param_log_ratio(
    g: &LabeledGraph,
    f: &Forest,
    ord: &Ordering,
    st: &mut SeqState,
    params: &ModelParams,
    which: SeqParam,
    x: f64,
) -> f64 {
    let cur = get(params, which);
    let mut prop = params.clone();
    set(&mut prop, which, x);
    let delta = if which == SeqParam::Alpha {
        log_likelihood_forest(f, &prop) - log_likelihood_forest(f, params)
    } else {
        let old = st.total();
        st.refresh(g, f, ord, &prop);
        crate::gibbs::seq::log_ratio(st.total(), old)
    };
    delta - PRIOR_RATE * (x - cur) + (x / cur).ln()
}

/// One log-normal Metropolis step each for `alpha`, `theta` and `alpha_tilde`.
/// Parameters sitting at 0 or at the uniform sentinel are left alone.
pub fn seq_param_update<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &Forest,
    ord: &Ordering,
    st: &mut SeqState,
    params: &mut ModelParams,
    rng: &mut R,
) {
    for which in [SeqParam::Alpha, SeqParam::Theta, SeqParam::AlphaTilde] {
        let cur = get(params, which);
        if cur == 0.0 || !cur.is_finite() {
            continue;
        }
        let z: f64 = StandardNormal.sample(rng);
        let x = cur * (SEQ_STEP * z).exp();
        let saved = (st.ell.clone(), st.noise.clone());
        let lr = seq_param_log_ratio(g, f, ord, st, params, which, x);
        if lr >= 0.0 || rng.random::<f64>() < lr.exp() {
            set(params, which, x);
        } else if which != SeqParam::Alpha {
            st.ell = saved.0;
            st.noise = saved.1;
        }
    }
}
