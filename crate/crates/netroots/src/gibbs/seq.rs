//! Metropolis moves and tree updates for the sequential-noise variants.
//!
//! The noise log-likelihood splits into per-node terms: `ell[w]` collects the
//! factors of every pair `(w, x)` where `x` arrives after `w`. Each term is a
//! product over arrival slots with a piecewise-constant tree degree, so it is
//! evaluated with a handful of log-gamma calls instead of a slot-by-slot loop.

use std::sync::Arc;

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::forest::{Forest, Ordering};
use crate::graph::LabeledGraph;
use crate::params::{ModelParams, Variant};
use crate::util::sample_log_weighted;

use super::attach_log_weight;

/// Degrees below this get a prefix-sum table of `log(1 - q)` per slot.
const TABLE_DEGREES: usize = 64;

/// Noise probabilities `q = c(d) / (A s - B)` for 1-based arrival slot `s`.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    theta: f64,
    alpha_t: f64,
    beta_t: f64,
    a: f64,
    b: f64,
    // row d, entry t: sum of log(1 - q) over unsaturated slots < t
    table: Arc<Vec<f64>>,
    rows: usize,
    width: usize,
}

impl NoiseModel {
    pub fn new(params: &ModelParams) -> Self {
        let (theta, alpha_t, beta_t) = params.noise();
        NoiseModel {
            theta,
            alpha_t,
            beta_t,
            a: 2.0 * beta_t + alpha_t,
            b: 4.0 * beta_t + alpha_t,
            table: Arc::new(Vec::new()),
            rows: 0,
            width: 0,
        }
    }

    /// As [`NoiseModel::new`], with lookup tables for `n` slots.
    pub fn with_len(params: &ModelParams, n: usize) -> Self {
        let mut m = Self::new(params);
        let rows = n.min(TABLE_DEGREES);
        let width = n + 1;
        let mut table = vec![0.0; rows * width];
        for d in 0..rows {
            let row = &mut table[d * width..(d + 1) * width];
            let mut acc = 0.0;
            for t in 0..n {
                let q = m.q(t, d);
                if t >= 2 && q < 1.0 {
                    acc += (-q).ln_1p();
                }
                row[t + 1] = acc;
            }
        }
        m.table = Arc::new(table);
        m.rows = rows;
        m.width = width;
        m
    }

    #[inline]
    fn c(&self, d: usize) -> f64 {
        self.theta * (self.beta_t * d as f64 + self.alpha_t)
    }

    /// Noise probability at 0-based slot `t` (`t >= 2`) for tree degree `d`, capped at 1.
    #[inline]
    pub fn q(&self, t: usize, d: usize) -> f64 {
        let s = (t + 1) as f64;
        (self.c(d) / (self.a * s - self.b)).min(1.0)
    }

    /// First 0-based slot at which `q < 1` for degree `d`.
    #[inline]
    fn first_unsaturated(&self, d: usize) -> usize {
        // q < 1 iff s > (B + c) / A
        let s = ((self.b + self.c(d)) / self.a).floor() as i64 + 1;
        (s - 1).max(0) as usize
    }

    /// `sum_{t=lo}^{hi} log(1 - q(t, d))` over unsaturated 0-based slots.
    fn sum_log1mq(&self, lo: usize, hi: usize, d: usize) -> f64 {
        if lo > hi {
            return 0.0;
        }
        let c = self.c(d);
        if c == 0.0 {
            return 0.0;
        }
        if d < self.rows && hi + 1 < self.width {
            let row = d * self.width;
            return self.table[row + hi + 1] - self.table[row + lo];
        }
        // sum_{s=sa}^{sb} log(A s - E) = len log A + lnG(sb + 1 - E/A) - lnG(sa - E/A)
        let (sa, sb) = ((lo + 1) as f64, (hi + 1) as f64);
        let num_shift = (self.b + c) / self.a;
        let den_shift = self.b / self.a;
        (ln_gamma(sb + 1.0 - num_shift) - ln_gamma(sa - num_shift)) - (ln_gamma(sb + 1.0 - den_shift) - ln_gamma(sa - den_shift))
    }

    /// Log-factor of the pair at slot `t` for degree `d`, edge present or not.
    #[inline]
    pub fn pair_log(&self, t: usize, d: usize, edge: bool) -> f64 {
        let q = self.q(t, d);
        if edge {
            q.ln()
        } else {
            (-q).ln_1p()
        }
    }

    /// `log q - log(1 - q)` at an unsaturated slot, for a graph edge.
    #[inline]
    fn edge_correction(&self, t: usize, d: usize) -> f64 {
        let s = (t + 1) as f64;
        let c = self.c(d);
        c.ln() - (self.a * s - self.b - c).ln()
    }

    /// Noise log-likelihood of node `w` at 0-based position `p`.
    ///
    /// `earlier_tree` counts tree neighbours before `p`; `later_tree` holds
    /// the sorted positions of tree neighbours after `p`; `later_g` holds the
    /// positions after `p` of graph neighbours that are not tree neighbours.
    pub fn node_loglik(&self, p: usize, n: usize, earlier_tree: usize, later_tree: &[usize], later_g: &[usize]) -> f64 {
        let lo = (p + 1).max(2);
        if lo >= n {
            return 0.0;
        }
        if self.theta == 0.0 {
            // only the tree may be present; any extra edge has probability 0
            return if later_g.iter().any(|&t| t >= 2) { f64::NEG_INFINITY } else { 0.0 };
        }
        let mut total = 0.0;
        // segments of constant degree: d = earlier_tree + i on (later_tree[i-1], later_tree[i]]
        let mut seg_lo = lo;
        let mut d = earlier_tree;
        let mut idx = 0;
        loop {
            // later_tree entries below lo only raise the degree
            while idx < later_tree.len() && later_tree[idx] < seg_lo {
                idx += 1;
                d = earlier_tree + idx;
            }
            let seg_hi = if idx < later_tree.len() { later_tree[idx] } else { n - 1 };
            let sat_end = self.first_unsaturated(d);
            if sat_end > seg_lo {
                // saturated slots: only tree or graph partners are possible
                let hi = seg_hi.min(sat_end - 1);
                let slots = hi + 1 - seg_lo;
                let covered = later_tree.iter().filter(|&&t| t >= seg_lo && t <= hi).count()
                    + later_g.iter().filter(|&&t| t >= seg_lo && t <= hi).count();
                if covered < slots {
                    return f64::NEG_INFINITY;
                }
            }
            let un_lo = seg_lo.max(sat_end);
            if un_lo <= seg_hi {
                total += self.sum_log1mq(un_lo, seg_hi, d);
            }
            if seg_hi >= n - 1 {
                break;
            }
            seg_lo = seg_hi + 1;
        }
        // tree partners contribute nothing; remove their base factor
        for (i, &t) in later_tree.iter().enumerate() {
            let d = earlier_tree + i;
            if t >= lo && t >= self.first_unsaturated(d) {
                total -= self.sum_log1mq(t, t, d);
            }
        }
        for &t in later_g {
            if t < lo {
                continue;
            }
            let d = earlier_tree + later_tree.partition_point(|&x| x < t);
            if t >= self.first_unsaturated(d) {
                total += self.edge_correction(t, d);
            }
        }
        total
    }
}

#[inline]
fn tree_adjacent(f: &Forest, x: usize, y: usize) -> bool {
    f.parent(x) == Some(y) || f.parent(y) == Some(x)
}

fn tree_neighbors(f: &Forest, w: usize) -> impl Iterator<Item = usize> + '_ {
    f.parent(w).into_iter().chain(f.children(w).iter().copied())
}

/// Reusable buffers for [`node_ell`].
#[derive(Default, Clone, Debug)]
pub struct Scratch {
    later_tree: Vec<usize>,
    later_g: Vec<usize>,
}

/// `ell[w]` under the current forest and ordering, optionally treating `add`
/// as an extra tree neighbour of `w` and `remove` as not one.
#[allow(clippy::too_many_arguments)]
pub fn node_ell(
    g: &LabeledGraph,
    f: &Forest,
    ord: &Ordering,
    noise: &NoiseModel,
    w: usize,
    add: Option<usize>,
    remove: Option<usize>,
    sc: &mut Scratch,
) -> f64 {
    let p = ord.position(w);
    let mut earlier = 0;
    sc.later_tree.clear();
    sc.later_g.clear();
    let is_tree = |x: usize| (Some(x) == add) || (Some(x) != remove && tree_adjacent(f, w, x));
    for x in tree_neighbors(f, w).chain(add) {
        if Some(x) == remove {
            continue;
        }
        let px = ord.position(x);
        if px < p {
            earlier += 1;
        } else {
            sc.later_tree.push(px);
        }
    }
    sc.later_tree.sort_unstable();
    for &x in g.neighbors(w) {
        let px = ord.position(x);
        if px > p && !is_tree(x) {
            sc.later_g.push(px);
        }
    }
    noise.node_loglik(p, ord.len(), earlier, &sc.later_tree, &sc.later_g)
}

/// Noise log-likelihood by direct enumeration of every ordered pair.
pub fn naive_noise_loglik(g: &LabeledGraph, f: &Forest, ord: &Ordering, params: &ModelParams) -> f64 {
    let noise = NoiseModel::new(params);
    let n = ord.len();
    let mut total = 0.0;
    for k in 2..n {
        let v = ord.node_at(k);
        for j in 0..k {
            let w = ord.node_at(j);
            if tree_adjacent(f, w, v) {
                continue;
            }
            let d = tree_neighbors(f, w).filter(|&x| ord.position(x) < k).count();
            total += noise.pair_log(k, d, g.has_edge(w, v));
        }
    }
    total
}

/// Log-probability that the observed graph keeps exactly the tree edges it
/// contains (deletion variant); zero or `-inf` otherwise.
pub fn deletion_loglik(g: &LabeledGraph, f: &Forest, params: &ModelParams) -> f64 {
    let eta = params.eta();
    let mut total = 0.0;
    for (u, p) in f.edges() {
        let present = g.has_edge(u, p);
        total += match params.variant {
            Variant::SeqPaperStar => {
                if present {
                    (-eta).ln_1p()
                } else {
                    eta.ln()
                }
            }
            _ => {
                if present {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
    }
    total
}

/// Acceptance counters for the Metropolis moves.
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct SeqStats {
    pub swaps_proposed: u64,
    pub swaps_accepted: u64,
    pub shuffles_proposed: u64,
    pub shuffles_accepted: u64,
}

/// Per-chain cache of node noise terms.
#[derive(Clone, Debug)]
pub struct SeqState {
    pub ell: Vec<f64>,
    pub noise: NoiseModel,
    pub stats: SeqStats,
    sc: Scratch,
}

impl SeqState {
    pub fn new(g: &LabeledGraph, f: &Forest, ord: &Ordering, params: &ModelParams) -> Self {
        let mut s = SeqState {
            ell: vec![0.0; f.n()],
            noise: NoiseModel::with_len(params, f.n()),
            stats: SeqStats::default(),
            sc: Scratch::default(),
        };
        s.refresh(g, f, ord, params);
        s
    }

    /// Recomputes every cached term, e.g. after a parameter change.
    pub fn refresh(&mut self, g: &LabeledGraph, f: &Forest, ord: &Ordering, params: &ModelParams) {
        self.noise = NoiseModel::with_len(params, f.n());
        for w in 0..f.n() {
            self.ell[w] = node_ell(g, f, ord, &self.noise, w, None, None, &mut self.sc);
        }
    }

    pub fn total(&self) -> f64 {
        self.ell.iter().sum()
    }
}

fn sum_with_inf(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |a, b| a + b)
}

/// `log(new / old)` from partial sums, treating impossible states consistently.
pub(crate) fn log_ratio(new: f64, old: f64) -> f64 {
    if new == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if old == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        new - old
    }
}

/// True when swapping positions `j < k` keeps the ordering a history of `f`.
pub fn swap_is_valid(f: &Forest, ord: &Ordering, j: usize, k: usize) -> bool {
    let u = ord.node_at(j);
    let v = ord.node_at(k);
    // u moves later: every child of u must still come after it
    if f.children(u).iter().any(|&c| ord.position(c) <= k) {
        return false;
    }
    // v moves earlier: its parent must precede position j
    match f.parent(v) {
        Some(p) => ord.position(p) < j,
        None => false,
    }
}

/// Swap proposal bookkeeping: nodes whose term is recomputed and nodes
/// whose term changes only at slots `j` and `k`.
struct SwapPlan {
    full: Vec<usize>,
    slot: Vec<usize>,
}

fn swap_plan(g: &LabeledGraph, f: &Forest, ord: &Ordering, j: usize, k: usize) -> SwapPlan {
    let u = ord.node_at(j);
    let v = ord.node_at(k);
    let mut full = vec![u, v];
    for x in [f.parent(u), f.parent(v)].into_iter().flatten() {
        if !full.contains(&x) {
            full.push(x);
        }
    }
    let mut slot: Vec<usize> = g
        .neighbors(u)
        .iter()
        .chain(g.neighbors(v))
        .copied()
        .filter(|&w| !full.contains(&w) && ord.position(w) < k)
        .collect();
    slot.sort_unstable();
    slot.dedup();
    SwapPlan { full, slot }
}

/// Sum of the factors of `w` at slots `j` and `k` with their current occupants.
fn slot_terms(g: &LabeledGraph, f: &Forest, ord: &Ordering, noise: &NoiseModel, w: usize, j: usize, k: usize) -> f64 {
    let pw = ord.position(w);
    let mut total = 0.0;
    for t in [j, k] {
        if t <= pw || t < 2 {
            continue;
        }
        let x = ord.node_at(t);
        if tree_adjacent(f, w, x) {
            continue;
        }
        let d = tree_neighbors(f, w).filter(|&y| ord.position(y) < t).count();
        total += noise.pair_log(t, d, g.has_edge(w, x));
    }
    total
}

/// Evaluates the swap of positions `j < k`: returns `None` for an invalid
/// swap, otherwise the log acceptance ratio and the new terms.
fn evaluate_swap(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    j: usize,
    k: usize,
) -> Option<(f64, SwapPlan, Vec<f64>, Vec<f64>)> {
    if !swap_is_valid(f, ord, j, k) {
        return None;
    }
    let plan = swap_plan(g, f, ord, j, k);
    let old_full = sum_with_inf(plan.full.iter().map(|&x| st.ell[x]));
    let old_slots: Vec<f64> = plan.slot.iter().map(|&w| slot_terms(g, f, ord, &st.noise, w, j, k)).collect();
    ord.swap_positions(j, k);
    let new_full: Vec<f64> = plan
        .full
        .iter()
        .map(|&x| node_ell(g, f, ord, &st.noise, x, None, None, &mut st.sc))
        .collect();
    let new_slots: Vec<f64> = plan.slot.iter().map(|&w| slot_terms(g, f, ord, &st.noise, w, j, k)).collect();
    ord.swap_positions(j, k);
    let old = old_full + sum_with_inf(old_slots.iter().copied());
    let new = sum_with_inf(new_full.iter().copied()) + sum_with_inf(new_slots.iter().copied());
    let slot_delta: Vec<f64> = old_slots.iter().zip(&new_slots).map(|(o, n)| n - o).collect();
    Some((log_ratio(new, old), plan, new_full, slot_delta))
}

/// Log acceptance ratio of swapping positions `j < k` (0-based, `j >= 1`),
/// or `None` if the swap breaks the history property. Does not change state.
pub fn transposition_log_ratio(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    j: usize,
    k: usize,
) -> Option<f64> {
    evaluate_swap(g, f, ord, st, j, k).map(|r| r.0)
}

/// One transposition proposal on a uniformly chosen pair of non-root positions.
pub fn seq_transposition_update<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    rng: &mut R,
) -> bool {
    let n = ord.len();
    if n < 3 {
        return false;
    }
    let a = rng.random_range(1..n);
    let mut b = rng.random_range(1..n - 1);
    if b >= a {
        b += 1;
    }
    try_swap(g, f, ord, st, a.min(b), a.max(b), rng)
}

/// Transposition of a position inside the shuffled prefix (but not the first)
/// with a later one. The pair is drawn independently of the state, so the
/// proposal is symmetric.
pub fn seq_prefix_transposition_update<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    k0: usize,
    rng: &mut R,
) -> bool {
    let n = ord.len();
    let k = k0.min(n - 1);
    if n < 3 || k < 2 {
        return false;
    }
    let j = rng.random_range(1..k);
    let pos = rng.random_range(j + 1..n);
    try_swap(g, f, ord, st, j, pos, rng)
}

fn try_swap<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    j: usize,
    k: usize,
    rng: &mut R,
) -> bool {
    st.stats.swaps_proposed += 1;
    let Some((lr, plan, new_full, slot_delta)) = evaluate_swap(g, f, ord, st, j, k) else {
        return false;
    };
    if !(lr >= 0.0 || rng.random::<f64>().ln() < lr) {
        return false;
    }
    ord.swap_positions(j, k);
    for (&x, &val) in plan.full.iter().zip(&new_full) {
        st.ell[x] = val;
    }
    for (&w, &dl) in plan.slot.iter().zip(&slot_delta) {
        if st.ell[w].is_finite() && dl.is_finite() {
            st.ell[w] += dl;
        } else {
            st.ell[w] = node_ell(g, f, ord, &st.noise, w, None, None, &mut st.sc);
        }
    }
    st.stats.swaps_accepted += 1;
    true
}

/// True when every prefix of the first `k` positions is connected in the tree.
fn prefix_connected(f: &Forest, ord: &Ordering, k: usize) -> bool {
    (1..k).all(|i| {
        let x = ord.node_at(i);
        tree_neighbors(f, x).any(|y| ord.position(y) < i)
    })
}

/// Proposes a uniform shuffle of the first `k0` positions; on acceptance the
/// tree is rerooted at the new first node.
pub fn seq_root_shuffle_update<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &mut Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    k0: usize,
    rng: &mut R,
) -> bool {
    let k = k0.min(ord.len());
    if k < 2 {
        return false;
    }
    st.stats.shuffles_proposed += 1;
    let old_nodes: Vec<usize> = ord.nodes()[..k].to_vec();
    let mut new_nodes = old_nodes.clone();
    crate::util::shuffle(&mut new_nodes, rng);
    for (i, &x) in new_nodes.iter().enumerate() {
        ord.set(i, x);
    }
    if !prefix_connected(f, ord, k) {
        restore(ord, &old_nodes);
        return false;
    }
    let old = sum_with_inf(old_nodes.iter().map(|&x| st.ell[x]));
    let new_vals: Vec<f64> = old_nodes
        .iter()
        .map(|&x| node_ell(g, f, ord, &st.noise, x, None, None, &mut st.sc))
        .collect();
    let lr = log_ratio(sum_with_inf(new_vals.iter().copied()), old);
    if lr >= 0.0 || rng.random::<f64>().ln() < lr {
        for (&x, &val) in old_nodes.iter().zip(&new_vals) {
            st.ell[x] = val;
        }
        f.reroot(ord.node_at(0));
        st.stats.shuffles_accepted += 1;
        true
    } else {
        restore(ord, &old_nodes);
        false
    }
}

fn restore(ord: &mut Ordering, nodes: &[usize]) {
    for (i, &x) in nodes.iter().enumerate() {
        ord.set(i, x);
    }
}

/// First-node probabilities given everything except the arrangement of the
/// first `k0` positions, by summing over all valid arrangements.
pub fn seq_first_node_distribution(
    g: &LabeledGraph,
    f: &Forest,
    ord: &mut Ordering,
    st: &mut SeqState,
    k0: usize,
) -> Vec<f64> {
    let n = ord.len();
    let k = k0.min(n);
    let mut out = vec![0.0; n];
    if k == 0 {
        return out;
    }
    let orig: Vec<usize> = ord.nodes()[..k].to_vec();
    let mut arr = orig.clone();
    let mut firsts = Vec::new();
    let mut logw = Vec::new();
    let mut sc = std::mem::take(&mut st.sc);
    permute(&mut arr, 0, &mut |perm: &[usize]| {
        for (i, &x) in perm.iter().enumerate() {
            ord.set(i, x);
        }
        if !prefix_connected(f, ord, k) {
            return;
        }
        let lw: f64 = perm.iter().map(|&x| node_ell(g, f, ord, &st.noise, x, None, None, &mut sc)).sum();
        firsts.push(perm[0]);
        logw.push(lw);
    });
    st.sc = sc;
    restore(ord, &orig);
    let p = crate::util::normalize_log(&logw);
    for (x, pr) in firsts.into_iter().zip(p) {
        out[x] += pr;
    }
    out
}

fn permute(arr: &mut [usize], i: usize, visit: &mut dyn FnMut(&[usize])) {
    if i == arr.len() {
        visit(arr);
        return;
    }
    for j in i..arr.len() {
        arr.swap(i, j);
        permute(arr, i + 1, visit);
        arr.swap(i, j);
    }
}

/// Resamples the parent of every non-first node given the ordering.
///
/// Candidates are earlier graph neighbours, or every earlier node for the
/// deletion variant, whose tree edge may be missing from the graph.
pub fn seq_sweep_tree<R: Rng + ?Sized>(
    g: &LabeledGraph,
    f: &mut Forest,
    ord: &Ordering,
    st: &mut SeqState,
    params: &ModelParams,
    rng: &mut R,
) {
    let n = f.n();
    let star = params.variant == Variant::SeqPaperStar;
    let eta = params.eta();
    let mut cands: Vec<usize> = Vec::new();
    let mut logw: Vec<f64> = Vec::new();
    let mut base: Vec<f64> = Vec::new();
    let mut with: Vec<f64> = Vec::new();
    for t in 1..n {
        let v = ord.node_at(t);
        let old = f.detach(v).expect("non-first node has a parent");
        cands.clear();
        if star {
            cands.extend((0..t).map(|i| ord.node_at(i)));
        } else {
            cands.extend(g.neighbors(v).iter().copied().filter(|&w| ord.position(w) < t));
        }
        logw.clear();
        base.clear();
        with.clear();
        for &w in &cands {
            let b = if w == old {
                node_ell(g, f, ord, &st.noise, w, None, None, &mut st.sc)
            } else {
                st.ell[w]
            };
            let a = node_ell(g, f, ord, &st.noise, w, Some(v), None, &mut st.sc);
            let mut lw = attach_log_weight(f, w, params) + log_ratio(a, b);
            if star {
                lw += if g.has_edge(w, v) { (-eta).ln_1p() } else { eta.ln() };
            }
            base.push(b);
            with.push(a);
            logw.push(lw);
        }
        // a candidate whose own term is impossible without v must be chosen
        let forced: Vec<usize> = (0..cands.len()).filter(|&i| logw[i] == f64::INFINITY).collect();
        let i = if forced.is_empty() {
            sample_log_weighted(&logw, rng)
        } else {
            forced[rng.random_range(0..forced.len())]
        };
        let w = cands[i];
        f.attach(v, w);
        if w != old {
            if let Some(io) = cands.iter().position(|&x| x == old) {
                st.ell[old] = base[io];
            } else {
                st.ell[old] = node_ell(g, f, ord, &st.noise, old, None, None, &mut st.sc);
            }
        }
        st.ell[w] = with[i];
    }
    debug_assert!(ord.is_history_of(f));
}
