//! Gibbs samplers over (spanning forest, arrival ordering) and chain orchestration.

pub mod seq;

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{sample_alpha0, seq_param_update};
use crate::forest::{uniform_spanning_forest, Forest, Ordering};
use crate::graph::LabeledGraph;
use crate::history::{history_given_roots, resample_roots, root_probabilities, sample_history};
use crate::inference::{hellinger, RootAccumulator, RootDistribution};
use crate::params::{ModelParams, Variant};
use crate::util::sample_weighted;

use seq::{SeqState, SeqStats};

/// Which sampler drives the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Ordering stage then forest stage.
    Standard,
    /// Root-set stage then subtree grafts, orderings integrated out.
    Collapsed,
    /// Metropolis ordering moves and tree updates for sequential noise.
    Seq,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "collapsed" => Ok(Mode::Collapsed),
            "seq" => Ok(Mode::Seq),
            _ => Err(Error::InvalidParams(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burn_in: usize,
    /// Total sweeps per chain, burn-in included.
    pub max_sweeps: usize,
    /// Post-burn-in samples per chain before the convergence check may stop the run.
    pub min_samples: usize,
    pub convergence_tol: f64,
    pub stop_at_convergence: bool,
    pub num_chains: usize,
    pub mode: Mode,
    /// Transposition proposals per seq sweep; `None` means four per node.
    pub transpositions: Option<usize>,
    /// Length of the shuffled prefix in seq root moves.
    pub k0: usize,
    /// Rounds of (prefix transposition, prefix shuffle) per seq sweep.
    pub root_moves: usize,
    pub sample_alpha0: bool,
    pub sample_seq_params: bool,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 50,
            max_sweeps: 10_000,
            min_samples: 1,
            convergence_tol: 0.1,
            stop_at_convergence: true,
            num_chains: 2,
            mode: Mode::Standard,
            transpositions: None,
            k0: 5,
            root_moves: 20,
            sample_alpha0: false,
            sample_seq_params: false,
            seed: 0,
        }
    }
}

impl ChainConfig {
    /// Defaults for a variant: tolerance 0.1 with one root, 0.01 with several.
    pub fn for_params(params: &ModelParams) -> Self {
        ChainConfig {
            convergence_tol: if params.variant.is_multi_root() { 0.01 } else { 0.1 },
            mode: if params.variant.is_seq() { Mode::Seq } else { Mode::Standard },
            ..ChainConfig::default()
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.burn_in >= self.max_sweeps {
            return bad("burn_in must be smaller than max_sweeps");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be > 0");
        }
        if self.num_chains < 2 {
            return bad("at least two chains are required");
        }
        if (self.mode == Mode::Seq) != params.variant.is_seq() {
            return bad("seq mode is required exactly for the seq variants");
        }
        if self.k0 < 2 {
            // transpositions never touch the first slot
            return bad("k0 must be >= 2");
        }
        Ok(())
    }
}

/// One chain's mutable state.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub forest: Forest,
    pub ordering: Ordering,
    pub params: ModelParams,
    pub rng: ChaCha8Rng,
    pub sweep: usize,
    seq: Option<SeqState>,
    q: Vec<f64>,
}

/// Log of the attachment weight of `w` at its current forest degree.
#[inline]
pub(crate) fn attach_log_weight(f: &Forest, w: usize, params: &ModelParams) -> f64 {
    attach_weight(f, w, params).ln()
}

/// Relative probability that a new child attaches to `w` (ratio of the
/// degree factors after and before).
#[inline]
pub(crate) fn attach_weight(f: &Forest, w: usize, params: &ModelParams) -> f64 {
    let (a, b) = params.attach();
    let d = f.degree(w) as f64;
    if params.variant.is_multi_root() && f.is_root(w) {
        b * d + 2.0 * b + a
    } else if f.degree(w) == 0 {
        // a lone single root: its first child does not change its degree factor
        1.0
    } else {
        b * d + a
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    rng
}

/// Checks that the graph is usable for the variant.
pub fn check_graph(g: &LabeledGraph, params: &ModelParams) -> Result<()> {
    if g.n() == 0 {
        return Err(Error::InvalidParams("graph has no nodes".into()));
    }
    let needs_connected = matches!(
        params.variant,
        Variant::SingleRoot | Variant::FixedK | Variant::SeqPaper
    );
    if needs_connected {
        let (_, k) = g.components();
        if k > 1 {
            return Err(Error::Disconnected {
                components: k,
                variant: params.variant.name().into(),
            });
        }
    }
    if params.variant == Variant::FixedK && params.k_fixed() > g.n() {
        return Err(Error::InvalidParams(format!("k={} exceeds n={}", params.k_fixed(), g.n())));
    }
    Ok(())
}

/// Spanning tree for the deletion variant: a uniform spanning forest whose
/// components are chained together with extra (non-graph) edges.
fn joined_spanning_tree<R: Rng + ?Sized>(g: &LabeledGraph, rng: &mut R) -> Forest {
    let mut f = uniform_spanning_forest(g, rng);
    let roots = f.roots();
    for w in roots.windows(2) {
        let (prev, r) = (w[0], w[1]);
        // attach the next component's root under a random node of the previous one
        let nodes = f.preorder(f.root_of(prev));
        let target = nodes[rng.random_range(0..nodes.len())];
        f.attach(r, target);
    }
    f
}

impl ChainState {
    /// Random start: uniform spanning forest and a uniform history.
    pub fn init(g: &LabeledGraph, params: &ModelParams, config: &ChainConfig, chain: usize) -> Result<Self> {
        check_graph(g, params)?;
        let mut rng = chain_rng(config.seed, chain);
        let (forest, ordering) = match params.variant {
            Variant::SingleRoot | Variant::SeqPaper => {
                let mut f = uniform_spanning_forest(g, &mut rng);
                let o = sample_history(&mut f, &ModelParams::uniform(), &mut rng);
                (f, o)
            }
            Variant::SeqPaperStar => {
                let mut f = joined_spanning_tree(g, &mut rng);
                let o = sample_history(&mut f, &ModelParams::uniform(), &mut rng);
                (f, o)
            }
            Variant::FixedK => {
                let mut f = uniform_spanning_forest(g, &mut rng);
                let o = sample_history(&mut f, &ModelParams::uniform(), &mut rng);
                for i in 1..params.k_fixed() {
                    f.detach(o.node_at(i));
                }
                (f, o)
            }
            Variant::RandomK => {
                let f = uniform_spanning_forest(g, &mut rng);
                let o = history_given_roots(&f, Variant::RandomK, &mut rng);
                (f, o)
            }
        };
        Ok(Self::from_parts(g, forest, ordering, params.clone(), rng))
    }

    /// Starts from a given forest and ordering (which must be a history of it).
    pub fn from_parts(g: &LabeledGraph, forest: Forest, ordering: Ordering, params: ModelParams, rng: ChaCha8Rng) -> Self {
        debug_assert!(ordering.is_history_of(&forest));
        let seq = params
            .variant
            .is_seq()
            .then(|| SeqState::new(g, &forest, &ordering, &params));
        let n = forest.n();
        ChainState {
            forest,
            ordering,
            params,
            rng,
            sweep: 0,
            seq,
            q: vec![0.0; n],
        }
    }

    /// Root probabilities of the current sample.
    pub fn root_vector(&self) -> &[f64] {
        &self.q
    }

    pub fn seq_stats(&self) -> Option<SeqStats> {
        self.seq.as_ref().map(|s| s.stats)
    }

    /// Total seq noise log-likelihood of the current state, if in seq mode.
    pub fn seq_noise_loglik(&self) -> Option<f64> {
        self.seq.as_ref().map(|s| s.total())
    }

    /// One full sweep followed by recomputing this sample's root probabilities.
    pub fn step(&mut self, g: &LabeledGraph, config: &ChainConfig) {
        match config.mode {
            Mode::Standard => {
                sweep_ordering(self);
                match self.params.variant {
                    Variant::SingleRoot => sweep_forest_single(self, g),
                    Variant::FixedK => sweep_forest_fixed_k(self, g),
                    Variant::RandomK => sweep_forest_random_k(self, g),
                    _ => unreachable!("validated by ChainConfig"),
                }
            }
            Mode::Collapsed => collapsed_sweep(self, g),
            Mode::Seq => seq_sweep(self, g, config),
        }
        if config.sample_alpha0 && self.params.variant == Variant::RandomK {
            let k = self.forest.num_trees();
            let a0 = sample_alpha0(self.params.alpha0(), k, self.forest.n(), &self.params, &mut self.rng);
            self.params.alpha0 = Some(a0);
        }
        self.sweep += 1;
        if let Some(st) = self.seq.as_mut() {
            self.q = seq::seq_first_node_distribution(g, &self.forest, &mut self.ordering, st, config.k0);
        } else {
            self.q = root_probabilities(&self.forest, &self.params).into_vec();
        }
        #[cfg(debug_assertions)]
        {
            self.forest.check().expect("forest invariant");
            assert!(self.ordering.check() && self.ordering.is_history_of(&self.forest));
        }
    }
}

/// Redraws the ordering (and hence the roots) given the forest.
pub fn sweep_ordering(state: &mut ChainState) {
    state.ordering = sample_history(&mut state.forest, &state.params, &mut state.rng);
}

/// Redraws the parent of every non-first node among its earlier graph neighbours.
pub fn sweep_forest_single(state: &mut ChainState, g: &LabeledGraph) {
    resample_parents(state, g, 1);
}

/// As [`sweep_forest_single`], keeping the first `K` nodes as roots.
pub fn sweep_forest_fixed_k(state: &mut ChainState, g: &LabeledGraph) {
    let k = state.params.k_fixed();
    resample_parents(state, g, k);
}

fn resample_parents(state: &mut ChainState, g: &LabeledGraph, first: usize) {
    let ChainState {
        forest: f,
        ordering: ord,
        params,
        rng,
        ..
    } = state;
    let mut cands = Vec::new();
    let mut w = Vec::new();
    for t in first..f.n() {
        let v = ord.node_at(t);
        f.detach(v);
        cands.clear();
        cands.extend(g.neighbors(v).iter().copied().filter(|&x| ord.position(x) < t));
        w.clear();
        w.extend(cands.iter().map(|&x| attach_weight(f, x, params)));
        let i = sample_weighted(&w, rng);
        f.attach(v, cands[i]);
    }
}

/// Ratio of the binomial noise factors when one more tree is present:
/// `(m - n + K' + 1) / (N - n + K' + 1)` with `K'` trees otherwise.
pub fn noise_ratio(n: usize, m: usize, k_other: usize) -> f64 {
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    let num = m as u64 + k_other as u64 + 1 - n as u64;
    let den = pairs + k_other as u64 + 1 - n as u64;
    num as f64 / den as f64
}

/// Weight of making `v` (with `children` children) a new root rather than
/// attaching it, in the random-K model.
fn new_root_weight(params: &ModelParams, n: usize, m: usize, k_other: usize, children: usize) -> f64 {
    let (a, b) = params.attach();
    let psi = (b * (children as f64 + 1.0) + a) / (b + a);
    params.alpha0() * noise_ratio(n, m, k_other) * psi
}

/// Forest stage for random K: each node may also become a new root.
pub fn sweep_forest_random_k(state: &mut ChainState, g: &LabeledGraph) {
    let ChainState {
        forest: f,
        ordering: ord,
        params,
        rng,
        ..
    } = state;
    let (n, m) = (g.n(), g.m());
    let mut cands = Vec::new();
    let mut w = Vec::new();
    for t in 1..n {
        let v = ord.node_at(t);
        f.detach(v);
        cands.clear();
        cands.extend(g.neighbors(v).iter().copied().filter(|&x| ord.position(x) < t));
        w.clear();
        w.extend(cands.iter().map(|&x| attach_weight(f, x, params)));
        let k_other = f.num_trees() - 1;
        w.push(new_root_weight(params, n, m, k_other, f.degree(v)));
        let i = sample_weighted(&w, rng);
        if i < cands.len() {
            f.attach(v, cands[i]);
        }
    }
}

/// Collapsed sweep: redraw every tree's root, then graft each subtree onto a
/// non-descendant neighbour (or make it a new tree in random-K mode).
pub fn collapsed_sweep(state: &mut ChainState, g: &LabeledGraph) {
    let ChainState {
        forest: f,
        ordering: ord,
        params,
        rng,
        ..
    } = state;
    resample_roots(f, params, rng);
    let (n, m) = (g.n(), g.m());
    let random_k = params.variant == Variant::RandomK;
    let mut sizes = f.subtree_sizes();
    let mut order: Vec<usize> = (0..n).collect();
    crate::util::shuffle(&mut order, rng);
    let mut cands = Vec::new();
    let mut w = Vec::new();
    for u in order {
        if f.is_root(u) && !random_k {
            continue;
        }
        let su = sizes[u];
        if let Some(p) = f.detach(u) {
            let mut x = Some(p);
            while let Some(y) = x {
                sizes[y] -= su;
                x = f.parent(y);
            }
        }
        cands.clear();
        w.clear();
        for &c in g.neighbors(u) {
            // walk to the root: hitting u means c lies inside u's subtree
            let mut x = c;
            let mut prod = 1.0;
            let inside = loop {
                if x == u {
                    break true;
                }
                let parent = f.parent(x);
                if parent.is_some() || random_k {
                    prod *= sizes[x] as f64 / (sizes[x] + su) as f64;
                }
                match parent {
                    Some(p) => x = p,
                    None => break false,
                }
            };
            if !inside {
                cands.push(c);
                w.push(prod * attach_weight(f, c, params));
            }
        }
        if random_k {
            let k_other = f.num_trees() - 1;
            w.push(new_root_weight(params, n, m, k_other, f.degree(u)));
        }
        let i = sample_weighted(&w, rng);
        if i < cands.len() {
            let c = cands[i];
            f.attach(u, c);
            let mut x = Some(c);
            while let Some(y) = x {
                sizes[y] += su;
                x = f.parent(y);
            }
        }
    }
    *ord = history_given_roots(f, params.variant, rng);
}

/// Seq sweep: transpositions and a root shuffle, then the tree update.
fn seq_sweep(state: &mut ChainState, g: &LabeledGraph, config: &ChainConfig) {
    let ChainState {
        forest: f,
        ordering: ord,
        params,
        rng,
        seq: st,
        ..
    } = state;
    let st = st.as_mut().expect("seq state present in seq mode");
    let moves = config.transpositions.unwrap_or(4 * f.n());
    for _ in 0..moves {
        seq::seq_transposition_update(g, f, ord, st, rng);
    }
    for _ in 0..config.root_moves {
        seq::seq_prefix_transposition_update(g, f, ord, st, config.k0, rng);
        seq::seq_root_shuffle_update(g, f, ord, st, config.k0, rng);
    }
    seq::seq_sweep_tree(g, f, ord, st, params, rng);
    if config.sample_seq_params {
        seq_param_update(g, f, ord, st, params, rng);
    }
}

/// Read-only view of one post-burn-in sample.
pub struct Sample<'a> {
    pub chain: usize,
    pub sweep: usize,
    pub forest: &'a Forest,
    pub ordering: &'a Ordering,
    pub root_probs: &'a [f64],
    pub params: &'a ModelParams,
}

/// Convergence and bookkeeping for a run.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub converged: bool,
    /// Sweeps per chain, burn-in included.
    pub sweeps: usize,
    pub samples_per_chain: usize,
    pub max_hellinger: f64,
    pub convergence_tol: f64,
    pub burn_in: usize,
    pub num_chains: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seq: Vec<SeqStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0_mean: Option<f64>,
}

/// Result of [`run_chains`].
#[derive(Clone, Debug)]
pub struct ChainRun {
    /// Average of the per-sample root probabilities over all chains.
    pub root_distribution: RootDistribution,
    pub chain_distributions: Vec<RootDistribution>,
    pub diagnostics: Diagnostics,
    pub states: Vec<ChainState>,
}

fn max_pairwise_hellinger(acc: &[RootAccumulator]) -> f64 {
    let means: Vec<RootDistribution> = acc.iter().map(|a| a.mean()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            worst = worst.max(hellinger(&means[i], &means[j]).unwrap_or(1.0));
        }
    }
    worst
}

/// Runs chains from independent random starts.
pub fn run_chains(
    g: &LabeledGraph,
    params: &ModelParams,
    config: &ChainConfig,
    observer: &mut dyn FnMut(&Sample<'_>),
) -> Result<ChainRun> {
    params.validate()?;
    config.validate(params)?;
    let states = (0..config.num_chains)
        .map(|c| ChainState::init(g, params, config, c))
        .collect::<Result<Vec<_>>>()?;
    run_from_states(g, states, config, observer)
}

/// Runs chains from the given states (one per chain).
pub fn run_from_states(
    g: &LabeledGraph,
    mut states: Vec<ChainState>,
    config: &ChainConfig,
    observer: &mut dyn FnMut(&Sample<'_>),
) -> Result<ChainRun> {
    let n = g.n();
    let mut acc: Vec<RootAccumulator> = (0..states.len()).map(|_| RootAccumulator::new(n)).collect();
    let mut alpha0_sum = 0.0;
    let mut converged = false;
    let mut worst = f64::INFINITY;
    let mut sweeps = 0;
    for sweep in 0..config.max_sweeps {
        states.par_iter_mut().for_each(|s| s.step(g, config));
        sweeps = sweep + 1;
        if sweep < config.burn_in {
            continue;
        }
        for (c, s) in states.iter().enumerate() {
            acc[c].push(&s.q);
            alpha0_sum += s.params.alpha0();
            observer(&Sample {
                chain: c,
                sweep,
                forest: &s.forest,
                ordering: &s.ordering,
                root_probs: &s.q,
                params: &s.params,
            });
        }
        if acc[0].count() >= config.min_samples {
            worst = max_pairwise_hellinger(&acc);
            if worst < config.convergence_tol {
                converged = true;
                if config.stop_at_convergence {
                    break;
                }
            }
        }
    }
    let samples = acc[0].count();
    let mut total = RootAccumulator::new(n);
    for a in &acc {
        total.merge(a);
    }
    let random_k = states[0].params.variant == Variant::RandomK;
    let diagnostics = Diagnostics {
        converged,
        sweeps,
        samples_per_chain: samples,
        max_hellinger: worst,
        convergence_tol: config.convergence_tol,
        burn_in: config.burn_in,
        num_chains: states.len(),
        seq: states.iter().filter_map(|s| s.seq_stats()).collect(),
        alpha0_mean: (random_k && samples > 0).then(|| alpha0_sum / (samples * states.len()) as f64),
    };
    Ok(ChainRun {
        root_distribution: total.mean(),
        chain_distributions: acc.iter().map(|a| a.mean()).collect(),
        diagnostics,
        states,
    })
}

/// Root distribution of each tree in a sample, with the tree's node list.
pub fn tree_root_distributions(f: &Forest, root_probs: &[f64]) -> (Vec<crate::inference::TreeDist>, Vec<Vec<usize>>) {
    let trees = f.trees();
    let dists = trees
        .iter()
        .map(|nodes| nodes.iter().map(|&u| (u, root_probs[u])).collect())
        .collect();
    (dists, trees)
}

/// One line of the optional sample stream.
#[derive(Clone, Debug, Serialize)]
pub struct SampleRecord {
    pub sweep: usize,
    pub chain: usize,
    pub roots: Vec<String>,
    pub parent_array_hash: String,
    pub root_distribution: Vec<f64>,
}

impl SampleRecord {
    pub fn new(s: &Sample<'_>, g: &LabeledGraph) -> Self {
        SampleRecord {
            sweep: s.sweep,
            chain: s.chain,
            roots: s.forest.roots().into_iter().map(|r| g.label(r).to_string()).collect(),
            parent_array_hash: format!("{:016x}", parent_array_hash(s.forest)),
            root_distribution: s.root_probs.to_vec(),
        }
    }
}

/// FNV-1a hash of the parent array (roots hash as `u64::MAX`).
pub fn parent_array_hash(f: &Forest) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in f.parents() {
        let x = p.map(|p| p as u64).unwrap_or(u64::MAX);
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
