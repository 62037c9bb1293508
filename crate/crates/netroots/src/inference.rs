//! Posterior summaries: root distributions, credible sets, degree baselines,
//! cluster matching and tree-count histograms.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::util::shuffle;

/// Per-node root probabilities.
///
/// In single-root settings the entries sum to 1. In multi-root settings each
/// entry is the probability that the node is a root, so the entries sum to the
/// (expected) number of trees.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootDistribution {
    probs: Vec<f64>,
}

impl RootDistribution {
    /// Validated constructor: entries finite, nonnegative and summing to 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidState("probabilities must be finite and >= 0".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("probabilities sum to {s}, not 1")));
        }
        Ok(RootDistribution { probs })
    }

    pub fn new_unchecked(probs: Vec<f64>) -> Self {
        RootDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Rescaled to sum to 1.
    pub fn normalized(&self) -> RootDistribution {
        let t = self.total();
        RootDistribution {
            probs: self.probs.iter().map(|p| p / t).collect(),
        }
    }

    /// Half the L1 distance (total variation when both sum to 1).
    pub fn tv(&self, other: &RootDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SupportMismatch(self.len(), other.len()));
        }
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Distribution after renaming node `u` to `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> RootDistribution {
        let mut p = vec![0.0; self.len()];
        for (u, &x) in self.probs.iter().enumerate() {
            p[perm[u]] = x;
        }
        RootDistribution { probs: p }
    }
}

/// Hellinger distance between two distributions over the same nodes.
/// Inputs are normalized first, so root-inclusion vectors are accepted.
pub fn hellinger(d1: &RootDistribution, d2: &RootDistribution) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::SupportMismatch(d1.len(), d2.len()));
    }
    let (t1, t2) = (d1.total(), d2.total());
    let bc: f64 = d1
        .probs
        .iter()
        .zip(&d2.probs)
        .map(|(a, b)| (a / t1 * b / t2).sqrt())
        .sum();
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// Running mean of per-sample root distributions.
#[derive(Clone, Debug)]
pub struct RootAccumulator {
    sum: Vec<f64>,
    count: usize,
}

impl RootAccumulator {
    pub fn new(n: usize) -> Self {
        RootAccumulator {
            sum: vec![0.0; n],
            count: 0,
        }
    }

    pub fn push(&mut self, q: &[f64]) {
        for (s, x) in self.sum.iter_mut().zip(q) {
            *s += x;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> RootDistribution {
        let c = self.count.max(1) as f64;
        RootDistribution::new_unchecked(self.sum.iter().map(|s| s / c).collect())
    }

    /// Combines accumulators (e.g. from several chains).
    pub fn merge(&mut self, other: &RootAccumulator) {
        for (s, x) in self.sum.iter_mut().zip(&other.sum) {
            *s += x;
        }
        self.count += other.count;
    }
}

/// Average of per-sample root distributions.
pub fn aggregate_root_distribution(samples: &[RootDistribution]) -> Result<RootDistribution> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidState("no samples to aggregate".into()))?;
    let mut acc = RootAccumulator::new(first.len());
    for s in samples {
        if s.len() != first.len() {
            return Err(Error::SupportMismatch(first.len(), s.len()));
        }
        acc.push(s.probs());
    }
    Ok(acc.mean())
}

/// A root credible set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CredibleSet {
    /// Members in order of decreasing probability.
    pub nodes: Vec<usize>,
    /// Nominal level `1 - epsilon`.
    pub level: f64,
    /// Probability mass inside the set.
    pub cumulative_mass: f64,
}

/// Smallest probability-sorted prefix whose excluded mass is at most `epsilon`.
///
/// For a distribution summing to 1 this is the usual "cumulative mass at least
/// `1 - epsilon`" rule; for root-inclusion vectors it bounds the expected number
/// of roots left out. Ties are ordered by a random shuffle drawn from `rng`.
pub fn credible_set<R: Rng + ?Sized>(d: &RootDistribution, epsilon: f64, rng: &mut R) -> Result<CredibleSet> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let p = d.probs();
    let mut idx: Vec<usize> = (0..p.len()).collect();
    shuffle(&mut idx, rng);
    // stable sort keeps the random order among equal probabilities
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap_or(std::cmp::Ordering::Equal));
    // tail[k] = mass of idx[k..]
    let mut tail = vec![0.0; idx.len() + 1];
    for k in (0..idx.len()).rev() {
        tail[k] = tail[k + 1] + p[idx[k]];
    }
    let tol = 1e-12 * tail[0].max(1.0);
    let k = (0..=idx.len()).find(|&k| tail[k] <= epsilon + tol).unwrap_or(idx.len());
    let nodes: Vec<usize> = idx[..k].to_vec();
    Ok(CredibleSet {
        cumulative_mass: tail[0] - tail[k],
        nodes,
        level: 1.0 - epsilon,
    })
}

/// The `l` highest-degree nodes, ties broken by smaller index.
pub fn degree_baseline_set(g: &LabeledGraph, l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > g.n() {
        return Err(Error::InvalidParams(format!("L must lie in [1, {}], got {l}", g.n())));
    }
    let mut idx: Vec<usize> = (0..g.n()).collect();
    idx.sort_by(|&a, &b| g.degree(b).cmp(&g.degree(a)).then(a.cmp(&b)));
    idx.truncate(l);
    Ok(idx)
}

/// Minimum-cost perfect matching on a square cost matrix.
/// Returns `assign[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    // 1-based potentials formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Root distribution of one sampled tree, as sparse `(node, prob)` pairs.
pub type TreeDist = Vec<(usize, f64)>;

/// Total variation between a dense distribution `q` (summing to 1) and a sparse one.
fn tv_dense_sparse(q: &[f64], t: &TreeDist) -> f64 {
    let mut inside_q = 0.0;
    let mut diff = 0.0;
    for &(v, p) in t {
        inside_q += q[v];
        diff += (q[v] - p).abs();
    }
    0.5 * (diff + (1.0 - inside_q).max(0.0))
}

fn mix_into(q: &mut [f64], t: &TreeDist, w: f64) {
    for x in q.iter_mut() {
        *x *= 1.0 - w;
    }
    for &(v, p) in t {
        q[v] += w * p;
    }
}

/// Summary of matched or discovered clusters.
#[derive(Clone, Debug, Serialize)]
pub struct ClusterSummary {
    /// Root distribution of each cluster.
    pub clusters: Vec<RootDistribution>,
    /// Fraction of samples in which each cluster appeared.
    pub posterior_frequency: Vec<f64>,
    /// Per node: most likely cluster and the probability of belonging to it.
    pub assignment: Vec<(usize, f64)>,
    /// Per cluster, per node membership probability.
    pub membership: Vec<Vec<f64>>,
}

fn assignment_from(membership: &[Vec<f64>], n: usize) -> Vec<(usize, f64)> {
    (0..n)
        .map(|u| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (c, m) in membership.iter().enumerate() {
                if m[u] > best.1 {
                    best = (c, m[u]);
                }
            }
            (best.0, best.1.max(0.0))
        })
        .collect()
}

/// Streaming Hungarian matching of per-sample trees to `K` reference clusters.
#[derive(Clone, Debug)]
pub struct FixedKMatcher {
    n: usize,
    refs: Vec<Vec<f64>>,
    member: Vec<Vec<f64>>,
    samples: usize,
}

impl FixedKMatcher {
    pub fn new(n: usize) -> Self {
        FixedKMatcher {
            n,
            refs: Vec::new(),
            member: Vec::new(),
            samples: 0,
        }
    }

    /// Adds one sample's trees (their root distributions). Every sample must
    /// contain the same number of trees.
    pub fn push(&mut self, trees: &[TreeDist], tree_nodes: &[Vec<usize>]) {
        let k = trees.len();
        self.samples += 1;
        let j = self.samples as f64;
        if self.refs.is_empty() {
            for (t, nodes) in trees.iter().zip(tree_nodes) {
                let mut q = vec![0.0; self.n];
                mix_into(&mut q, t, 1.0);
                self.refs.push(q);
                let mut m = vec![0.0; self.n];
                for &u in nodes {
                    m[u] = 1.0;
                }
                self.member.push(m);
            }
            return;
        }
        assert_eq!(k, self.refs.len(), "tree count changed between samples");
        let cost: Vec<Vec<f64>> = self
            .refs
            .iter()
            .map(|q| trees.iter().map(|t| tv_dense_sparse(q, t)).collect())
            .collect();
        let assign = hungarian(&cost);
        for (l, &c) in assign.iter().enumerate() {
            mix_into(&mut self.refs[l], &trees[c], 1.0 / j);
            let m = &mut self.member[l];
            for x in m.iter_mut() {
                *x *= (j - 1.0) / j;
            }
            for &u in &tree_nodes[c] {
                m[u] += 1.0 / j;
            }
        }
    }

    pub fn finish(&self) -> ClusterSummary {
        ClusterSummary {
            clusters: self.refs.iter().map(|q| RootDistribution::new_unchecked(q.clone())).collect(),
            posterior_frequency: vec![if self.samples > 0 { 1.0 } else { 0.0 }; self.refs.len()],
            assignment: assignment_from(&self.member, self.n),
            membership: self.member.clone(),
        }
    }
}

/// Streaming discovery of clusters across samples with a varying number of trees.
#[derive(Clone, Debug)]
pub struct RandomKDiscovery {
    n: usize,
    tv_threshold: f64,
    min_size: usize,
    refs: Vec<Vec<f64>>,
    hits: Vec<usize>,
    member_counts: Vec<Vec<f64>>,
    samples: usize,
}

impl RandomKDiscovery {
    /// Trees smaller than `min_size_fraction * n` are ignored; a tree whose best
    /// match is at total-variation distance `tv_threshold` or more opens a new cluster.
    pub fn new(n: usize, tv_threshold: f64, min_size_fraction: f64) -> Self {
        RandomKDiscovery {
            n,
            tv_threshold,
            min_size: min_size_of(n, min_size_fraction),
            refs: Vec::new(),
            hits: Vec::new(),
            member_counts: Vec::new(),
            samples: 0,
        }
    }

    pub fn push(&mut self, trees: &[TreeDist], tree_nodes: &[Vec<usize>]) {
        self.samples += 1;
        let keep: Vec<usize> = (0..trees.len())
            .filter(|&i| tree_nodes[i].len() >= self.min_size)
            .collect();
        let r = self.refs.len();
        let s = r.max(keep.len());
        let mut matched: Vec<Option<usize>> = vec![None; keep.len()];
        if r > 0 && !keep.is_empty() {
            let mut cost = vec![vec![1.0; s]; s];
            for (l, q) in self.refs.iter().enumerate() {
                for (c, &i) in keep.iter().enumerate() {
                    cost[l][c] = tv_dense_sparse(q, &trees[i]);
                }
            }
            let assign = hungarian(&cost);
            for (l, &c) in assign.iter().enumerate().take(r) {
                if c < keep.len() && cost[l][c] < self.tv_threshold {
                    matched[c] = Some(l);
                }
            }
        }
        for (c, &i) in keep.iter().enumerate() {
            let l = match matched[c] {
                Some(l) => {
                    self.hits[l] += 1;
                    let w = 1.0 / self.hits[l] as f64;
                    mix_into(&mut self.refs[l], &trees[i], w);
                    l
                }
                None => {
                    let mut q = vec![0.0; self.n];
                    mix_into(&mut q, &trees[i], 1.0);
                    self.refs.push(q);
                    self.hits.push(1);
                    self.member_counts.push(vec![0.0; self.n]);
                    self.refs.len() - 1
                }
            };
            for &u in &tree_nodes[i] {
                self.member_counts[l][u] += 1.0;
            }
        }
    }

    pub fn finish(&self) -> ClusterSummary {
        let j = self.samples.max(1) as f64;
        let membership: Vec<Vec<f64>> = self
            .member_counts
            .iter()
            .map(|m| m.iter().map(|c| c / j).collect())
            .collect();
        ClusterSummary {
            clusters: self.refs.iter().map(|q| RootDistribution::new_unchecked(q.clone())).collect(),
            posterior_frequency: self.hits.iter().map(|&h| h as f64 / j).collect(),
            assignment: assignment_from(&membership, self.n),
            membership,
        }
    }
}

fn min_size_of(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).max(1)
}

/// Histogram of per-sample tree counts after dropping trees below the size cut.
#[derive(Clone, Debug, Default)]
pub struct KHistogram {
    min_size: usize,
    counts: BTreeMap<usize, usize>,
    samples: usize,
}

impl KHistogram {
    pub fn new(n: usize, min_size_fraction: f64) -> Self {
        KHistogram {
            min_size: min_size_of(n, min_size_fraction),
            counts: BTreeMap::new(),
            samples: 0,
        }
    }

    pub fn push(&mut self, tree_sizes: &[usize]) {
        let k = tree_sizes.iter().filter(|&&s| s >= self.min_size).count();
        *self.counts.entry(k).or_default() += 1;
        self.samples += 1;
    }

    /// Posterior probability of each (filtered) tree count.
    pub fn distribution(&self) -> BTreeMap<usize, f64> {
        let j = self.samples.max(1) as f64;
        self.counts.iter().map(|(&k, &c)| (k, c as f64 / j)).collect()
    }

    pub fn mode(&self) -> Option<usize> {
        self.counts.iter().max_by_key(|(_, &c)| c).map(|(&k, _)| k)
    }
}

/// Histogram of filtered tree counts over a list of per-sample tree sizes.
pub fn posterior_over_k(samples: &[Vec<usize>], n: usize, min_size_fraction: f64) -> BTreeMap<usize, f64> {
    let mut h = KHistogram::new(n, min_size_fraction);
    for s in samples {
        h.push(s);
    }
    h.distribution()
}
