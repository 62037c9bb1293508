//! Exact brute-force posteriors for tiny graphs.
//!
//! Everything here enumerates explicitly; it exists to check the samplers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forest::{Forest, Ordering};
use crate::graph::LabeledGraph;
use crate::inference::RootDistribution;
use crate::likelihood::log_likelihood_forest;
use crate::params::{ModelParams, Variant};
use crate::util::{ln_choose, ln_factorial, log_sum_exp};

pub const MAX_N: usize = 8;
pub const MAX_M: usize = 14;

fn check_cap(g: &LabeledGraph) -> Result<()> {
    if g.n() > MAX_N || g.m() > MAX_M {
        return Err(Error::CapExceeded {
            n: g.n(),
            m: g.m(),
            max_n: MAX_N,
            max_m: MAX_M,
        });
    }
    Ok(())
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    r
}

/// All spanning forests of `g` as sorted edge lists, optionally restricted to
/// exactly `trees` components.
pub fn enumerate_spanning_forests(g: &LabeledGraph, trees: Option<usize>) -> Result<Vec<Vec<(usize, usize)>>> {
    check_cap(g)?;
    let edges = g.edges().to_vec();
    let n = g.n();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    let uf: Vec<usize> = (0..n).collect();
    fn rec(
        i: usize,
        edges: &[(usize, usize)],
        uf: &[usize],
        chosen: &mut Vec<(usize, usize)>,
        n: usize,
        trees: Option<usize>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if let Some(k) = trees {
            // cannot reach n - k edges any more, or already past it
            if chosen.len() > n - k || chosen.len() + (edges.len() - i) < n - k {
                return;
            }
        }
        if i == edges.len() {
            if trees.is_none_or(|k| chosen.len() == n - k) {
                out.push(chosen.clone());
            }
            return;
        }
        let (u, v) = edges[i];
        let mut uf2 = uf.to_vec();
        let (ru, rv) = (find(&mut uf2, u), find(&mut uf2, v));
        if ru != rv {
            uf2[ru] = rv;
            chosen.push((u, v));
            rec(i + 1, edges, &uf2, chosen, n, trees, out);
            chosen.pop();
        }
        rec(i + 1, edges, uf, chosen, n, trees, out);
    }
    rec(0, &edges, &uf, &mut chosen, n, trees, &mut out);
    Ok(out)
}

/// Roots an undirected forest (given by edges) at the given roots, one per component.
pub fn forest_from_edges(n: usize, edges: &[(usize, usize)], roots: &[usize]) -> Forest {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    for &r in roots {
        seen[r] = true;
        let mut stack = vec![r];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    stack.push(v);
                }
            }
        }
    }
    Forest::from_parents(parent).expect("edges form a forest")
}

fn components_of(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut uf: Vec<usize> = (0..n).collect();
    for &(u, v) in edges {
        let (a, b) = (find(&mut uf, u), find(&mut uf, v));
        if a != b {
            uf[a] = b;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for u in 0..n {
        let r = find(&mut uf, u);
        groups.entry(r).or_default().push(u);
    }
    groups.into_values().collect()
}

/// One entry of the exact joint posterior.
#[derive(Clone, Debug)]
pub struct JointEntry {
    pub edges: Vec<(usize, usize)>,
    pub roots: Vec<usize>,
    pub log_weight: f64,
}

/// Exact posterior over (forest, root set) and its root marginal.
#[derive(Clone, Debug)]
pub struct ExactPosterior {
    /// Single-root: P(first node = u). Multi-root: P(u is a root).
    pub root_dist: RootDistribution,
    pub table: Vec<JointEntry>,
    /// Posterior over the number of trees.
    pub k_dist: BTreeMap<usize, f64>,
    pub log_normalizer: f64,
}

impl ExactPosterior {
    pub fn prob(&self, e: &JointEntry) -> f64 {
        (e.log_weight - self.log_normalizer).exp()
    }
}

/// Log number of orderings consistent with a rooted forest under the variant.
pub fn log_history_count(f: &Forest, variant: Variant) -> f64 {
    let n = f.n();
    let sizes = f.subtree_sizes();
    match variant {
        Variant::FixedK => {
            let k = f.num_trees();
            ln_factorial(k) + ln_factorial(n - k)
                - (0..n).filter(|&v| !f.is_root(v)).map(|v| (sizes[v] as f64).ln()).sum::<f64>()
        }
        _ => ln_factorial(n) - sizes.iter().map(|&s| (s as f64).ln()).sum::<f64>(),
    }
}

/// Exact root posterior by enumerating every spanning forest and root choice.
pub fn exact_root_posterior(g: &LabeledGraph, params: &ModelParams) -> Result<ExactPosterior> {
    check_cap(g)?;
    params.validate()?;
    if params.variant.is_seq() {
        return Err(Error::InvalidParams("no exact oracle for seq variants".into()));
    }
    let n = g.n();
    let m = g.m() as u64;
    let pairs = (n * (n - 1) / 2) as u64;
    let trees = match params.variant {
        Variant::SingleRoot => Some(1),
        Variant::FixedK => Some(params.k_fixed()),
        _ => None,
    };
    let mut table = Vec::new();
    for edges in enumerate_spanning_forests(g, trees)? {
        let comps = components_of(n, &edges);
        let k = comps.len() as u64;
        let noise = m - (n as u64 - k);
        let er = -ln_choose(pairs - n as u64 + k, noise);
        let mut choice = vec![0usize; comps.len()];
        loop {
            let roots: Vec<usize> = comps.iter().zip(&choice).map(|(c, &i)| c[i]).collect();
            let f = forest_from_edges(n, &edges, &roots);
            let lw = log_history_count(&f, params.variant) + log_likelihood_forest(&f, params) + er;
            let mut sorted_roots = roots.clone();
            sorted_roots.sort_unstable();
            table.push(JointEntry {
                edges: edges.clone(),
                roots: sorted_roots,
                log_weight: lw,
            });
            // advance the mixed-radix counter over root choices
            let mut i = 0;
            while i < comps.len() {
                choice[i] += 1;
                if choice[i] < comps[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == comps.len() {
                break;
            }
        }
    }
    if table.is_empty() {
        return Err(Error::InvalidParams("graph admits no spanning forest of the requested shape".into()));
    }
    let lws: Vec<f64> = table.iter().map(|e| e.log_weight).collect();
    let lz = log_sum_exp(&lws);
    let mut probs = vec![0.0; n];
    let mut k_dist = BTreeMap::new();
    for e in &table {
        let p = (e.log_weight - lz).exp();
        for &r in &e.roots {
            probs[r] += p;
        }
        *k_dist.entry(e.roots.len()).or_insert(0.0) += p;
    }
    Ok(ExactPosterior {
        root_dist: RootDistribution::new_unchecked(probs),
        table,
        k_dist,
        log_normalizer: lz,
    })
}

/// Exact root posterior for the sequential-noise variants, summing over
/// every tree and every history of it.
///
/// The plain variant uses spanning trees of `g`; the deletion variant uses all
/// labeled trees, since tree edges may be missing from the observation.
pub fn exact_seq_root_posterior(g: &LabeledGraph, params: &ModelParams) -> Result<RootDistribution> {
    use crate::gibbs::seq::{deletion_loglik, naive_noise_loglik};
    check_cap(g)?;
    params.validate()?;
    let n = g.n();
    let trees = match params.variant {
        Variant::SeqPaper => enumerate_spanning_forests(g, Some(1))?,
        Variant::SeqPaperStar => all_labeled_trees(n),
        _ => return Err(Error::InvalidParams("seq variant required".into())),
    };
    let mut lw = vec![Vec::new(); n];
    for edges in trees {
        let base = forest_from_edges(n, &edges, &[0]);
        let tree_ll = log_likelihood_forest(&base, params) + deletion_loglik(g, &base, params);
        if tree_ll == f64::NEG_INFINITY {
            continue;
        }
        for h in list_histories(&base) {
            let f = forest_from_edges(n, &edges, &[h[0]]);
            let ord = Ordering::from_nodes(h.clone()).expect("history is a permutation");
            lw[h[0]].push(tree_ll + naive_noise_loglik(g, &f, &ord, params));
        }
    }
    let per_root: Vec<f64> = lw.iter().map(|x| log_sum_exp(x)).collect();
    let lz = log_sum_exp(&per_root);
    if lz == f64::NEG_INFINITY {
        return Err(Error::InvalidParams("graph has zero likelihood under these parameters".into()));
    }
    RootDistribution::new(per_root.iter().map(|l| (l - lz).exp()).collect())
}

/// Calls `visit` on every ordering of `start`'s tree in which each prefix is connected.
pub fn for_each_history(adj: &[Vec<usize>], start: usize, visit: &mut dyn FnMut(&[usize])) {
    let n = adj.len();
    let mut in_seq = vec![false; n];
    let mut seq = vec![start];
    in_seq[start] = true;
    let size = {
        let mut seen = vec![false; n];
        let mut st = vec![start];
        seen[start] = true;
        let mut c = 0;
        while let Some(u) = st.pop() {
            c += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    st.push(v);
                }
            }
        }
        c
    };
    fn rec(adj: &[Vec<usize>], size: usize, seq: &mut Vec<usize>, in_seq: &mut [bool], visit: &mut dyn FnMut(&[usize])) {
        if seq.len() == size {
            visit(seq);
            return;
        }
        let mut frontier: Vec<usize> = Vec::new();
        for &u in seq.iter() {
            for &v in &adj[u] {
                if !in_seq[v] && !frontier.contains(&v) {
                    frontier.push(v);
                }
            }
        }
        for v in frontier {
            in_seq[v] = true;
            seq.push(v);
            rec(adj, size, seq, in_seq, visit);
            seq.pop();
            in_seq[v] = false;
        }
    }
    rec(adj, size, &mut seq, &mut in_seq, visit);
}

fn tree_adjacency(f: &Forest) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); f.n()];
    for (u, p) in f.edges() {
        adj[u].push(p);
        adj[p].push(u);
    }
    adj
}

/// Number of histories of `f`'s tree that start at `start`, by enumeration.
pub fn count_histories_by_enumeration(f: &Forest, start: usize) -> u64 {
    let adj = tree_adjacency(f);
    let mut c = 0u64;
    for_each_history(&adj, start, &mut |_| c += 1);
    c
}

/// Every history of a single tree (all start nodes), by enumeration.
pub fn list_histories(f: &Forest) -> Vec<Vec<usize>> {
    let adj = tree_adjacency(f);
    let mut out = Vec::new();
    for s in 0..f.n() {
        for_each_history(&adj, s, &mut |h| out.push(h.to_vec()));
    }
    out
}

/// All labeled trees on `n` nodes, decoded from Prüfer sequences.
pub fn all_labeled_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n == 1 {
        return vec![Vec::new()];
    }
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).expect("leaf exists");
            edges.push((leaf.min(s), leaf.max(s)));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        out.push(edges);
    }
    out
}

/// Exact conditional distribution of the spanning tree given a full ordering
/// (single-root variant): trees for which the ordering is a valid history,
/// weighted by their likelihood.
pub fn exact_tree_given_ordering(
    g: &LabeledGraph,
    ordering: &Ordering,
    params: &ModelParams,
) -> Result<Vec<(Vec<(usize, usize)>, f64)>> {
    let root = ordering.node_at(0);
    let mut items = Vec::new();
    for edges in enumerate_spanning_forests(g, Some(1))? {
        let f = forest_from_edges(g.n(), &edges, &[root]);
        if ordering.is_history_of(&f) {
            items.push((edges, log_likelihood_forest(&f, params)));
        }
    }
    let lz = log_sum_exp(&items.iter().map(|x| x.1).collect::<Vec<_>>());
    Ok(items.into_iter().map(|(e, l)| (e, (l - lz).exp())).collect())
}
