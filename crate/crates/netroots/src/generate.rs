//! Forward simulation of every model variant.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Ordering};
use crate::graph::LabeledGraph;
use crate::params::{ModelParams, Variant};

/// A simulated graph together with the hidden truth that produced it.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub graph: LabeledGraph,
    pub true_forest: Forest,
    pub true_ordering: Ordering,
    pub true_roots: Vec<usize>,
    pub params: ModelParams,
}

/// JSON form of [`SimOutput`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimRecord {
    pub schema_version: String,
    pub params: ModelParams,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub parent: Vec<Option<usize>>,
    pub ordering: Vec<usize>,
    pub roots: Vec<usize>,
}

impl SimOutput {
    pub fn to_record(&self) -> SimRecord {
        SimRecord {
            schema_version: crate::SCHEMA_VERSION.to_string(),
            params: self.params.clone(),
            labels: self.graph.labels().to_vec(),
            edges: self.graph.edges().to_vec(),
            parent: self.true_forest.parents().to_vec(),
            ordering: self.true_ordering.nodes().to_vec(),
            roots: self.true_roots.clone(),
        }
    }

    pub fn from_record(r: SimRecord) -> Result<Self> {
        let graph = LabeledGraph::with_labels(r.labels, r.edges);
        let true_forest = Forest::from_parents(r.parent)?;
        let true_ordering = Ordering::from_nodes(r.ordering)?;
        Ok(SimOutput {
            graph,
            true_forest,
            true_ordering,
            true_roots: r.roots,
            params: r.params,
        })
    }
}

/// Grows a forest where node `t` arrives at time `t`; returns parent pointers.
fn grow_forest<R: Rng + ?Sized>(n: usize, params: &ModelParams, rng: &mut R) -> Vec<Option<usize>> {
    let (a, b) = params.attach();
    let mut parent = vec![None; n];
    // every forest edge contributes both endpoints; roots with a self-loop appear twice
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n);
    let self_loops = params.variant.is_multi_root();
    let k0 = match params.variant {
        Variant::FixedK => params.k_fixed().min(n),
        _ => 1.min(n),
    };
    for r in 0..k0 {
        if self_loops {
            endpoints.push(r);
            endpoints.push(r);
        }
    }
    for t in k0..n {
        let uniform_mass = a * t as f64;
        let pa_mass = b * endpoints.len() as f64;
        let new_root_mass = if params.variant == Variant::RandomK {
            params.alpha0()
        } else {
            0.0
        };
        let total = uniform_mass + pa_mass + new_root_mass;
        let target = if total > 0.0 {
            let x = rng.random::<f64>() * total;
            if x < new_root_mass {
                None
            } else if x < new_root_mass + uniform_mass {
                Some(rng.random_range(0..t))
            } else {
                Some(endpoints[rng.random_range(0..endpoints.len())])
            }
        } else {
            // only reachable for the second node under pure preferential attachment
            Some(0)
        };
        match target {
            None => {
                endpoints.push(t);
                endpoints.push(t);
            }
            Some(w) => {
                parent[t] = Some(w);
                endpoints.push(w);
                endpoints.push(t);
            }
        }
    }
    parent
}

/// Chooses `count` distinct node pairs that are not forest edges, uniformly.
fn noise_edges<R: Rng + ?Sized>(
    n: usize,
    forest_edges: &[(usize, usize)],
    count: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let total_pairs = n * n.saturating_sub(1) / 2;
    let free = total_pairs - forest_edges.len();
    if count > free {
        return Err(Error::Infeasible(format!(
            "{count} noise edges requested but only {free} free pairs exist"
        )));
    }
    let norm = |(u, v): (usize, usize)| (u.min(v), u.max(v));
    let mut taken: HashSet<(usize, usize)> = forest_edges.iter().map(|&e| norm(e)).collect();
    if count * 2 <= free {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u == v {
                continue;
            }
            let e = norm((u, v));
            if taken.insert(e) {
                out.push(e);
            }
        }
        Ok(out)
    } else {
        let mut pool = Vec::with_capacity(free);
        for u in 0..n {
            for v in u + 1..n {
                if !taken.contains(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        for i in 0..count {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        taken.clear();
        Ok(pool)
    }
}

fn finish(
    n: usize,
    parent: Vec<Option<usize>>,
    extra: Vec<(usize, usize)>,
    params: &ModelParams,
) -> SimOutput {
    let forest = Forest::from_parents(parent).expect("grown forest is valid");
    let mut edges: Vec<(usize, usize)> = forest.edges();
    edges.extend(extra);
    let graph = LabeledGraph::from_edges(n, edges);
    let roots = forest.roots();
    SimOutput {
        graph,
        true_forest: forest,
        true_ordering: Ordering::identity(n),
        true_roots: roots,
        params: params.clone(),
    }
}

fn check_variant(params: &ModelParams, allowed: &[Variant]) -> Result<()> {
    params.validate()?;
    if !allowed.contains(&params.variant) {
        return Err(Error::InvalidParams(format!(
            "generator does not handle the {} variant",
            params.variant.name()
        )));
    }
    Ok(())
}

fn check_m(n: usize, m: usize, forest_edges: usize) -> Result<()> {
    let max = n * n.saturating_sub(1) / 2;
    if m < forest_edges || m > max {
        return Err(Error::Infeasible(format!(
            "m={m} must lie in [{forest_edges}, {max}] for n={n}"
        )));
    }
    Ok(())
}

/// APA tree on `n` nodes (the graph is the tree itself).
pub fn generate_apa_tree<R: Rng + ?Sized>(n: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    check_variant(params, &[Variant::SingleRoot])?;
    if n == 0 {
        return Err(Error::InvalidParams("n must be >= 1".into()));
    }
    let parent = grow_forest(n, params, rng);
    Ok(finish(n, parent, Vec::new(), params))
}

/// Single-root graph: APA tree plus `m - (n - 1)` uniformly chosen extra edges.
pub fn generate_paper<R: Rng + ?Sized>(n: usize, m: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    check_variant(params, &[Variant::SingleRoot])?;
    if n == 0 {
        return Err(Error::InvalidParams("n must be >= 1".into()));
    }
    check_m(n, m, n - 1)?;
    let parent = grow_forest(n, params, rng);
    let fe: Vec<_> = parent.iter().enumerate().filter_map(|(u, p)| p.map(|p| (u, p))).collect();
    let extra = noise_edges(n, &fe, m - fe.len(), rng)?;
    Ok(finish(n, parent, extra, params))
}

/// Fixed-K forest plus uniformly chosen extra edges up to `m` total.
pub fn generate_fixed_k<R: Rng + ?Sized>(n: usize, m: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    check_variant(params, &[Variant::FixedK])?;
    let k = params.k_fixed();
    if k > n {
        return Err(Error::InvalidParams(format!("k={k} exceeds n={n}")));
    }
    check_m(n, m, n - k)?;
    let parent = grow_forest(n, params, rng);
    let fe: Vec<_> = parent.iter().enumerate().filter_map(|(u, p)| p.map(|p| (u, p))).collect();
    let extra = noise_edges(n, &fe, m - fe.len(), rng)?;
    Ok(finish(n, parent, extra, params))
}

/// Random-K forest plus uniformly chosen extra edges up to `m` total.
pub fn generate_random_k<R: Rng + ?Sized>(n: usize, m: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    check_variant(params, &[Variant::RandomK])?;
    if n == 0 {
        return Err(Error::InvalidParams("n must be >= 1".into()));
    }
    let parent = grow_forest(n, params, rng);
    let fe: Vec<_> = parent.iter().enumerate().filter_map(|(u, p)| p.map(|p| (u, p))).collect();
    check_m(n, m, fe.len())?;
    let extra = noise_edges(n, &fe, m - fe.len(), rng)?;
    Ok(finish(n, parent, extra, params))
}

/// Noise probability for an earlier node of tree degree `d` when node number
/// `k` (1-based arrival time, `k >= 3`) arrives, capped at 1.
pub fn seq_noise_prob(k: usize, d: usize, theta: f64, alpha_t: f64, beta_t: f64) -> f64 {
    let z = 2.0 * (k as f64 - 2.0) * beta_t + (k as f64 - 1.0) * alpha_t;
    (theta * (beta_t * d as f64 + alpha_t) / z).min(1.0)
}

/// Sequential-noise graph; for the star variant tree edges are then deleted
/// independently (the returned forest keeps them).
pub fn generate_seq_paper<R: Rng + ?Sized>(n: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    check_variant(params, &[Variant::SeqPaper, Variant::SeqPaperStar])?;
    if n == 0 {
        return Err(Error::InvalidParams("n must be >= 1".into()));
    }
    let tree_params = params.with_attachment(params.alpha, params.beta);
    let parent = grow_forest(n, &tree_params, rng);
    let (theta, at, bt) = params.noise();
    let mut deg = vec![0usize; n];
    let mut edges = Vec::new();
    for t in 0..n {
        let p = parent[t];
        if t >= 2 && theta > 0.0 {
            for j in 0..t {
                if Some(j) == p {
                    continue;
                }
                let q = seq_noise_prob(t + 1, deg[j], theta, at, bt);
                if rng.random::<f64>() < q {
                    edges.push((j, t));
                }
            }
        }
        if let Some(p) = p {
            deg[p] += 1;
            deg[t] += 1;
        }
    }
    let eta = params.eta();
    for (u, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            if params.variant == Variant::SeqPaperStar && rng.random::<f64>() < eta {
                continue;
            }
            edges.push((u, p));
        }
    }
    let forest = Forest::from_parents(parent).expect("grown tree is valid");
    let roots = forest.roots();
    Ok(SimOutput {
        graph: LabeledGraph::from_edges(n, edges),
        true_forest: forest,
        true_ordering: Ordering::identity(n),
        true_roots: roots,
        params: params.clone(),
    })
}

/// Dispatches to the generator for `params.variant`. `m` is ignored by seq variants.
pub fn generate<R: Rng + ?Sized>(n: usize, m: usize, params: &ModelParams, rng: &mut R) -> Result<SimOutput> {
    match params.variant {
        Variant::SingleRoot => generate_paper(n, m, params, rng),
        Variant::FixedK => generate_fixed_k(n, m, params, rng),
        Variant::RandomK => generate_random_k(n, m, params, rng),
        Variant::SeqPaper | Variant::SeqPaperStar => generate_seq_paper(n, params, rng),
    }
}

/// Applies a uniform random relabeling to graph and truth.
///
/// Returns the relabeled output and the permutation `perm`, where old node `u`
/// becomes node `perm[u]`. Labels are reset to the new indices.
pub fn relabel_randomly<R: Rng + ?Sized>(sim: &SimOutput, rng: &mut R) -> (SimOutput, Vec<usize>) {
    let n = sim.graph.n();
    let mut perm: Vec<usize> = (0..n).collect();
    crate::util::shuffle(&mut perm, rng);
    (relabel_with(sim, &perm), perm)
}

/// Relabels with a given permutation (old node `u` becomes `perm[u]`).
pub fn relabel_with(sim: &SimOutput, perm: &[usize]) -> SimOutput {
    let n = sim.graph.n();
    let edges = sim.graph.edges().iter().map(|&(u, v)| (perm[u], perm[v]));
    let graph = LabeledGraph::from_edges(n, edges);
    let mut parent = vec![None; n];
    for u in 0..n {
        parent[perm[u]] = sim.true_forest.parent(u).map(|p| perm[p]);
    }
    let order: Vec<usize> = sim.true_ordering.nodes().iter().map(|&u| perm[u]).collect();
    let mut roots: Vec<usize> = sim.true_roots.iter().map(|&r| perm[r]).collect();
    roots.sort_unstable();
    SimOutput {
        graph,
        true_forest: Forest::from_parents(parent).expect("relabeled forest is valid"),
        true_ordering: Ordering::from_nodes(order).expect("relabeled ordering is valid"),
        true_roots: roots,
        params: sim.params.clone(),
    }
}

/// Probability that arriving node number `t` (1-based) attaches to each earlier
/// node, given their current forest degrees and root flags. Exposed for tests.
pub fn attachment_probabilities(deg: &[usize], is_root: &[bool], t: usize, params: &ModelParams) -> Vec<f64> {
    let (a, b) = params.attach();
    let bonus = params.variant.is_multi_root();
    let w: Vec<f64> = (0..t - 1)
        .map(|i| b * deg[i] as f64 + a + if bonus && is_root[i] { 2.0 * b } else { 0.0 })
        .collect();
    let z = match params.variant {
        Variant::FixedK | Variant::RandomK => (2.0 * b + a) * (t as f64 - 1.0),
        _ => 2.0 * b * (t as f64 - 2.0) + a * (t as f64 - 1.0),
    };
    w.into_iter().map(|x| x / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn small_cases() {
        let mut r = rng(1);
        let s = generate_apa_tree(2, &ModelParams::lpa(), &mut r).unwrap();
        assert_eq!(s.true_forest.parent(1), Some(0));
        let s = generate_paper(3, 3, &ModelParams::uniform(), &mut r).unwrap();
        assert_eq!(s.graph.m(), 3);
        let s = generate_paper(50, 49, &ModelParams::lpa(), &mut r).unwrap();
        assert_eq!(s.graph.edges().to_vec(), s.true_forest.edge_key());
        assert!(generate_paper(5, 3, &ModelParams::lpa(), &mut r).is_err());
        assert!(generate_paper(5, 11, &ModelParams::lpa(), &mut r).is_err());
    }

    #[test]
    fn third_node_splits_evenly() {
        for p in [ModelParams::uniform(), ModelParams::lpa()] {
            let mut r = rng(2);
            let hits = (0..20000)
                .filter(|_| generate_apa_tree(3, &p, &mut r).unwrap().true_forest.parent(2) == Some(0))
                .count();
            assert!((hits as f64 / 20000.0 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn fixed_k_edge_cases() {
        let mut r = rng(3);
        let s = generate_fixed_k(5, 0, &ModelParams::fixed_k(1.0, 0.0, 5), &mut r).unwrap();
        assert_eq!(s.true_forest.num_trees(), 5);
        let s = generate_fixed_k(400, 600, &ModelParams::fixed_k(0.0, 1.0, 2), &mut r).unwrap();
        assert_eq!((s.graph.m(), s.true_forest.num_trees()), (600, 2));
        assert_eq!(s.true_roots, vec![0, 1]);
        assert!(s.true_forest.is_subgraph_of(&s.graph));
    }

    #[test]
    fn dense_noise_uses_complement() {
        let mut r = rng(4);
        let s = generate_paper(30, 400, &ModelParams::uniform(), &mut r).unwrap();
        assert_eq!(s.graph.m(), 400);
        assert!(s.true_forest.is_subgraph_of(&s.graph));
    }

    #[test]
    fn random_k_tree_count_grows_logarithmically() {
        let mut r = rng(5);
        let p = ModelParams::random_k(1.0, 0.0, 2.0);
        let n = 2000;
        let mean: f64 = (0..200)
            .map(|_| generate_random_k(n, n + 100, &p, &mut r).unwrap().true_forest.num_trees() as f64)
            .sum::<f64>()
            / 200.0;
        // exact expectation: 1 + sum_{t=2}^n a0 / (c (t-1) + a0)
        let exact: f64 = 1.0 + (2..=n).map(|t| 2.0 / ((t - 1) as f64 + 2.0)).sum::<f64>();
        assert!((mean - exact).abs() < 0.5, "mean {mean} vs {exact}");
        assert!((exact - 2.0 * (n as f64).ln()).abs() < 2.0);
    }

    #[test]
    fn seq_noise_rate_approaches_theta() {
        let mut r = rng(6);
        let p = ModelParams::seq(0.0, 1.0, 1.5, 8.0, 1.0);
        let n = 600;
        let mut extra = 0usize;
        for _ in 0..10 {
            let s = generate_seq_paper(n, &p, &mut r).unwrap();
            extra += s.graph.m() - (n - 1);
        }
        let per_node = extra as f64 / (10.0 * n as f64);
        assert!((per_node - 1.5).abs() < 0.15, "noise per node {per_node}");
        let zero = ModelParams::seq(0.0, 1.0, 0.0, 1.0, 1.0);
        let s = generate_seq_paper(50, &zero, &mut r).unwrap();
        assert_eq!(s.graph.edges().to_vec(), s.true_forest.edge_key());
    }

    #[test]
    fn seq_star_deletes_some_tree_edges() {
        let mut r = rng(7);
        let p = ModelParams::seq_star(0.0, 1.0, 1.5, 8.0, 1.0, 0.3);
        let s = generate_seq_paper(300, &p, &mut r).unwrap();
        assert!(!s.true_forest.is_subgraph_of(&s.graph));
        assert_eq!(s.true_forest.num_trees(), 1);
    }

    #[test]
    fn noise_probabilities_are_capped() {
        for k in 3..50 {
            for d in 0..60 {
                let q = seq_noise_prob(k, d, 5.0, 1.0, 1.0);
                assert!((0.0..=1.0).contains(&q));
            }
        }
    }

    #[test]
    fn attachment_probabilities_sum_to_one() {
        let mut r = rng(8);
        for p in [
            ModelParams::lpa(),
            ModelParams::single_root(2.5, 1.0),
            ModelParams::fixed_k(0.0, 1.0, 3),
            ModelParams::fixed_k(0.3, 1.0, 2),
        ] {
            for _ in 0..20 {
                let s = match p.variant {
                    Variant::FixedK => generate_fixed_k(40, 39, &p, &mut r).unwrap(),
                    _ => generate_apa_tree(40, &p, &mut r).unwrap(),
                };
                // replay the growth and check the distribution at every step
                let k0 = p.k_fixed();
                let mut deg = vec![0; 40];
                let is_root: Vec<bool> = (0..40).map(|u| s.true_forest.is_root(u)).collect();
                for t in k0..40 {
                    if p.variant != Variant::SingleRoot || t >= 2 {
                        let pr = attachment_probabilities(&deg, &is_root, t + 1, &p);
                        let sum: f64 = pr.iter().sum();
                        assert!((sum - 1.0).abs() < 1e-12, "{sum}");
                    }
                    let par = s.true_forest.parent(t).unwrap();
                    deg[par] += 1;
                    deg[t] += 1;
                }
            }
        }
    }

    #[test]
    fn relabeling_is_consistent() {
        let mut r = rng(9);
        let s = generate_paper(30, 60, &ModelParams::lpa(), &mut r).unwrap();
        let ident: Vec<usize> = (0..30).collect();
        let same = relabel_with(&s, &ident);
        assert_eq!(same.graph.edges(), s.graph.edges());
        let (t, perm) = relabel_randomly(&s, &mut r);
        assert_eq!(t.graph.m(), s.graph.m());
        for &(u, v) in s.graph.edges() {
            assert!(t.graph.has_edge(perm[u], perm[v]));
        }
        assert!(t.true_ordering.is_history_of(&t.true_forest));
        for i in 0..30 {
            assert_eq!(t.true_ordering.node_at(i), perm[s.true_ordering.node_at(i)]);
        }
        assert_eq!(t.true_roots, vec![perm[0]]);
    }

    #[test]
    fn relabeled_root_position_is_uniform() {
        let mut r = rng(10);
        let s = generate_paper(3, 2, &ModelParams::uniform(), &mut r).unwrap();
        let mut counts = [0usize; 3];
        for _ in 0..30000 {
            counts[relabel_randomly(&s, &mut r).0.true_roots[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10000.0).abs() < 400.0);
        }
    }

    #[test]
    fn record_roundtrip() {
        let mut r = rng(11);
        let s = generate_fixed_k(20, 30, &ModelParams::fixed_k(1.0, 0.0, 2), &mut r).unwrap();
        let json = serde_json::to_string(&s.to_record()).unwrap();
        let back = SimOutput::from_record(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.graph, s.graph);
        assert_eq!(back.true_forest, s.true_forest);
    }
}
