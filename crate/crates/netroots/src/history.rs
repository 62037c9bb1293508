//! Counting and sampling arrival histories of trees and forests.

use rand::Rng;

use crate::forest::{Forest, Ordering};
use crate::inference::RootDistribution;
use crate::params::{ModelParams, Variant};
use crate::util::{ln_factorial, sample_log_weighted, sample_weighted, shuffle};

/// Log history counts `log h(u, t)` for every node of a single tree.
#[derive(Clone, Debug)]
pub struct HistoryCounts {
    pub log_h: Vec<f64>,
    pub log_h_total: f64,
}

/// `log h(u)` for every node of the tree rooted at `root`, in preorder.
///
/// `sizes` are subtree sizes under the forest's current rooting. Uses the
/// rerooting recurrence `h(u) = h(pa(u)) * n_u / (N - n_u)`.
pub fn tree_log_h(f: &Forest, root: usize, sizes: &[usize]) -> Vec<(usize, f64)> {
    let mut scratch = vec![0.0; f.n()];
    tree_log_h_with(f, root, sizes, &mut scratch)
}

/// As [`tree_log_h`], using `scratch` (length `n`) for parent lookups.
pub(crate) fn tree_log_h_with(
    f: &Forest,
    root: usize,
    sizes: &[usize],
    scratch: &mut [f64],
) -> Vec<(usize, f64)> {
    let nodes = f.preorder(root);
    let total = nodes.len();
    let mut log_h_root = ln_factorial(total);
    for &v in &nodes {
        log_h_root -= (sizes[v] as f64).ln();
    }
    let mut out = Vec::with_capacity(total);
    // preorder visits a parent before its children
    for &v in &nodes {
        let h = match f.parent(v) {
            None => log_h_root,
            Some(p) => scratch[p] + (sizes[v] as f64).ln() - ((total - sizes[v]) as f64).ln(),
        };
        scratch[v] = h;
        out.push((v, h));
    }
    out
}

/// History counts of a forest consisting of one tree.
pub fn count_histories(t: &Forest) -> HistoryCounts {
    assert_eq!(t.num_trees(), 1, "count_histories expects a single tree");
    let sizes = t.subtree_sizes();
    let root = t.roots()[0];
    let mut log_h = vec![0.0; t.n()];
    for (v, h) in tree_log_h(t, root, &sizes) {
        log_h[v] = h;
    }
    let log_h_total = crate::util::log_sum_exp(&log_h);
    HistoryCounts { log_h, log_h_total }
}

/// Unnormalized log root weight of `u` within its tree.
///
/// Single-root variants use `h(u)`; multi-root variants multiply by
/// `(b D(u) + b + a)(b D(u) + a)` to account for the root self-loop.
#[inline]
pub fn root_log_weight(log_h: f64, degree: usize, params: &ModelParams) -> f64 {
    if params.variant.is_multi_root() {
        let (a, b) = params.attach();
        let d = degree as f64;
        log_h + (b * d + b + a).ln() + (b * d + a).ln()
    } else {
        log_h
    }
}

/// Root probabilities within the tree rooted at `root`, as `(node, prob)` pairs.
pub fn tree_root_probabilities(
    f: &Forest,
    root: usize,
    sizes: &[usize],
    params: &ModelParams,
) -> Vec<(usize, f64)> {
    let mut scratch = vec![0.0; f.n()];
    tree_root_probabilities_with(f, root, sizes, params, &mut scratch)
}

pub(crate) fn tree_root_probabilities_with(
    f: &Forest,
    root: usize,
    sizes: &[usize],
    params: &ModelParams,
    scratch: &mut [f64],
) -> Vec<(usize, f64)> {
    let lh = tree_log_h_with(f, root, sizes, scratch);
    if lh.len() == 1 {
        return vec![(root, 1.0)];
    }
    let lw: Vec<f64> = lh
        .iter()
        .map(|&(v, h)| root_log_weight(h, f.degree(v), params))
        .collect();
    let p = crate::util::normalize_log(&lw);
    lh.iter().map(|&(v, _)| v).zip(p).collect()
}

/// Probability that each node is the root of its tree given the forest.
///
/// For one tree this sums to 1. For several trees each tree carries mass 1,
/// so the vector holds root-inclusion probabilities summing to the tree count.
pub fn root_probabilities(f: &Forest, params: &ModelParams) -> RootDistribution {
    let sizes = f.subtree_sizes();
    let mut probs = vec![0.0; f.n()];
    let mut scratch = vec![0.0; f.n()];
    for r in f.roots() {
        for (v, p) in tree_root_probabilities_with(f, r, &sizes, params, &mut scratch) {
            probs[v] = p;
        }
    }
    RootDistribution::new_unchecked(probs)
}

/// Redraws the root of every tree from its conditional distribution and
/// reroots the forest accordingly.
pub fn resample_roots<R: Rng + ?Sized>(f: &mut Forest, params: &ModelParams, rng: &mut R) {
    let sizes = f.subtree_sizes();
    let mut scratch = vec![0.0; f.n()];
    let mut new_roots = Vec::new();
    for r in f.roots() {
        let lh = tree_log_h_with(f, r, &sizes, &mut scratch);
        if lh.len() == 1 {
            continue;
        }
        let lw: Vec<f64> = lh
            .iter()
            .map(|&(v, h)| root_log_weight(h, f.degree(v), params))
            .collect();
        new_roots.push(lh[sample_log_weighted(&lw, rng)].0);
    }
    for u in new_roots {
        f.reroot(u);
    }
}

/// Draws an ordering from the conditional distribution given the forest.
///
/// Each tree's root is redrawn first (the forest is rerooted in place), then
/// the ordering is filled by the random-permutation-and-repair procedure.
pub fn sample_history<R: Rng + ?Sized>(f: &mut Forest, params: &ModelParams, rng: &mut R) -> Ordering {
    resample_roots(f, params, rng);
    history_given_roots(f, params.variant, rng)
}

/// Uniform valid ordering for the forest's current roots.
///
/// Fixed-K puts all roots first in random order; otherwise the first node is a
/// root drawn with probability proportional to its tree size.
pub fn history_given_roots<R: Rng + ?Sized>(f: &Forest, variant: Variant, rng: &mut R) -> Ordering {
    let n = f.n();
    let roots = f.roots();
    let mut placed = vec![false; n];
    let mut prefix: Vec<usize> = Vec::new();
    if variant == Variant::FixedK {
        prefix = roots.clone();
        shuffle(&mut prefix, rng);
    } else if !roots.is_empty() {
        let sizes: Vec<f64> = if roots.len() == 1 {
            vec![1.0]
        } else {
            let s = f.subtree_sizes();
            roots.iter().map(|&r| s[r] as f64).collect()
        };
        prefix.push(roots[sample_weighted(&sizes, rng)]);
    }
    for &u in &prefix {
        placed[u] = true;
    }
    let mut rest: Vec<usize> = (0..n).filter(|&u| !placed[u]).collect();
    shuffle(&mut rest, rng);
    let t0 = prefix.len();
    prefix.extend(rest);
    let mut ord = Ordering::from_nodes(prefix).expect("permutation");
    for t in t0..n {
        let v1 = ord.node_at(t);
        let mut v = v1;
        while let Some(p) = f.parent(v) {
            if placed[p] {
                break;
            }
            v = p;
        }
        if v != v1 {
            let tv = ord.position(v);
            ord.swap_positions(t, tv);
        }
        placed[v] = true;
    }
    debug_assert!(ord.is_history_of(f));
    ord
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::count_histories_by_enumeration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn path3() -> Forest {
        Forest::from_parents(vec![None, Some(0), Some(1)]).unwrap()
    }

    #[test]
    fn path_and_star_counts() {
        let h = count_histories(&path3());
        let ex: Vec<f64> = h.log_h.iter().map(|x| x.exp()).collect();
        for (a, b) in ex.iter().zip([1.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        let star = Forest::from_parents(vec![None, Some(0), Some(0), Some(0)]).unwrap();
        let h = count_histories(&star);
        assert!((h.log_h[0].exp() - 6.0).abs() < 1e-9);
        assert!((h.log_h[1].exp() - 2.0).abs() < 1e-9);
        assert!((h.log_h_total.exp() - 12.0).abs() < 1e-9);
        assert_eq!(count_histories(&Forest::singletons(1)).log_h[0], 0.0);
    }

    #[test]
    fn path_root_probabilities() {
        let d = root_probabilities(&path3(), &ModelParams::uniform());
        assert!((d.probs()[0] - 0.25).abs() < 1e-12);
        assert!((d.probs()[1] - 0.5).abs() < 1e-12);
        let two = Forest::from_parents(vec![None, Some(0)]).unwrap();
        let d = root_probabilities(&two, &ModelParams::lpa());
        assert!((d.probs()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multi_root_weights_and_singletons() {
        // 2-node tree plus a singleton; each tree has mass 1
        let f = Forest::from_parents(vec![None, Some(0), None]).unwrap();
        let d = root_probabilities(&f, &ModelParams::fixed_k(0.0, 1.0, 2));
        for (x, y) in d.probs().iter().zip([0.5, 0.5, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrence_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(1..120);
            let s = crate::generate::generate_apa_tree(n, &ModelParams::uniform(), &mut rng).unwrap();
            let mut t = s.true_forest.clone();
            let h = count_histories(&t);
            for u in 0..n {
                t.reroot(u);
                let direct = ln_factorial(n)
                    - t.subtree_sizes().iter().map(|&x| (x as f64).ln()).sum::<f64>();
                assert!((direct - h.log_h[u]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn counts_match_enumeration_small() {
        let f = Forest::from_parents(vec![None, Some(0), Some(1), Some(1), Some(0), Some(4)]).unwrap();
        let h = count_histories(&f);
        for u in 0..6 {
            let c = count_histories_by_enumeration(&f, u);
            assert!((h.log_h[u] - (c as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn path_first_node_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = path3();
        let mut hits = 0;
        for _ in 0..40000 {
            let o = sample_history(&mut f, &ModelParams::uniform(), &mut rng);
            assert!(o.is_history_of(&f));
            if o.node_at(0) == 1 {
                hits += 1;
            }
        }
        assert!((hits as f64 / 40000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn two_node_tree_both_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = Forest::from_parents(vec![None, Some(0)]).unwrap();
        let first0 = (0..20000)
            .filter(|_| sample_history(&mut f, &ModelParams::lpa(), &mut rng).node_at(0) == 0)
            .count();
        assert!((first0 as f64 / 20000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn fixed_k_roots_first_and_random_k_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = Forest::from_parents(vec![None, Some(0), None, Some(2), Some(3), Some(0)]).unwrap();
        for _ in 0..200 {
            let o = sample_history(&mut f, &ModelParams::fixed_k(1.0, 0.0, 2), &mut rng);
            let first: Vec<bool> = (0..2).map(|i| f.is_root(o.node_at(i))).collect();
            assert_eq!(first, vec![true, true]);
            assert!(o.is_history_of(&f));
            let o = sample_history(&mut f, &ModelParams::random_k(1.0, 0.0, 1.0), &mut rng);
            assert!(f.is_root(o.node_at(0)) && o.is_history_of(&f));
        }
        let f = Forest::singletons(4);
        let o = history_given_roots(&f, Variant::FixedK, &mut rng);
        assert!(o.check());
    }

    #[test]
    fn random_k_first_node_proportional_to_tree_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Forest::from_parents(vec![None, Some(0), Some(0), None]).unwrap();
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for _ in 0..40000 {
            *counts.entry(history_given_roots(&f, Variant::RandomK, &mut rng).node_at(0)).or_default() += 1;
        }
        assert!((counts[&0] as f64 / 40000.0 - 0.75).abs() < 0.01);
    }
}
