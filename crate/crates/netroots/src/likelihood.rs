//! Exact log-likelihoods of time-labeled forests.
//!
//! The probability of a forest grown in a given order depends on the forest
//! only through its degree sequence (and, for multi-root variants, on which
//! nodes are roots).

use crate::forest::Forest;
use crate::params::{ModelParams, Variant};

/// `log prod_{j=1}^{k-1} (b j + a)`; zero for `k <= 1`.
pub fn log_psi(k: usize, a: f64, b: f64) -> f64 {
    (1..k).map(|j| (b * j as f64 + a).ln()).sum()
}

/// `log prod_{j=2}^{k+1} (b j + a)`; the root version with the self-loop bonus.
pub fn log_psi_root(k: usize, a: f64, b: f64) -> f64 {
    (2..k + 2).map(|j| (b * j as f64 + a).ln()).sum()
}

/// Log of the arrival normalizer, the product of the per-step weight totals.
pub fn log_normalizer(n: usize, k_roots: usize, params: &ModelParams) -> f64 {
    let (a, b) = params.attach();
    match params.variant {
        Variant::SingleRoot | Variant::SeqPaper | Variant::SeqPaperStar => (3..=n)
            .map(|t| (2.0 * (t as f64 - 2.0) * b + (t as f64 - 1.0) * a).ln())
            .sum(),
        Variant::FixedK => (k_roots + 1..=n)
            .map(|t| ((2.0 * b + a) * (t as f64 - 1.0)).ln())
            .sum(),
        Variant::RandomK => {
            let a0 = params.alpha0();
            (2..=n)
                .map(|t| ((2.0 * b + a) * (t as f64 - 1.0) + a0).ln())
                .sum()
        }
    }
}

/// Log-probability that the growth process produced `f` with its nodes
/// arriving in a valid order (any valid order has the same probability).
///
/// Returns `-inf` when the forest shape is impossible under the variant
/// (wrong number of trees).
pub fn log_likelihood_forest(f: &Forest, params: &ModelParams) -> f64 {
    let (a, b) = params.attach();
    let n = f.n();
    let k = f.num_trees();
    let mut root_deg = Vec::with_capacity(k);
    let mut other_deg = Vec::with_capacity(n);
    for u in 0..n {
        if f.is_root(u) {
            root_deg.push(f.degree(u));
        } else {
            other_deg.push(f.degree(u));
        }
    }
    // summing in sorted order makes equal degree multisets give bit-identical results
    root_deg.sort_unstable();
    other_deg.sort_unstable();
    match params.variant {
        Variant::SingleRoot | Variant::SeqPaper | Variant::SeqPaperStar => {
            if k != 1 {
                return f64::NEG_INFINITY;
            }
            let mut all = root_deg;
            all.extend(other_deg);
            all.sort_unstable();
            let num: f64 = all.iter().map(|&d| log_psi(d, a, b)).sum();
            num - log_normalizer(n, 1, params)
        }
        Variant::FixedK | Variant::RandomK => {
            if params.variant == Variant::FixedK && k != params.k_fixed() {
                return f64::NEG_INFINITY;
            }
            let num: f64 = root_deg.iter().map(|&d| log_psi_root(d, a, b)).sum::<f64>()
                + other_deg.iter().map(|&d| log_psi(d, a, b)).sum::<f64>();
            let extra = if params.variant == Variant::RandomK {
                (k as f64 - 1.0) * params.alpha0().ln()
            } else {
                0.0
            };
            num + extra - log_normalizer(n, k, params)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::ln_factorial;

    /// Every forest the growth process can produce with node `t` arriving at time `t`.
    fn time_labeled(n: usize, params: &ModelParams) -> Vec<Forest> {
        let k0 = params.k_fixed();
        let mut out = Vec::new();
        let mut parent = vec![None; n];
        fn rec(
            t: usize,
            n: usize,
            k0: usize,
            random_k: bool,
            parent: &mut Vec<Option<usize>>,
            out: &mut Vec<Forest>,
        ) {
            if t == n {
                out.push(Forest::from_parents(parent.clone()).unwrap());
                return;
            }
            if t < k0 {
                rec(t + 1, n, k0, random_k, parent, out);
                return;
            }
            if random_k {
                parent[t] = None;
                rec(t + 1, n, k0, random_k, parent, out);
            }
            for p in 0..t {
                parent[t] = Some(p);
                rec(t + 1, n, k0, random_k, parent, out);
            }
            parent[t] = None;
        }
        let start_k = if params.variant == Variant::RandomK { 1 } else { k0 };
        rec(0, n, start_k, params.variant == Variant::RandomK, &mut parent, &mut out);
        out
    }

    fn total(n: usize, params: &ModelParams) -> f64 {
        time_labeled(n, params)
            .iter()
            .map(|f| log_likelihood_forest(f, params).exp())
            .sum()
    }

    #[test]
    fn normalizes_for_all_variants() {
        for &(a, b) in &[(1.0, 0.0), (0.0, 1.0), (8.0, 1.0), (0.5, 2.0)] {
            for n in 1..=5 {
                let s = total(n, &ModelParams::single_root(a, b));
                assert!((s - 1.0).abs() < 1e-10, "single n={n} a={a} b={b}: {s}");
                for k in 1..=n.min(3) {
                    let s = total(n, &ModelParams::fixed_k(a, b, k));
                    assert!((s - 1.0).abs() < 1e-10, "fixed k={k} n={n}: {s}");
                }
                let s = total(n, &ModelParams::random_k(a, b, 0.7));
                assert!((s - 1.0).abs() < 1e-10, "random n={n}: {s}");
            }
        }
    }

    #[test]
    fn uniform_attachment_is_one_over_factorial() {
        let f = Forest::from_parents(vec![None, Some(0), Some(1), Some(1), Some(0)]).unwrap();
        let ll = log_likelihood_forest(&f, &ModelParams::uniform());
        assert!((ll + ln_factorial(4)).abs() < 1e-12);
        let ll = log_likelihood_forest(&f, &ModelParams::single_root(f64::INFINITY, 1.0));
        assert!((ll + ln_factorial(4)).abs() < 1e-12);
    }

    #[test]
    fn lpa_path_three() {
        let f = Forest::from_parents(vec![None, Some(0), Some(1)]).unwrap();
        let ll = log_likelihood_forest(&f, &ModelParams::lpa());
        assert!((ll - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn wrong_tree_count_is_impossible() {
        let f = Forest::singletons(3);
        assert_eq!(log_likelihood_forest(&f, &ModelParams::lpa()), f64::NEG_INFINITY);
        assert_eq!(
            log_likelihood_forest(&f, &ModelParams::fixed_k(1.0, 0.0, 2)),
            f64::NEG_INFINITY
        );
    }
}
