use rand::Rng;

/// Draws an index with probability proportional to `weights`.
/// Falls back to a uniform draw when every weight is zero.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.random_range(0..weights.len());
    }
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    // rounding left a sliver at the end; return the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Draws an index from unnormalized log-weights.
pub fn sample_log_weighted<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return rng.random_range(0..log_weights.len());
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    sample_weighted(&w, rng)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities.
pub fn normalize_log(log_weights: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_weights);
    if lse == f64::NEG_INFINITY {
        let k = log_weights.len() as f64;
        return vec![1.0 / k; log_weights.len()];
    }
    log_weights.iter().map(|&l| (l - lse).exp()).collect()
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

/// log C(n, k) for integer arguments.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Uniform random permutation of a slice in place.
pub fn shuffle<T, R: Rng + ?Sized>(xs: &mut [T], rng: &mut R) {
    use rand::seq::SliceRandom;
    xs.shuffle(rng);
}
