//! Exact draws from a Boltzmann distribution over a candidate subset.
//!
//! Uniform proposals are accepted with probability `exp(beta * (mu_i - max))`.
//! After `candidates.len()` rejections the draw falls back to inverse-CDF
//! sampling over the candidates, which leaves the output law unchanged and
//! bounds the work per draw.

use rand::Rng;

/// Index into `candidates` of a draw from `softmax(beta * mu)` restricted to
/// the candidate pairs. A candidate set whose total weight underflows to zero
/// is sampled uniformly.
pub fn sample_softmax_among<R: Rng + ?Sized>(mu: &[f64], beta: f64, candidates: &[usize], rng: &mut R) -> usize {
    let n = candidates.len();
    assert!(n > 0, "cannot sample from an empty candidate set");
    if n == 1 {
        return 0;
    }
    if beta == 0.0 {
        return rng.gen_range(0..n);
    }
    let max = candidates.iter().map(|&i| mu[i]).fold(f64::NEG_INFINITY, f64::max);

    for _ in 0..n {
        let j = rng.gen_range(0..n);
        let w = (beta * (mu[candidates[j]] - max)).exp();
        if rng.gen::<f64>() < w {
            return j;
        }
    }

    let weights: Vec<f64> = candidates.iter().map(|&i| (beta * (mu[i] - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.gen_range(0..n);
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    // rounding left u just above the running sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(n - 1)
}
