//! Small statistics helpers used to check thermal distributions.

/// One-sample Kolmogorov–Smirnov statistic of `samples` against the
/// exponential distribution with the given mean.
pub fn ks_statistic_exponential(samples: &[f64], mean: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = if x <= 0.0 { 0.0 } else { -(-x / mean).exp_m1() };
            let below = i as f64 / n;
            let above = (i + 1) as f64 / n;
            (cdf - below).abs().max((above - cdf).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance level 1%.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_61 / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and its standard error.
pub fn mean_and_sem(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len() as f64;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
