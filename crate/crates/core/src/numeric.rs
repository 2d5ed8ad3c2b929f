//! Small reductions shared by the simulators and estimators.
//!
//! Means are computed with pairwise summation in a fixed order so results do
//! not depend on how the inputs were produced (serially or in parallel).

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
///
/// Deviations are taken from the first element before summing, so a constant
/// sample returns that constant exactly with a standard error of zero.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let shift = xs[0];
    let dev: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let mean_dev = pairwise_sum(&dev) / n as f64;
    let mean = shift + mean_dev;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = dev.iter().map(|d| (d - mean_dev) * (d - mean_dev)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
