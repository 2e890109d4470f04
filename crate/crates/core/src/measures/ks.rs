//! Kolmogorov–Smirnov distance between a sample and a law.

use super::Measure;

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF `F_n` of `sample`.
///
/// The sample is expected sorted; an unsorted sample is sorted into a copy.
/// Ties and atoms of `dist` are handled by comparing both one-sided limits.
pub fn ks_distance(sample: &[f64], dist: &Measure) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let sorted;
    let xs = if sample.windows(2).all(|w| w[0] <= w[1]) {
        sample
    } else {
        let mut v = sample.to_vec();
        v.sort_by(f64::total_cmp);
        sorted = v;
        &sorted
    };
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        d = d.max((j as f64 / n - dist.cdf(v)).abs());
        d = d.max((i as f64 / n - dist.cdf_left(v)).abs());
        i = j;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{AnalyticDistribution, DiscreteMeasure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_sample() {
        let d: Measure = DiscreteMeasure::dirac(0.0).into();
        assert_eq!(ks_distance(&[0.0], &d), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.0, 0.0], &d), 0.0);
        assert_eq!(ks_distance(&[1.0], &d), 1.0);
    }

    #[test]
    fn stratified_sample_is_close() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        let m = 1000;
        let xs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
        let d = ks_distance(&xs, &u);
        assert!(d <= 0.5 / m as f64 + 1e-12, "{d}");
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        assert_eq!(ks_distance(&[0.75, 0.25], &u), ks_distance(&[0.25, 0.75], &u));
    }

    #[test]
    fn iid_uniform_meets_kolmogorov_bound() {
        let u: Measure = AnalyticDistribution::uniform(0.0, 1.0).unwrap().into();
        let n = 100_000;
        let mut passes = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            xs.sort_by(f64::total_cmp);
            if ks_distance(&xs, &u) <= 1.95 / (n as f64).sqrt() {
                passes += 1;
            }
        }
        assert!(passes >= 19, "{passes}/20");
    }
}
