//! Empirical statistics for comparing simulations with approximations.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::csv;
use crate::error::{Error, Result};

/// Provenance of an empirical sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleMeta {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub t: f64,
}

/// Independent replications of a scalar, e.g. `F_{n,1}(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub meta: SampleMeta,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, meta: SampleMeta) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empirical sample must be nonempty".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("empirical sample contains NaN".into()));
        }
        Ok(Self { values, meta })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SampleMeta::default())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn replications(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance (0 for a single value).
    pub fn variance(&self) -> f64 {
        let r = self.values.len();
        if r < 2 || self.values.iter().all(|&v| v == self.values[0]) {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1) as f64
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Exact two-sided Kolmogorov-Smirnov distance between the sample's
/// empirical cdf and `cdf`.
pub fn ks_distance(sample: &EmpiricalSample, cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sample.sorted();
    let r = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / r - f).max(f - i as f64 / r)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// `Phi((x - mu) / sigma)`.
pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let z = (x - mu) / sigma;
    Ok((0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

/// Density-normalized histogram with bins `[j w, (j+1) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<Bin>,
}

impl Histogram {
    pub fn total_area(&self) -> f64 {
        self.bins.iter().map(|b| b.density * (b.right - b.left)).sum()
    }

    /// CSV with header `bin_left,bin_right,density`.
    pub fn to_csv(&self) -> String {
        csv::table(
            &["bin_left", "bin_right", "density"],
            self.bins.iter().map(|b| [b.left, b.right, b.density]),
        )
    }
}

/// Histogram covering every bin from the smallest to the largest occupied
/// one (interior empty bins included).
pub fn histogram(sample: &EmpiricalSample, bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Domain(format!("bin width must be positive, got {bin_width}")));
    }
    let idx: Vec<i64> = sample.values.iter().map(|&x| (x / bin_width).floor() as i64).collect();
    let lo = *idx.iter().min().expect("sample is nonempty");
    let hi = *idx.iter().max().expect("sample is nonempty");
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &j in &idx {
        counts[(j - lo) as usize] += 1;
    }
    let norm = sample.replications() as f64 * bin_width;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(off, &c)| {
            let j = lo + off as i64;
            Bin {
                left: j as f64 * bin_width,
                right: (j + 1) as f64 * bin_width,
                density: c as f64 / norm,
            }
        })
        .collect();
    Ok(Histogram { bin_width, bins })
}

/// Sample mean and normal-approximation confidence half-width
/// `z_{(1+c)/2} s / sqrt(R)`.
pub fn mean_ci(sample: &EmpiricalSample, confidence: f64) -> Result<(f64, f64)> {
    let r = sample.replications();
    if r < 2 {
        return Err(Error::Domain("need at least two replications".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let z = Normal::standard().inverse_cdf((1.0 + confidence) / 2.0);
    let s = sample.variance().sqrt();
    Ok((sample.mean(), z * s / (r as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample(v: Vec<f64>) -> EmpiricalSample {
        EmpiricalSample::from_values(v).unwrap()
    }

    fn uniform_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(EmpiricalSample::from_values(vec![]), Err(Error::Domain(_))));
    }

    #[test]
    fn ks_single_point() {
        assert_eq!(ks_distance(&sample(vec![0.5]), uniform_cdf), 0.5);
    }

    #[test]
    fn ks_perfect_quantiles() {
        let r = 40;
        let xs: Vec<f64> = (1..=r).map(|i| (i as f64 - 0.5) / r as f64).collect();
        let d = ks_distance(&sample(xs), uniform_cdf);
        assert!((d - 0.5 / r as f64).abs() < 1e-15);
    }

    #[test]
    fn ks_normal_pseudo_sample_below_critical_value() {
        let mut rng = rng_from_seed(2024);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let d = ks_distance(&sample(xs), |x| normal_cdf(x, 0.0, 1.0).unwrap());
        assert!(d < 1.63 / (100_000f64).sqrt(), "D = {d}");
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(3.0, 3.0, 2.0).unwrap(), 0.5);
        assert!((normal_cdf(5.0, 3.0, 2.0).unwrap() - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((normal_cdf(-1.96, 0.0, 1.0).unwrap() - 0.024_997_895_148_220_43).abs() < 1e-12);
        assert_eq!(normal_cdf(-1e300, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(normal_cdf(1e300, 0.0, 1.0).unwrap(), 1.0);
        assert!(normal_cdf(0.0, 0.0, 0.0).is_err());
        assert!(normal_cdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn histogram_point_mass() {
        let h = histogram(&sample(vec![0.05; 100]), 0.1).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].left, 0.0);
        assert!((h.bins[0].right - 0.1).abs() < 1e-15);
        assert!((h.bins[0].density - 10.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let h = histogram(&sample(xs), 0.25).unwrap();
        assert_eq!(h.bins.len(), 4);
        for b in &h.bins {
            assert!((b.density - 1.0).abs() < 1e-12);
        }
        assert!(histogram(&sample(vec![1.0]), 0.0).is_err());
        assert!(h.to_csv().starts_with("bin_left,bin_right,density\n0,0.25,1\n"));
    }

    #[test]
    fn histogram_single_replication() {
        let h = histogram(&sample(vec![0.37]), 0.01).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert!((h.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_ci_examples() {
        let (m, hw) = mean_ci(&sample(vec![0.3; 10]), 0.95).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        assert_eq!(hw, 0.0);
        let (m, hw) = mean_ci(&sample(vec![0.0, 1.0]), 0.95).unwrap();
        assert_eq!(m, 0.5);
        assert!((hw - 0.98).abs() < 1e-3);
        assert!((hw - 1.959_963_984_540_054 * 0.5).abs() < 1e-9);
        assert!(mean_ci(&sample(vec![1.0]), 0.95).is_err());
        assert!(mean_ci(&sample(vec![1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn halfwidth_shrinks_as_root_r() {
        let base = [0.0, 1.0, 2.0, 3.0];
        let (_, h1) = mean_ci(&sample(base.repeat(25)), 0.9).unwrap();
        let (_, h4) = mean_ci(&sample(base.repeat(400)), 0.9).unwrap();
        // same spread, 16x the replications (up to the n-1 correction)
        let s1 = sample(base.repeat(25)).variance().sqrt();
        let s4 = sample(base.repeat(400)).variance().sqrt();
        assert!((h1 / h4 - 4.0 * s1 / s4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn histogram_area_is_one(xs in proptest::collection::vec(0.0f64..1.0, 1..200), w in 0.001f64..0.5) {
            let h = histogram(&sample(xs), w).unwrap();
            prop_assert!((h.total_area() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ks_invariant_under_increasing_maps(xs in proptest::collection::vec(-3.0f64..3.0, 1..100)) {
            let cdf = |x: f64| normal_cdf(x, 0.2, 1.3).unwrap();
            let d0 = ks_distance(&sample(xs.clone()), cdf);
            // y = exp(x); cdf_y(y) = cdf(ln y)
            let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let d1 = ks_distance(&sample(ys), |y| cdf(y.ln()));
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn normal_cdf_monotone(a in -40.0f64..40.0, b in -40.0f64..40.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (p, q) = (normal_cdf(lo, 0.0, 1.0).unwrap(), normal_cdf(hi, 0.0, 1.0).unwrap());
            prop_assert!(p <= q);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
