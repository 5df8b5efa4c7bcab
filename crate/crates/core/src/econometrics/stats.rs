//! Distribution tail probabilities used for inference.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Upper tail `P(X > x)` of a χ²(df) variable via the regularized upper
/// incomplete gamma function `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if df == 0 || x <= 0.0 {
        return 1.0;
    }
    if !x.is_finite() {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn student_t_two_sided_p(t: f64, df: usize) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and the uniform distribution on [0, 1].
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_closed_forms() {
        // df = 2: exp(-x/2)
        for &x in &[0.1, 1.0, 3.7, 12.0, 40.0] {
            assert!((chi2_sf(x, 2) - (-x / 2.0f64).exp()).abs() < 1e-12);
            // df = 4: exp(-x/2) (1 + x/2)
            let q4 = (-x / 2.0f64).exp() * (1.0 + x / 2.0);
            assert!((chi2_sf(x, 4) - q4).abs() < 1e-12);
        }
        // df = 1: 2 (1 - Phi(sqrt x)); 3.841458820694124 is the 95% point
        assert!((chi2_sf(3.841458820694124, 1) - 0.05).abs() < 1e-10);
        assert!((chi2_sf(6.634896601021214, 1) - 0.01).abs() < 1e-10);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
        assert_eq!(chi2_sf(5.0, 0), 1.0);
    }

    #[test]
    fn normal_and_t() {
        let p = normal_two_sided_p(1.959963984540054);
        assert!((p - 0.05).abs() < 1e-9, "{p}");
        assert_eq!(normal_two_sided_p(0.0), 1.0);
        // t(1) is Cauchy: P(|T| > 1) = 0.5
        assert!((student_t_two_sided_p(1.0, 1) - 0.5).abs() < 1e-12);
        assert!(student_t_two_sided_p(2.0, 10) > normal_two_sided_p(2.0));
    }

    #[test]
    fn ks_distance() {
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&grid) - 0.005).abs() < 1e-12);
        assert!((ks_uniform(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
