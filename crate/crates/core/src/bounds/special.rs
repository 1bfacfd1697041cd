//! Special functions used by the bounds.

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// `k!` for `k <= 20`; 21! overflows `u64`.
const EXACT_FACTORIALS: [u64; 21] = {
    let mut t = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        t[i] = t[i - 1] * i as u64;
        i += 1;
    }
    t
};

/// `log(k!)`: exact integer product for `k <= 20`, log-gamma beyond.
pub fn log_factorial(k: u64) -> f64 {
    match EXACT_FACTORIALS.get(k as usize) {
        Some(&f) => (f as f64).ln(),
        None => ln_gamma(k as f64 + 1.0),
    }
}

/// `log(k! - 1)`; `-inf` for `k <= 1`. Beyond `k = 20` the `-1` is below
/// double resolution relative to `k!` and `log k!` is returned.
pub fn log_factorial_minus_one(k: u64) -> f64 {
    match EXACT_FACTORIALS.get(k as usize) {
        Some(&f) => ((f - 1) as f64).ln(),
        None => log_factorial(k),
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(a, x)
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: u32) -> f64 {
    assert!(dof > 0, "chi-square needs at least one degree of freedom");
    regularized_lower_gamma(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Survival function `1 - F(x; dof)`, accurate in the far tail.
pub fn chi2_sf(x: f64, dof: u32) -> f64 {
    assert!(dof > 0, "chi-square needs at least one degree of freedom");
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
    }
}

/// Binary entropy in nats with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (-p).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn log_factorial_values() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert_relative_eq!(log_factorial(4), 24f64.ln(), max_relative = 1e-15);
        assert!((log_factorial(4) - 3.1780538).abs() < 1e-7);
        let sum: f64 = (1..=30).map(|i| (i as f64).ln()).sum();
        assert_relative_eq!(log_factorial(30), sum, max_relative = 1e-12);
    }

    #[test]
    fn log_factorial_minus_one_values() {
        assert_eq!(log_factorial_minus_one(1), f64::NEG_INFINITY);
        assert_eq!(log_factorial_minus_one(2), 0.0);
        assert_relative_eq!(log_factorial_minus_one(4), 23f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(log_factorial_minus_one(25), log_factorial(25), max_relative = 1e-13);
    }

    #[test]
    fn chi2_values() {
        assert_eq!(chi2_cdf(0.0, 3), 0.0);
        assert!((chi2_cdf(2.0, 2) - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        assert!((chi2_cdf(2.0, 2) - 0.6321206).abs() < 1e-7);
        assert_eq!(chi2_cdf(f64::INFINITY, 3), 1.0);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
        assert!((chi2_sf(2.0, 2) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((chi2_sf(60.0, 4) - (-30.0f64).exp() * 31.0).abs() < 1e-25);
    }

    #[test]
    fn chi2_matches_quadrature() {
        // chi-square density with 8 degrees of freedom: x^3 e^{-x/2} / 96.
        let density = |x: f64| x.powi(3) * (-x / 2.0).exp() / 96.0;
        let oracle = simpson(density, 0.0, 8.0, 20_000);
        assert!((chi2_cdf(8.0, 8) - oracle).abs() < 1e-10);
        // one degree of freedom has an integrable singularity; substitute x = t^2.
        let density1 = |t: f64| 2.0 * (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle1 = simpson(density1, 0.0, 3.0f64.sqrt(), 20_000);
        assert!((chi2_cdf(3.0, 1) - oracle1).abs() < 1e-10);
    }

    #[test]
    fn chi2_monotone_in_unit_interval() {
        for dof in [1u32, 2, 5, 8, 30] {
            let mut prev = 0.0;
            for i in 0..1000 {
                let v = chi2_cdf(i as f64 * 0.1, dof);
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        for i in 1..100 {
            let p = i as f64 / 137.0;
            assert_relative_eq!(binary_entropy(p), binary_entropy(1.0 - p), max_relative = 1e-12);
        }
    }
}
