//! Bounds for a pattern of `k` i.i.d. standard normal points in `R^d` under
//! `rho2`.
//!
//! The upper bound uses the test channel `x = y + w` with `w` i.i.d.
//! `N(0, sigma^2)`, `sigma^2 = D / (kd)`, and subtracts the entropy of the
//! unknown ordering minus what the channel output reveals about it.

use crate::error::{Error, Result};

use super::special::{
    binary_entropy, chi2_cdf, chi2_sf, log_factorial, log_factorial_minus_one,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBoundParams {
    pub k: u64,
    pub d: u64,
    pub distortion: f64,
    /// `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
}

impl GaussianBoundParams {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| default_epsilon(self.k, self.d, self.distortion))
    }

    pub fn upper(&self) -> Result<f64> {
        gaussian_pp_upper(self.k, self.d, self.distortion, self.epsilon())
    }

    pub fn lower(&self) -> Result<f64> {
        gaussian_pp_lower(self.k, self.d, self.distortion)
    }
}

/// `epsilon = sigma^{3/4} = (D / (kd))^{3/8}`.
pub fn default_epsilon(k: u64, d: u64, distortion: f64) -> f64 {
    (distortion / (k * d) as f64).powf(0.375)
}

fn check_kd(k: u64, d: u64) -> Result<f64> {
    if k == 0 || d == 0 {
        return Err(Error::Domain(format!(
            "need k >= 1 and d >= 1, got k={} d={}",
            k, d
        )));
    }
    Ok((k * d) as f64)
}

/// RD function of a standard Gaussian vector in `(R^d)^k` under squared
/// error: `(kd/2) log(kd/D)` for `0 < D <= kd`.
pub fn gaussian_vector_rd(k: u64, d: u64, distortion: f64) -> Result<f64> {
    let kd = check_kd(k, d)?;
    if !(distortion > 0.0 && distortion <= kd) {
        return Err(Error::Domain(format!(
            "vector RD formula needs 0 < D <= kd = {}, got D = {}",
            kd, distortion
        )));
    }
    Ok(0.5 * kd * (kd / distortion).ln())
}

/// Lower bound `(kd/2) log(kd/D) - log k!`; may be negative.
pub fn gaussian_pp_lower(k: u64, d: u64, distortion: f64) -> Result<f64> {
    Ok(gaussian_vector_rd(k, d, distortion)? - log_factorial(k))
}

/// The individual terms of the Gaussian upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianUpperTerms {
    /// `(kd/2) log(1/sigma^2)`.
    pub mutual_information: f64,
    /// `log k!`, subtracted.
    pub log_k_factorial: f64,
    /// `(k(k-1)/2) F(9 eps^2 / (2 (1 - sigma^2)); d) log k!`.
    pub close_pair: f64,
    /// `(1 - F(eps^2 / sigma^2; kd)) log k!`.
    pub noise_tail: f64,
    /// `H2(p0(eps))`.
    pub order_entropy: f64,
    /// `(1 - p0(eps)) log(k! - 1)`; zero for `k = 1`.
    pub wrong_order: f64,
    pub sigma2: f64,
    pub p0: f64,
}

impl GaussianUpperTerms {
    /// Sum of the nonnegative correction terms; the gap to the lower bound.
    pub fn corrections(&self) -> f64 {
        self.close_pair + self.noise_tail + self.order_entropy + self.wrong_order
    }

    pub fn total(&self) -> f64 {
        self.mutual_information - self.log_k_factorial + self.corrections()
    }
}

pub fn gaussian_pp_upper_terms(
    k: u64,
    d: u64,
    distortion: f64,
    epsilon: f64,
) -> Result<GaussianUpperTerms> {
    let kd = check_kd(k, d)?;
    if !(distortion > 0.0 && distortion < kd) {
        return Err(Error::Domain(format!(
            "upper bound needs 0 < D < kd = {} (sigma^2 < 1), got D = {}",
            kd, distortion
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            epsilon
        )));
    }
    let sigma2 = distortion / kd;
    let eps2 = epsilon * epsilon;
    let log_kf = log_factorial(k);
    let pairs = (k * (k - 1)) as f64 / 2.0;

    let close_pair = pairs * chi2_cdf(9.0 * eps2 / (2.0 * (1.0 - sigma2)), d as u32) * log_kf;
    let noise_tail = chi2_sf(eps2 / sigma2, (k * d) as u32) * log_kf;

    // p0 = 1 / (1 + (k! - 1) exp(-3 eps^2 / (2 sigma^2))), kept in log space.
    // 1 - p0 is computed directly so tiny values keep full precision.
    let (one_minus_p0, wrong_order) = if k == 1 {
        (0.0, 0.0)
    } else {
        let log_kf1 = log_factorial_minus_one(k);
        let q = logistic(log_kf1 - 3.0 * eps2 / (2.0 * sigma2));
        (q, q * log_kf1)
    };
    let p0 = 1.0 - one_minus_p0;
    let order_entropy = binary_entropy(one_minus_p0);

    Ok(GaussianUpperTerms {
        mutual_information: 0.5 * kd * (1.0 / sigma2).ln(),
        log_k_factorial: log_kf,
        close_pair,
        noise_tail,
        order_entropy,
        wrong_order,
        sigma2,
        p0,
    })
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Upper bound on the RD function at `D` for tuning parameter `epsilon`.
pub fn gaussian_pp_upper(k: u64, d: u64, distortion: f64, epsilon: f64) -> Result<f64> {
    Ok(gaussian_pp_upper_terms(k, d, distortion, epsilon)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vector_rd_values() {
        assert_eq!(gaussian_vector_rd(4, 2, 8.0).unwrap(), 0.0);
        assert!((gaussian_vector_rd(4, 2, 0.8).unwrap() - 4.0 * 10f64.ln()).abs() < 1e-12);
        assert!((gaussian_vector_rd(4, 2, 0.8).unwrap() - 9.2103).abs() < 1e-4);
        let r1 = gaussian_vector_rd(4, 2, 0.5).unwrap();
        let r2 = gaussian_vector_rd(4, 2, 0.25).unwrap();
        assert_relative_eq!(r2 - r1, 4.0 * 2f64.ln(), max_relative = 1e-12);
        assert!(matches!(gaussian_vector_rd(4, 2, 9.0), Err(Error::Domain(_))));
        assert!(gaussian_vector_rd(4, 2, 0.0).is_err());
    }

    #[test]
    fn lower_values() {
        for &dist in &[1e-3, 0.1, 1.5] {
            assert_eq!(
                gaussian_pp_lower(1, 2, dist).unwrap(),
                gaussian_vector_rd(1, 2, dist).unwrap()
            );
        }
        let v = gaussian_pp_lower(4, 2, 0.8).unwrap();
        assert!((v - (4.0 * 10f64.ln() - 24f64.ln())).abs() < 1e-12);
        assert!((v - 6.0323).abs() < 1e-4);
        // k = 30: log 30! exceeds (60/2) log(60/D) once D is moderately large.
        assert!(gaussian_pp_lower(30, 2, 30.0).unwrap() < 0.0);
        assert!(gaussian_pp_lower(30, 2, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn k_one_upper_is_vector_rd() {
        for i in 0..20 {
            let dist = 1e-6 * 10f64.powf(6.0 * i as f64 / 20.0);
            let eps = default_epsilon(1, 2, dist);
            let up = gaussian_pp_upper(1, 2, dist, eps).unwrap();
            assert!((up - gaussian_vector_rd(1, 2, dist).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn gap_shrinks_towards_zero_distortion() {
        let gap = |dist: f64| {
            gaussian_pp_upper_terms(4, 2, dist, default_epsilon(4, 2, dist))
                .unwrap()
                .corrections()
        };
        assert!(gap(1e-6) < gap(1e-4));
        assert!(gap(1e-4) < gap(1e-2));
    }

    #[test]
    fn small_distortion_corrections_are_tiny() {
        let t = gaussian_pp_upper_terms(4, 2, 1e-6, default_epsilon(4, 2, 1e-6)).unwrap();
        for v in [t.close_pair, t.noise_tail, t.order_entropy, t.wrong_order] {
            assert!((0.0..1e-3).contains(&v), "{:?}", t);
        }
        assert!(t.p0 > 1.0 - 1e-12);
    }

    #[test]
    fn upper_brackets_lower() {
        for k in 1..=6u64 {
            for i in 0..=24 {
                let dist = 1e-6 * 10f64.powf(i as f64 / 4.0);
                let eps = default_epsilon(k, 2, dist);
                let up = gaussian_pp_upper(k, 2, dist, eps).unwrap();
                let lo = gaussian_pp_lower(k, 2, dist).unwrap();
                assert!(up >= lo, "k={} D={} up={} lo={}", k, dist, up, lo);
            }
        }
    }

    #[test]
    fn large_k_stays_finite() {
        let t = gaussian_pp_upper_terms(200, 2, 1e-3, default_epsilon(200, 2, 1e-3)).unwrap();
        assert!(t.total().is_finite());
        assert!(t.p0.is_finite());
    }

    #[test]
    fn upper_domain_errors() {
        assert!(gaussian_pp_upper(4, 2, 8.0, 0.1).is_err());
        assert!(gaussian_pp_upper(4, 2, 0.1, 0.0).is_err());
        assert!(gaussian_pp_upper(0, 2, 0.1, 0.1).is_err());
    }
}
