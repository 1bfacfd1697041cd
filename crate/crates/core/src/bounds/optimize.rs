//! One-dimensional maximization of concave objectives.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a concave `objective` on
/// `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or can no longer shrink in
/// floating point. Both endpoints are evaluated as well, so a maximum on the
/// boundary is returned exactly. Returns `(argmax, value)`.
pub fn maximize_concave_1d<F>(objective: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("invalid search interval [{}, {}]", lo, hi)));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", tol)));
    }
    let eval = |s: f64| -> Result<f64> {
        let v = objective(s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("objective is {} at s = {}", v, s)))
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            if !(x2 > x1 && x2 < b) {
                break;
            }
            f2 = eval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            if !(x1 > a && x1 < x2) {
                break;
            }
            f1 = eval(x1)?;
        }
    }

    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for s in [lo, hi] {
        let v = eval(s)?;
        if v > best.1 {
            best = (s, v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interior_maximum() {
        let (s, v) = maximize_concave_1d(|s| -(s - 5.0) * (s - 5.0), 0.0, 10.0, 1e-8).unwrap();
        assert!((s - 5.0).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn boundary_maximum() {
        let (s, v) = maximize_concave_1d(|s| -s, 1.0, 2.0, 1e-9).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(v, -1.0);
        let (s, _) = maximize_concave_1d(|s| s, 1.0, 2.0, 1e-9).unwrap();
        assert_eq!(s, 2.0);
    }

    #[test]
    fn random_quadratics_match_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let a = rng.random_range(0.01..10.0);
            let vertex = rng.random_range(-50.0..50.0);
            let c = rng.random_range(-5.0..5.0);
            let f = |s: f64| -a * (s - vertex) * (s - vertex) + c;
            let tol = 1e-7;
            let (s, v) = maximize_concave_1d(f, -100.0, 100.0, tol).unwrap();
            assert!((s - vertex).abs() < tol, "a={} vertex={} s={}", a, vertex, s);
            assert!((v - c).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(maximize_concave_1d(|s| s, 2.0, 1.0, 1e-6), Err(Error::Config(_))));
        assert!(maximize_concave_1d(|s| s, 0.0, 1.0, 0.0).is_err());
        assert!(matches!(
            maximize_concave_1d(|s| s.ln(), -1.0, 1.0, 1e-6),
            Err(Error::Numeric(_))
        ));
    }
}
