use proptest::prelude::*;

use pprd::bounds::{
    binary_entropy, chi2_cdf, gaussian_pp_lower, gaussian_pp_upper, gaussian_vector_rd, log_factorial,
    poisson_lower_unit_square, poisson_upper_unit_square, PoissonBoundParams,
};
use pprd::codebook::{average_cost, center_exact, center_multi_hub, center_single_hub};
use pprd::distortion::{rho2, solve_assignment, usospa, usospa_lower_bounds};
use pprd::PointPattern;

fn pattern(max_k: usize) -> impl Strategy<Value = PointPattern> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 0..=max_k).prop_map(|pts| {
        PointPattern::new(2, pts.into_iter().flat_map(|(a, b)| [a, b]).collect()).unwrap()
    })
}

fn same_size_pair(max_k: usize) -> impl Strategy<Value = (PointPattern, PointPattern)> {
    (0..=max_k).prop_flat_map(|k| {
        let v = || prop::collection::vec(-3.0f64..3.0, 2 * k);
        (v(), v()).prop_map(|(a, b)| (PointPattern::new(2, a).unwrap(), PointPattern::new(2, b).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rho2_is_a_squared_metric((x, y) in same_size_pair(7), shift in 0usize..7) {
        let v = rho2(&x, &y).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((rho2(&y, &x).unwrap() - v).abs() < 1e-9);
        prop_assert!(rho2(&x, &x).unwrap().abs() < 1e-12);
        let mut pts: Vec<&[f64]> = x.points().collect();
        if !pts.is_empty() {
            let n = pts.len();
            pts.rotate_left(shift % n);
        }
        let rotated = PointPattern::from_points(2, &pts).unwrap();
        prop_assert!((rho2(&rotated, &y).unwrap() - v).abs() < 1e-9);
    }

    #[test]
    fn triangle_inequality_on_root((x, y) in same_size_pair(5), seed in any::<u64>()) {
        let k = x.len();
        let z = PointPattern::new(2, (0..2 * k).map(|i| ((seed >> (i % 60)) & 7) as f64 - 3.5).collect()).unwrap();
        let d = |a: &PointPattern, b: &PointPattern| rho2(a, b).unwrap().sqrt();
        prop_assert!(d(&x, &y) <= d(&x, &z) + d(&z, &y) + 1e-9);
    }

    #[test]
    fn usospa_bounds(x in pattern(7), y in pattern(7), c in 0.05f64..2.0) {
        let u = usospa(&x, &y, c).unwrap();
        let c2 = c * c;
        prop_assert!((usospa(&y, &x, c).unwrap() - u).abs() < 1e-9);
        prop_assert!(u >= 0.0);
        prop_assert!(u <= c2 * x.len().max(y.len()) as f64 + 1e-9);
        prop_assert!(u >= c2 * x.len().abs_diff(y.len()) as f64 - 1e-9);
        let lb = usospa_lower_bounds(&x, &y, c).unwrap();
        prop_assert!(lb.best() <= u + 1e-9);
        if x.len() == y.len() {
            prop_assert!(u <= rho2(&x, &y).unwrap() + 1e-9);
        }
    }

    #[test]
    fn assignment_beats_identity(n in 1usize..9, entries in prop::collection::vec(0.0f64..10.0, 64)) {
        let cost: Vec<f64> = entries[..n * n].to_vec();
        let a = solve_assignment(&cost, n).unwrap();
        let mut seen = vec![false; n];
        for &j in &a.permutation {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
        let total: f64 = a.permutation.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        prop_assert!((total - a.total_cost).abs() < 1e-9);
        let identity: f64 = (0..n).map(|i| cost[i * n + i]).sum();
        prop_assert!(a.total_cost <= identity + 1e-9);
    }

    #[test]
    fn exact_center_beats_heuristics(cell in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 6), 3)) {
        let cell: Vec<PointPattern> = cell.into_iter().map(|c| PointPattern::new(2, c).unwrap()).collect();
        let refs: Vec<&PointPattern> = cell.iter().collect();
        let exact = average_cost(&refs, &center_exact(&refs).unwrap().center, None).unwrap();
        let multi = average_cost(&refs, &center_multi_hub(&refs).unwrap().center, None).unwrap();
        prop_assert!(exact <= multi + 1e-12);
        for hub in 0..3 {
            let single = average_cost(&refs, &center_single_hub(&refs, hub).unwrap().center, None).unwrap();
            prop_assert!(exact <= single + 1e-12);
            prop_assert!(multi <= single + 1e-12);
        }
    }

    #[test]
    fn gaussian_bounds_ordering(k in 1u64..8, d in 1u64..4, frac in 1e-6f64..0.9) {
        let dist = frac * (k * d) as f64;
        let eps = (dist / (k * d) as f64).powf(0.375);
        let r = gaussian_vector_rd(k, d, dist).unwrap();
        let lo = gaussian_pp_lower(k, d, dist).unwrap();
        let up = gaussian_pp_upper(k, d, dist, eps).unwrap();
        prop_assert!((r - lo - log_factorial(k)).abs() < 1e-9);
        prop_assert!(up >= lo - 1e-9);
        prop_assert!(gaussian_vector_rd(k, d, dist / 2.0).unwrap() > r);
    }

    #[test]
    fn chi2_cdf_in_unit_interval(x in 0.0f64..200.0, dof in 1u32..40) {
        let v = chi2_cdf(x, dof);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(chi2_cdf(x + 0.5, dof) >= v);
    }

    #[test]
    fn binary_entropy_symmetric(p in 0.0f64..=1.0) {
        let h = binary_entropy(p);
        prop_assert!((h - binary_entropy(1.0 - p)).abs() < 1e-12);
        prop_assert!(h >= 0.0 && h <= std::f64::consts::LN_2 + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn poisson_upper_dominates_lower(n in 8usize..=207) {
        let p = PoissonBoundParams::new(10.0, 0.1).unwrap().with_grid(n);
        let up = poisson_upper_unit_square(&p).unwrap();
        prop_assert!(up.rate.is_finite() && up.distortion > 0.0);
        let lo = poisson_lower_unit_square(&p, up.distortion).unwrap();
        prop_assert!(up.rate >= lo.value);
    }

    #[test]
    fn poisson_lower_nonincreasing(a in -4.5f64..-1.0, step in 0.01f64..1.0) {
        let p = PoissonBoundParams::new(10.0, 0.1).unwrap();
        let d1 = 10f64.powf(a);
        let d2 = 10f64.powf(a + step);
        let r1 = poisson_lower_unit_square(&p, d1).unwrap().value;
        let r2 = poisson_lower_unit_square(&p, d2).unwrap().value;
        prop_assert!(r2 <= r1 + 1e-9);
    }
}
