//! Property tests over randomized inputs: Cholesky reconstruction,
//! conditional-distribution consistency, the positive-definiteness bound,
//! the conditional-independence product, and dataset round-trips.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use surrocep::model::apply_ci_constraint;
use surrocep::mvn::{cholesky, conditional_gaussian, pd_bound_third, GaussianJoint};
use surrocep::{Dataset, TrialRecord};

/// Strategy for a valid 3x3 correlation matrix: two free entries plus a
/// third drawn strictly inside its positive-definiteness interval.
fn correlation_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.95..0.95f64, -0.95..0.95f64, 0.02..0.98f64).prop_map(|(r12, r13, frac)| {
        let (lo, hi) = pd_bound_third(r12, r13);
        (r12, r13, lo + frac * (hi - lo))
    })
}

proptest! {
    #[test]
    fn cholesky_reconstructs_random_correlations((r10, r11, rt) in correlation_strategy()) {
        let m = surrocep::mvn::correlation_matrix(r10, r11, rt);
        let l = cholesky(&m).unwrap();
        let back = &l * l.transpose();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((back[(i, j)] - m[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ci_product_always_admissible(theta_t in -0.999..0.999f64, theta11 in -0.999..0.999f64) {
        let p = apply_ci_constraint(theta_t, theta11);
        let (lo, hi) = pd_bound_third(theta11, theta_t);
        prop_assert!(p > lo && p < hi);
        let m = surrocep::mvn::correlation_matrix(p, theta11, theta_t);
        prop_assert!(cholesky(&m).is_ok());
    }

    #[test]
    fn sequential_conditioning_is_consistent(
        (r10, r11, rt) in correlation_strategy(),
        v2 in -2.0..2.0f64,
        v3 in -2.0..2.0f64,
    ) {
        let m = surrocep::mvn::correlation_matrix(r10, r11, rt);
        let joint = GaussianJoint::new(DVector::from_row_slice(&[0.3, -0.7, 1.1]), m).unwrap();
        let once = conditional_gaussian(&joint, &[1, 2], &[v2, v3]).unwrap();
        let step1 = conditional_gaussian(&joint, &[2], &[v3]).unwrap();
        let step2 = conditional_gaussian(&step1, &[1], &[v2]).unwrap();
        prop_assert!((once.mean()[0] - step2.mean()[0]).abs() < 1e-10);
        prop_assert!(
            (once.covariance()[(0, 0)] - step2.covariance()[(0, 0)]).abs() < 1e-10
        );
    }

    #[test]
    fn conditional_covariance_ignores_observed_values(
        (r10, r11, rt) in correlation_strategy(),
        v in -5.0..5.0f64,
    ) {
        let m = surrocep::mvn::correlation_matrix(r10, r11, rt);
        let joint = GaussianJoint::new(DVector::zeros(3), m).unwrap();
        let a = conditional_gaussian(&joint, &[2], &[v]).unwrap();
        let b = conditional_gaussian(&joint, &[2], &[-v]).unwrap();
        prop_assert_eq!(a.covariance(), b.covariance());
    }

    #[test]
    fn dataset_round_trip(records in proptest::collection::vec(record_strategy(), 0..40)) {
        let records: Vec<TrialRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| { r.id = i as u64 + 1; r })
            .collect();
        let data = Dataset::new(vec!["x".into()], Some(0), records).unwrap();
        let mut buf = Vec::new();
        data.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }
}

fn record_strategy() -> impl Strategy<Value = TrialRecord> {
    (any::<bool>(), -10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(
        |(treated, x, a, b)| {
            if treated {
                TrialRecord { id: 0, z: 1, x: vec![x], s1: Some(a), t0: None, t1: Some(b) }
            } else {
                TrialRecord { id: 0, z: 0, x: vec![x], s1: None, t0: Some(a), t1: None }
            }
        },
    )
}

#[test]
fn log_density_matches_direct_formula_on_random_matrix() {
    // Quadratic-form route (Cholesky solve) against the direct inverse.
    let m = surrocep::mvn::correlation_matrix(0.3, -0.5, 0.2);
    let mean = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
    let joint = GaussianJoint::new(mean.clone(), m.clone()).unwrap();
    let x = DVector::from_row_slice(&[0.5, 2.5, 2.0]);
    let inv = m.clone().try_inverse().unwrap();
    let d: DVector<f64> = &x - &mean;
    let quad = (inv * &d).dot(&d);
    let det = m.determinant();
    let want = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad;
    let got = joint.log_density(&x).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    let _ = DMatrix::<f64>::identity(1, 1);
}
