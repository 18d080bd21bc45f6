use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use sample_transfer::linear_q::{least_squares_fit, mean_squared_loss};
use sample_transfer::{Action, FeatureMap, FeatureMatrix, LinearQ, SimRng, StateAction};

fn random_problem(rng: &mut SimRng, rows: usize) -> (FeatureMatrix, Vec<f64>) {
    let inputs: Vec<StateAction> = (0..rows)
        .map(|_| StateAction::new(rng.random_range(-20.0..20.0), Action::random(rng)))
        .collect();
    let targets = (0..rows).map(|_| rng.random_range(-10.0..10.0)).collect();
    (FeatureMap::default().matrix(inputs), targets)
}

#[test]
fn normal_equations_hold() {
    let mut rng = SimRng::seed_from_u64(1);
    for rows in [3, 15, 40, 200, 2000] {
        let (phi, p) = random_problem(&mut rng, rows);
        let alpha = least_squares_fit(&phi, &p).unwrap();
        let a = phi.as_matrix();
        let r = a * DVector::from_column_slice(&alpha) - DVector::from_column_slice(&p);
        let g = a.tr_mul(&r).amax();
        let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(g <= 1e-8 * scale, "rows {rows}: {g}");
    }
}

#[test]
fn fit_beats_random_perturbations() {
    let mut rng = SimRng::seed_from_u64(2);
    let (phi, p) = random_problem(&mut rng, 300);
    let alpha = least_squares_fit(&phi, &p).unwrap();
    let best = mean_squared_loss(&phi, &alpha, &p);
    for _ in 0..100 {
        let scale = 10f64.powi(rng.random_range(-6..1));
        let moved: Vec<f64> = alpha.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
        assert!(best <= mean_squared_loss(&phi, &moved, &p) + 1e-12);
    }
}

proptest! {
    #[test]
    fn features_are_bounded_and_block_disjoint(x in -25.0f64..25.0, right in any::<bool>()) {
        let fm = FeatureMap::default();
        let a = if right { Action::Right } else { Action::Left };
        let v = fm.feature_vector(StateAction::new(x, a));
        let k = fm.block_len();
        prop_assert_eq!(v.len(), 2 * k);
        prop_assert!(v.iter().all(|f| (0.0..=1.0).contains(f)));
        let other = if right { &v[..k] } else { &v[k..] };
        prop_assert!(other.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn truncation_is_idempotent(alpha in prop::collection::vec(-100.0f64..100.0, 20), x in -20.0f64..20.0, v_max in 0.1f64..50.0) {
        let q = LinearQ::new(alpha, FeatureMap::default(), v_max).unwrap();
        for a in Action::ALL {
            let t = q.evaluate_truncated(StateAction::new(x, a));
            prop_assert!(t.abs() <= v_max);
            prop_assert_eq!(t.clamp(-v_max, v_max), t);
        }
    }
}
