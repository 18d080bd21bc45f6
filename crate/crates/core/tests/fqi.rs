use proptest::prelude::*;
use rand::SeedableRng;
use sample_transfer::fqi::{bellman_targets, evaluate_policy, run_fqi, FixedSet};
use sample_transfer::mdp::{chain_task, collect_samples};
use sample_transfer::{EvalConfig, FeatureMap, FqiConfig, LinearQ, SimRng, StateAction, TrainingSet};

fn pipeline(seed: u64, n: usize) -> (Vec<Vec<f64>>, f64) {
    let task = chain_task(1).unwrap();
    let mut rng = SimRng::seed_from_u64(seed);
    let ts = TrainingSet::from_transitions(&collect_samples(&task, 0.0, 100, n, &mut rng), 0);
    let cfg = FqiConfig::new(0.9, task.r_max, FeatureMap::default());
    let run = run_fqi(&mut FixedSet(ts), &cfg).unwrap();
    let perf = evaluate_policy(run.final_q().unwrap(), &task, &EvalConfig::default(), &mut rng);
    (run.iterates.iter().map(|q| q.weights().alpha).collect(), perf)
}

#[test]
fn iterates_respect_the_value_bound() {
    let task = chain_task(1).unwrap();
    let mut rng = SimRng::seed_from_u64(3);
    let ts = TrainingSet::from_transitions(&collect_samples(&task, 0.0, 100, 300, &mut rng), 0);
    let cfg = FqiConfig::new(0.9, task.r_max, FeatureMap::default());
    let run = run_fqi(&mut FixedSet(ts), &cfg).unwrap();
    assert_eq!(run.iterates.len(), cfg.iterations);
    for q in &run.iterates {
        for i in 0..=400 {
            let x = -20.0 + 0.1 * i as f64;
            for v in q.action_values(x) {
                assert!(v.abs() <= cfg.v_max);
            }
        }
    }
}

#[test]
fn pipeline_is_a_function_of_the_seed() {
    assert_eq!(pipeline(9, 500), pipeline(9, 500));
    assert_ne!(pipeline(9, 500).0, pipeline(10, 500).0);
}

proptest! {
    #[test]
    fn zero_function_targets_are_rewards(seed in any::<u64>(), n in 1usize..200) {
        let task = chain_task(1 + (seed % 9) as usize).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let ts = TrainingSet::from_transitions(&collect_samples(&task, 0.0, 20, n, &mut rng), 0);
        let q = LinearQ::zero(FeatureMap::default(), 10.0);
        let targets = bellman_targets(&ts, &q, 0.9);
        for (t, s) in targets.iter().zip(&ts.samples) {
            prop_assert_eq!(*t, s.r);
            prop_assert_eq!(s.r, task.reward(StateAction::new(s.x, s.a)));
        }
    }
}
