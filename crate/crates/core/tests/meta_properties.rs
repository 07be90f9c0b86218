mod common;

use common::{joint_posterior, max_abs, max_abs_na, random_stage, to_na};
use metats_core::bandit::{init_agent, run_thompson};
use metats_core::gaussian::Gaussian;
use metats_core::meta::{init_meta, run_meta_ts, GaussianTasks, StageData};
use metats_core::rng::SeedTree;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recursion_matches_joint_posterior(seed in any::<u64>(), d in 1usize..=4, s in 1usize..=5) {
        let mut rng = SeedTree::new(seed).stream("joint", &[]);
        let (sq2, s02, s2) = (rng.random_range(0.5..5.0), rng.random_range(0.1..1.0), rng.random_range(0.5..2.0));
        let stages: Vec<StageData<f64>> = (0..s).map(|_| {
            let n = rng.random_range(0..=20);
            random_stage(&mut rng, d, n)
        }).collect();
        let q = stages.iter().fold(init_meta(d, sq2, s02, s2).unwrap(), |q, st| q.update(st).unwrap());
        let (mean, prec) = joint_posterior(&vec![0.0; d], sq2, s02, s2, &stages);
        prop_assert!(max_abs(q.mean(), mean.as_slice()) < 1e-8);
        prop_assert!(max_abs_na(q.precision(), &prec) < 1e-8);
    }

    #[test]
    fn stage_order_does_not_matter(seed in any::<u64>(), d in 1usize..=4, s in 2usize..=6) {
        let mut rng = SeedTree::new(seed).stream("order", &[]);
        let mut stages: Vec<StageData<f64>> = (0..s).map(|_| {
            let n = rng.random_range(1..=20);
            random_stage(&mut rng, d, n)
        }).collect();
        let fold = |st: &[StageData<f64>]| st.iter().fold(init_meta(d, 3.0, 0.4, 1.0).unwrap(), |q, x| q.update(x).unwrap());
        let a = fold(&stages);
        stages.shuffle(&mut rng);
        let b = fold(&stages);
        prop_assert!(max_abs(a.mean(), b.mean()) < 1e-8);
        prop_assert!(a.precision().max_abs_diff(b.precision()) < 1e-8);
    }

    #[test]
    fn precision_never_decreases(seed in any::<u64>(), d in 1usize..=4, s in 1usize..=8) {
        let mut rng = SeedTree::new(seed).stream("loewner", &[]);
        let mut q = init_meta(d, 2.0, 0.25, 1.0).unwrap();
        for _ in 0..s {
            let n = rng.random_range(0..=20);
            let next = q.update(&random_stage(&mut rng, d, n)).unwrap();
            let diff = to_na(next.precision()) - to_na(q.precision());
            let min_eig = diff.symmetric_eigen().eigenvalues.min();
            prop_assert!(min_eig >= -1e-10, "{min_eig}");
            q = next;
        }
    }
}

#[test]
fn meta_posterior_is_consistent() {
    let mu_star = vec![1.5, -1.0];
    let start = mu_star.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
    let errs: Vec<f64> = (0..100u64)
        .map(|seed| {
            let tree = SeedTree::new(seed);
            let p_star = Gaussian::isotropic(mu_star.clone(), 0.25).unwrap();
            let mut env = GaussianTasks::new(p_star, 5, 1.0, 50, tree.stream("env", &[])).unwrap();
            let q0 = init_meta(2, 4.0, 0.25, 1.0).unwrap();
            let (q, _) = run_meta_ts(&mut env, 50, 50, q0, &mut tree.stream("policy", &[])).unwrap();
            q.mean().iter().zip(&mu_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[49] + sorted[50]);
    assert!(median < start / 5.0, "median error {median} vs {}", start / 5.0);
}

#[test]
fn single_stage_is_plain_thompson_sampling() {
    let tree = SeedTree::new(21);
    let p_star = Gaussian::isotropic(vec![0.3, -0.7, 1.1], 0.5).unwrap();
    let q0 = init_meta(3, 2.0, 0.5, 1.0).unwrap();

    let mut env = GaussianTasks::new(p_star.clone(), 4, 1.0, 60, tree.stream("env", &[])).unwrap();
    let (_, stages) = run_meta_ts(&mut env, 1, 60, q0.clone(), &mut tree.stream("policy", &[])).unwrap();

    let mut env = GaussianTasks::new(p_star, 4, 1.0, 60, tree.stream("env", &[])).unwrap();
    let mut rng = tree.stream("policy", &[]);
    let prior = q0.sample_prior(&mut rng).unwrap();
    use metats_core::meta::TaskSampler;
    let mut task = env.sample_task(0).unwrap();
    let (_, rounds) = run_thompson(&mut task, init_agent(prior.clone(), 1.0).unwrap(), 60, &mut rng).unwrap();

    assert_eq!(stages[0].prior_used.mean(), prior.mean());
    assert_eq!(stages[0].rounds, rounds);
}

#[test]
fn kl_falls_as_stages_accumulate() {
    let mut at = vec![Vec::new(); 3];
    for seed in 0..100u64 {
        let tree = SeedTree::new(seed);
        let mu = tree.stream("mu", &[]);
        let q0 = init_meta(2, 4.0, 0.25, 1.0).unwrap();
        let p_star = q0.sample_prior(&mut { mu }).unwrap();
        let mut env = GaussianTasks::new(p_star, 5, 1.0, 100, tree.stream("env", &[])).unwrap();
        let (_, stages) = run_meta_ts(&mut env, 20, 100, q0, &mut tree.stream("policy", &[])).unwrap();
        for (slot, s) in at.iter_mut().zip([0, 4, 19]) {
            slot.push(stages[s].plug_in_kl.unwrap());
        }
    }
    let med: Vec<f64> = at
        .iter_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[49] + v[50])
        })
        .collect();
    assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
}
