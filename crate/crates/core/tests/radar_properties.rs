use metats_core::gaussian::Gaussian;
use metats_core::harness::{run_track, ExperimentConfig, TrackDraws};
use metats_core::radar::{
    context_features, detect_lost_track, realize_loss, sample_task, LostTrackDetector, SceneParams,
};
use metats_core::rng::SeedTree;

fn p_star() -> Gaussian<f64> {
    Gaussian::isotropic(vec![1.0, 0.5], 0.25).unwrap()
}

#[test]
fn kernels_are_stochastic() {
    let tree = SeedTree::new(1);
    for (i, params) in [
        SceneParams::default(),
        SceneParams { state_count: 7, memory_order: 3, state_persistence: 0.0, ..SceneParams::default() },
        SceneParams { state_count: 2, memory_order: 1, state_persistence: 1.0, ..SceneParams::default() },
    ]
    .iter()
    .enumerate()
    {
        for k in 0..50 {
            let scene = sample_task(&p_star(), params, &mut tree.stream("scene", &[i as u64, k])).unwrap();
            for row in scene.transition_kernel.iter().chain(&scene.observation_kernel) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
            assert_eq!(scene.transition_kernel.len(), params.state_count.pow(params.memory_order as u32));
        }
    }
}

#[test]
fn states_ignore_waveform_choices() {
    let cfg = ExperimentConfig {
        horizon: 150,
        ..ExperimentConfig::default()
    };
    let tree = SeedTree::new(4);
    let scene = sample_task(&p_star(), &cfg.scene_params(), &mut tree.stream("scene", &[])).unwrap();
    let draws = TrackDraws::generate(&scene, &cfg, &tree, 0).unwrap();
    let again = TrackDraws::generate(&scene, &cfg, &tree, 0).unwrap();
    assert_eq!(draws.states, again.states);

    let good = run_track(&scene, &draws, p_star(), &cfg, &mut tree.stream("a", &[])).unwrap();
    let bad_prior = Gaussian::isotropic(vec![-5.0, 5.0], 0.01).unwrap();
    let bad = run_track(&scene, &draws, bad_prior, &cfg, &mut tree.stream("b", &[])).unwrap();
    let picks = |o: &metats_core::harness::TrackOutcome| o.rounds.iter().map(|r| r.chosen_waveform).collect::<Vec<_>>();
    assert_ne!(picks(&good), picks(&bad));
    assert_eq!(good.states, bad.states);
    let obs = |o: &metats_core::harness::TrackOutcome| o.rounds.iter().map(|r| r.observation).collect::<Vec<_>>();
    assert_eq!(obs(&good), obs(&bad));
}

#[test]
fn mean_loss_is_linear_in_features() {
    let tree = SeedTree::new(6);
    let scene = sample_task(&p_star(), &SceneParams::default(), &mut tree.stream("scene", &[])).unwrap();
    let n = 10_000;
    let mut rng = tree.stream("noise", &[]);
    let mut worst_z = 0.0f64;
    for o in 0..scene.state_count {
        for range in [5_000.0, 10_000.0, 14_000.0] {
            let ctx = context_features(&scene, o, range).unwrap();
            for phi in ctx.iter() {
                let xs: Vec<f64> = (0..n).map(|_| realize_loss(&scene, phi, 1.0, &mut rng).unwrap()).collect();
                let mean = xs.iter().sum::<f64>() / n as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                let want: f64 = phi.iter().zip(&scene.true_theta).map(|(a, b)| a * b).sum();
                let z = (mean - want).abs() / (sd / (n as f64).sqrt());
                worst_z = worst_z.max(z);
                assert!(z < 3.0, "o={o} range={range}: mean {mean} vs {want}");
            }
        }
    }
    assert!(worst_z > 0.0);
}

#[test]
fn detector_matches_brute_force_on_all_patterns() {
    for pattern in 0u32..(1 << 15) {
        let below: Vec<bool> = (0..15).map(|i| pattern >> i & 1 == 1).collect();
        let mut det = LostTrackDetector::default();
        for &b in &below {
            det = detect_lost_track(det, if b { 2.0 } else { 4.0 });
        }
        let oracle = below.windows(5).any(|w| w.iter().all(|&b| b));
        assert_eq!(det.tripped, oracle, "pattern {pattern:015b}");
    }
}
