use metats_core::harness::{
    aggregate, emit_results, run_track, run_trial, run_trial_traced, run_trials, AgentKind, ExperimentConfig,
    TrackDraws,
};
use metats_core::meta::MetaPosterior;
use metats_core::radar::sample_task;
use metats_core::rng::SeedTree;
use std::fs;
use std::path::PathBuf;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        tracks: 6,
        horizon: 40,
        trials: 4,
        ..ExperimentConfig::default()
    }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("metats-harness-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn same_seed_same_record() {
    let cfg = small();
    assert_eq!(run_trial(&cfg, 99).unwrap(), run_trial(&cfg, 99).unwrap());
    assert_ne!(run_trial(&cfg, 99).unwrap(), run_trial(&cfg, 100).unwrap());
}

#[test]
fn agents_share_the_environment() {
    let (_, trace) = run_trial_traced(&small(), 5).unwrap();
    for track in &trace.tracks {
        let u = &track[&AgentKind::Uninformative];
        for agent in [AgentKind::Meta, AgentKind::Oracle] {
            let o = &track[&agent];
            assert_eq!(o.states, u.states);
            let obs = |t: &metats_core::harness::TrackOutcome| t.rounds.iter().map(|r| r.observation).collect::<Vec<_>>();
            assert_eq!(obs(o), obs(u));
        }
    }
}

#[test]
fn dropping_an_agent_leaves_the_others_alone() {
    let cfg = small();
    let all = run_trial(&cfg, 8).unwrap();
    let pair = run_trial(
        &ExperimentConfig {
            agents: vec![AgentKind::Meta, AgentKind::Oracle],
            ..cfg
        },
        8,
    )
    .unwrap();
    assert_eq!(all.agents[&AgentKind::Meta], pair.agents[&AgentKind::Meta]);
    assert_eq!(all.agents[&AgentKind::Oracle], pair.agents[&AgentKind::Oracle]);
    assert_eq!(all.kl, pair.kl);
}

#[test]
fn cumulative_series_never_decrease() {
    let trials = run_trials(&small()).unwrap();
    for t in &trials {
        for m in t.agents.values() {
            assert!(m.cum_regret.windows(2).all(|w| w[1] >= w[0]));
            assert!(m.cum_lost.windows(2).all(|w| w[1] >= w[0]));
            assert!(m.within_track_regret.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn certain_oracle_stops_paying_regret() {
    let cfg = ExperimentConfig {
        sigma02: 1e-10,
        agents: vec![AgentKind::Oracle],
        tracks: 5,
        horizon: 60,
        ..ExperimentConfig::default()
    };
    let rec = run_trial(&cfg, 3).unwrap();
    let w = &rec.agents[&AgentKind::Oracle].within_track_regret;
    assert!(w[59] - w[4] < 1e-3, "regret after CPI 5: {}", w[59] - w[4]);
}

#[test]
fn single_track_meta_is_thompson_sampling_from_a_sampled_prior() {
    let cfg = ExperimentConfig {
        tracks: 1,
        horizon: 50,
        agents: vec![AgentKind::Meta],
        ..ExperimentConfig::default()
    };
    let seed = 77;
    let (_, trace) = run_trial_traced(&cfg, seed).unwrap();
    let harness_rounds = &trace.tracks[0][&AgentKind::Meta].rounds;

    let tree = SeedTree::new(seed);
    let q = MetaPosterior::new(2, cfg.sigma_q2, cfg.sigma02, cfg.sigma2).unwrap();
    let p_star = q.sample_prior(&mut tree.stream("true-prior", &[])).unwrap();
    let scene = sample_task(&p_star, &cfg.scene_params(), &mut tree.stream("scene", &[0])).unwrap();
    let draws = TrackDraws::generate(&scene, &cfg, &tree, 0).unwrap();
    let prior = q.sample_prior(&mut tree.stream("meta-prior", &[0])).unwrap();
    let direct = run_track(&scene, &draws, prior.clone(), &cfg, &mut tree.stream("policy-meta", &[0])).unwrap();
    assert_eq!(&direct.rounds, harness_rounds);
}

#[test]
fn output_is_identical_for_any_worker_count() {
    let mut cfg = small();
    let mut bodies = Vec::new();
    for workers in [1, 3] {
        cfg.workers = workers;
        let dir = scratch(&format!("w{workers}"));
        let (agg, cfg_used) = (aggregate(&run_trials(&cfg).unwrap()).unwrap(), cfg.clone());
        emit_results(&agg, &cfg_used, &dir).unwrap();
        let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        bodies.push(
            files
                .iter()
                .filter(|p| p.file_name().unwrap() != "config.json")
                .map(|p| (p.file_name().unwrap().to_owned(), fs::read(p).unwrap()))
                .collect::<Vec<_>>(),
        );
        fs::remove_dir_all(&dir).unwrap();
    }
    assert_eq!(bodies[0].len(), 6);
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn emitted_files_follow_the_format() {
    let cfg = small();
    let agg = aggregate(&run_trials(&cfg).unwrap()).unwrap();
    let dir = scratch("format");
    emit_results(&agg, &cfg, &dir).unwrap();
    let read = |f: &str| fs::read_to_string(dir.join(f)).unwrap();
    for (file, header) in [
        ("regret.csv", "track,agent,cum_regret_mean,stderr"),
        ("lost_tracks.csv", "track,agent,mean_cum_lost,stderr"),
        ("kl.csv", "track,kl_mean,kl_stderr"),
        ("sinr.csv", "track,agent,mean_sinr_db,stderr"),
        ("rmse_final_track.csv", "cpi,agent,rmse_m,stderr"),
    ] {
        let body = read(file);
        assert!(!body.contains('\r'));
        assert_eq!(body.lines().next().unwrap(), header);
    }
    assert_eq!(read("regret.csv").lines().count(), 1 + cfg.tracks * 3);
    assert_eq!(read("rmse_final_track.csv").lines().count(), 1 + cfg.horizon * 3);

    let back = ExperimentConfig::from_json(&read("config.json")).unwrap();
    assert_eq!(back, cfg);

    let lost = read("lost_tracks.csv");
    let at_last = |agent: &str| -> f64 {
        lost.lines()
            .find(|l| l.starts_with(&format!("{},{agent},", cfg.tracks)))
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let summary: serde_json::Value = serde_json::from_str(&read("summary.json")).unwrap();
    let gap = summary["lost_tracks_gap"].as_f64().unwrap();
    assert!((gap - (at_last("uninformative") - at_last("meta"))).abs() < 1e-5);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn failures_name_the_trial() {
    let cfg = ExperimentConfig {
        tracker_position_sd_m: 1e200,
        ..small()
    };
    match run_trial(&cfg, 1) {
        Err(metats_core::Error::Simulation { trial, stage, cpi, .. }) => assert_eq!((trial, stage, cpi), (0, 0, 0)),
        other => panic!("expected a located simulation error, got {other:?}"),
    }
}
