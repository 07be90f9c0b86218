//! One Monte Carlo trial: draw `P⋆ ~ Q`, then run every enabled agent over the
//! same sequence of tracks.
//!
//! All environment randomness for a track (scene, states, observations, loss
//! noise, target motion, measurement noise, tracker cue) is drawn up front from
//! named streams, so agents face identical realisations and adding or removing
//! an agent never shifts another stream.

use super::config::{AgentKind, ExperimentConfig};
use super::metrics::{AgentMetrics, MetricsRecord};
use crate::bandit::{init_agent, instant_regret, select_waveform, uninformative_prior, update_agent, RoundRecord};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::meta::{MetaPosterior, StageData};
use crate::radar::{
    context_features, measurement_variance, observe_state, realize_loss_with, sample_task, step_state,
    step_target_with, tracker_update, LostTrackDetector, Scene, TargetState, TrackerState,
};
use crate::rng::{std_normal, SeedTree, StreamRng};
use rand::Rng;
use std::collections::BTreeMap;

/// Environment realisation for one track, shared by every agent.
#[derive(Clone, Debug)]
pub struct TrackDraws {
    pub states: Vec<usize>,
    pub observations: Vec<usize>,
    /// Standard normal loss-noise draws, one per CPI.
    pub loss_noise: Vec<f64>,
    /// True target state at each CPI.
    pub truth: Vec<TargetState>,
    /// Standard normal measurement-noise pairs, scaled by the SINR-dependent
    /// standard deviation of whichever waveform the agent picks.
    pub measurement_noise: Vec<[f64; 2]>,
    /// Tracker state one CPI before the first measurement.
    pub tracker_cue: [f64; 4],
}

impl TrackDraws {
    pub fn generate(scene: &Scene, cfg: &ExperimentConfig, tree: &SeedTree, stage: usize) -> Result<Self> {
        let n = cfg.horizon;
        let s = stage as u64;

        let mut rng = tree.stream("state", &[s]);
        let mut states = Vec::with_capacity(n);
        states.push(rng.random_range(0..scene.state_count));
        while states.len() < n {
            let from = states.len().saturating_sub(scene.memory_order);
            let next = step_state(scene, &states[from..], &mut rng)?;
            states.push(next);
        }

        let mut rng = tree.stream("observation", &[s]);
        let observations = states
            .iter()
            .map(|&st| observe_state(scene, st, &mut rng))
            .collect::<Result<Vec<_>>>()?;

        let mut rng = tree.stream("loss-noise", &[s]);
        let loss_noise = (0..n).map(|_| std_normal(&mut rng)).collect();

        let mut rng = tree.stream("target", &[s]);
        let kin = cfg.kinematics();
        let range = rng.random_range(cfg.initial_range_min_m..=cfg.initial_range_max_m);
        let bearing = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(cfg.initial_speed_min_mps..=cfg.initial_speed_max_mps);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let start = TargetState {
            position: [range * bearing.cos(), range * bearing.sin()],
            velocity: [speed * heading.cos(), speed * heading.sin()],
        };
        let mut truth = Vec::with_capacity(n);
        let mut cur = start;
        for _ in 0..n {
            cur = step_target_with(&cur, cfg.cpi_seconds, &kin, [std_normal(&mut rng), std_normal(&mut rng)]);
            truth.push(cur);
        }

        let mut rng = tree.stream("measurement", &[s]);
        let measurement_noise = (0..n).map(|_| [std_normal(&mut rng), std_normal(&mut rng)]).collect();

        let mut rng = tree.stream("tracker-cue", &[s]);
        let (ps, vs) = (cfg.tracker_position_sd_m, cfg.tracker_velocity_sd_mps);
        let tracker_cue = [
            start.position[0] + ps * std_normal::<f64, _>(&mut rng),
            start.position[1] + ps * std_normal::<f64, _>(&mut rng),
            start.velocity[0] + vs * std_normal::<f64, _>(&mut rng),
            start.velocity[1] + vs * std_normal::<f64, _>(&mut rng),
        ];

        Ok(Self {
            states,
            observations,
            loss_noise,
            truth,
            measurement_noise,
            tracker_cue,
        })
    }
}

/// What one agent did over one track.
#[derive(Clone, Debug)]
pub struct TrackOutcome {
    pub rounds: Vec<RoundRecord<f64>>,
    /// States the environment passed through (identical across agents).
    pub states: Vec<usize>,
    pub sinr_db: Vec<f64>,
    /// Squared position error of the tracker after each CPI.
    pub squared_error: Vec<f64>,
    pub lost: bool,
}

impl TrackOutcome {
    pub fn total_regret(&self) -> f64 {
        self.rounds.iter().map(|r| r.instant_regret).sum()
    }

    pub fn mean_sinr_db(&self) -> f64 {
        self.sinr_db.iter().sum::<f64>() / self.sinr_db.len() as f64
    }
}

/// Runs Thompson Sampling from `prior` over one track. Errors carry the CPI
/// index in [`Error::Simulation`] with trial and stage left at zero.
pub fn run_track(
    scene: &Scene,
    draws: &TrackDraws,
    prior: Gaussian<f64>,
    cfg: &ExperimentConfig,
    policy_rng: &mut StreamRng,
) -> Result<TrackOutcome> {
    let n = draws.states.len();
    let noise_sd = cfg.sigma2.sqrt();
    let trk = cfg.tracker_params();
    let mut agent = init_agent(prior, cfg.sigma2)?;
    let cue = draws.tracker_cue;
    let mut tracker = TrackerState::new(cue, cfg.tracker_position_sd_m, cfg.tracker_velocity_sd_mps);
    let mut detector = LostTrackDetector::new(cfg.lost_threshold_db, cfg.lost_window);

    let mut out = TrackOutcome {
        rounds: Vec::with_capacity(n),
        states: draws.states.clone(),
        sinr_db: Vec::with_capacity(n),
        squared_error: Vec::with_capacity(n),
        lost: false,
    };
    for k in 0..n {
        let o = draws.observations[k];
        let ctx = context_features(scene, o, tracker.range()).map_err(|e| e.at(0, 0, k))?;
        let w = select_waveform(&agent, &ctx, policy_rng).map_err(|e| e.at(0, 0, k))?;
        let phi = ctx.get(w)?.to_vec();
        let loss = realize_loss_with(scene, &phi, noise_sd, draws.loss_noise[k])?;
        let sinr = -loss;
        let regret = instant_regret(&scene.true_theta, &ctx, w)?;
        detector = detector.observe(sinr);

        let truth = &draws.truth[k];
        let sd = measurement_variance(&trk, sinr).sqrt();
        let z = draws.measurement_noise[k];
        let measured = [truth.position[0] + sd * z[0], truth.position[1] + sd * z[1]];
        tracker = tracker_update(&tracker, measured, sinr, cfg.cpi_seconds, &trk).map_err(|e| e.at(0, 0, k))?;
        out.squared_error.push(tracker.position_error(truth).powi(2));

        agent = update_agent(&agent, &phi, loss).map_err(|e| e.at(0, 0, k))?;
        out.sinr_db.push(sinr);
        out.rounds.push(RoundRecord {
            observation: o,
            chosen_waveform: w,
            features: phi,
            loss,
            instant_regret: regret,
        });
    }
    out.lost = detector.tripped;
    Ok(out)
}

/// Seed of trial `index` under master seed `master`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    SeedTree::new(master).stream("trial", &[index as u64]).random()
}

/// Optional per-track detail collected alongside the metrics.
#[derive(Clone, Debug, Default)]
pub struct TrialTrace {
    pub true_prior_mean: Vec<f64>,
    /// Meta-posterior mean in force at the start of each track.
    pub meta_means: Vec<Vec<f64>>,
    /// Per track, per agent outcome.
    pub tracks: Vec<BTreeMap<AgentKind, TrackOutcome>>,
}

pub fn run_trial(cfg: &ExperimentConfig, seed: u64) -> Result<MetricsRecord> {
    run_trial_inner(cfg, seed, 0, None)
}

/// Like [`run_trial`] but also returns the full per-track outcomes.
pub fn run_trial_traced(cfg: &ExperimentConfig, seed: u64) -> Result<(MetricsRecord, TrialTrace)> {
    let mut trace = TrialTrace::default();
    let rec = run_trial_inner(cfg, seed, 0, Some(&mut trace))?;
    Ok((rec, trace))
}

pub(crate) fn run_trial_inner(
    cfg: &ExperimentConfig,
    seed: u64,
    trial_index: usize,
    mut trace: Option<&mut TrialTrace>,
) -> Result<MetricsRecord> {
    cfg.validate()?;
    let tree = SeedTree::new(seed);
    let d = cfg.feature_dim;
    let n = cfg.horizon;
    let params = cfg.scene_params();

    let mut meta = MetaPosterior::new(d, cfg.sigma_q2, cfg.sigma02, cfg.sigma2)?;
    // P⋆ ~ Q once per trial
    let p_star = meta.sample_prior(&mut tree.stream("true-prior", &[]))?;
    let flat = uninformative_prior(d, cfg.sigma_q2, cfg.uninformative_scale)?;
    if let Some(t) = trace.as_deref_mut() {
        t.true_prior_mean = p_star.mean().to_vec();
    }

    let mut metrics: BTreeMap<AgentKind, AgentMetrics> = cfg
        .agents
        .iter()
        .map(|&a| (a, AgentMetrics::with_capacity(cfg.tracks, n)))
        .collect();
    let mut kl = Vec::new();
    let mut totals: BTreeMap<AgentKind, (f64, f64)> = BTreeMap::new();

    for s in 0..cfg.tracks {
        let wrap = |e: Error| match e {
            Error::Simulation { cpi, source, .. } => Error::Simulation {
                trial: trial_index,
                stage: s,
                cpi,
                source,
            },
            e => e.at(trial_index, s, 0),
        };
        let scene = sample_task(&p_star, &params, &mut tree.stream("scene", &[s as u64])).map_err(wrap)?;
        let draws = TrackDraws::generate(&scene, cfg, &tree, s).map_err(wrap)?;
        if cfg.has_agent(AgentKind::Meta) {
            kl.push(meta.plug_in_kl(&p_star).map_err(wrap)?);
            if let Some(t) = trace.as_deref_mut() {
                t.meta_means.push(meta.mean().to_vec());
            }
        }

        let mut outcomes = BTreeMap::new();
        for &agent in &cfg.agents {
            let prior = match agent {
                AgentKind::Uninformative => flat.clone(),
                AgentKind::Oracle => p_star.clone(),
                AgentKind::Meta => meta
                    .sample_prior(&mut tree.stream("meta-prior", &[s as u64]))
                    .map_err(wrap)?,
            };
            let mut policy = tree.stream(&format!("policy-{agent}"), &[s as u64]);
            let outcome = run_track(&scene, &draws, prior, cfg, &mut policy).map_err(wrap)?;

            let (cum_regret, cum_lost) = totals.entry(agent).or_insert((0.0, 0.0));
            *cum_regret += outcome.total_regret();
            *cum_lost += f64::from(u8::from(outcome.lost));
            let m = metrics.get_mut(&agent).expect("agent registered");
            m.cum_regret.push(*cum_regret);
            m.cum_lost.push(*cum_lost);
            m.mean_sinr.push(outcome.mean_sinr_db());
            let mut acc = 0.0;
            for (slot, r) in m.within_track_regret.iter_mut().zip(&outcome.rounds) {
                acc += r.instant_regret;
                *slot += acc / cfg.tracks as f64;
            }
            if s + 1 == cfg.tracks {
                m.final_track_sq_error = outcome.squared_error.clone();
            }
            outcomes.insert(agent, outcome);
        }

        if let Some(meta_outcome) = outcomes.get(&AgentKind::Meta) {
            let stage = StageData::from_rounds(d, &meta_outcome.rounds).map_err(wrap)?;
            meta = meta.update(&stage).map_err(wrap)?;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.tracks.push(outcomes);
        }
    }
    Ok(MetricsRecord { agents: metrics, kl })
}
