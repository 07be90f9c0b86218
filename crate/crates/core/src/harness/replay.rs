use super::config::ExperimentConfig;
use super::emit::fmt_g;
use super::trial::{run_track, TrackDraws};
use crate::bandit::uninformative_prior;
use crate::error::Result;
use crate::radar::Scene;
use crate::rng::SeedTree;
use std::fmt::Write as _;

/// One CPI of a replayed track.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRow {
    pub cpi: usize,
    pub state: usize,
    pub observation: usize,
    pub waveform: usize,
    pub loss: f64,
    pub sinr_db: f64,
    pub regret: f64,
    pub position_error_m: f64,
}

/// Re-simulates one track of a fixed scene with uninformative Thompson
/// Sampling. Deterministic in `(scene, cfg, seed)`.
pub fn replay_scene(scene: &Scene, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ReplayRow>> {
    scene.validate()?;
    let tree = SeedTree::new(seed);
    let draws = TrackDraws::generate(scene, cfg, &tree, 0)?;
    let prior = uninformative_prior(scene.dim(), cfg.sigma_q2, cfg.uninformative_scale)?;
    let mut policy = tree.stream("policy-replay", &[]);
    let out = run_track(scene, &draws, prior, cfg, &mut policy)?;
    Ok(out
        .rounds
        .iter()
        .enumerate()
        .map(|(k, r)| ReplayRow {
            cpi: k + 1,
            state: out.states[k],
            observation: r.observation,
            waveform: r.chosen_waveform,
            loss: r.loss,
            sinr_db: out.sinr_db[k],
            regret: r.instant_regret,
            position_error_m: out.squared_error[k].sqrt(),
        })
        .collect())
}

pub fn replay_csv(rows: &[ReplayRow]) -> String {
    let mut out = String::from("cpi,state,observation,waveform,loss,sinr_db,regret,position_error_m\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.cpi,
            r.state,
            r.observation,
            r.waveform,
            fmt_g(r.loss),
            fmt_g(r.sinr_db),
            fmt_g(r.regret),
            fmt_g(r.position_error_m)
        );
    }
    out
}
