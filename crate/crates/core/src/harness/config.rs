use crate::error::{Error, Result};
use crate::radar::{Kinematics, SceneParams, TrackerParams, FEATURE_DIM};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    /// Thompson Sampling from a flat prior, re-initialised every track.
    Uninformative,
    /// Meta-Thompson Sampling: prior sampled from the meta-posterior.
    Meta,
    /// Thompson Sampling with the true instance prior.
    Oracle,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Uninformative, AgentKind::Meta, AgentKind::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Uninformative => "uninformative",
            AgentKind::Meta => "meta",
            AgentKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uninformative" => Ok(AgentKind::Uninformative),
            "meta" => Ok(AgentKind::Meta),
            "oracle" => Ok(AgentKind::Oracle),
            other => Err(Error::Config(format!(
                "unknown agent `{other}` (expected uninformative, meta or oracle)"
            ))),
        }
    }
}

/// Parses a comma separated agent list such as `meta,oracle`.
pub fn parse_agents(list: &str) -> Result<Vec<AgentKind>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Flat experiment description. Every field is optional in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Target tracks per trial (`m`).
    pub tracks: usize,
    /// CPIs per track (`n`).
    pub horizon: usize,
    /// Waveform catalog size (`K`).
    pub waveforms: usize,
    pub feature_dim: usize,
    /// Monte Carlo replications.
    pub trials: usize,
    pub seed: u64,
    pub agents: Vec<AgentKind>,
    /// Worker threads for trials; 0 picks the number of cores.
    pub workers: usize,

    /// Loss-noise variance σ² (dB²).
    pub sigma2: f64,
    /// Instance-prior variance σ₀².
    pub sigma02: f64,
    /// Meta-prior variance σ_q².
    pub sigma_q2: f64,
    /// Flat prior variance is `uninformative_scale · σ_q²`.
    pub uninformative_scale: f64,

    pub state_count: usize,
    pub memory_order: usize,
    pub observation_accuracy: f64,
    pub state_persistence: f64,
    pub waveform_spread_db: f64,
    pub state_spread_db: f64,
    pub reference_range_m: f64,
    pub feature_clamp: f64,

    pub cpi_seconds: f64,
    pub process_noise: f64,
    pub max_speed_mps: f64,
    pub initial_range_min_m: f64,
    pub initial_range_max_m: f64,
    pub initial_speed_min_mps: f64,
    pub initial_speed_max_mps: f64,
    pub measurement_sd_m: f64,
    pub tracker_position_sd_m: f64,
    pub tracker_velocity_sd_mps: f64,

    pub lost_threshold_db: f64,
    pub lost_window: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let scene = SceneParams::default();
        let kin = Kinematics::default();
        let trk = TrackerParams::default();
        Self {
            tracks: 50,
            horizon: 200,
            waveforms: scene.waveform_count,
            feature_dim: FEATURE_DIM,
            trials: 100,
            seed: 20_210_601,
            agents: AgentKind::ALL.to_vec(),
            workers: 0,
            sigma2: 1.0,
            sigma02: 0.25,
            sigma_q2: 4.0,
            uninformative_scale: 100.0,
            state_count: scene.state_count,
            memory_order: scene.memory_order,
            observation_accuracy: scene.observation_accuracy,
            state_persistence: scene.state_persistence,
            waveform_spread_db: scene.waveform_spread_db,
            state_spread_db: scene.state_spread_db,
            reference_range_m: scene.reference_range_m,
            feature_clamp: scene.feature_clamp,
            cpi_seconds: 0.1,
            process_noise: kin.process_noise,
            max_speed_mps: kin.max_speed,
            initial_range_min_m: 8_000.0,
            initial_range_max_m: 12_000.0,
            initial_speed_min_mps: 50.0,
            initial_speed_max_mps: 250.0,
            measurement_sd_m: trk.measurement_sd_m,
            tracker_position_sd_m: 1_000.0,
            tracker_velocity_sd_mps: 50.0,
            lost_threshold_db: crate::radar::LOST_TRACK_THRESHOLD_DB,
            lost_window: crate::radar::LOST_TRACK_WINDOW,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn has_agent(&self, a: AgentKind) -> bool {
        self.agents.contains(&a)
    }

    pub fn scene_params(&self) -> SceneParams {
        SceneParams {
            state_count: self.state_count,
            waveform_count: self.waveforms,
            memory_order: self.memory_order,
            observation_accuracy: self.observation_accuracy,
            state_persistence: self.state_persistence,
            waveform_spread_db: self.waveform_spread_db,
            state_spread_db: self.state_spread_db,
            reference_range_m: self.reference_range_m,
            feature_clamp: self.feature_clamp,
        }
    }

    pub fn kinematics(&self) -> Kinematics {
        Kinematics {
            process_noise: self.process_noise,
            max_speed: self.max_speed_mps,
        }
    }

    pub fn tracker_params(&self) -> TrackerParams {
        TrackerParams {
            measurement_sd_m: self.measurement_sd_m,
            process_noise: self.process_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("tracks", self.tracks),
            ("horizon", self.horizon),
            ("waveforms", self.waveforms),
            ("trials", self.trials),
            ("lost_window", self.lost_window),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.feature_dim != FEATURE_DIM {
            return fail(format!(
                "feature_dim must be {FEATURE_DIM}: the radar features are (expected loss, worst-case loss)"
            ));
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("sigma02", self.sigma02),
            ("sigma_q2", self.sigma_q2),
            ("uninformative_scale", self.uninformative_scale),
            ("cpi_seconds", self.cpi_seconds),
            ("max_speed_mps", self.max_speed_mps),
            ("initial_range_min_m", self.initial_range_min_m),
            ("measurement_sd_m", self.measurement_sd_m),
            ("tracker_position_sd_m", self.tracker_position_sd_m),
            ("tracker_velocity_sd_mps", self.tracker_velocity_sd_mps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("initial_speed_min_mps", self.initial_speed_min_mps),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.initial_range_max_m >= self.initial_range_min_m && self.initial_range_max_m.is_finite()) {
            return fail("initial_range_max_m must be finite and >= initial_range_min_m".into());
        }
        if !(self.initial_speed_max_mps >= self.initial_speed_min_mps
            && self.initial_speed_max_mps <= self.max_speed_mps)
        {
            return fail("initial speeds must satisfy min <= max <= max_speed_mps".into());
        }
        if !self.lost_threshold_db.is_finite() {
            return fail("lost_threshold_db must be finite".into());
        }
        if self.agents.is_empty() {
            return fail("at least one agent must be enabled".into());
        }
        let mut seen = self.agents.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.agents.len() {
            return fail("agents must not repeat".into());
        }
        self.scene_params().validate()
    }
}
