//! Finite-state target channel: an order-`r` state process, a noisy
//! observation kernel, and a waveform catalog described by relative losses.

use crate::bandit::ContextSet;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::linalg::dot;
use crate::rng::std_normal;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Uniform};
use serde::{Deserialize, Serialize};

/// Features per waveform: expected and worst-case relative loss.
pub const FEATURE_DIM: usize = 2;

/// States with posterior probability above this count as consistent with an
/// observation when taking the worst case.
pub const CONSISTENCY_FLOOR: f64 = 0.01;

const ROW_SUM_TOL: f64 = 1e-12;

/// Randomisation of the scenes drawn for every track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub state_count: usize,
    pub waveform_count: usize,
    pub memory_order: usize,
    /// Probability mass on the correct state in each observation-kernel row.
    pub observation_accuracy: f64,
    /// Weight of "stay in the most recent state" in each transition row; the
    /// rest is a Dirichlet(1) draw.
    pub state_persistence: f64,
    /// Half-width (dB) of the uniform spread of per-waveform base losses.
    pub waveform_spread_db: f64,
    /// Standard deviation (dB) of per-state deviations from the base loss.
    pub state_spread_db: f64,
    pub reference_range_m: f64,
    /// Features are clamped to `[-feature_clamp, feature_clamp]`.
    pub feature_clamp: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            state_count: 4,
            waveform_count: 5,
            memory_order: 2,
            observation_accuracy: 0.85,
            state_persistence: 0.6,
            waveform_spread_db: 1.5,
            state_spread_db: 3.0,
            reference_range_m: 10_000.0,
            feature_clamp: 100.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.state_count == 0 {
            return bad("state_count must be at least 1");
        }
        if self.waveform_count == 0 {
            return bad("waveform_count must be at least 1");
        }
        if self.memory_order == 0 {
            return bad("memory_order must be at least 1");
        }
        if self.state_count.checked_pow(self.memory_order as u32).map_or(true, |n| n > 1 << 20) {
            return bad("state_count^memory_order is too large for a kernel table");
        }
        if !(0.5..=1.0).contains(&self.observation_accuracy) {
            return bad("observation_accuracy must lie in [0.5, 1]");
        }
        if !(0.0..=1.0).contains(&self.state_persistence) {
            return bad("state_persistence must lie in [0, 1]");
        }
        for (name, v) in [
            ("waveform_spread_db", self.waveform_spread_db),
            ("state_spread_db", self.state_spread_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        for (name, v) in [
            ("reference_range_m", self.reference_range_m),
            ("feature_clamp", self.feature_clamp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One track's channel. Immutable once sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub state_count: usize,
    pub waveform_count: usize,
    pub memory_order: usize,
    /// `state_count^memory_order` rows, indexed by the last `memory_order`
    /// states (oldest most significant).
    pub transition_kernel: Vec<Vec<f64>>,
    /// `P(o | s)`, one row per state.
    pub observation_kernel: Vec<Vec<f64>>,
    pub true_theta: Vec<f64>,
    /// Relative loss (dB) of each waveform in each state.
    pub relative_loss: Vec<Vec<f64>>,
    /// Unscaled `(expected, worst-case)` loss features per observation and waveform.
    pub feature_table: Vec<Vec<[f64; FEATURE_DIM]>>,
    pub reference_range_m: f64,
    pub feature_clamp: f64,
}

fn check_rows(name: &str, rows: &[Vec<f64>], width: usize) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::InvalidKernel(format!("{name} row {i} has {} entries, expected {width}", r.len())));
        }
        if r.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidKernel(format!("{name} row {i} has a negative or non-finite entry")));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidKernel(format!("{name} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Scales a non-negative row to sum to one, folding the rounding residue into
/// the largest entry.
fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
    let residue = 1.0 - row.iter().sum::<f64>();
    let imax = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    row[imax] += residue;
    row
}

fn categorical<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

impl Scene {
    /// Reads and validates a scene written by [`Scene::save`].
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: Scene = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks kernel shapes and stochasticity, then rebuilds nothing: the
    /// feature table is taken as given so that replayed scenes are bit-exact.
    pub fn validate(&self) -> Result<()> {
        let s = self.state_count;
        if s == 0 || self.waveform_count == 0 || self.memory_order == 0 {
            return Err(Error::InvalidKernel("empty alphabet or zero memory".into()));
        }
        let rows = s.checked_pow(self.memory_order as u32).ok_or_else(|| {
            Error::InvalidKernel("transition table too large".into())
        })?;
        if self.transition_kernel.len() != rows {
            return Err(Error::InvalidKernel(format!(
                "transition kernel has {} rows, expected {rows}",
                self.transition_kernel.len()
            )));
        }
        check_rows("transition kernel", &self.transition_kernel, s)?;
        if self.observation_kernel.len() != s {
            return Err(Error::InvalidKernel("observation kernel must have one row per state".into()));
        }
        check_rows("observation kernel", &self.observation_kernel, s)?;
        for (i, row) in self.observation_kernel.iter().enumerate() {
            if row[i] < 0.5 {
                return Err(Error::InvalidKernel(format!(
                    "observation kernel diagonal {i} is {} < 0.5",
                    row[i]
                )));
            }
        }
        if self.true_theta.len() != FEATURE_DIM || self.true_theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("true_theta must be a finite 2-vector".into()));
        }
        if self.relative_loss.len() != s
            || self.relative_loss.iter().any(|r| r.len() != self.waveform_count)
        {
            return Err(Error::InvalidKernel("relative_loss must be states x waveforms".into()));
        }
        if self.feature_table.len() != s
            || self.feature_table.iter().any(|r| r.len() != self.waveform_count)
        {
            return Err(Error::InvalidKernel("feature_table must be observations x waveforms".into()));
        }
        if !(self.reference_range_m > 0.0) || !(self.feature_clamp > 0.0) {
            return Err(Error::InvalidKernel("reference range and feature clamp must be positive".into()));
        }
        Ok(())
    }

    /// `P(s | o)` under a uniform state prior.
    pub fn state_posterior(&self, o: usize) -> Vec<f64> {
        normalize(self.observation_kernel.iter().map(|row| row[o]).collect())
    }

    fn build_feature_table(
        observation_kernel: &[Vec<f64>],
        relative_loss: &[Vec<f64>],
        waveforms: usize,
    ) -> Vec<Vec<[f64; FEATURE_DIM]>> {
        let s = observation_kernel.len();
        (0..s)
            .map(|o| {
                let post: Vec<f64> = normalize(observation_kernel.iter().map(|row| row[o]).collect());
                (0..waveforms)
                    .map(|w| {
                        let expected: f64 = post.iter().zip(relative_loss).map(|(p, r)| p * r[w]).sum();
                        let worst = post
                            .iter()
                            .zip(relative_loss)
                            .filter(|(&p, _)| p > CONSISTENCY_FLOOR)
                            .map(|(_, r)| r[w])
                            .fold(f64::NEG_INFINITY, f64::max);
                        [expected, worst]
                    })
                    .collect()
            })
            .collect()
    }

    /// Row of the transition table selected by the most recent states.
    /// Histories shorter than the memory order are padded with their first state.
    pub fn transition_row(&self, history: &[usize]) -> Result<&[f64]> {
        let s = self.state_count;
        let r = self.memory_order;
        let first = *history.first().ok_or_else(|| Error::ShapeMismatch("empty state history".into()))?;
        let tail = &history[history.len().saturating_sub(r)..];
        let mut idx = 0usize;
        for i in 0..r {
            let st = if tail.len() + i >= r { tail[tail.len() + i - r] } else { first };
            if st >= s {
                return Err(Error::IndexOutOfRange { index: st, len: s });
            }
            idx = idx * s + st;
        }
        Ok(&self.transition_kernel[idx])
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }
}

/// Draws a scene whose parameter is `θ ~ P⋆` and whose kernels and waveform
/// catalog come from `params`.
pub fn sample_task<R: Rng + ?Sized>(p_star: &Gaussian<f64>, params: &SceneParams, rng: &mut R) -> Result<Scene> {
    params.validate()?;
    if p_star.dim() != FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_DIM,
            found: p_star.dim(),
        });
    }
    let true_theta = p_star.sample(rng);
    let s = params.state_count;
    let k = params.waveform_count;
    let r = params.memory_order;

    let rows = s.pow(r as u32);
    let transition_kernel = (0..rows)
        .map(|idx| {
            let last = idx % s;
            let mut draw: Vec<f64> = (0..s).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = draw.iter().sum();
            draw.iter_mut()
                .for_each(|p| *p *= (1.0 - params.state_persistence) / total);
            draw[last] += params.state_persistence;
            normalize(draw)
        })
        .collect();

    let observation_kernel = (0..s)
        .map(|i| {
            if s == 1 {
                return vec![1.0];
            }
            let off = (1.0 - params.observation_accuracy) / (s - 1) as f64;
            normalize((0..s).map(|j| if i == j { params.observation_accuracy } else { off }).collect())
        })
        .collect::<Vec<_>>();

    let spread = params.waveform_spread_db;
    let base: Vec<f64> = if spread > 0.0 {
        let u = Uniform::new_inclusive(-spread, spread).expect("finite spread");
        (0..k).map(|_| u.sample(rng)).collect()
    } else {
        vec![0.0; k]
    };
    let relative_loss: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            base.iter()
                .map(|b| b + params.state_spread_db * std_normal::<f64, _>(rng))
                .collect()
        })
        .collect();
    let feature_table = Scene::build_feature_table(&observation_kernel, &relative_loss, k);

    let scene = Scene {
        state_count: s,
        waveform_count: k,
        memory_order: r,
        transition_kernel,
        observation_kernel,
        true_theta,
        relative_loss,
        feature_table,
        reference_range_m: params.reference_range_m,
        feature_clamp: params.feature_clamp,
    };
    scene.validate()?;
    Ok(scene)
}

/// Next state given the recent state history. Waveform choices play no part.
pub fn step_state<R: Rng + ?Sized>(scene: &Scene, history: &[usize], rng: &mut R) -> Result<usize> {
    Ok(categorical(scene.transition_row(history)?, rng))
}

pub fn observe_state<R: Rng + ?Sized>(scene: &Scene, state: usize, rng: &mut R) -> Result<usize> {
    let row = scene.observation_kernel.get(state).ok_or(Error::IndexOutOfRange {
        index: state,
        len: scene.state_count,
    })?;
    Ok(categorical(row, rng))
}

/// `φ(o, w) = (expected, worst) · (range / r₀)²` for every waveform.
pub fn context_features(scene: &Scene, observation: usize, track_range_m: f64) -> Result<ContextSet<f64>> {
    if !(track_range_m > 0.0) || !track_range_m.is_finite() {
        return Err(Error::NonPositiveRange(track_range_m));
    }
    let row = scene.feature_table.get(observation).ok_or(Error::IndexOutOfRange {
        index: observation,
        len: scene.feature_table.len(),
    })?;
    let g = (track_range_m / scene.reference_range_m).powi(2);
    let c = scene.feature_clamp;
    ContextSet::new(
        row.iter()
            .map(|f| f.iter().map(|v| (v * g).clamp(-c, c)).collect())
            .collect(),
    )
}

/// `⟨θ, φ⟩ + σ z` for a supplied standard normal `z`.
pub fn realize_loss_with(scene: &Scene, phi: &[f64], noise_sd: f64, z: f64) -> Result<f64> {
    crate::linalg::check_len(scene.true_theta.len(), phi.len())?;
    Ok(dot(&scene.true_theta, phi) + noise_sd * z)
}

/// Loss in dB (`-SINR`) with `η ~ N(0, noise_variance)`.
pub fn realize_loss<R: Rng + ?Sized>(scene: &Scene, phi: &[f64], noise_variance: f64, rng: &mut R) -> Result<f64> {
    if !(noise_variance >= 0.0) {
        return Err(Error::NonPositiveVariance {
            name: "noise_variance",
            value: noise_variance,
        });
    }
    let z = if noise_variance > 0.0 { std_normal(rng) } else { 0.0 };
    realize_loss_with(scene, phi, noise_variance.sqrt(), z)
}
