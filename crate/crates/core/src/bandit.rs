//! Linear contextual Thompson Sampling over a finite waveform catalog.
//!
//! Losses are minimised: every round the agent draws `θ̃` from its posterior
//! and plays `argmin_w ⟨θ̃, φ_w⟩`, which selects each waveform with its
//! posterior probability of being loss-minimising.

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, LinearPosterior};
use crate::linalg::{check_len, dot};
use crate::rng::std_normal_vec;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One feature vector per waveform for the current observation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextSet<T> {
    features: Vec<Vec<T>>,
}

impl<T: Scalar> ContextSet<T> {
    pub fn new(features: Vec<Vec<T>>) -> Result<Self> {
        let d = features.first().map(Vec::len).ok_or_else(|| {
            Error::ShapeMismatch("context set needs at least one waveform".into())
        })?;
        if d == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for f in &features {
            check_len(d, f.len())?;
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("context features"));
            }
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn get(&self, w: usize) -> Result<&[T]> {
        self.features
            .get(w)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index: w,
                len: self.len(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.features.iter().map(Vec::as_slice)
    }

    /// Index of the smallest `⟨θ, φ_w⟩`; ties go to the lowest index.
    pub fn argmin(&self, theta: &[T]) -> Result<usize> {
        check_len(self.dim(), theta.len())?;
        let mut best = 0;
        let mut best_val = T::infinity();
        for (w, f) in self.iter().enumerate() {
            let v = dot(theta, f);
            if v < best_val {
                best = w;
                best_val = v;
            }
        }
        Ok(best)
    }
}

#[derive(Clone, Debug)]
pub struct AgentState<T> {
    posterior: LinearPosterior<T>,
    prior_used: Gaussian<T>,
}

impl<T: Scalar> AgentState<T> {
    pub fn posterior(&self) -> &LinearPosterior<T> {
        &self.posterior
    }

    pub fn prior_used(&self) -> &Gaussian<T> {
        &self.prior_used
    }

    pub fn dim(&self) -> usize {
        self.prior_used.dim()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord<T> {
    pub observation: usize,
    pub chosen_waveform: usize,
    pub features: Vec<T>,
    pub loss: T,
    pub instant_regret: T,
}

pub fn init_agent<T: Scalar>(prior: Gaussian<T>, noise_variance: T) -> Result<AgentState<T>> {
    Ok(AgentState {
        posterior: LinearPosterior::from_prior(&prior, noise_variance)?,
        prior_used: prior,
    })
}

/// Flat proper prior `N(0, scale · σ_q² · I)`.
pub fn uninformative_prior<T: Scalar>(dim: usize, sigma_q2: T, scale: T) -> Result<Gaussian<T>> {
    Gaussian::isotropic(vec![T::zero(); dim], sigma_q2 * scale)
}

pub fn select_waveform<T: Scalar, R: Rng + ?Sized>(
    agent: &AgentState<T>,
    ctx: &ContextSet<T>,
    rng: &mut R,
) -> Result<usize> {
    let z = std_normal_vec(rng, agent.dim());
    select_waveform_with(agent, ctx, &z)
}

/// Thompson selection driven by an explicit standard normal vector `z`.
pub fn select_waveform_with<T: Scalar>(
    agent: &AgentState<T>,
    ctx: &ContextSet<T>,
    z: &[T],
) -> Result<usize> {
    check_len(agent.dim(), ctx.dim())?;
    let theta = posterior_sample_with(&agent.posterior, z)?;
    ctx.argmin(&theta)
}

/// `μ + L⁻ᵀ z` for the posterior precision `L Lᵀ`.
pub fn posterior_sample_with<T: Scalar>(post: &LinearPosterior<T>, z: &[T]) -> Result<Vec<T>> {
    post.to_gaussian()?.sample_with(z)
}

pub fn update_agent<T: Scalar>(agent: &AgentState<T>, phi: &[T], loss: T) -> Result<AgentState<T>> {
    Ok(AgentState {
        posterior: agent.posterior.update(phi, loss)?,
        prior_used: agent.prior_used.clone(),
    })
}

/// Noise-free regret of playing `chosen` against the true parameter.
pub fn instant_regret<T: Scalar>(true_theta: &[T], ctx: &ContextSet<T>, chosen: usize) -> Result<T> {
    check_len(ctx.dim(), true_theta.len())?;
    let chosen_loss = dot(true_theta, ctx.get(chosen)?);
    let best = ctx
        .iter()
        .map(|f| dot(true_theta, f))
        .fold(T::infinity(), T::min);
    Ok((chosen_loss - best).max(T::zero()))
}

/// A single bandit instance: contexts arrive per round, losses are linear in
/// a hidden parameter plus noise.
pub trait BanditTask<T: Scalar> {
    fn true_theta(&self) -> &[T];

    /// Observation index and per-waveform features for round `round`.
    fn context(&mut self, round: usize) -> Result<(usize, ContextSet<T>)>;

    /// Noisy loss for playing features `phi` in round `round`.
    fn realize_loss(&mut self, round: usize, phi: &[T]) -> Result<T>;
}

/// Plays `horizon` rounds of Thompson Sampling on `task`.
pub fn run_thompson<T: Scalar, B: BanditTask<T>, R: Rng + ?Sized>(
    task: &mut B,
    mut agent: AgentState<T>,
    horizon: usize,
    rng: &mut R,
) -> Result<(AgentState<T>, Vec<RoundRecord<T>>)> {
    let mut records = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let (observation, ctx) = task.context(k)?;
        let w = select_waveform(&agent, &ctx, rng)?;
        let phi = ctx.get(w)?.to_vec();
        let loss = task.realize_loss(k, &phi)?;
        let regret = instant_regret(task.true_theta(), &ctx, w)?;
        agent = update_agent(&agent, &phi, loss)?;
        records.push(RoundRecord {
            observation,
            chosen_waveform: w,
            features: phi,
            loss,
            instant_regret: regret,
        });
    }
    Ok((agent, records))
}
