//! Hierarchical (meta) layer: a Gaussian meta-posterior over the mean of the
//! instance prior, updated in closed form after every track.
//!
//! Model: `μ ~ N(μ_s, Λ_s⁻¹)`, `θ_s ~ N(μ, σ₀² I)`, `ℓ = ⟨θ_s, φ⟩ + η`,
//! `η ~ N(0, σ²)`. Integrating out `θ_s`, the losses of one track are jointly
//! Gaussian with covariance `M = σ² I + σ₀² X Xᵀ`, which gives
//!
//! ```text
//! Λ_s = Λ_{s-1} + Xᵀ M⁻¹ X
//! μ_s = Λ_s⁻¹ (Λ_{s-1} μ_{s-1} + Xᵀ M⁻¹ L)
//! ```

use crate::bandit::{init_agent, run_thompson, BanditTask, ContextSet, RoundRecord};
use crate::error::{Error, Result};
use crate::gaussian::{kl_gaussian, Gaussian};
use crate::linalg::{check_len, Cholesky, Matrix};
use crate::rng::std_normal_vec;
use crate::scalar::Scalar;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct MetaPosterior<T> {
    mean: Vec<T>,
    precision: Matrix<T>,
    instance_variance: T,
    noise_variance: T,
}

fn check_variance<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveVariance {
            name,
            value: v.as_f64(),
        })
    }
}

impl<T: Scalar> MetaPosterior<T> {
    /// `Q = N(0, σ_q² I)`.
    pub fn new(dim: usize, sigma_q2: T, sigma02: T, sigma2: T) -> Result<Self> {
        check_variance("sigma_q2", sigma_q2)?;
        check_variance("sigma02", sigma02)?;
        check_variance("sigma2", sigma2)?;
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self {
            mean: vec![T::zero(); dim],
            precision: Matrix::scaled_identity(dim, sigma_q2.recip()),
            instance_variance: sigma02,
            noise_variance: sigma2,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }

    /// `σ₀²`; the instance covariance is `σ₀² I`.
    pub fn instance_variance(&self) -> T {
        self.instance_variance
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    /// The meta-posterior itself as a distribution over prior means.
    pub fn as_gaussian(&self) -> Result<Gaussian<T>> {
        Gaussian::new(self.mean.clone(), self.precision.clone())
    }

    /// Instance prior with the meta-posterior mean plugged in: `N(μ_s, σ₀² I)`.
    pub fn plug_in_prior(&self) -> Result<Gaussian<T>> {
        Gaussian::isotropic(self.mean.clone(), self.instance_variance)
    }

    /// `KL(N(μ_s, σ₀² I) ‖ P⋆)`.
    pub fn plug_in_kl(&self, true_prior: &Gaussian<T>) -> Result<T> {
        kl_gaussian(&self.plug_in_prior()?, true_prior)
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Gaussian<T>> {
        let z = std_normal_vec(rng, self.dim());
        let mean = self.as_gaussian()?.sample_with(&z)?;
        Gaussian::isotropic(mean, self.instance_variance)
    }

    pub fn update(&self, stage: &StageData<T>) -> Result<Self> {
        check_len(self.dim(), stage.design.cols())?;
        let n = stage.len();
        if n == 0 {
            return Ok(self.clone());
        }
        let x = &stage.design;
        // M = σ² I + X Σ Xᵀ with Σ = σ₀² I
        let mut m = x.matmul(&x.transpose())?.scale(self.instance_variance);
        for i in 0..n {
            m[(i, i)] += self.noise_variance;
        }
        m.symmetrize();
        let m_chol = Cholesky::new(&m)?;
        let m_inv_x = m_chol.solve_matrix(x)?;
        let m_inv_l = m_chol.solve(&stage.losses)?;

        let precision = self
            .precision
            .add(&x.transpose().matmul(&m_inv_x)?)?
            .symmetrized();
        let mut rhs = self.precision.mat_vec(&self.mean)?;
        for (r, v) in rhs.iter_mut().zip(x.tr_mat_vec(&m_inv_l)?) {
            *r += v;
        }
        let mean = Cholesky::new(&precision)?.solve(&rhs)?;
        Ok(Self {
            mean,
            precision,
            instance_variance: self.instance_variance,
            noise_variance: self.noise_variance,
        })
    }
}

pub fn init_meta<T: Scalar>(dim: usize, sigma_q2: T, sigma02: T, sigma2: T) -> Result<MetaPosterior<T>> {
    MetaPosterior::new(dim, sigma_q2, sigma02, sigma2)
}

pub fn sample_prior<T: Scalar, R: Rng + ?Sized>(q: &MetaPosterior<T>, rng: &mut R) -> Result<Gaussian<T>> {
    q.sample_prior(rng)
}

pub fn meta_update<T: Scalar>(q: &MetaPosterior<T>, stage: &StageData<T>) -> Result<MetaPosterior<T>> {
    q.update(stage)
}

/// Design matrix (one row per played round) and the matching loss vector.
#[derive(Clone, Debug)]
pub struct StageData<T> {
    design: Matrix<T>,
    losses: Vec<T>,
}

impl<T: Scalar> StageData<T> {
    pub fn new(design: Matrix<T>, losses: Vec<T>) -> Result<Self> {
        check_len(design.rows(), losses.len())?;
        Ok(Self { design, losses })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            design: Matrix::zeros(0, dim),
            losses: Vec::new(),
        }
    }

    pub fn from_rounds(dim: usize, rounds: &[RoundRecord<T>]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rounds.iter().map(|r| r.features.clone()).collect();
        let design = Matrix::from_rows(&rows, dim)?;
        Self::new(design, rounds.iter().map(|r| r.loss).collect())
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    pub fn losses(&self) -> &[T] {
        &self.losses
    }
}

/// Source of bandit instances drawn from a fixed task distribution.
pub trait TaskSampler<T: Scalar> {
    type Task: BanditTask<T>;

    fn sample_task(&mut self, stage: usize) -> Result<Self::Task>;

    /// The true instance prior, when the sampler knows it (used for monitoring only).
    fn task_prior(&self) -> Option<&Gaussian<T>>;
}

#[derive(Clone, Debug)]
pub struct StageSummary<T> {
    pub stage: usize,
    pub prior_used: Gaussian<T>,
    pub track_regret: T,
    pub cumulative_regret: T,
    /// `KL(N(μ_s, σ₀² I) ‖ P⋆)` for the meta-posterior used during this stage.
    pub plug_in_kl: Option<T>,
    pub rounds: Vec<RoundRecord<T>>,
}

/// Contextual meta-Thompson Sampling: for each of `stages` tracks, sample an
/// instance prior from `Q_s`, run Thompson Sampling for `horizon` rounds on a
/// fresh task, then fold the track into the meta-posterior.
pub fn run_meta_ts<T, S, R>(
    env: &mut S,
    stages: usize,
    horizon: usize,
    q0: MetaPosterior<T>,
    rng: &mut R,
) -> Result<(MetaPosterior<T>, Vec<StageSummary<T>>)>
where
    T: Scalar,
    S: TaskSampler<T>,
    R: Rng + ?Sized,
{
    if stages == 0 || horizon == 0 {
        return Err(Error::Config("stage count and horizon must be at least 1".into()));
    }
    let mut q = q0;
    let mut cumulative = T::zero();
    let mut out = Vec::with_capacity(stages);
    for s in 0..stages {
        let plug_in_kl = env.task_prior().map(|p| q.plug_in_kl(p)).transpose()?;
        let prior = q.sample_prior(rng)?;
        let mut task = env.sample_task(s)?;
        let agent = init_agent(prior.clone(), q.noise_variance())?;
        let (_, rounds) = run_thompson(&mut task, agent, horizon, rng)?;
        let track_regret: T = rounds.iter().map(|r| r.instant_regret).sum();
        cumulative += track_regret;
        q = q.update(&StageData::from_rounds(q.dim(), &rounds)?)?;
        out.push(StageSummary {
            stage: s,
            prior_used: prior,
            track_regret,
            cumulative_regret: cumulative,
            plug_in_kl,
            rounds,
        });
    }
    Ok((q, out))
}

/// Synthetic linear-Gaussian task family: `θ ~ P⋆`, `K` i.i.d. standard normal
/// feature vectors per round, Gaussian loss noise.
///
/// Contexts and noise are pre-drawn for `horizon` rounds, so every policy run
/// on a given task sees the same environment.
pub struct GaussianTasks<T, R> {
    true_prior: Gaussian<T>,
    arms: usize,
    noise_variance: T,
    horizon: usize,
    rng: R,
}

impl<T: Scalar, R: Rng> GaussianTasks<T, R> {
    pub fn new(true_prior: Gaussian<T>, arms: usize, noise_variance: T, horizon: usize, rng: R) -> Result<Self> {
        check_variance("noise_variance", noise_variance)?;
        if arms == 0 {
            return Err(Error::Config("need at least one arm".into()));
        }
        Ok(Self {
            true_prior,
            arms,
            noise_variance,
            horizon,
            rng,
        })
    }
}

pub struct GaussianTask<T> {
    theta: Vec<T>,
    contexts: Vec<ContextSet<T>>,
    noise: Vec<T>,
    noise_sd: T,
}

impl<T: Scalar> BanditTask<T> for GaussianTask<T> {
    fn true_theta(&self) -> &[T] {
        &self.theta
    }

    fn context(&mut self, round: usize) -> Result<(usize, ContextSet<T>)> {
        let ctx = self.contexts.get(round).cloned().ok_or(Error::IndexOutOfRange {
            index: round,
            len: self.contexts.len(),
        })?;
        Ok((0, ctx))
    }

    fn realize_loss(&mut self, round: usize, phi: &[T]) -> Result<T> {
        check_len(self.theta.len(), phi.len())?;
        Ok(crate::linalg::dot(&self.theta, phi) + self.noise_sd * self.noise[round])
    }
}

impl<T: Scalar, R: Rng> TaskSampler<T> for GaussianTasks<T, R> {
    type Task = GaussianTask<T>;

    fn sample_task(&mut self, _stage: usize) -> Result<GaussianTask<T>> {
        let t = self;
        let theta = t.true_prior.sample(&mut t.rng);
        let d = theta.len();
        let contexts = (0..t.horizon)
            .map(|_| ContextSet::new((0..t.arms).map(|_| std_normal_vec(&mut t.rng, d)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let noise = std_normal_vec(&mut t.rng, t.horizon);
        Ok(GaussianTask {
            theta,
            contexts,
            noise,
            noise_sd: t.noise_variance.sqrt(),
        })
    }

    fn task_prior(&self) -> Option<&Gaussian<T>> {
        Some(&self.true_prior)
    }
}
