//! Multivariate Gaussians in natural (precision) form, conjugate Bayesian
//! linear-regression updates and closed-form KL divergence.

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, Cholesky, Matrix};
use crate::rng::std_normal_vec;
use crate::scalar::Scalar;
use rand::Rng;

/// `N(mean, precision⁻¹)`. The Cholesky factor of the precision is computed at
/// construction, which doubles as the positive-definiteness check.
#[derive(Clone, Debug)]
pub struct Gaussian<T> {
    mean: Vec<T>,
    precision: Matrix<T>,
    chol: Cholesky<T>,
}

impl<T: Scalar> Gaussian<T> {
    pub fn new(mean: Vec<T>, precision: Matrix<T>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !precision.is_square() {
            return Err(Error::ShapeMismatch("precision must be square".into()));
        }
        check_len(mean.len(), precision.rows())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian mean"));
        }
        let chol = Cholesky::new(&precision)?;
        Ok(Self {
            mean,
            precision: precision.symmetrized(),
            chol,
        })
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: Vec<T>, variance: T) -> Result<Self> {
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::NonPositiveVariance {
                name: "variance",
                value: variance.as_f64(),
            });
        }
        let d = mean.len();
        Self::new(mean, Matrix::scaled_identity(d, variance.recip()))
    }

    pub fn from_covariance(mean: Vec<T>, covariance: &Matrix<T>) -> Result<Self> {
        let precision = Cholesky::new(covariance)?.inverse()?;
        Self::new(mean, precision)
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

    pub fn precision_cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn covariance(&self) -> Result<Matrix<T>> {
        self.chol.inverse()
    }

    /// `mean + L⁻ᵀ z` with `z ~ N(0, I)` and `L Lᵀ = precision`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let z = std_normal_vec(rng, self.dim());
        self.sample_with(&z).expect("z has dimension d")
    }

    /// The sample that [`Gaussian::sample`] would return for the standard normal vector `z`.
    pub fn sample_with(&self, z: &[T]) -> Result<Vec<T>> {
        let offset = self.chol.solve_upper(z)?;
        Ok(self.mean.iter().zip(offset).map(|(&m, o)| m + o).collect())
    }

    pub fn kl(&self, other: &Gaussian<T>) -> Result<T> {
        kl_gaussian(self, other)
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(Cholesky::new(m)?.into_l())
}

pub fn sample_gaussian<T: Scalar, R: Rng + ?Sized>(g: &Gaussian<T>, rng: &mut R) -> Vec<T> {
    g.sample(rng)
}

/// `KL(p ‖ q)` for two Gaussians of equal dimension.
///
/// Rounding noise in `(-KL_CLAMP, 0)` is reported as zero; anything more
/// negative indicates a numerical fault and is returned as-is.
pub fn kl_gaussian<T: Scalar>(p: &Gaussian<T>, q: &Gaussian<T>) -> Result<T> {
    check_len(p.dim(), q.dim())?;
    let d = p.dim();
    let cov_p = p.covariance()?;
    // tr(Λ_q Σ_p)
    let mut trace = T::zero();
    for i in 0..d {
        for k in 0..d {
            trace += q.precision[(i, k)] * cov_p[(k, i)];
        }
    }
    let delta: Vec<T> = q.mean.iter().zip(&p.mean).map(|(&a, &b)| a - b).collect();
    let maha = dot(&delta, &q.precision.mat_vec(&delta)?);
    // ln det Σ_q - ln det Σ_p = ln det Λ_p - ln det Λ_q
    let log_ratio = p.chol.ln_det() - q.chol.ln_det();
    let kl = T::of(0.5) * (trace + maha - T::of(d as f64) + log_ratio);
    if kl < T::zero() && kl > -T::of(T::KL_CLAMP) {
        Ok(T::zero())
    } else {
        Ok(kl)
    }
}

/// Posterior over a linear-model parameter in natural form: precision `Λ`
/// and shift `b = Λ μ`, for losses `ℓ = ⟨θ, φ⟩ + η`, `η ~ N(0, σ²)`.
#[derive(Clone, Debug)]
pub struct LinearPosterior<T> {
    precision: Matrix<T>,
    shift: Vec<T>,
    noise_variance: T,
}

impl<T: Scalar> LinearPosterior<T> {
    pub fn from_prior(prior: &Gaussian<T>, noise_variance: T) -> Result<Self> {
        if !(noise_variance > T::zero()) || !noise_variance.is_finite() {
            return Err(Error::NonPositiveVariance {
                name: "noise_variance",
                value: noise_variance.as_f64(),
            });
        }
        let shift = prior.precision.mat_vec(&prior.mean)?;
        Ok(Self {
            precision: prior.precision.clone(),
            shift,
            noise_variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }

    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn mean(&self) -> Result<Vec<T>> {
        Cholesky::new(&self.precision)?.solve(&self.shift)
    }

    pub fn to_gaussian(&self) -> Result<Gaussian<T>> {
        Gaussian::new(self.mean()?, self.precision.clone())
    }

    /// Rank-one Bayes update with one `(φ, ℓ)` observation.
    pub fn update(&self, phi: &[T], loss: T) -> Result<Self> {
        check_len(self.dim(), phi.len())?;
        if !loss.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        let w = self.noise_variance.recip();
        let mut precision = self.precision.clone();
        precision.add_outer(phi, w)?;
        precision.symmetrize();
        let shift = self
            .shift
            .iter()
            .zip(phi)
            .map(|(&b, &f)| b + f * loss * w)
            .collect();
        Ok(Self {
            precision,
            shift,
            noise_variance: self.noise_variance,
        })
    }

    /// Batch update with the rows of `design` as features and `losses` as targets.
    pub fn update_batch(&self, design: &Matrix<T>, losses: &[T]) -> Result<Self> {
        check_len(self.dim(), design.cols())?;
        check_len(design.rows(), losses.len())?;
        let w = self.noise_variance.recip();
        let gram = design.transpose().matmul(design)?.scale(w);
        let precision = self.precision.add(&gram)?.symmetrized();
        let xl = design.tr_mat_vec(losses)?;
        let shift = self.shift.iter().zip(xl).map(|(&b, v)| b + v * w).collect();
        Ok(Self {
            precision,
            shift,
            noise_variance: self.noise_variance,
        })
    }
}

pub fn conjugate_update<T: Scalar>(
    p: &LinearPosterior<T>,
    phi: &[T],
    loss: T,
) -> Result<LinearPosterior<T>> {
    p.update(phi, loss)
}
