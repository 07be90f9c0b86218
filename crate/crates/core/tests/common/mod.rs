#![allow(dead_code)]

use metats_core::linalg::Matrix;
use metats_core::meta::StageData;
use metats_core::rng::std_normal;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Posterior over the prior mean `μ` from every stage at once, by conditioning
/// the joint Gaussian of `(μ, L₁, …, L_s)` in covariance form.
pub fn joint_posterior(
    mu0: &[f64],
    sigma_q2: f64,
    sigma02: f64,
    sigma2: f64,
    stages: &[StageData<f64>],
) -> (DVector<f64>, DMatrix<f64>) {
    let d = mu0.len();
    let n: usize = stages.iter().map(|s| s.len()).sum();
    let prior_cov = DMatrix::<f64>::identity(d, d) * sigma_q2;
    let mu0 = DVector::from_column_slice(mu0);
    if n == 0 {
        return (mu0, prior_cov.try_inverse().unwrap());
    }
    let mut x = DMatrix::<f64>::zeros(n, d);
    let mut l = DVector::<f64>::zeros(n);
    let mut noise = DMatrix::<f64>::zeros(n, n);
    let mut at = 0;
    for st in stages {
        let xs = to_na(st.design());
        let block = DMatrix::<f64>::identity(st.len(), st.len()) * sigma2 + &xs * xs.transpose() * sigma02;
        x.view_mut((at, 0), (st.len(), d)).copy_from(&xs);
        noise.view_mut((at, at), (st.len(), st.len())).copy_from(&block);
        for (k, v) in st.losses().iter().enumerate() {
            l[at + k] = *v;
        }
        at += st.len();
    }
    let cov_l = &x * &prior_cov * x.transpose() + noise;
    let chol = cov_l.cholesky().expect("loss covariance is SPD");
    let gain_t = chol.solve(&(&x * &prior_cov)); // Cov(L)⁻¹ X Σ₀
    let mean = &mu0 + gain_t.transpose() * (&l - &x * &mu0);
    let cov = &prior_cov - (&prior_cov * x.transpose()) * &gain_t;
    let cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov.try_inverse().expect("posterior covariance invertible"))
}

/// A random stage: `n` rounds of standard normal features with linear losses.
pub fn random_stage<R: Rng>(rng: &mut R, d: usize, n: usize) -> StageData<f64> {
    let theta: Vec<f64> = (0..d).map(|_| 2.0 * std_normal::<f64, _>(rng)).collect();
    let design = Matrix::from_fn(n, d, |_, _| std_normal(rng));
    let losses = (0..n)
        .map(|i| (0..d).map(|j| design[(i, j)] * theta[j]).sum::<f64>() + std_normal::<f64, _>(rng))
        .collect();
    StageData::new(design, losses).unwrap()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest absolute entrywise gap between a `Matrix` and an nalgebra matrix.
pub fn max_abs_na(a: &Matrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

/// Random SPD matrix `B Bᵀ + εI`.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize, eps: f64) -> Matrix<f64> {
    let b = Matrix::from_fn(d, d, |_, _| std_normal::<f64, _>(rng));
    let mut a = b.matmul(&b.transpose()).unwrap();
    for i in 0..d {
        a[(i, i)] += eps;
    }
    a.symmetrized()
}
