//! Constant-velocity target kinematics and the Kalman tracker whose measurement
//! noise is set by the SINR of the chosen waveform.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::std_normal;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

impl TargetState {
    pub fn range(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    /// Velocity diffusion `q` in (m/s²)²·s: velocity noise per step is `N(0, q·dt·I)`.
    pub process_noise: f64,
    pub max_speed: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Self {
            process_noise: 0.5,
            max_speed: 300.0,
        }
    }
}

/// Advances the target by `dt` with velocity increments drawn from `rng`.
pub fn step_target<R: Rng + ?Sized>(t: &TargetState, dt: f64, kin: &Kinematics, rng: &mut R) -> TargetState {
    let z = [std_normal(rng), std_normal(rng)];
    step_target_with(t, dt, kin, z)
}

pub fn step_target_with(t: &TargetState, dt: f64, kin: &Kinematics, z: [f64; 2]) -> TargetState {
    let sd = (kin.process_noise * dt).sqrt();
    let position = [t.position[0] + t.velocity[0] * dt, t.position[1] + t.velocity[1] * dt];
    let mut velocity = [t.velocity[0] + sd * z[0], t.velocity[1] + sd * z[1]];
    let speed = velocity[0].hypot(velocity[1]);
    if speed > kin.max_speed {
        let s = kin.max_speed / speed;
        velocity = [velocity[0] * s, velocity[1] * s];
    }
    TargetState { position, velocity }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Measurement standard deviation (m) per axis at 0 dB SINR.
    pub measurement_sd_m: f64,
    /// Process noise density assumed by the filter, matching [`Kinematics::process_noise`].
    pub process_noise: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            measurement_sd_m: 50.0,
            process_noise: 0.5,
        }
    }
}

/// Estimate `(x, y, vx, vy)` with its covariance.
#[derive(Clone, Debug)]
pub struct TrackerState {
    pub estimate: [f64; 4],
    pub covariance: Matrix<f64>,
}

impl TrackerState {
    pub fn new(estimate: [f64; 4], position_sd: f64, velocity_sd: f64) -> Self {
        let (p, v) = (position_sd * position_sd, velocity_sd * velocity_sd);
        Self {
            estimate,
            covariance: Matrix::from_diag(&[p, p, v, v]),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.estimate[0], self.estimate[1]]
    }

    pub fn range(&self) -> f64 {
        self.estimate[0].hypot(self.estimate[1])
    }

    pub fn position_error(&self, truth: &TargetState) -> f64 {
        (self.estimate[0] - truth.position[0]).hypot(self.estimate[1] - truth.position[1])
    }
}

pub fn sinr_linear(sinr_db: f64) -> f64 {
    10f64.powf(sinr_db / 10.0)
}

/// Measurement noise variance per axis for a given SINR.
pub fn measurement_variance(params: &TrackerParams, sinr_db: f64) -> f64 {
    params.measurement_sd_m.powi(2) / sinr_linear(sinr_db)
}

fn transition(dt: f64) -> Matrix<f64> {
    let mut f = Matrix::identity(4);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_covariance(q: f64, dt: f64) -> Matrix<f64> {
    let (a, b, c) = (q * dt.powi(3) / 3.0, q * dt.powi(2) / 2.0, q * dt);
    Matrix::from_fn(4, 4, |i, j| match (i, j) {
        (0, 0) | (1, 1) => a,
        (0, 2) | (2, 0) | (1, 3) | (3, 1) => b,
        (2, 2) | (3, 3) => c,
        _ => 0.0,
    })
}

/// One predict/update cycle with a position measurement whose noise is
/// `(σ_m² / sinr) · I`. Uses the Joseph form so the covariance stays SPD over
/// extreme SINR swings.
pub fn tracker_update(
    tr: &TrackerState,
    measured_position: [f64; 2],
    sinr_db: f64,
    dt: f64,
    params: &TrackerParams,
) -> Result<TrackerState> {
    if !sinr_db.is_finite() || measured_position.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tracker measurement"));
    }
    Cholesky::new(&tr.covariance)?;
    let f = transition(dt);
    let x_pred = f.mat_vec(&tr.estimate)?;
    let p_pred = f
        .matmul(&tr.covariance)?
        .matmul(&f.transpose())?
        .add(&process_covariance(params.process_noise, dt))?
        .symmetrized();

    let r = measurement_variance(params, sinr_db);
    // H = [I₂ 0]: S = P_pp + R
    let s = Matrix::from_fn(2, 2, |i, j| p_pred[(i, j)] + if i == j { r } else { 0.0 });
    let s_chol = Cholesky::new(&s)?;
    // K = P Hᵀ S⁻¹  (4x2)
    let pht = Matrix::from_fn(4, 2, |i, j| p_pred[(i, j)]);
    let k = s_chol.solve_matrix(&pht.transpose())?.transpose();
    let innov = [measured_position[0] - x_pred[0], measured_position[1] - x_pred[1]];
    let correction = k.mat_vec(&innov)?;
    let mut estimate = [0.0; 4];
    for i in 0..4 {
        estimate[i] = x_pred[i] + correction[i];
    }
    let mut i_kh = Matrix::identity(4);
    for i in 0..4 {
        for j in 0..2 {
            i_kh[(i, j)] -= k[(i, j)];
        }
    }
    let covariance = i_kh
        .matmul(&p_pred)?
        .matmul(&i_kh.transpose())?
        .add(&k.matmul(&k.transpose())?.scale(r))?
        .symmetrized();
    Ok(TrackerState { estimate, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn still_kin() -> Kinematics {
        Kinematics {
            process_noise: 0.0,
            max_speed: 300.0,
        }
    }

    #[test]
    fn noiseless_step_moves_in_a_line() {
        let t = TargetState {
            position: [0.0, 0.0],
            velocity: [100.0, 0.0],
        };
        let mut rng = SeedTree::new(0).stream("k", &[]);
        let t1 = step_target(&t, 0.1, &still_kin(), &mut rng);
        assert!((t1.position[0] - 10.0).abs() < 1e-12 && t1.position[1] == 0.0);
        let mut cur = t;
        for _ in 0..50 {
            cur = step_target(&cur, 0.1, &still_kin(), &mut rng);
        }
        assert!((cur.position[0] - 500.0).abs() < 1e-9 && cur.position[1] == 0.0);
        assert_eq!(cur.velocity, t.velocity);
    }

    #[test]
    fn velocity_variance_grows_linearly() {
        let kin = Kinematics {
            process_noise: 0.5,
            max_speed: 1e9,
        };
        let (dt, steps, trials) = (0.1, 20, 10_000);
        let mut rng = SeedTree::new(1).stream("v", &[]);
        let mut vx = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut t = TargetState {
                position: [0.0; 2],
                velocity: [0.0; 2],
            };
            for _ in 0..steps {
                t = step_target(&t, dt, &kin, &mut rng);
            }
            vx.push(t.velocity[0]);
        }
        let m = vx.iter().sum::<f64>() / trials as f64;
        let v = vx.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let expected = 0.5 * steps as f64 * dt;
        assert!((v / expected - 1.0).abs() < 0.05, "{v} vs {expected}");
    }

    #[test]
    fn speed_is_capped() {
        let kin = Kinematics {
            process_noise: 1e6,
            max_speed: 300.0,
        };
        let mut rng = SeedTree::new(2).stream("c", &[]);
        let mut t = TargetState {
            position: [0.0; 2],
            velocity: [290.0, 0.0],
        };
        for _ in 0..100 {
            t = step_target(&t, 0.1, &kin, &mut rng);
            assert!(t.speed() <= 300.0 + 1e-9);
        }
    }

    #[test]
    fn high_sinr_trusts_the_measurement() {
        let tr = TrackerState::new([0.0, 0.0, 0.0, 0.0], 1000.0, 50.0);
        let out = tracker_update(&tr, [400.0, -250.0], 120.0, 0.1, &TrackerParams::default()).unwrap();
        assert!((out.estimate[0] - 400.0).abs() < 0.1 && (out.estimate[1] + 250.0).abs() < 0.1);
    }

    #[test]
    fn low_sinr_keeps_the_prediction() {
        let tr = TrackerState::new([100.0, 50.0, 10.0, -20.0], 100.0, 5.0);
        let out = tracker_update(&tr, [5000.0, 5000.0], -60.0, 0.1, &TrackerParams::default()).unwrap();
        assert!((out.estimate[0] - 101.0).abs() < 0.1 && (out.estimate[1] - 48.0).abs() < 0.1);
        Cholesky::new(&out.covariance).unwrap();
    }

    #[test]
    fn corrupt_covariance_is_rejected() {
        let mut tr = TrackerState::new([0.0; 4], 10.0, 1.0);
        tr.covariance[(0, 0)] = -1.0;
        assert!(tracker_update(&tr, [0.0, 0.0], 10.0, 0.1, &TrackerParams::default()).is_err());
    }

    #[test]
    fn stationary_target_error_shrinks() {
        let params = TrackerParams::default();
        let (seeds, runs, steps): (usize, usize, usize) = (100, 100, 20);
        let sd = measurement_variance(&params, 10.0).sqrt();
        let tree = SeedTree::new(3);
        // per seed: RMSE over `runs` filters at each step
        let rmse: Vec<Vec<f64>> = (0..seeds as u64)
            .map(|seed| {
                let mut rng = tree.stream("stationary", &[seed]);
                let mut sq = vec![0.0; steps];
                for _ in 0..runs {
                    let mut tr = TrackerState::new(
                        [500.0 * std_normal::<f64, _>(&mut rng), 500.0 * std_normal::<f64, _>(&mut rng), 0.0, 0.0],
                        500.0,
                        1.0,
                    );
                    for e in sq.iter_mut() {
                        let z = [sd * std_normal::<f64, _>(&mut rng), sd * std_normal::<f64, _>(&mut rng)];
                        tr = tracker_update(&tr, z, 10.0, 0.1, &params).unwrap();
                        *e += tr.estimate[0].powi(2) + tr.estimate[1].powi(2);
                    }
                }
                sq.iter().map(|s| (s / runs as f64).sqrt()).collect()
            })
            .collect();
        let median = |k: usize| {
            let mut v: Vec<f64> = rmse.iter().map(|r| r[k]).collect();
            v.sort_by(f64::total_cmp);
            0.5 * (v[seeds / 2 - 1] + v[seeds / 2])
        };
        for k in 1..steps {
            assert!(median(k) < median(k - 1), "median RMSE rose at step {k}");
        }
    }
}
