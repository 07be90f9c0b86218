use super::config::AgentKind;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Series one agent produces in one trial.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    /// Cumulative regret after each track.
    pub cum_regret: Vec<f64>,
    /// Cumulative number of lost tracks after each track.
    pub cum_lost: Vec<f64>,
    /// Mean SINR (dB) over the CPIs of each track.
    pub mean_sinr: Vec<f64>,
    /// Squared tracker position error per CPI on the final track.
    pub final_track_sq_error: Vec<f64>,
    /// Within-track cumulative regret per CPI, averaged over tracks.
    pub within_track_regret: Vec<f64>,
}

impl AgentMetrics {
    pub fn with_capacity(tracks: usize, horizon: usize) -> Self {
        Self {
            cum_regret: Vec::with_capacity(tracks),
            cum_lost: Vec::with_capacity(tracks),
            mean_sinr: Vec::with_capacity(tracks),
            final_track_sq_error: Vec::with_capacity(horizon),
            within_track_regret: vec![0.0; horizon],
        }
    }

    fn series(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("cum_regret", &self.cum_regret),
            ("cum_lost", &self.cum_lost),
            ("mean_sinr", &self.mean_sinr),
            ("final_track_sq_error", &self.final_track_sq_error),
            ("within_track_regret", &self.within_track_regret),
        ]
    }
}

/// Everything one trial records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub agents: BTreeMap<AgentKind, AgentMetrics>,
    /// Plug-in KL of the meta-posterior in force at each track against `P⋆`.
    /// Empty when the meta agent is disabled.
    pub kl: Vec<f64>,
}

/// Cross-trial mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error (sample variance with `n − 1`). A single value has
/// standard error 0.
pub fn mean_stderr(xs: &[f64]) -> Stat {
    let n = xs.len();
    if n == 0 {
        return Stat {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Stat { mean, stderr: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Stat {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}

/// Cross-trial statistics for one agent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub cum_regret: Vec<Stat>,
    pub cum_lost: Vec<Stat>,
    pub mean_sinr: Vec<Stat>,
    pub final_track_mse: Vec<Stat>,
    /// Root of the cross-trial mean squared error, with a delta-method stderr.
    pub final_track_rmse: Vec<Stat>,
    pub within_track_regret: Vec<Stat>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub trials: usize,
    pub agents: BTreeMap<AgentKind, AgentSummary>,
    pub kl: Vec<Stat>,
    /// Median over trials of the KL at each track.
    pub kl_median: Vec<f64>,
}

fn column_stats(rows: &[&[f64]]) -> Vec<Stat> {
    let len = rows.first().map_or(0, |r| r.len());
    let mut col = Vec::with_capacity(rows.len());
    (0..len)
        .map(|j| {
            col.clear();
            col.extend(rows.iter().map(|r| r[j]));
            mean_stderr(&col)
        })
        .collect()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn check_congruent(trials: &[MetricsRecord]) -> Result<()> {
    let first = &trials[0];
    for (t, rec) in trials.iter().enumerate().skip(1) {
        if rec.kl.len() != first.kl.len() {
            return Err(Error::ShapeMismatch(format!(
                "trial {t}: kl has {} tracks, trial 0 has {}",
                rec.kl.len(),
                first.kl.len()
            )));
        }
        if !rec.agents.keys().eq(first.agents.keys()) {
            return Err(Error::ShapeMismatch(format!("trial {t}: agent set differs from trial 0")));
        }
        for (agent, m) in &rec.agents {
            for ((name, a), (_, b)) in m.series().iter().zip(first.agents[agent].series()) {
                if a.len() != b.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "trial {t}, agent {agent}: {name} has {} entries, trial 0 has {}",
                        a.len(),
                        b.len()
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Elementwise cross-trial mean and standard error.
pub fn aggregate(trials: &[MetricsRecord]) -> Result<AggregateRecord> {
    if trials.is_empty() {
        return Err(Error::ShapeMismatch("no trials to aggregate".into()));
    }
    check_congruent(trials)?;
    let mut agents = BTreeMap::new();
    for &agent in trials[0].agents.keys() {
        let pick = |f: fn(&AgentMetrics) -> &[f64]| -> Vec<Stat> {
            let rows: Vec<&[f64]> = trials.iter().map(|t| f(&t.agents[&agent])).collect();
            column_stats(&rows)
        };
        let mse = pick(|m| &m.final_track_sq_error);
        let rmse = mse
            .iter()
            .map(|s| {
                let r = s.mean.sqrt();
                let se = if r > 0.0 { s.stderr / (2.0 * r) } else { 0.0 };
                Stat { mean: r, stderr: se }
            })
            .collect();
        agents.insert(
            agent,
            AgentSummary {
                cum_regret: pick(|m| &m.cum_regret),
                cum_lost: pick(|m| &m.cum_lost),
                mean_sinr: pick(|m| &m.mean_sinr),
                final_track_mse: mse,
                final_track_rmse: rmse,
                within_track_regret: pick(|m| &m.within_track_regret),
            },
        );
    }
    let kl_rows: Vec<&[f64]> = trials.iter().map(|t| t.kl.as_slice()).collect();
    let kl_median = (0..trials[0].kl.len())
        .map(|s| median(&kl_rows.iter().map(|r| r[s]).collect::<Vec<_>>()))
        .collect();
    Ok(AggregateRecord {
        trials: trials.len(),
        agents,
        kl: column_stats(&kl_rows),
        kl_median,
    })
}

/// Mean and standard error of the paired difference `f(a) − f(b)` across trials.
pub fn paired_difference(
    trials: &[MetricsRecord],
    a: AgentKind,
    b: AgentKind,
    f: impl Fn(&AgentMetrics) -> f64,
) -> Result<Stat> {
    let diffs = trials
        .iter()
        .map(|t| match (t.agents.get(&a), t.agents.get(&b)) {
            (Some(x), Some(y)) => Ok(f(x) - f(y)),
            _ => Err(Error::ShapeMismatch(format!("agents {a} and {b} must both be enabled"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_stderr(&diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{std_normal, SeedTree};

    fn record(regret: &[f64]) -> MetricsRecord {
        let m = AgentMetrics {
            cum_regret: regret.to_vec(),
            cum_lost: vec![0.0; regret.len()],
            mean_sinr: vec![10.0; regret.len()],
            final_track_sq_error: vec![4.0, 1.0],
            within_track_regret: vec![0.5, 1.0],
        };
        MetricsRecord {
            agents: [(AgentKind::Meta, m)].into_iter().collect(),
            kl: vec![1.0; regret.len()],
        }
    }

    #[test]
    fn single_trial_is_itself() {
        let agg = aggregate(&[record(&[1.0, 3.0])]).unwrap();
        let a = &agg.agents[&AgentKind::Meta];
        assert_eq!(a.cum_regret.iter().map(|s| s.mean).collect::<Vec<_>>(), vec![1.0, 3.0]);
        assert!(a.cum_regret.iter().all(|s| s.stderr == 0.0));
        assert_eq!(a.final_track_rmse[0].mean, 2.0);
    }

    #[test]
    fn symmetric_inputs_average_to_zero() {
        let agg = aggregate(&[record(&[2.5, -1.0]), record(&[-2.5, 1.0])]).unwrap();
        assert!(agg.agents[&AgentKind::Meta].cum_regret.iter().all(|s| s.mean == 0.0));
    }

    #[test]
    fn stderr_of_unit_noise() {
        let mut rng = SeedTree::new(9).stream("clt", &[]);
        let xs: Vec<f64> = (0..100).map(|_| std_normal(&mut rng)).collect();
        let s = mean_stderr(&xs);
        assert!((s.stderr - 0.1).abs() < 0.02, "{}", s.stderr);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(matches!(
            aggregate(&[record(&[1.0]), record(&[1.0, 2.0])]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
