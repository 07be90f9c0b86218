use super::config::{AgentKind, ExperimentConfig};
use super::metrics::{AggregateRecord, Stat};
use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "METATS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

/// `--out` wins, then [`OUT_DIR_ENV`], then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

/// C `printf("%.6g")`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // rounding to 6 significant digits fixes the exponent
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn per_agent_csv(
    header: &str,
    agg: &AggregateRecord,
    pick: impl Fn(&super::metrics::AgentSummary) -> &[Stat],
) -> String {
    let mut out = format!("{header}\n");
    let len = agg.agents.values().next().map_or(0, |a| pick(a).len());
    for i in 0..len {
        for (agent, summary) in &agg.agents {
            let s = pick(summary)[i];
            let _ = writeln!(out, "{},{agent},{},{}", i + 1, fmt_g(s.mean), fmt_g(s.stderr));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct AgentHeadline {
    pub cum_regret: f64,
    pub cum_regret_stderr: f64,
    pub cum_lost: f64,
    pub cum_lost_stderr: f64,
    /// Mean SINR over the last (up to) 10 tracks.
    pub late_mean_sinr_db: f64,
    pub final_track_rmse_m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SublinearMonitor {
    pub horizon: usize,
    pub quarter: usize,
    /// `CumReg(n) / CumReg(n/4)` for the uninformative agent.
    pub ratio: f64,
    /// `4·√4`: the ratio a `√n` bound allows with room for the unknown constant.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub tracks: usize,
    pub horizon: usize,
    pub seed: u64,
    pub agents: std::collections::BTreeMap<AgentKind, AgentHeadline>,
    /// Uninformative minus meta mean cumulative lost tracks at the final track.
    pub lost_tracks_gap: Option<f64>,
    pub kl_median_first: Option<f64>,
    pub kl_median_last: Option<f64>,
    pub kl_median_at_10: Option<f64>,
    pub sublinear_regret: Option<SublinearMonitor>,
}

pub fn summarize(agg: &AggregateRecord, cfg: &ExperimentConfig) -> Summary {
    let agents = agg
        .agents
        .iter()
        .map(|(&a, s)| {
            let last = |v: &[Stat]| v.last().copied().unwrap_or_default();
            let tail = &s.mean_sinr[s.mean_sinr.len().saturating_sub(10)..];
            let late = tail.iter().map(|x| x.mean).sum::<f64>() / tail.len().max(1) as f64;
            let cr = last(&s.cum_regret);
            let cl = last(&s.cum_lost);
            let rmse = s.final_track_rmse.last().map_or(f64::NAN, |x| x.mean);
            (
                a,
                AgentHeadline {
                    cum_regret: cr.mean,
                    cum_regret_stderr: cr.stderr,
                    cum_lost: cl.mean,
                    cum_lost_stderr: cl.stderr,
                    late_mean_sinr_db: late,
                    final_track_rmse_m: rmse,
                },
            )
        })
        .collect::<std::collections::BTreeMap<_, _>>();
    let lost_tracks_gap = match (
        agents.get(&AgentKind::Uninformative),
        agents.get(&AgentKind::Meta),
    ) {
        (Some(u), Some(m)) => Some(u.cum_lost - m.cum_lost),
        _ => None,
    };
    let sublinear_regret = agg.agents.get(&AgentKind::Uninformative).and_then(|u| {
        let n = u.within_track_regret.len();
        let q = n / 4;
        if q == 0 {
            return None;
        }
        let ratio = u.within_track_regret[n - 1].mean / u.within_track_regret[q - 1].mean;
        let bound = 4.0 * ((n as f64) / (q as f64)).sqrt();
        Some(SublinearMonitor {
            horizon: n,
            quarter: q,
            ratio,
            bound,
            within_bound: ratio < bound,
        })
    });
    Summary {
        trials: agg.trials,
        tracks: cfg.tracks,
        horizon: cfg.horizon,
        seed: cfg.seed,
        agents,
        lost_tracks_gap,
        kl_median_first: agg.kl_median.first().copied(),
        kl_median_last: agg.kl_median.last().copied(),
        kl_median_at_10: agg.kl_median.get(9).copied(),
        sublinear_regret,
    }
}

/// Writes every CSV plus `config.json` and `summary.json` into `dir`, creating
/// it if needed. Returns the written paths.
pub fn emit_results(agg: &AggregateRecord, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    written.push(write_file(
        dir,
        "lost_tracks.csv",
        &per_agent_csv("track,agent,mean_cum_lost,stderr", agg, |a| &a.cum_lost),
    )?);

    let mut kl = String::from("track,kl_mean,kl_stderr\n");
    for (s, st) in agg.kl.iter().enumerate() {
        let _ = writeln!(kl, "{},{},{}", s + 1, fmt_g(st.mean), fmt_g(st.stderr));
    }
    written.push(write_file(dir, "kl.csv", &kl)?);

    written.push(write_file(
        dir,
        "regret.csv",
        &per_agent_csv("track,agent,cum_regret_mean,stderr", agg, |a| &a.cum_regret),
    )?);
    written.push(write_file(
        dir,
        "sinr.csv",
        &per_agent_csv("track,agent,mean_sinr_db,stderr", agg, |a| &a.mean_sinr),
    )?);
    written.push(write_file(
        dir,
        "rmse_final_track.csv",
        &per_agent_csv("cpi,agent,rmse_m,stderr", agg, |a| &a.final_track_rmse),
    )?);

    let mut config = cfg.to_json_pretty();
    config.push('\n');
    written.push(write_file(dir, "config.json", &config)?);
    let mut summary = serde_json::to_string_pretty(&summarize(agg, cfg)).expect("summary serialises");
    summary.push('\n');
    written.push(write_file(dir, "summary.json", &summary)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printf_g_formatting() {
        for (x, want) in [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (123456.0, "123456"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (3.14159265, "3.14159"),
            (999999.5, "1e+06"),
            (0.1 + 0.2, "0.3"),
            (1e100, "1e+100"),
            (f64::NAN, "nan"),
        ] {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn out_dir_flag_wins() {
        assert_eq!(resolve_out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }
}
