use clap::{Parser, Subcommand};
use metats_core::harness::{
    emit_results, parse_agents, replay_csv, replay_scene, resolve_out_dir, run_experiment, summarize, AgentKind,
    ExperimentConfig,
};
use metats_core::radar::{sample_task, Scene};
use metats_core::rng::SeedTree;
use metats_core::{Error, Gaussian64};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "metats", version, about = "Meta-Thompson Sampling waveform selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo comparison and write CSV/JSON results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $METATS_OUT_DIR, else ./results).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma separated subset of uninformative,meta,oracle.
        #[arg(long)]
        agents: Option<String>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a config and print it with every default filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-simulate one track of a serialized scene and print per-CPI rows as CSV.
    Replay {
        #[arg(long)]
        scene: PathBuf,
        /// Config supplying noise, tracker and target settings (defaults if omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a scene from the configured priors and write it as JSON.
    Scene {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Config),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            config,
            trials,
            seed,
            out,
            agents,
            workers,
        } => {
            let mut cfg = load(Some(&config))?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(list) = agents {
                cfg.agents = parse_agents(&list).map_err(Failure::Config)?;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate().map_err(Failure::Config)?;
            let dir = resolve_out_dir(out.as_deref());
            let start = Instant::now();
            let (_, agg) = run_experiment(&cfg).map_err(Failure::Runtime)?;
            emit_results(&agg, &cfg, &dir).map_err(Failure::Runtime)?;
            let summary = summarize(&agg, &cfg);
            eprintln!(
                "{} trials x {} tracks x {} CPIs in {:.1}s -> {}",
                cfg.trials,
                cfg.tracks,
                cfg.horizon,
                start.elapsed().as_secs_f64(),
                dir.display()
            );
            for (agent, h) in &summary.agents {
                eprintln!(
                    "  {agent:<13} regret {:>9.2}  lost {:>6.2}  late SINR {:>6.2} dB",
                    h.cum_regret, h.cum_lost, h.late_mean_sinr_db
                );
            }
            if let Some(gap) = summary.lost_tracks_gap {
                eprintln!("  lost-track gap ({} - {}): {gap:.2}", AgentKind::Uninformative, AgentKind::Meta);
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load(Some(&config))?;
            println!("{}", cfg.to_json_pretty());
            Ok(())
        }
        Command::Replay { scene, config, seed } => {
            let cfg = load(config.as_deref())?;
            let scene = Scene::load(&scene).map_err(Failure::Config)?;
            let rows = replay_scene(&scene, &cfg, seed).map_err(Failure::Runtime)?;
            print!("{}", replay_csv(&rows));
            Ok(())
        }
        Command::Scene { config, seed, out } => {
            let cfg = load(config.as_deref())?;
            let tree = SeedTree::new(seed);
            let dim = cfg.feature_dim;
            let run = || -> metats_core::Result<()> {
                let p_star = Gaussian64::isotropic(vec![0.0; dim], cfg.sigma_q2 + cfg.sigma02)?;
                let scene = sample_task(&p_star, &cfg.scene_params(), &mut tree.stream("scene", &[]))?;
                scene.save(&out)
            };
            run().map_err(Failure::Runtime)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
