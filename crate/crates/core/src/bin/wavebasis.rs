//! Command-line front end: `run` executes a configured experiment,
//! `grid-search` sweeps the learning rate, `export-vf` writes a value
//! function grid from a saved basis, `eval-frozen` scores a saved basis
//! under its greedy policy.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavebasis::basis::BasisSet;
use wavebasis::envs::EnvKind;
use wavebasis::harness::{
    evaluate_frozen, export_value_function, grid_search_alpha, resolve_out_root, run_experiment,
    write_value_function_csv, BasisScheme, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "wavebasis", version, about = "Wavelet-basis value function approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the experiment configuration; anything set here overrides
/// the config file.
#[derive(Args, Debug, Default)]
struct ConfigOverrides {
    /// Configuration file (TOML) supplying defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Environment: mountain-car or acrobot.
    #[arg(long)]
    env: Option<String>,
    /// Basis scheme: bspline-coupled, bspline-decoupled, fourier, awr, ibfdd, mawb.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    fourier_order: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon_greedy: Option<f64>,
    #[arg(long)]
    replacing_traces: Option<bool>,
    #[arg(long)]
    fourier_alpha_scaling: Option<bool>,
    /// Split tolerance; accepts `inf`.
    #[arg(long)]
    tau_split: Option<f64>,
    /// Combine tolerance; accepts `inf`.
    #[arg(long)]
    tau_combine: Option<f64>,
    #[arg(long)]
    relevance_decay: Option<f64>,
    #[arg(long)]
    check_interval: Option<u64>,
    #[arg(long)]
    max_scale: Option<u32>,
    #[arg(long)]
    max_features: Option<usize>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    step_cap: Option<u64>,
    /// Seeds as a comma list (`0,1,2`) or a range (`0..10`).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    smoothing_window: Option<usize>,
    #[arg(long)]
    selection_window: Option<usize>,
    #[arg(long)]
    acrobot_dt: Option<f64>,
    #[arg(long)]
    dump_relevance: Option<bool>,
    /// Output root (also settable via the WAVEBASIS_OUT env var).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment over all configured seeds.
    Run(ConfigOverrides),
    /// Run the experiment once per alpha candidate and select the best.
    GridSearch {
        #[command(flatten)]
        overrides: ConfigOverrides,
        /// Comma-separated alpha candidates.
        #[arg(long, default_value = "0.0005,0.001,0.005,0.01,0.05,0.1")]
        alphas: String,
    },
    /// Export a value-function grid from a saved basis file.
    ExportVf {
        /// Basis file written by a run (basis-seed-N.txt).
        #[arg(long)]
        basis: PathBuf,
        /// Environment the basis was trained on.
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Normalized values fixing the non-grid dimensions (comma list).
        #[arg(long)]
        slice: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved basis under its greedy policy, without learning.
    EvalFrozen {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: String,
        #[arg(long)]
        step_cap: Option<u64>,
        #[arg(long, default_value_t = 0.2)]
        acrobot_dt: f64,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        if lo >= hi {
            return Err(format!("empty seed range {text:?}"));
        }
        return Ok((lo..hi).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad seed {t:?}")))
        .collect()
}

fn parse_float_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect()
}

fn load_config(ov: &ConfigOverrides) -> Result<ExperimentConfig, String> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::from_toml_path(path)
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &ov.name {
        cfg.name = v.clone();
    }
    if let Some(v) = &ov.env {
        cfg.env = EnvKind::parse(v).map_err(|e| e.to_string())?;
    }
    if let Some(v) = &ov.scheme {
        cfg.scheme = BasisScheme::parse(v).map_err(|e| e.to_string())?;
    }
    if let Some(v) = ov.order {
        cfg.order = v;
    }
    if let Some(v) = ov.scale {
        cfg.scale = v;
    }
    if let Some(v) = ov.fourier_order {
        cfg.fourier_order = v;
    }
    if let Some(v) = ov.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = ov.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = ov.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = ov.epsilon_greedy {
        cfg.epsilon_greedy = v;
    }
    if let Some(v) = ov.replacing_traces {
        cfg.replacing_traces = v;
    }
    if let Some(v) = ov.fourier_alpha_scaling {
        cfg.fourier_alpha_scaling = v;
    }
    if let Some(v) = ov.tau_split {
        cfg.tau_split = v;
    }
    if let Some(v) = ov.tau_combine {
        cfg.tau_combine = v;
    }
    if let Some(v) = ov.relevance_decay {
        cfg.relevance_decay = v;
    }
    if let Some(v) = ov.check_interval {
        cfg.check_interval = v;
    }
    if let Some(v) = ov.max_scale {
        cfg.max_scale = v;
    }
    if let Some(v) = ov.max_features {
        cfg.max_features = v;
    }
    if let Some(v) = ov.episodes {
        cfg.episodes = v;
    }
    if let Some(v) = ov.step_cap {
        cfg.step_cap = Some(v);
    }
    if let Some(v) = &ov.seeds {
        cfg.seeds = parse_seeds(v)?;
    }
    if let Some(v) = ov.smoothing_window {
        cfg.smoothing_window = v;
    }
    if let Some(v) = ov.selection_window {
        cfg.selection_window = v;
    }
    if let Some(v) = ov.acrobot_dt {
        cfg.acrobot_dt = v;
    }
    if let Some(v) = ov.dump_relevance {
        cfg.dump_relevance = v;
    }
    Ok(cfg)
}

fn cmd_run(ov: ConfigOverrides) -> Result<(), String> {
    let cfg = load_config(&ov)?;
    cfg.validate().map_err(|e| e.to_string())?;
    let root = resolve_out_root(ov.out.as_deref(), &cfg);
    let out = run_experiment(&cfg, &root).map_err(|e| e.to_string())?;
    let finals = out.final_window_means(cfg.selection_window);
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    println!("wrote {}", out.dir.display());
    println!(
        "final-{}-episode mean return across {} seeds: {:.2}",
        cfg.selection_window,
        finals.len(),
        mean
    );
    for s in &out.seeds {
        println!(
            "  seed {}: final mean {:.2}, basis size {}",
            s.seed,
            s.final_window_mean(cfg.selection_window),
            s.basis.len()
        );
    }
    Ok(())
}

fn cmd_grid_search(ov: ConfigOverrides, alphas: String) -> Result<(), String> {
    let cfg = load_config(&ov)?;
    cfg.validate().map_err(|e| e.to_string())?;
    let alphas = parse_float_list(&alphas)?;
    let root = resolve_out_root(ov.out.as_deref(), &cfg);
    let out = grid_search_alpha(&cfg, &alphas, &root).map_err(|e| e.to_string())?;
    println!("wrote {}", out.dir.display());
    for (alpha, score) in &out.table {
        let marker = if *alpha == out.best_alpha { "  <- selected" } else { "" };
        println!("  alpha {alpha}: score {score:.2}{marker}");
    }
    println!("best alpha: {}", out.best_alpha);
    Ok(())
}

fn cmd_export_vf(
    basis: PathBuf,
    env: String,
    resolution: usize,
    slice: Option<String>,
    out: PathBuf,
) -> Result<(), String> {
    let env = EnvKind::parse(&env).map_err(|e| e.to_string())?;
    let basis = BasisSet::load_from_path(&basis).map_err(|e| e.to_string())?;
    let slice_values = match &slice {
        Some(text) => Some(parse_float_list(text)?),
        None => None,
    };
    let grid = export_value_function(&basis, env, resolution, slice_values.as_deref())
        .map_err(|e| e.to_string())?;
    let metadata = format!(
        "{{\"env\":\"{env}\",\"resolution\":{resolution},\"functions\":{},\"value\":\"-max_a Q\"}}",
        basis.len()
    );
    write_value_function_csv(&out, &grid, &metadata).map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval_frozen(
    basis: PathBuf,
    env: String,
    episodes: u64,
    seeds: String,
    step_cap: Option<u64>,
    acrobot_dt: f64,
) -> Result<(), String> {
    let env = EnvKind::parse(&env).map_err(|e| e.to_string())?;
    let basis = BasisSet::load_from_path(&basis).map_err(|e| e.to_string())?;
    let seeds = parse_seeds(&seeds)?;
    let cap = step_cap.unwrap_or(match env {
        EnvKind::MountainCar => 2000,
        EnvKind::Acrobot => 1000,
    });
    let eval = evaluate_frozen(&basis, env, episodes, &seeds, cap, acrobot_dt)
        .map_err(|e| e.to_string())?;
    for (seed, mean) in &eval.per_seed_mean {
        println!("  seed {seed}: mean return {mean:.2}");
    }
    println!("mean {:.2} (std {:.2}) over {} runs of {} episodes", eval.mean, eval.std, seeds.len(), episodes);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(ov) => cmd_run(ov),
        Command::GridSearch { overrides, alphas } => cmd_grid_search(overrides, alphas),
        Command::ExportVf { basis, env, resolution, slice, out } => {
            cmd_export_vf(basis, env, resolution, slice, out)
        }
        Command::EvalFrozen { basis, env, episodes, seeds, step_cap, acrobot_dt } => {
            cmd_eval_frozen(basis, env, episodes, seeds, step_cap, acrobot_dt)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
