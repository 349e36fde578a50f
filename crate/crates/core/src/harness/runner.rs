//! Seeded multi-run execution: one agent per seed in parallel, per-episode
//! CSVs, trailing-window aggregates and the alpha grid search.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{AdaptiveController, AdaptiveMode, EditRecord};
use crate::agent::{run_episode, EpisodeRecord};
use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::harness::config::{BasisScheme, ExperimentConfig};

/// Everything one seed produced.
#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub edits: Vec<EditRecord>,
    pub basis: BasisSet,
    /// Per-episode relevance rows `(episode, id, samples, rho, obs, criterion)`
    /// when the config asks for them.
    pub relevance_rows: Vec<(u64, u64, u64, f64, f64, f64)>,
}

impl SeedOutcome {
    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.episode_return).collect()
    }

    /// Mean return over the final `window` episodes.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        let returns = self.returns();
        let n = returns.len();
        let w = window.min(n);
        returns[n - w..].iter().sum::<f64>() / w as f64
    }
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
    /// Per-episode cross-seed mean and standard deviation of the
    /// trailing-window average return.
    pub aggregate: Vec<(u64, f64, f64)>,
}

impl ExperimentOutput {
    pub fn final_window_means(&self, window: usize) -> Vec<f64> {
        self.seeds.iter().map(|s| s.final_window_mean(window)).collect()
    }
}

/// Builds the starting basis and controller mode for a scheme.
pub fn build_basis(cfg: &ExperimentConfig) -> Result<(BasisSet, AdaptiveMode)> {
    let d = cfg.env.dim();
    let n_actions = 3;
    match cfg.scheme {
        BasisScheme::BsplineCoupled => {
            Ok((BasisSet::fixed_coupled(d, cfg.order, cfg.scale, n_actions)?, AdaptiveMode::Fixed))
        }
        BasisScheme::BsplineDecoupled => {
            Ok((BasisSet::decoupled(d, cfg.order, cfg.scale, n_actions)?, AdaptiveMode::Fixed))
        }
        BasisScheme::Fourier => {
            Ok((BasisSet::fourier(d, cfg.fourier_order, n_actions)?, AdaptiveMode::Fixed))
        }
        BasisScheme::Awr => {
            Ok((BasisSet::fixed_coupled(d, cfg.order, cfg.scale, n_actions)?, AdaptiveMode::Awr))
        }
        BasisScheme::Ibfdd => {
            Ok((BasisSet::decoupled(d, cfg.order, cfg.scale, n_actions)?, AdaptiveMode::Ibfdd))
        }
        BasisScheme::Mawb => {
            Ok((BasisSet::decoupled(d, cfg.order, cfg.scale, n_actions)?, AdaptiveMode::Mawb))
        }
    }
}

/// Runs every episode of one seed. Fully deterministic given (config, seed).
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let cfg = cfg.resolved();
    let (mut basis, mode) = build_basis(&cfg)?;
    let mut controller = AdaptiveController::new(mode, cfg.adaptive_config(), &basis)?;
    let agent_cfg = cfg.agent_config();
    let mut env = cfg.env.build(cfg.acrobot_dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_cap = cfg.step_cap.expect("resolved");

    let mut records = Vec::with_capacity(cfg.episodes as usize);
    let mut edits = Vec::new();
    let mut relevance_rows = Vec::new();
    let mut global_step = 0u64;
    for episode in 0..cfg.episodes {
        let rec = run_episode(
            env.as_mut(),
            &mut basis,
            &mut controller,
            &agent_cfg,
            &mut rng,
            step_cap,
            episode,
            &mut global_step,
            &mut edits,
        )?;
        records.push(rec);
        if cfg.dump_relevance {
            for (id, t, rho, obs, criterion) in controller.stats_rows() {
                relevance_rows.push((episode, id.0, t, rho, obs, criterion));
            }
        }
    }
    Ok(SeedOutcome { seed, records, edits, basis, relevance_rows })
}

/// Trailing-window means of one seed's return sequence.
fn trailing_means(returns: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len());
    let mut acc = 0.0;
    for i in 0..returns.len() {
        acc += returns[i];
        if i >= window {
            acc -= returns[i - window];
        }
        let w = window.min(i + 1);
        out.push(acc / w as f64);
    }
    out
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Cross-seed aggregate of the trailing-window average return, one row per
/// episode: `(episode, mean, sample std)`.
pub fn aggregate_curves(seeds: &[SeedOutcome], window: usize) -> Vec<(u64, f64, f64)> {
    let episodes = seeds.iter().map(|s| s.records.len()).min().unwrap_or(0);
    let smoothed: Vec<Vec<f64>> =
        seeds.iter().map(|s| trailing_means(&s.returns(), window)).collect();
    (0..episodes)
        .map(|e| {
            let at_e: Vec<f64> = smoothed.iter().map(|row| row[e]).collect();
            let (mean, std) = mean_and_std(&at_e);
            (e as u64, mean, std)
        })
        .collect()
}

fn header_line(cfg: &ExperimentConfig, seed: Option<u64>) -> String {
    let seed_field = seed.map_or(String::new(), |s| format!(",\"seed\":{s}"));
    format!("# {{\"hash\":\"{}\"{},\"config\":{}}}", cfg.hash(), seed_field, cfg.canonical_json())
}

fn write_seed_csv(path: &Path, cfg: &ExperimentConfig, outcome: &SeedOutcome) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header_line(cfg, Some(outcome.seed)))?;
    writeln!(f, "seed,episode,return,steps,basis_size,cumulative_edits")?;
    let mut cumulative = 0usize;
    for (e, r) in outcome.records.iter().enumerate() {
        cumulative += r.edits;
        writeln!(
            f,
            "{},{},{},{},{},{}",
            outcome.seed, e, r.episode_return, r.steps, r.basis_size, cumulative
        )?;
    }
    Ok(())
}

fn write_edit_csv(path: &Path, cfg: &ExperimentConfig, outcome: &SeedOutcome) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header_line(cfg, Some(outcome.seed)))?;
    writeln!(f, "step,episode,kind,detail,value,basis_size_after")?;
    for e in &outcome.edits {
        writeln!(f, "{}", e.csv_row())?;
    }
    Ok(())
}

fn write_relevance_csv(path: &Path, cfg: &ExperimentConfig, outcome: &SeedOutcome) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header_line(cfg, Some(outcome.seed)))?;
    writeln!(f, "episode,id,samples,rho,obs,criterion")?;
    for &(episode, id, t, rho, obs, criterion) in &outcome.relevance_rows {
        writeln!(f, "{episode},{id},{t},{rho},{obs},{criterion}")?;
    }
    Ok(())
}

fn write_aggregate_csv(path: &Path, cfg: &ExperimentConfig, rows: &[(u64, f64, f64)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", header_line(cfg, None))?;
    writeln!(f, "episode,trail_mean,trail_std")?;
    for &(e, mean, std) in rows {
        writeln!(f, "{e},{mean},{std}")?;
    }
    Ok(())
}

/// Runs the full experiment: one agent per seed (in parallel), then writes
/// per-seed episode CSVs, edit logs for adaptive schemes, final bases, and
/// the cross-seed aggregate curve.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let dir = cfg.run_dir(out_root);
    fs::create_dir_all(&dir)?;

    let seeds: Result<Vec<SeedOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let cfg_ref = &cfg;
                scope.spawn(move || run_single(cfg_ref, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    });
    let seeds = seeds?;

    let aggregate = aggregate_curves(&seeds, cfg.smoothing_window);

    fs::write(dir.join("config.json"), format!("{}\n", cfg.canonical_json()))?;
    for outcome in &seeds {
        write_seed_csv(&dir.join(format!("seed-{}.csv", outcome.seed)), &cfg, outcome)?;
        if cfg.scheme.is_adaptive() {
            write_edit_csv(&dir.join(format!("edits-seed-{}.csv", outcome.seed)), &cfg, outcome)?;
        }
        if cfg.dump_relevance {
            write_relevance_csv(
                &dir.join(format!("relevance-seed-{}.csv", outcome.seed)),
                &cfg,
                outcome,
            )?;
        }
        outcome.basis.save_to_path(dir.join(format!("basis-seed-{}.txt", outcome.seed)))?;
    }
    write_aggregate_csv(&dir.join("aggregate.csv"), &cfg, &aggregate)?;

    Ok(ExperimentOutput { dir, seeds, aggregate })
}

#[derive(Debug)]
pub struct GridSearchOutcome {
    pub best_alpha: f64,
    /// `(alpha, score)` per candidate, in candidate order; the score is the
    /// cross-seed mean of the final selection-window mean return.
    pub table: Vec<(f64, f64)>,
    /// `(alpha, seed, final_window_mean)` rows.
    pub per_seed: Vec<(f64, u64, f64)>,
    pub dir: PathBuf,
}

/// Runs every alpha candidate over all seeds and selects the one maximizing
/// the mean final-window return; ties go to the smaller alpha.
pub fn grid_search_alpha(
    cfg: &ExperimentConfig,
    alphas: &[f64],
    out_root: &Path,
) -> Result<GridSearchOutcome> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("grid search needs at least one alpha".into()));
    }
    let cfg = cfg.resolved();
    let mut table = Vec::new();
    let mut per_seed = Vec::new();
    for &alpha in alphas {
        let candidate = ExperimentConfig { alpha, ..cfg.clone() };
        let output = run_experiment(&candidate, out_root)?;
        let finals = output.final_window_means(cfg.selection_window);
        for (outcome, mean) in output.seeds.iter().zip(&finals) {
            per_seed.push((alpha, outcome.seed, *mean));
        }
        let (score, _) = mean_and_std(&finals);
        table.push((alpha, score));
    }
    let mut sorted: Vec<(f64, f64)> = table.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = sorted[0];
    for &(alpha, score) in &sorted[1..] {
        if score > best.1 {
            best = (alpha, score);
        }
    }

    let dir = out_root.join(format!("{}-grid-{}", cfg.name, cfg.short_hash()));
    fs::create_dir_all(&dir)?;
    {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join("grid.csv"))?);
        writeln!(f, "{}", header_line(&cfg, None))?;
        writeln!(f, "alpha,score,selected")?;
        for &(alpha, score) in &table {
            writeln!(f, "{},{},{}", alpha, score, (alpha == best.0) as u8)?;
        }
    }
    {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join("grid-seeds.csv"))?);
        writeln!(f, "{}", header_line(&cfg, None))?;
        writeln!(f, "alpha,seed,final_window_mean")?;
        for &(alpha, seed, mean) in &per_seed {
            writeln!(f, "{alpha},{seed},{mean}")?;
        }
    }

    Ok(GridSearchOutcome { best_alpha: best.0, table, per_seed, dir })
}
