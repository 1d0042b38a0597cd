use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use scene_core::config::Config;
use scene_core::evaluation::{evaluate, Report};
use scene_core::io::{load_truth, read_track_log, write_dataset, Dataset};
use scene_core::map::DigitalMap;
use scene_core::pipeline::{run_dataset, EGO_ESTIMATE_FILE, TRACKS_FILE};
use scene_core::plots::emit_plots;
use scene_core::scenario::{build_intersection, simulate};

/// Map-aided traffic scene understanding from stereo stixels.
#[derive(Debug, Parser)]
#[command(name = "scene", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write it as a dataset directory.
    Generate(Common),
    /// Run the pipeline over a dataset; writes tracks.csv and ego_estimate.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `generate`.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Score a track log against a dataset's ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Track log; defaults to <out>/tracks.csv.
        #[arg(long)]
        tracks: Option<PathBuf>,
    },
    /// Draw the trajectory map and velocity plot for a run.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding tracks.csv and ego_estimate.csv; defaults to <out>.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// generate, run, eval and plot in one go; the dataset goes to <out>/dataset.
    E2e(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with [scenario], [pipeline.*] and [evaluation] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario and particle filter seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// `name=on|off`; may be repeated.
    #[arg(long = "ablation", value_name = "NAME=on|off")]
    ablations: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Render with the 256 x 192 camera.
    #[arg(long)]
    fast: bool,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => {
                Config::load(p).with_context(|| format!("loading config {}", p.display()))?
            }
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        for a in &self.ablations {
            cfg.pipeline.ablation.set(a)?;
        }
        if self.fast {
            cfg.scenario = cfg.scenario.fast();
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn generate(cfg: &Config, out: &Path) -> Result<()> {
    let map = build_intersection(&cfg.scenario)?;
    let n = write_dataset(out, &cfg.scenario, &map, simulate(&cfg.scenario, &map)?)?;
    info!("wrote {n} frames to {}", out.display());
    Ok(())
}

fn run(cfg: &Config, dataset: &Path, out: &Path) -> Result<()> {
    let ds = Dataset::open(dataset)?;
    let output = run_dataset(&cfg.pipeline, &ds).map_err(|e| anyhow::anyhow!(e))?;
    if output.skipped_frames > 0 {
        log::warn!("{} of {} frames skipped", output.skipped_frames, ds.len());
    }
    output.write(out)?;
    info!(
        "{} track records over {} frames",
        output.tracks.len(),
        output.ego.len()
    );
    Ok(())
}

fn eval(cfg: &Config, dataset: &Path, tracks: &Path, out: &Path) -> Result<Report> {
    if !tracks.exists() {
        bail!("track log {} not found", tracks.display());
    }
    let records = read_track_log(tracks)?;
    let truth = load_truth(dataset)?;
    let report = evaluate(&records, &truth, &cfg.evaluation);
    fs::write(out.join("report.txt"), report.to_table())?;
    fs::write(out.join("report.toml"), report.to_toml())?;
    Ok(report)
}

fn plot(dataset: &Path, run_dir: &Path, out: &Path) -> Result<()> {
    let map = DigitalMap::load(&dataset.join("map.toml"))?;
    let files = emit_plots(
        &run_dir.join(TRACKS_FILE),
        &run_dir.join(EGO_ESTIMATE_FILE),
        &map,
        out,
    )?;
    info!(
        "plots: {} {}",
        files.map_overlay.display(),
        files.velocity.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(c) => generate(&c.config()?, c.out_dir()?),
        Command::Run { common, dataset } => run(&common.config()?, &dataset, common.out_dir()?),
        Command::Eval {
            common,
            dataset,
            tracks,
        } => {
            let out = common.out_dir()?;
            let tracks = tracks.unwrap_or_else(|| out.join(TRACKS_FILE));
            let report = eval(&common.config()?, &dataset, &tracks, out)?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Plot {
            common,
            dataset,
            run,
        } => {
            let out = common.out_dir()?;
            plot(&dataset, run.as_deref().unwrap_or(out), out)
        }
        Command::E2e(c) => {
            let cfg = c.config()?;
            let out = c.out_dir()?;
            let dataset = out.join("dataset");
            generate(&cfg, &dataset)?;
            run(&cfg, &dataset, out)?;
            let report = eval(&cfg, &dataset, &out.join(TRACKS_FILE), out)?;
            plot(&dataset, out, out)?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}
