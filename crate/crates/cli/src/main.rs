//! `fdi`: staged reservoir model-space fault detection and isolation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fdi_core::modelspace::DistanceMethod;
use fdi_core::pipeline::{load_config, Pipeline, RunConfig, MANIFEST_FILE};
use fdi_core::signals::SystemKind;
use fdi_core::ErrorKind;

#[derive(Parser)]
#[command(
    name = "fdi",
    version,
    about = "Fault detection and isolation in reservoir model space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also run the signal-space baseline and write comparison.csv.
        #[arg(long)]
        baseline: bool,
    },
    /// Simulate the scenario and write series.csv.
    Generate(Common),
    /// Fit one readout per window and write models.json.
    Fit(Common),
    /// Pairwise model-space distances, written to dist.csv.
    Distances {
        #[command(flatten)]
        common: Common,
        /// closed, sampled, symmetric_sampled or gmm.
        #[arg(long)]
        method: Option<DistanceMethod>,
    },
    /// Select sigma and nu, then run the incremental fault library.
    Detect(Common),
    /// Detection and isolation reports from events.jsonl.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline: bool,
    },
    /// Classical MDS coordinates of dist.csv.
    Mds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dims: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Window 100 and stride 5.
    #[arg(long)]
    fast: bool,
    /// narma, vanderpol or threetank; builds the default scenario for that system.
    #[arg(long)]
    system: Option<SystemKind>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    /// Explicit config, else the fresh defaults asked for, else the manifest in the output directory.
    fn resolve(&self) -> Result<RunConfig> {
        let existing = self.out.join(MANIFEST_FILE);
        let mut config = if let Some(path) = &self.config {
            load_config(path)?
        } else if self.system.is_none() && self.seed.is_none() && existing.exists() {
            log::info!("using config from {}", existing.display());
            load_config(&existing)?
        } else {
            RunConfig::for_system(
                self.system.unwrap_or(SystemKind::Narma),
                self.seed.unwrap_or(0),
            )
        };
        if self.config.is_some() {
            if let Some(system) = self.system {
                config.scenario.system = system;
            }
        }
        if let Some(seed) = self.seed {
            config.scenario.seed = seed;
        }
        if self.fast {
            config = config.fast();
        }
        Ok(config)
    }

    fn pipeline(&self, edit: impl FnOnce(&mut RunConfig)) -> Result<Pipeline> {
        let mut config = self.resolve()?;
        edit(&mut config);
        Ok(Pipeline::new(config, &self.out)?)
    }
}

fn run_stage(p: &mut Pipeline, stage: impl FnOnce(&mut Pipeline) -> Result<()>) -> Result<()> {
    let result = stage(p).and_then(|()| {
        p.write_manifest(None)?;
        Ok(())
    });
    if result.is_err() {
        p.written.remove_all();
    }
    result
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, baseline } => {
            let mut p = common.pipeline(|c| c.baseline.enabled |= baseline)?;
            let s = p.run_all()?;
            println!(
                "{} windows, {} classes, FDR {:.4}, FAR {:.4}, precision {:.4}, recall {:.4}",
                s.n_points,
                s.library_size,
                s.detection.report.fdr,
                s.detection.report.far,
                s.isolation.precision,
                s.isolation.recall
            );
            if let Some(b) = &s.detection.baseline {
                println!(
                    "signal baseline: FDR {:.4}, FAR {:.4}; best FDR {:.4} at FAR {:.4}",
                    b.report.fdr, b.report.far, b.best_fdr_at_budget, b.far_at_budget
                );
            }
            println!("config hash {}", s.manifest.config_hash);
        }
        Command::Generate(common) => {
            let mut p = common.pipeline(|_| ())?;
            run_stage(&mut p, |p| {
                let s = p.generate()?;
                println!("{} steps, {} regimes", s.len(), s.segments().len());
                Ok(())
            })?;
        }
        Command::Fit(common) => {
            let mut p = common.pipeline(|_| ())?;
            run_stage(&mut p, |p| {
                let series = p.load_series()?;
                let archive = p.fit(&series)?;
                println!("{} model points", archive.points.len());
                Ok(())
            })?;
        }
        Command::Distances { common, method } => {
            let mut p = common.pipeline(|c| {
                if let Some(m) = method {
                    c.distance = m;
                }
            })?;
            run_stage(&mut p, |p| {
                let points = p.load_models()?;
                let dm = p.distances(&points)?;
                println!("{0}x{0} {1} distance matrix", dm.len(), p.config.distance);
                Ok(())
            })?;
        }
        Command::Detect(common) => {
            let mut p = common.pipeline(|_| ())?;
            run_stage(&mut p, |p| {
                let points = p.load_models()?;
                let (snapshot, events) = p.detect(&points)?;
                println!(
                    "{} events, {} classes, sigma {}, nu {}",
                    events.len(),
                    snapshot.library.len(),
                    snapshot.library.params.sigma,
                    snapshot.library.params.nu
                );
                Ok(())
            })?;
        }
        Command::Evaluate { common, baseline } => {
            let mut p = common.pipeline(|c| c.baseline.enabled |= baseline)?;
            run_stage(&mut p, |p| {
                let events = p.load_events()?;
                let series = p.load_series()?;
                let (d, i) = p.evaluate(&series, &events)?;
                println!(
                    "FDR {:.4}, FAR {:.4}, {} classes, precision {:.4}, recall {:.4}, specificity {:.4}",
                    d.report.fdr, d.report.far, i.discovered_classes, i.precision, i.recall, i.specificity
                );
                Ok(())
            })?;
        }
        Command::Mds { common, dims } => {
            let mut p = common.pipeline(|c| {
                if let Some(d) = dims {
                    c.mds_dims = d;
                }
            })?;
            run_stage(&mut p, |p| {
                let dm = p.load_distances()?;
                let coords = p.mds(&dm)?;
                println!("{} points in {} dimensions", coords.nrows(), coords.ncols());
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<fdi_core::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Numerical) => 2,
        Some(ErrorKind::MissingArtifact) => 3,
        _ => 1,
    }
}

fn out_dir_ok(path: &Path) -> Result<()> {
    if path.exists() && !path.is_dir() {
        anyhow::bail!(fdi_core::Error::InvalidParameter(format!(
            "{} exists and is not a directory",
            path.display()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Run { common, .. }
        | Command::Distances { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Mds { common, .. } => &common.out,
        Command::Generate(c) | Command::Fit(c) | Command::Detect(c) => &c.out,
    };
    let result = out_dir_ok(out)
        .context("bad output directory")
        .and_then(|()| execute(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
