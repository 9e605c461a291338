//! Configuration, orchestration and persistence for the `sbo-lab` experiments.

pub mod artifact;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::{CheckpointError, CliError};

#[derive(Debug, Clone, Parser)]
#[command(name = "sbo-lab", version, about = "Schrödinger–Benjamin-Ono simulation and Gibbs-measure experiments")]
pub struct Args {
    pub command: Command,
    /// TOML config file.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Re-check the artifacts already in the output directory instead of running.
    #[arg(long)]
    pub verify: bool,
}

impl Args {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config).map_err(|e| match e {
            CliError::Io { path, source } => CliError::Config(format!("{}: {source}", path.display())),
            other => other,
        })?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.run.out = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.run.workers = Some(w);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs `command` on a pool of `cfg.run.workers` threads.
pub fn run_with_workers(command: Command, cfg: &ExperimentConfig) -> Result<Vec<artifact::ArtifactRecord>, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.run.workers {
        b = b.num_threads(w);
    }
    let pool = b
        .build()
        .map_err(|e| CliError::Verify(format!("thread pool: {e}")))?;
    pool.install(|| run(command, cfg, &cfg.run.out))
}

/// Checks every artifact listed in the manifest of `dir` against its
/// embedded hashes and against the config `cfg` would embed.
pub fn verify(dir: &Path, cfg: &ExperimentConfig) -> Result<usize, CliError> {
    let manifest = artifact::manifest_path(dir);
    let m = artifact::verify_text(&manifest)?;
    let echo = cfg.echo();
    if m.config != echo {
        return Err(CliError::Verify(format!(
            "{}: generated by a different config",
            manifest.display()
        )));
    }
    let body = String::from_utf8(m.body).map_err(|_| CliError::Verify("manifest is not UTF-8".into()))?;
    let mut checked = 0;
    for line in body.lines() {
        let rec: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CliError::Verify(format!("manifest entry: {e}")))?;
        let file = rec["file"].as_str().unwrap_or_default();
        let want = rec["file_hash"].as_str().unwrap_or_default();
        let path = dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if artifact::hex(artifact::fnv1a(&bytes)) != want {
            return Err(CliError::Verify(format!("{file}: file hash differs from manifest")));
        }
        if file.ends_with(".ckpt") {
            let c = checkpoint::decode(&bytes).map_err(|source| CliError::Checkpoint { path: path.clone(), source })?;
            if c.config != echo {
                return Err(CliError::Verify(format!("{file}: generated by a different config")));
            }
        } else {
            let e = artifact::verify_text(&path)?;
            if e.config != echo {
                return Err(CliError::Verify(format!("{file}: generated by a different config")));
            }
        }
        checked += 1;
    }
    Ok(checked)
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn main_with(args: &Args) -> i32 {
    let result = args.resolve().and_then(|cfg| {
        if args.verify {
            verify(&cfg.run.out, &cfg).map(|n| {
                println!("verified {n} artifacts in {}", cfg.run.out.display());
            })
        } else {
            run_with_workers(args.command, &cfg).map(|recs| {
                for r in &recs {
                    println!("{}  {}", r.file_hash, cfg.run.out.join(&r.file).display());
                }
            })
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sbo-lab: {e}");
            e.exit_code()
        }
    }
}
