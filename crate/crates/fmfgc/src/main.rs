use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmfgc::artifacts::{emit_artifacts, emit_simulation, write_stage_table};
use fmfgc::manifest::{parse_config, RunManifest};
use fmfgc::validate::Suite;
use fmfgc::{run, Error, Result};

/// Mean field games of controls with fractional diffusion on the torus.
#[derive(Parser)]
#[command(name = "fmfgc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium described by a manifest.
    Solve(Common),
    /// Simulate particles against an equilibrium stored by `solve`.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Directory written by `solve` (defaults to the output directory).
        #[arg(long)]
        equilibrium: Option<PathBuf>,
    },
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Run only these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Run the θ schedule and write the scaling table.
    SweepTheta(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
}

impl Common {
    fn manifest(&self) -> Result<RunManifest> {
        let text = fs::read_to_string(&self.config).map_err(|e| Error::Io {
            path: self.config.clone(),
            source: e,
        })?;
        let mut manifest = parse_config(&text)?;
        if let Some(seed) = self.seed {
            manifest.particles.seed = seed;
        }
        if let Some(threads) = self.threads {
            manifest.run.threads = threads;
        }
        if let Some(theta) = self.theta {
            manifest.outer.theta = theta;
        }
        if let Some(out) = &self.out {
            manifest.run.output = out.display().to_string();
        }
        manifest.validate()?;
        Ok(manifest)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn solve(manifest: &RunManifest) -> Result<()> {
    let dir = Path::new(&manifest.run.output);
    let sol = run::with_threads(manifest.run.threads, || run::solve(manifest))??;
    if !sol.converged {
        eprintln!("warning: outer loop did not converge; writing the best state");
    }
    report(&emit_artifacts(
        &sol,
        &run::model(manifest)?,
        manifest,
        dir,
    )?);
    Ok(())
}

fn simulate(manifest: &RunManifest, equilibrium: Option<&Path>) -> Result<()> {
    let out = Path::new(&manifest.run.output);
    let source = equilibrium.unwrap_or(out);
    let stored = run::load_equilibrium(manifest, source)?;
    let path = run::with_threads(manifest.run.threads, || {
        run::simulate(manifest, &stored.drift, &stored.densities[0])
    })??;
    report(&emit_simulation(
        &path,
        &stored.densities,
        manifest,
        &out.join("particles"),
    )?);
    Ok(())
}

fn sweep(manifest: &RunManifest) -> Result<()> {
    let dir = Path::new(&manifest.run.output);
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    let (_, stages) = run::with_threads(manifest.run.threads, || run::sweep_theta(manifest))??;
    let table = dir.join("theta_scaling.csv");
    write_stage_table(&table, &stages)?;
    let echo = dir.join("manifest.toml");
    fs::write(&echo, manifest.to_toml()).map_err(|e| Error::Io {
        path: echo.clone(),
        source: e,
    })?;
    report(&[table, echo]);
    Ok(())
}

fn validate(out: Option<&Path>, seed: u64, threads: usize, only: &[u8]) -> Result<bool> {
    let outcomes = run::with_threads(threads, || {
        let suite = Suite::new(seed);
        if only.is_empty() {
            suite.run_all()
        } else {
            only.iter().map(|id| suite.run(*id)).collect()
        }
    })?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
        let path = dir.join("validation.json");
        let text = serde_json::to_string_pretty(&outcomes).expect("outcomes serialize");
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    }
    if !failed.is_empty() {
        eprintln!(
            "{}",
            serde_json::json!({ "status": "failed", "criteria": failed })
        );
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => c.manifest().and_then(|m| solve(&m)).map(|_| true),
        Command::Simulate {
            common,
            equilibrium,
        } => common
            .manifest()
            .and_then(|m| simulate(&m, equilibrium.as_deref()))
            .map(|_| true),
        Command::SweepTheta(c) => c.manifest().and_then(|m| sweep(&m)).map(|_| true),
        Command::Validate {
            out,
            seed,
            threads,
            only,
        } => validate(out.as_deref(), *seed, *threads, only),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "status": "error", "kind": e.kind(), "message": e.to_string() })
            );
            ExitCode::from(match e {
                Error::Parse { .. } | Error::Range { .. } => 2,
                _ => 3,
            })
        }
    }
}
