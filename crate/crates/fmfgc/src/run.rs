//! Turns a manifest into solver inputs and runs the solve, simulate and
//! θ-sweep commands.

use std::f64::consts::PI;
use std::path::Path;

use fmfgc_core::equilibrium::{
    solve_equilibrium, Damping, EquilibriumSolution, LoopConfig, MfgProblem, StageSummary,
};
use fmfgc_core::levy::{simulate_sde, ParticlePath, SimConfig};
use fmfgc_core::model::{Kernel, QuadraticExample};
use fmfgc_core::mu::MuSolveConfig;
use fmfgc_core::{GridMeasure, MeasurePath, ScalarField, SpectralGrid, TimeGrid, VectorField};

use crate::error::{Error, Result};
use crate::format::read_field;
use crate::manifest::{DampingKind, RunManifest};

pub fn spectral_grid(manifest: &RunManifest) -> Result<SpectralGrid> {
    let g = &manifest.grid;
    Ok(SpectralGrid::new(g.dim, g.n, g.order)?)
}

pub fn time_grid(manifest: &RunManifest) -> Result<TimeGrid> {
    Ok(TimeGrid::new(manifest.grid.horizon, manifest.grid.steps)?)
}

pub fn model(manifest: &RunManifest) -> Result<QuadraticExample> {
    let m = &manifest.model;
    let kernel = Kernel {
        amplitude: m.kernel_amplitude,
        decay: m.kernel_decay,
    };
    Ok(QuadraticExample::new(m.coupling_beta, kernel, m.c0)?)
}

pub fn initial_density(manifest: &RunManifest, grid: &SpectralGrid) -> Result<GridMeasure> {
    let kappa = manifest.initial.concentration;
    let d = grid.dim();
    let values = (0..grid.len())
        .map(|node| {
            let x = grid.position(node);
            let bumps: f64 = x[..d].iter().map(|xi| (2.0 * PI * xi).cos() - 1.0).sum();
            (kappa * bumps).exp()
        })
        .collect();
    Ok(GridMeasure::normalized(grid, values)?)
}

pub fn terminal_cost(manifest: &RunManifest, grid: &SpectralGrid) -> ScalarField {
    let a = manifest.initial.terminal_amplitude;
    let d = grid.dim();
    ScalarField::from_fn(grid, |x| {
        a * x[..d].iter().map(|xi| (2.0 * PI * xi).sin()).sum::<f64>()
    })
}

pub fn problem(manifest: &RunManifest) -> Result<MfgProblem<QuadraticExample>> {
    let grid = spectral_grid(manifest)?;
    Ok(MfgProblem::new(
        model(manifest)?,
        initial_density(manifest, &grid)?,
        terminal_cost(manifest, &grid),
        time_grid(manifest)?,
    )?)
}

pub fn loop_config(manifest: &RunManifest) -> LoopConfig {
    let l = &manifest.outer;
    LoopConfig {
        damping: match l.damping {
            DampingKind::Fixed => Damping::Fixed(l.delta),
            DampingKind::FictitiousPlay => Damping::FictitiousPlay,
        },
        tolerance: l.tolerance,
        max_iterations: l.max_iterations,
        theta_schedule: l.theta_schedule.clone(),
        mu: MuSolveConfig {
            tolerance: manifest.mu.tolerance,
            max_iterations: manifest.mu.max_iterations,
            relaxation: manifest.mu.relaxation,
        },
    }
}

/// Equilibrium at `loop.theta`; θ = 0 returns the closed-form state.
pub fn solve(manifest: &RunManifest) -> Result<EquilibriumSolution> {
    let problem = problem(manifest)?;
    if manifest.outer.theta == 0.0 {
        return Ok(problem.trivial_state()?);
    }
    Ok(solve_equilibrium(
        &problem,
        manifest.outer.theta,
        &loop_config(manifest),
    )?)
}

/// One stage summary per θ of the schedule (plus the target).
pub fn sweep_theta(manifest: &RunManifest) -> Result<(EquilibriumSolution, Vec<StageSummary>)> {
    let sol = solve(manifest)?;
    let stages = sol.stages.clone();
    Ok((sol, stages))
}

pub fn sim_config(manifest: &RunManifest) -> SimConfig {
    let p = &manifest.particles;
    SimConfig {
        particles: p.count,
        seed: p.seed,
        jumps: p.jumps,
        record_every: p.record_every,
    }
}

pub fn simulate(
    manifest: &RunManifest,
    drift: &MeasurePath<VectorField>,
    m0: &GridMeasure,
) -> Result<ParticlePath> {
    Ok(simulate_sde(drift, m0, &sim_config(manifest))?)
}

/// An equilibrium read back from an artifact directory.
#[derive(Debug, Clone)]
pub struct StoredEquilibrium {
    pub drift: MeasurePath<VectorField>,
    pub densities: Vec<GridMeasure>,
}

pub fn load_equilibrium(manifest: &RunManifest, dir: &Path) -> Result<StoredEquilibrium> {
    let grid = spectral_grid(manifest)?;
    let time = time_grid(manifest)?;
    let per_slice = grid.len();
    let d = grid.dim();
    let slices = |name: &str, width: usize| -> Result<Vec<Vec<f64>>> {
        let path = dir.join(name);
        let field = read_field(&path)?;
        if field.data.len() != time.len() * per_slice * width {
            return Err(Error::Format {
                path,
                message: format!(
                    "shape {:?} does not match the manifest grid ({} levels × {} nodes × {width})",
                    field.shape,
                    time.len(),
                    per_slice
                ),
            });
        }
        Ok(field
            .data
            .chunks_exact(per_slice * width)
            .map(<[f64]>::to_vec)
            .collect())
    };
    let drift = slices("drift.bin", d)?
        .into_iter()
        .map(|v| VectorField::new(&grid, v))
        .collect::<fmfgc_core::Result<Vec<_>>>()?;
    let densities = slices("m.bin", 1)?
        .into_iter()
        .map(|v| GridMeasure::normalized(&grid, v))
        .collect::<fmfgc_core::Result<Vec<_>>>()?;
    Ok(StoredEquilibrium {
        drift: MeasurePath::new(time, drift)?,
        densities,
    })
}

/// Runs `f` on a dedicated rayon pool; 0 threads uses rayon's default.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Run(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
