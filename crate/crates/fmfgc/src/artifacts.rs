//! Output directory layout.
//!
//! Solve: `u.bin`, `m.bin` (levels × grid), `alpha.bin`, `drift.bin`
//! (levels × grid × d), `diagnostics.csv` (one row per time level),
//! `iterations.csv`, `stages.csv`, `summary.json`, `manifest.toml`.
//!
//! Simulate: `particles.bin` (N × d at T), `particle_density.bin`,
//! `simulation.csv`, `manifest.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use fmfgc_core::equilibrium::{equilibrium_certificate, EquilibriumSolution, StageSummary};
use fmfgc_core::levy::{empirical_measure, ParticlePath};
use fmfgc_core::measure::lambda_q;
use fmfgc_core::model::QuadraticExample;
use fmfgc_core::GridMeasure;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{write_field, FieldArray};
use crate::manifest::RunManifest;

fn grid_shape(levels: usize, n: usize, dim: usize) -> Vec<usize> {
    let mut shape = vec![levels];
    shape.extend(std::iter::repeat_n(n, dim));
    shape
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fail = |e: csv::Error| Error::Format {
        path: path.into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_manifest(dir: &Path, manifest: &RunManifest, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

#[derive(Serialize)]
struct TimeRow {
    step: usize,
    time: f64,
    mass: f64,
    min_density: f64,
    sup_density: f64,
    sup_bound: f64,
    sup_u: f64,
    sup_gradient: f64,
    lambda2: f64,
    sup_control: f64,
}

#[derive(Serialize)]
struct IterationRow {
    theta: f64,
    sweep: usize,
    damping: f64,
    u_change: f64,
    m_change: f64,
    duality_residual: f64,
}

/// One line of the θ-scaling table.
#[derive(Serialize)]
pub struct StageRow {
    pub theta: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub sup_u: f64,
    pub sup_gradient: f64,
    pub semiconcavity: f64,
    /// sup_t Λ₂(μ(t)).
    pub max_moment: f64,
}

impl From<&StageSummary> for StageRow {
    fn from(s: &StageSummary) -> Self {
        StageRow {
            theta: s.theta,
            sweeps: s.sweeps,
            converged: s.converged,
            sup_u: s.sup_u,
            sup_gradient: s.sup_gradient,
            semiconcavity: s.semiconcavity,
            max_moment: s.max_moment,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    scenario: String,
    theta: f64,
    converged: bool,
    sweeps: usize,
    duality_residual: f64,
    fixed_point_residual: f64,
    min_pairing: f64,
    moments_hold: bool,
}

pub fn write_stage_table(path: &Path, stages: &[StageSummary]) -> Result<()> {
    let rows: Vec<StageRow> = stages.iter().map(StageRow::from).collect();
    write_csv(path, &rows)
}

/// Writes every solve artifact into `dir` and returns the paths written.
pub fn emit_artifacts(
    sol: &EquilibriumSolution,
    model: &QuadraticExample,
    manifest: &RunManifest,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let time = sol.time();
    let levels = time.len();
    let grid = sol.density(0).grid();
    let (n, d) = (grid.points_per_axis(), grid.dim());
    let mut out = Vec::new();

    let scalar_shape = grid_shape(levels, n, d);
    let mut vector_shape = scalar_shape.clone();
    vector_shape.push(d);
    let drift = sol.drift(model)?;
    let arrays = [
        (
            "u.bin",
            &scalar_shape,
            sol.hjb
                .values()
                .iter()
                .flat_map(|u| u.values().to_vec())
                .collect::<Vec<_>>(),
        ),
        (
            "m.bin",
            &scalar_shape,
            sol.fp
                .slices()
                .iter()
                .flat_map(|m| m.density().to_vec())
                .collect(),
        ),
        (
            "alpha.bin",
            &vector_shape,
            sol.mu
                .slices()
                .iter()
                .flat_map(|mu| mu.control().values().to_vec())
                .collect(),
        ),
        (
            "drift.bin",
            &vector_shape,
            drift
                .slices()
                .iter()
                .flat_map(|b| b.values().to_vec())
                .collect(),
        ),
    ];
    for (name, shape, data) in arrays {
        let path = dir.join(name);
        let field = FieldArray::new(shape.clone(), data).map_err(|message| Error::Format {
            path: path.clone(),
            message,
        })?;
        write_field(&path, &field)?;
        out.push(path);
    }

    let bound = sol.fp.sup_bound();
    let mut rows = Vec::with_capacity(levels);
    for (j, &sup_bound) in bound.iter().enumerate() {
        let m = sol.density(j);
        let mu = sol.mu.get(j);
        rows.push(TimeRow {
            step: j,
            time: time.time(j),
            mass: sol.fp.mass_trace[j],
            min_density: sol.fp.min_trace[j],
            sup_density: m.sup_norm(),
            sup_bound,
            sup_u: sol.hjb.value(j).sup_norm(),
            sup_gradient: sol.hjb.gradient(j).sup_norm(),
            lambda2: lambda_q(mu, 2.0)?,
            sup_control: mu.control().sup_norm(),
        });
    }
    let path = dir.join("diagnostics.csv");
    write_csv(&path, &rows)?;
    out.push(path);

    let iterations: Vec<IterationRow> = sol
        .history
        .iter()
        .map(|r| IterationRow {
            theta: r.theta,
            sweep: r.sweep,
            damping: r.damping,
            u_change: r.u_change,
            m_change: r.m_change,
            duality_residual: r.duality_residual,
        })
        .collect();
    let path = dir.join("iterations.csv");
    write_csv(&path, &iterations)?;
    out.push(path);

    let path = dir.join("stages.csv");
    write_stage_table(&path, &sol.stages)?;
    out.push(path);

    let cert = equilibrium_certificate(sol, model)?;
    let summary = Summary {
        scenario: manifest.scenario.name.clone(),
        theta: sol.theta,
        converged: sol.converged,
        sweeps: sol.sweeps(),
        duality_residual: cert.duality_residual,
        fixed_point_residual: cert.fixed_point_residual,
        min_pairing: cert.min_pairing,
        moments_hold: cert.moments_hold,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("plain struct serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    out.push(path);

    write_manifest(dir, manifest, &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct SimulationRow {
    step: usize,
    time: f64,
    w1_to_pde: f64,
}

/// Writes a particle run. `reference` holds the PDE densities at every time
/// level; each recorded ensemble is compared with its level.
pub fn emit_simulation(
    path: &ParticlePath,
    reference: &[GridMeasure],
    manifest: &RunManifest,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let grid = reference[0].grid();
    let mut out = Vec::new();
    let last = path.last();
    let file = dir.join("particles.bin");
    let field = FieldArray::new(vec![last.len(), last.dim()], last.positions().to_vec()).map_err(
        |message| Error::Format {
            path: file.clone(),
            message,
        },
    )?;
    write_field(&file, &field)?;
    out.push(file);

    let density = empirical_measure(last, grid)?;
    let file = dir.join("particle_density.bin");
    let shape = grid_shape(1, grid.points_per_axis(), grid.dim())[1..].to_vec();
    write_field(
        &file,
        &FieldArray::new(shape, density.density().to_vec()).expect("grid sized"),
    )?;
    out.push(file);

    let mut rows = Vec::with_capacity(path.records.len());
    for (j, ensemble) in &path.records {
        let empirical = empirical_measure(ensemble, grid)?;
        rows.push(SimulationRow {
            step: *j,
            time: path.time.time(*j),
            w1_to_pde: fmfgc_core::equilibrium::density_distance(&empirical, &reference[*j])?,
        });
    }
    let file = dir.join("simulation.csv");
    write_csv(&file, &rows)?;
    out.push(file);

    write_manifest(dir, manifest, &mut out)?;
    Ok(out)
}
