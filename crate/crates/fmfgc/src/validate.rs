//! The acceptance suite. Each criterion returns a pass/fail outcome with the
//! measured quantities; errors inside a criterion count as failures.
//!
//! Sizes follow the reduced defaults (n = 64, n_t = 100, N = 10⁴) unless a
//! criterion fixes its own.

use std::cell::OnceCell;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use fmfgc_core::equilibrium::{
    density_distance, equilibrium_certificate, solve_equilibrium, solve_equilibrium_from,
    EquilibriumSolution, LoopConfig, MfgProblem,
};
use fmfgc_core::fp::solve_forward;
use fmfgc_core::levy::{
    constant_drift_path, empirical_measure, holder_wasserstein_check, simulate_sde, SimConfig,
};
use fmfgc_core::measure::monotonicity_pairing;
use fmfgc_core::model::{legendre_transform, theta_scale, Kernel, QuadraticExample};
use fmfgc_core::mu::{solve_mu, MuSolveConfig};
use fmfgc_core::spectral::{frac_laplacian, gradient, semigroup_apply};
use fmfgc_core::{
    GridMeasure, JointControlMeasure, MeasurePath, ScalarField, SpectralGrid, TimeGrid, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{emit_artifacts, emit_simulation};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::run;

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "spectral exactness"),
    (2, "semigroup laws"),
    (3, "FP conservation"),
    (4, "control fixed point closed form"),
    (5, "monotonicity"),
    (6, "Legendre conjugacy"),
    (7, "equilibrium benchmark"),
    (8, "uniqueness"),
    (9, "linear-in-θ envelopes"),
    (10, "sampler consistency"),
    (11, "particle/PDE cross-check"),
    (12, "Hölder-in-time Wasserstein"),
    (13, "reproducibility"),
];

/// Shared state: the benchmark equilibrium is solved once and reused.
pub struct Suite {
    seed: u64,
    benchmark: OnceCell<std::result::Result<Benchmark, String>>,
    equilibrium_particles: OnceCell<std::result::Result<fmfgc_core::levy::ParticlePath, String>>,
}

struct Benchmark {
    problem: MfgProblem<QuadraticExample>,
    solution: EquilibriumSolution,
}

type Check = std::result::Result<(bool, String), Error>;

fn benchmark_problem(n: usize, steps: usize) -> Result<MfgProblem<QuadraticExample>> {
    let mut manifest = RunManifest::named("benchmark");
    manifest.grid.n = n;
    manifest.grid.steps = steps;
    run::problem(&manifest)
}

fn fmt_ok(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

impl Suite {
    pub fn new(seed: u64) -> Self {
        Suite {
            seed,
            benchmark: OnceCell::new(),
            equilibrium_particles: OnceCell::new(),
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn benchmark(&self) -> Result<&Benchmark> {
        self.benchmark
            .get_or_init(|| {
                let problem = benchmark_problem(128, 200).map_err(|e| e.to_string())?;
                let solution = solve_equilibrium(&problem, 1.0, &LoopConfig::default())
                    .map_err(|e| e.to_string())?;
                Ok(Benchmark { problem, solution })
            })
            .as_ref()
            .map_err(|e| Error::Run(format!("benchmark solve: {e}")))
    }

    /// N = 10⁵ particles driven by the benchmark equilibrium drift.
    fn equilibrium_particles(&self) -> Result<&fmfgc_core::levy::ParticlePath> {
        self.equilibrium_particles
            .get_or_init(|| {
                let bench = self.benchmark().map_err(|e| e.to_string())?;
                let drift = bench
                    .solution
                    .drift(&bench.problem.model)
                    .map_err(|e| e.to_string())?;
                let cfg = SimConfig {
                    record_every: 10,
                    ..SimConfig::new(100_000, self.seed)
                };
                simulate_sde(&drift, &bench.problem.initial, &cfg).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Run(format!("equilibrium simulation: {e}")))
    }

    pub fn run(&self, id: u8) -> Outcome {
        let name = CRITERIA
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, n)| *n)
            .unwrap_or("unknown");
        let start = Instant::now();
        let result = match id {
            1 => self.spectral_exactness(),
            2 => self.semigroup_laws(),
            3 => self.fp_conservation(),
            4 => self.mu_closed_form(),
            5 => self.monotonicity(),
            6 => self.legendre_conjugacy(),
            7 => self.equilibrium_benchmark(),
            8 => self.uniqueness(),
            9 => self.theta_envelopes(),
            10 => self.sampler_consistency(),
            11 => self.particle_cross_check(),
            12 => self.holder_in_time(),
            13 => self.reproducibility(),
            _ => Err(Error::Run(format!("no criterion {id}"))),
        };
        let (passed, detail) = match result {
            Ok(pair) => pair,
            Err(e) => (false, format!("error: {e}")),
        };
        Outcome {
            id,
            name,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_all(&self) -> Vec<Outcome> {
        CRITERIA.iter().map(|(id, _)| self.run(*id)).collect()
    }

    fn spectral_exactness(&self) -> Check {
        let t = 1e-4;
        let mut worst_lap = 0.0f64;
        let mut worst_heat = 0.0f64;
        for s in [0.6, 0.75, 0.9] {
            let grid = SpectralGrid::new(1, 64, s)?;
            for k in 0..=32i32 {
                let lambda = (2.0 * PI * k as f64).powf(2.0 * s);
                let waves: [fn(f64) -> f64; 2] = [f64::cos, f64::sin];
                for wave in waves {
                    let f = ScalarField::from_fn(&grid, |x| wave(2.0 * PI * k as f64 * x[0]));
                    let size = f.sup_norm();
                    if size < 1e-9 {
                        continue;
                    }
                    let lap = frac_laplacian(&f, s)?;
                    let gap = lap.axpy(-lambda, &f)?.sup_norm();
                    worst_lap = worst_lap.max(if k == 0 { gap } else { gap / (lambda * size) });
                    let multiplier = (-lambda * t).exp();
                    let heat = semigroup_apply(&f, t)?;
                    worst_heat = worst_heat
                        .max(heat.axpy(-multiplier, &f)?.sup_norm() / (multiplier * size));
                }
            }
        }
        let passed = worst_lap <= 1e-12 && worst_heat <= 1e-12;
        Ok((
            passed,
            format!("max rel err (-Δ)^s {worst_lap:.2e}, semigroup at t = {t} {worst_heat:.2e} (tol 1e-12)"),
        ))
    }

    fn semigroup_laws(&self) -> Check {
        let mut rng = self.rng(2);
        let mut composition = 0.0f64;
        let mut l2_excess = f64::NEG_INFINITY;
        let mut sup_excess = f64::NEG_INFINITY;
        for field in 0..50 {
            let s = [0.6, 0.75, 0.9][field % 3];
            let grid = if field % 2 == 0 {
                SpectralGrid::new(1, 64, s)?
            } else {
                SpectralGrid::new(2, 32, s)?
            };
            let f = ScalarField::new(
                &grid,
                (0..grid.len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )?;
            // Times where the grid resolves the heat kernel.
            let t1 = rng.random_range(0.01..0.25);
            let t2 = rng.random_range(0.01..0.25);
            let twice = semigroup_apply(&semigroup_apply(&f, t1)?, t2)?;
            let once = semigroup_apply(&f, t1 + t2)?;
            composition = composition.max(twice.sup_distance(&once)?);
            let flowed = semigroup_apply(&f, t1)?;
            l2_excess = l2_excess.max(flowed.l2_norm() - f.l2_norm());
            sup_excess = sup_excess.max(flowed.sup_norm() - f.sup_norm());
        }
        let passed = composition <= 1e-12 && l2_excess <= 1e-12 && sup_excess <= 1e-12;
        Ok((
            passed,
            format!(
                "composition {composition:.2e}, L² excess {l2_excess:.2e}, L∞ excess {sup_excess:.2e} (tol 1e-12)"
            ),
        ))
    }

    fn fp_conservation(&self) -> Check {
        let grid = SpectralGrid::new(1, 64, 0.75)?;
        let time = TimeGrid::new(1.0, 200)?;
        let m0 = benchmark_problem(64, 200)?.initial;
        let drift = (0..time.len())
            .map(|j| {
                let t = time.time(j);
                VectorField::from_fn(&grid, |x, out| {
                    out[0] = 0.3 * (2.0 * PI * x[0]).sin() * (PI * t).cos() + 0.1
                })
            })
            .collect();
        let sol = solve_forward(&MeasurePath::new(time, drift)?, &m0)?;
        let per_step = sol.mass_trace[1..]
            .iter()
            .map(|m| (m - 1.0).abs())
            .fold(0.0f64, f64::max);
        let cumulative: f64 = sol.mass_trace[1..].iter().map(|m| (m - 1.0).abs()).sum();
        let min_density = sol
            .slices()
            .iter()
            .flat_map(|m| m.density().iter().copied())
            .fold(f64::INFINITY, f64::min);
        let bound = sol.sup_bound();
        let worst_ratio = sol
            .sup_trace
            .iter()
            .zip(&bound)
            .map(|(s, b)| s / (1.1 * b))
            .fold(0.0f64, f64::max);
        let passed =
            per_step <= 1e-12 && cumulative <= 1e-10 && min_density >= 0.0 && worst_ratio <= 1.0;
        Ok((
            passed,
            format!(
                "per-step drift {per_step:.2e}, cumulative {cumulative:.2e}, min density {min_density:.2e}, \
                 sup/(1.1·‖m₀‖e^(KT)) {worst_ratio:.3} with K = {:.3}",
                sol.compression_rate
            ),
        ))
    }

    fn mu_closed_form(&self) -> Check {
        let grid = SpectralGrid::new(1, 64, 0.75)?;
        let m = benchmark_problem(64, 100)?.initial;
        let u = ScalarField::from_fn(&grid, |x| {
            0.3 * (2.0 * PI * x[0]).sin()
                + 0.1 * (4.0 * PI * x[0]).cos()
                + 0.2 * (2.0 * PI * x[0]).cos()
        });
        let du = gradient(&u)?;
        let mean_du: f64 = m
            .weights()
            .iter()
            .zip(du.values())
            .map(|(w, g)| w * g)
            .sum();
        let mut worst_field = 0.0f64;
        let mut worst_mean = 0.0f64;
        let mut worst_ratio = 0.0f64;
        let mut ratios = 0;
        for beta in [0.3, 0.7] {
            let base = QuadraticExample::new(beta, Kernel::exponential(1.0), 2.0)?;
            let model = theta_scale(&base, 1.0)?;
            let out = solve_mu(&m, &du, &model, &MuSolveConfig::default())?;
            let expected = VectorField::new(
                &grid,
                du.values()
                    .iter()
                    .map(|g| -g + beta * mean_du / (1.0 + beta))
                    .collect(),
            )?;
            worst_field = worst_field.max(out.measure.control().sup_distance(&expected)?);
            worst_mean =
                worst_mean.max((out.measure.mean_control()[0] + mean_du / (1.0 + beta)).abs());
            // The first update also removes the mean-free part; after it only
            // the mean contracts. Below 1e-6 rounding in the update dominates.
            for pair in out.updates[1..].windows(2) {
                if pair[1] >= 1e-6 {
                    worst_ratio = worst_ratio.max((pair[1] / pair[0] - beta).abs());
                    ratios += 1;
                }
            }
        }
        let passed =
            worst_field <= 1e-10 && worst_mean <= 1e-10 && ratios >= 4 && worst_ratio <= 1e-8;
        Ok((
            passed,
            format!(
                "α error {worst_field:.2e}, ᾱ error {worst_mean:.2e}, |ratio − β| {worst_ratio:.2e} over {ratios} ratios"
            ),
        ))
    }

    fn monotonicity(&self) -> Check {
        let mut rng = self.rng(5);
        let grid = SpectralGrid::new(1, 64, 0.75)?;
        let mut worst = f64::INFINITY;
        for pair in 0..100 {
            let beta = rng.random_range(0.0..0.95);
            let kernel = Kernel {
                amplitude: rng.random_range(0.1..2.0),
                decay: rng.random_range(0.2..2.0),
            };
            let model = QuadraticExample::new(beta, kernel, 2.0)?;
            let mut joint = || -> Result<JointControlMeasure> {
                let spread = if pair % 4 == 0 { 0.0 } else { 2.0 };
                let m = GridMeasure::normalized(
                    &grid,
                    (0..grid.len())
                        .map(|_| rng.random_range(0.0..1.0f64).powi(3))
                        .collect(),
                )?;
                let alpha = VectorField::new(
                    &grid,
                    (0..grid.len())
                        .map(|_| rng.random_range(-spread..=spread))
                        .collect(),
                )?;
                Ok(JointControlMeasure::new(m, alpha)?)
            };
            let (a, b) = (joint()?, joint()?);
            worst = worst.min(monotonicity_pairing(&model, &a, &b)?);
        }
        Ok((
            worst >= -1e-12,
            format!("min pairing {worst:.3e} over 100 pairs (tol −1e-12)"),
        ))
    }

    fn legendre_conjugacy(&self) -> Check {
        use fmfgc_core::model::{Hamiltonian, Model};
        let mut rng = self.rng(6);
        let grid = SpectralGrid::new(1, 64, 0.75)?;
        let mut value_gap = 0.0f64;
        let mut envelope_gap = 0.0f64;
        for batch in 0..20 {
            let beta = [0.0, 0.3, 0.6, 0.9][batch % 4];
            let decay = rng.random_range(0.5..2.0);
            let model = QuadraticExample::new(beta, Kernel::exponential(decay), 2.0)?;
            let m = GridMeasure::normalized(
                &grid,
                (0..grid.len())
                    .map(|_| rng.random_range(0.05..1.0))
                    .collect(),
            )?;
            let alpha = VectorField::new(
                &grid,
                (0..grid.len())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect(),
            )?;
            let mu = JointControlMeasure::new(m.clone(), alpha)?;
            let mean = mu.mean_control()[0];
            let coupling = model.coupling(&mu)?;
            for _ in 0..50 {
                let node = rng.random_range(0..grid.len());
                let p = rng.random_range(-5.0..5.0);
                // Closed form with V from the Poisson kernel in physical space.
                let x = grid.position(node)[0];
                let v: f64 = (0..grid.len())
                    .map(|j| {
                        let r = x - grid.position(j)[0];
                        decay.sinh() / (decay.cosh() - (2.0 * PI * r).cos())
                            * m.density()[j]
                            * grid.cell_volume()
                    })
                    .sum();
                let h = 0.5 * p * p + beta * p * mean - v;
                let out = legendre_transform(&model, node, &[p], &mu)?;
                value_gap = value_gap.max((out.value - h).abs());
                let mut dp = [0.0];
                model.h_p(node, &[p], &coupling, &mut dp);
                envelope_gap = envelope_gap.max((out.maximizer[0] + dp[0]).abs());
            }
        }
        let passed = value_gap <= 1e-8 && envelope_gap <= 1e-8;
        Ok((
            passed,
            format!("|sup − H| {value_gap:.2e}, |α* + D_pH| {envelope_gap:.2e} over 1000 probes (tol 1e-8)"),
        ))
    }

    fn equilibrium_benchmark(&self) -> Check {
        let bench = self.benchmark()?;
        let cert = equilibrium_certificate(&bench.solution, &bench.problem.model)?;
        let fine_problem = benchmark_problem(256, 400)?;
        let fine = solve_equilibrium(&fine_problem, 1.0, &LoopConfig::default())?;
        let fine_cert = equilibrium_certificate(&fine, &fine_problem.model)?;
        let factor = cert.duality_residual / fine_cert.duality_residual;
        let passed = bench.solution.converged
            && fine.converged
            && cert.duality_residual <= 1e-2
            && factor >= 1.5;
        Ok((
            passed,
            format!(
                "converged {} in {} sweeps, duality {:.3e} → {:.3e} on the halved mesh (factor {factor:.2}, need ≥ 1.5)",
                bench.solution.converged,
                bench.solution.sweeps(),
                cert.duality_residual,
                fine_cert.duality_residual
            ),
        ))
    }

    fn uniqueness(&self) -> Check {
        let problem = benchmark_problem(64, 100)?;
        let cfg = LoopConfig::default();
        let cold = solve_equilibrium(&problem, 1.0, &cfg)?;
        let grid = problem.initial.grid().clone();
        let values = (0..problem.time.len())
            .map(|j| {
                ScalarField::from_fn(&grid, |x| 0.5 * (2.0 * PI * (x[0] + 0.01 * j as f64)).cos())
            })
            .collect();
        let bump = GridMeasure::normalized(
            &grid,
            (0..grid.len())
                .map(|k| 1.0 + 0.8 * (4.0 * PI * grid.position(k)[0]).sin())
                .collect(),
        )?;
        let guess = problem.initial_guess(values, vec![bump; problem.time.len()])?;
        let direct = LoopConfig {
            theta_schedule: vec![],
            ..cfg.clone()
        };
        let warm = solve_equilibrium_from(&problem, 1.0, &direct, guess)?;
        let mut du = 0.0f64;
        let mut dm = 0.0f64;
        for j in 0..problem.time.len() {
            du = du.max(cold.hjb.value(j).sup_distance(warm.hjb.value(j))?);
            dm = dm.max(density_distance(cold.density(j), warm.density(j))?);
        }
        let tol = 2.0 * cfg.tolerance;
        let passed = cold.converged && warm.converged && du <= tol && dm <= tol;
        Ok((
            passed,
            format!("sup |u¹ − u²| {du:.2e}, sup_t W₁ {dm:.2e} (tol {tol:.0e})"),
        ))
    }

    fn theta_envelopes(&self) -> Check {
        let bench = self.benchmark()?;
        let stages = &bench.solution.stages;
        let top = stages
            .iter()
            .find(|s| s.theta == 1.0)
            .ok_or_else(|| Error::Run("no θ = 1 stage".into()))?;
        let mut worst = 0.0f64;
        let mut rows = Vec::new();
        for theta in [0.25, 0.5, 1.0] {
            let stage = stages
                .iter()
                .find(|s| s.theta == theta)
                .ok_or_else(|| Error::Run(format!("no θ = {theta} stage")))?;
            let ratios = [
                stage.sup_u / top.sup_u,
                stage.sup_gradient / top.sup_gradient,
                stage.max_moment / top.max_moment,
                stage.semiconcavity / top.semiconcavity,
            ];
            let r = ratios.iter().fold(0.0f64, |a, r| a.max(r / (1.5 * theta)));
            worst = worst.max(r);
            rows.push(format!("θ={theta}: {r:.3}"));
        }
        Ok((
            worst <= 1.0 && stages.iter().all(|s| s.converged),
            format!("max stat/(1.5·θ·stat(1)) per θ: {}", rows.join(", ")),
        ))
    }

    fn sampler_consistency(&self) -> Check {
        let particles = 100_000;
        let s = 0.75;
        let horizon = 0.05;
        let grid = SpectralGrid::new(1, 64, s)?;
        let m0 = benchmark_problem(64, 100)?.initial;
        let time = TimeGrid::new(horizon, 50)?;
        let path = simulate_sde(
            &constant_drift_path(&VectorField::zeros(&grid), &time)?,
            &m0,
            &SimConfig::new(particles, self.seed),
        )?;
        let reference = semigroup_apply(&m0.to_field(), horizon)?;
        let reference = GridMeasure::normalized(
            &grid,
            reference
                .into_values()
                .into_iter()
                .map(|v| v.max(0.0))
                .collect(),
        )?;
        let empirical = empirical_measure(path.last(), &grid)?;
        let w1 = density_distance(&empirical, &reference)?;
        let w1_tol = 2.0 / (particles as f64).sqrt() + 2.0 * grid.spacing() + 0.01;

        // Sampling draws uniformly inside the cell around each node, which
        // multiplies the k-th coefficient by sinc(πk/n).
        let h = grid.spacing();
        let xs = path.last().axis(0);
        let mut cf_gap = 0.0f64;
        for k in 1..=3 {
            let kf = k as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for x in &xs {
                re += (2.0 * PI * kf * x).cos();
                im -= (2.0 * PI * kf * x).sin();
            }
            re /= particles as f64;
            im /= particles as f64;
            let cell = (PI * kf * h).sin() / (PI * kf * h);
            let decay = (-(2.0 * PI * kf).powf(2.0 * s) * horizon).exp();
            let (mut ore, mut oim) = (0.0, 0.0);
            for (j, w) in m0.weights().iter().enumerate() {
                let x = grid.position(j)[0];
                ore += w * (2.0 * PI * kf * x).cos();
                oim -= w * (2.0 * PI * kf * x).sin();
            }
            let (ore, oim) = (ore * cell * decay, oim * cell * decay);
            cf_gap = cf_gap.max(((re - ore).powi(2) + (im - oim).powi(2)).sqrt());
        }
        let cf_tol = 4.0 / (particles as f64).sqrt();
        Ok((
            w1 <= w1_tol && cf_gap <= cf_tol,
            format!("W₁ {w1:.2e} (tol {w1_tol:.2e}), char. fn gap {cf_gap:.2e} (tol {cf_tol:.2e})"),
        ))
    }

    fn particle_cross_check(&self) -> Check {
        let bench = self.benchmark()?;
        let path = self.equilibrium_particles()?;
        let grid = bench.problem.initial.grid();
        let empirical = empirical_measure(path.last(), grid)?;
        let w1 = density_distance(&empirical, bench.solution.fp.terminal())?;
        Ok((
            w1 <= 0.05,
            format!("W₁(particles, PDE) at T = {w1:.3e} (tol 0.05)"),
        ))
    }

    fn holder_in_time(&self) -> Check {
        let bench = self.benchmark()?;
        let drift = bench.solution.drift(&bench.problem.model)?;
        let b_sup = drift
            .slices()
            .iter()
            .map(VectorField::sup_norm)
            .fold(0.0f64, f64::max);
        let equilibrium = holder_wasserstein_check(self.equilibrium_particles()?, b_sup)?;

        // Pure jumps from a point mass, where the stable scaling shows.
        let s = 0.9;
        let grid = SpectralGrid::new(1, 256, s)?;
        let time = TimeGrid::new(0.02, 128)?;
        let cfg = SimConfig {
            record_every: 4,
            ..SimConfig::new(10_000, self.seed)
        };
        let jumps = simulate_sde(
            &constant_drift_path(&VectorField::zeros(&grid), &time)?,
            &GridMeasure::spike(&grid, 128),
            &cfg,
        )?;
        let pure = holder_wasserstein_check(&jumps, 0.0)?;
        let exponent = pure.exponent;
        let in_range = exponent.is_some_and(|e| (0.4..=0.6).contains(&e));
        Ok((
            equilibrium.passed && pure.passed && in_range,
            format!(
                "equilibrium path worst ratio {:.3} (C = {:.3}, {}), pure jumps worst ratio {:.3} ({}), exponent {} at s = {s} (need [0.4, 0.6])",
                equilibrium.worst_ratio,
                equilibrium.constant,
                fmt_ok(equilibrium.passed),
                pure.worst_ratio,
                fmt_ok(pure.passed),
                exponent.map_or("none".into(), |e| format!("{e:.3}"))
            ),
        ))
    }

    fn reproducibility(&self) -> Check {
        let mut manifest = RunManifest::named("reproducibility");
        manifest.grid.n = 64;
        manifest.grid.steps = 100;
        manifest.particles.count = 10_000;
        manifest.particles.seed = self.seed;
        let root = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let mut digests: Vec<(usize, Vec<NamedBytes>)> = Vec::new();
        for threads in [1, 2, 8] {
            let dir = root.path().join(format!("threads-{threads}"));
            let m = manifest.clone();
            run::with_threads(threads, || produce(&m, &dir))??;
            digests.push((threads, binary_files(&dir)?));
        }
        let files = digests[0].1.len();
        let mismatched: Vec<String> = digests[1..]
            .iter()
            .filter(|(_, d)| *d != digests[0].1)
            .map(|(t, _)| t.to_string())
            .collect();
        Ok((
            mismatched.is_empty() && files > 0,
            if mismatched.is_empty() {
                format!("{files} binary artifacts bit-identical at 1, 2 and 8 threads")
            } else {
                format!("artifacts differ at {} threads", mismatched.join(", "))
            },
        ))
    }
}

/// Solve, emit, then simulate against the stored drift.
fn produce(manifest: &RunManifest, dir: &Path) -> Result<()> {
    let sol = run::solve(manifest)?;
    emit_artifacts(&sol, &run::model(manifest)?, manifest, dir)?;
    let stored = run::load_equilibrium(manifest, dir)?;
    let path = run::simulate(manifest, &stored.drift, &stored.densities[0])?;
    emit_simulation(&path, &stored.densities, manifest, &dir.join("particles"))?;
    Ok(())
}

type NamedBytes = (String, Vec<u8>);

fn binary_files(dir: &Path) -> Result<Vec<NamedBytes>> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("particles")] {
        let entries = fs::read_dir(&sub).map_err(|e| Error::io(&sub, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&sub, e))?.path();
            if path.extension().is_some_and(|e| e == "bin") {
                let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let name = path
                    .strip_prefix(dir)
                    .unwrap_or(&path)
                    .display()
                    .to_string();
                out.push((name, bytes));
            }
        }
    }
    out.sort();
    Ok(out)
}
