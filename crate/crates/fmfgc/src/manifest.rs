//! Run manifests: sectioned TOML with every default written back out.
//!
//! ```toml
//! [scenario]
//! name = "benchmark"
//!
//! [grid]
//! order = 0.9
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub scenario: Scenario,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default, rename = "loop")]
    pub outer: LoopSection,
    #[serde(default)]
    pub mu: MuSection,
    #[serde(default)]
    pub particles: ParticleSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Points per axis, a power of two.
    pub n: usize,
    /// Time steps n_t; the grid has n_t + 1 levels.
    pub steps: usize,
    /// Fractional order s.
    pub order: f64,
    pub horizon: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 1,
            n: 128,
            steps: 200,
            order: 0.75,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub coupling_beta: f64,
    pub kernel_amplitude: f64,
    pub kernel_decay: f64,
    pub c0: f64,
    pub q: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            coupling_beta: 0.3,
            kernel_amplitude: 1.0,
            kernel_decay: 1.0,
            c0: 2.0,
            q: 2.0,
        }
    }
}

/// m₀ ∝ exp(κ Σ_i (cos 2πx_i − 1)) and u_T = a Σ_i sin 2πx_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub concentration: f64,
    pub terminal_amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            concentration: 1.0,
            terminal_amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingKind {
    Fixed,
    FictitiousPlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSection {
    pub theta: f64,
    pub theta_schedule: Vec<f64>,
    pub damping: DampingKind,
    /// δ for fixed damping.
    pub delta: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LoopSection {
    fn default() -> Self {
        LoopSection {
            theta: 1.0,
            theta_schedule: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            damping: DampingKind::Fixed,
            delta: 1.0,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuSection {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub relaxation: f64,
}

impl Default for MuSection {
    fn default() -> Self {
        MuSection {
            tolerance: 1e-10,
            max_iterations: 200,
            relaxation: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSection {
    pub count: usize,
    pub seed: u64,
    pub jumps: bool,
    pub record_every: usize,
}

impl Default for ParticleSection {
    fn default() -> Self {
        ParticleSection {
            count: 100_000,
            seed: 0,
            jumps: true,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub output: String,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            output: "out".into(),
            threads: 0,
        }
    }
}

/// Parses and validates a manifest.
pub fn parse_config(text: &str) -> Result<RunManifest> {
    let manifest: RunManifest = toml::from_str(text).map_err(|e| Error::Parse {
        line: e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().trim().to_string(),
    })?;
    manifest.validate()?;
    Ok(manifest)
}

fn range(key: &'static str, value: impl ToString, range: &'static str) -> Error {
    Error::Range {
        key,
        value: value.to_string(),
        range,
    }
}

fn check(ok: bool, key: &'static str, value: impl ToString, expected: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(range(key, value, expected))
    }
}

impl RunManifest {
    /// Minimal manifest with every other field at its default.
    pub fn named(name: &str) -> Self {
        RunManifest {
            scenario: Scenario { name: name.into() },
            grid: GridSection::default(),
            model: ModelSection::default(),
            initial: InitialSection::default(),
            outer: LoopSection::default(),
            mu: MuSection::default(),
            particles: ParticleSection::default(),
            run: RunSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check(
            !self.scenario.name.trim().is_empty(),
            "scenario.name",
            "\"\"",
            "non-empty",
        )?;
        let g = &self.grid;
        check(g.dim == 1 || g.dim == 2, "grid.dim", g.dim, "d ∈ {1, 2}")?;
        check(
            g.n >= 8 && g.n.is_power_of_two(),
            "grid.n",
            g.n,
            "a power of two ≥ 8",
        )?;
        check(g.steps >= 1, "grid.steps", g.steps, "n_t ≥ 1")?;
        check(
            g.order > 0.5 && g.order < 1.0,
            "grid.order",
            g.order,
            "s ∈ (1/2, 1)",
        )?;
        check(
            g.horizon > 0.0 && g.horizon.is_finite(),
            "grid.horizon",
            g.horizon,
            "T ∈ (0, ∞)",
        )?;

        let m = &self.model;
        check(
            (0.0..1.0).contains(&m.coupling_beta),
            "model.coupling_beta",
            m.coupling_beta,
            "β ∈ [0, 1)",
        )?;
        check(
            m.kernel_amplitude >= 0.0 && m.kernel_amplitude.is_finite(),
            "model.kernel_amplitude",
            m.kernel_amplitude,
            "[0, ∞)",
        )?;
        check(
            m.kernel_decay >= 0.0 && m.kernel_decay.is_finite(),
            "model.kernel_decay",
            m.kernel_decay,
            "[0, ∞)",
        )?;
        check(
            m.c0 > 0.0 && m.c0.is_finite(),
            "model.c0",
            m.c0,
            "C₀ ∈ (0, ∞)",
        )?;
        check(m.q == 2.0, "model.q", m.q, "q = 2 for the quadratic model")?;

        let i = &self.initial;
        check(
            i.concentration >= 0.0 && i.concentration.is_finite(),
            "initial.concentration",
            i.concentration,
            "[0, ∞)",
        )?;
        check(
            i.terminal_amplitude.is_finite(),
            "initial.terminal_amplitude",
            i.terminal_amplitude,
            "a finite number",
        )?;

        let l = &self.outer;
        check(
            (0.0..=1.0).contains(&l.theta),
            "loop.theta",
            l.theta,
            "θ ∈ [0, 1]",
        )?;
        for t in &l.theta_schedule {
            check(
                (0.0..=1.0).contains(t),
                "loop.theta_schedule",
                t,
                "θ ∈ [0, 1]",
            )?;
        }
        check(
            l.theta_schedule.windows(2).all(|w| w[0] < w[1]),
            "loop.theta_schedule",
            format!("{:?}", l.theta_schedule),
            "strictly ascending",
        )?;
        check(
            l.delta > 0.0 && l.delta <= 1.0,
            "loop.delta",
            l.delta,
            "δ ∈ (0, 1]",
        )?;
        check(l.tolerance > 0.0, "loop.tolerance", l.tolerance, "(0, ∞)")?;
        check(
            l.max_iterations >= 1,
            "loop.max_iterations",
            l.max_iterations,
            "≥ 1",
        )?;

        let mu = &self.mu;
        check(mu.tolerance > 0.0, "mu.tolerance", mu.tolerance, "(0, ∞)")?;
        check(
            mu.max_iterations >= 1,
            "mu.max_iterations",
            mu.max_iterations,
            "≥ 1",
        )?;
        check(
            mu.relaxation > 0.0 && mu.relaxation <= 1.0,
            "mu.relaxation",
            mu.relaxation,
            "ω ∈ (0, 1]",
        )?;

        let p = &self.particles;
        check(p.count >= 1, "particles.count", p.count, "≥ 1")?;
        check(
            p.seed <= i64::MAX as u64,
            "particles.seed",
            p.seed,
            "seed < 2^63 (TOML integers are signed 64-bit)",
        )?;
        check(
            p.record_every >= 1,
            "particles.record_every",
            p.record_every,
            "≥ 1",
        )?;
        check(
            !self.run.output.is_empty(),
            "run.output",
            "\"\"",
            "a directory path",
        )?;
        Ok(())
    }

    /// The fully resolved manifest as TOML. Call on validated manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("validated manifests are representable")
    }
}
