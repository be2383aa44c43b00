//! Outer equilibrium loop: damped Picard sweeps over (μ, u, m) with
//! θ-continuation from the trivial θ = 0 problem.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fp::{duality_residual, solve_forward, FpSolution};
use crate::grid::{ScalarField, TimeGrid, VectorField};
use crate::hjb::{hjb_diagnostics, solve_backward, HjbSolution};
use crate::measure::{
    lambda_q, monotonicity_pairing, GridMeasure, JointControlMeasure, MeasurePath,
};
use crate::model::{h_p_field, theta_scale, Hamiltonian, Lagrangian, Model, ThetaScaled};
use crate::mu::{moment_certificate, solve_mu_from, MuSolveConfig};
use crate::par;
use crate::spectral;
use crate::transport::{wasserstein_1d, wasserstein_sinkhorn, SinkhornConfig};

/// Sweeps without a new best metric before switching to fictitious play.
pub const STALL_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// m ← (1−δ)m + δ m_new with a constant δ ∈ (0, 1].
    Fixed(f64),
    /// δ_k = 1/(k+1).
    FictitiousPlay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub damping: Damping,
    /// Bound on both the sup-change of u and the sup_t W₁-change of m.
    pub tolerance: f64,
    /// Sweeps allowed per θ stage.
    pub max_iterations: usize,
    /// Ascending θ values; the stages above the target are dropped and the
    /// target appended if missing.
    pub theta_schedule: Vec<f64>,
    pub mu: MuSolveConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            damping: Damping::Fixed(1.0),
            tolerance: 1e-6,
            max_iterations: 200,
            theta_schedule: alloc::vec![0.0, 0.25, 0.5, 0.75, 1.0],
            mu: MuSolveConfig::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if let Damping::Fixed(delta) = self.damping {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::domain("damping", delta, "(0, 1]"));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("loop.tolerance", self.tolerance, "(0, ∞)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("loop.max_iterations", 0.0, "[1, ∞)"));
        }
        for pair in self.theta_schedule.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::domain(
                    "theta_schedule",
                    pair[1],
                    "strictly ascending",
                ));
            }
        }
        if let Some(bad) = self
            .theta_schedule
            .iter()
            .find(|t| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::domain("theta_schedule", *bad, "[0, 1]"));
        }
        self.mu.validate()
    }

    /// Stages actually run for a target θ.
    pub fn stages(&self, target: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .theta_schedule
            .iter()
            .copied()
            .filter(|t| *t < target)
            .collect();
        out.push(target);
        out
    }
}

/// Data of one equilibrium problem: base model, m₀, u_T and time grid.
#[derive(Debug, Clone)]
pub struct MfgProblem<H> {
    pub model: H,
    pub initial: GridMeasure,
    pub terminal: ScalarField,
    pub time: TimeGrid,
}

impl<H: Hamiltonian> MfgProblem<H> {
    pub fn new(
        model: H,
        initial: GridMeasure,
        terminal: ScalarField,
        time: TimeGrid,
    ) -> Result<Self> {
        initial.grid().check_same(terminal.grid())?;
        if !terminal.is_finite() {
            return Err(Error::InvalidField("non-finite terminal condition".into()));
        }
        Ok(MfgProblem {
            model,
            initial,
            terminal,
            time,
        })
    }

    /// The exact θ = 0 solution: u ≡ 0, m the fractional heat flow of m₀, α ≡ 0.
    pub fn trivial_state(&self) -> Result<EquilibriumSolution> {
        let grid = self.initial.grid();
        let mut slices = Vec::with_capacity(self.time.len());
        for j in 0..self.time.len() {
            let flowed = spectral::semigroup_apply(&self.initial.to_field(), self.time.time(j))?;
            let clipped = flowed
                .into_values()
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            slices.push(GridMeasure::normalized(grid, clipped)?);
        }
        let zero_drift = MeasurePath::new(
            self.time,
            alloc::vec![VectorField::zeros(grid); self.time.len()],
        )?;
        let fp = solve_forward(&zero_drift, &self.initial)?.with_slices(slices.clone())?;
        let mu = MeasurePath::new(
            self.time,
            slices
                .into_iter()
                .map(JointControlMeasure::at_rest)
                .collect(),
        )?;
        Ok(EquilibriumSolution {
            theta: 0.0,
            hjb: HjbSolution::zero(self.time, &self.terminal),
            fp,
            warm_start: mu.clone(),
            mu,
            history: Vec::new(),
            stages: alloc::vec![StageSummary::trivial()],
            converged: true,
        })
    }
}

impl<H: Hamiltonian> MfgProblem<H> {
    /// Starting state with a caller-chosen value and density path; μ starts
    /// at rest. Used to probe uniqueness from different initial guesses.
    pub fn initial_guess(
        &self,
        values: Vec<ScalarField>,
        densities: Vec<GridMeasure>,
    ) -> Result<EquilibriumSolution> {
        let mut state = self.trivial_state()?;
        state.hjb = HjbSolution::from_values(self.time, values)?;
        state.fp = state.fp.with_slices(densities.clone())?;
        state.mu = MeasurePath::new(
            self.time,
            densities
                .into_iter()
                .map(JointControlMeasure::at_rest)
                .collect(),
        )?;
        state.warm_start = state.mu.clone();
        Ok(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub theta: f64,
    pub sweep: usize,
    pub damping: f64,
    pub u_change: f64,
    pub m_change: f64,
    pub duality_residual: f64,
}

/// Per-θ-stage outcome and the quantities whose θ-scaling is checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSummary {
    pub theta: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub sup_u: f64,
    pub sup_gradient: f64,
    pub semiconcavity: f64,
    /// sup_t Λ₂(μ(t)).
    pub max_moment: f64,
}

impl StageSummary {
    fn trivial() -> Self {
        StageSummary {
            theta: 0.0,
            sweeps: 0,
            converged: true,
            sup_u: 0.0,
            sup_gradient: 0.0,
            semiconcavity: 0.0,
            max_moment: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub theta: f64,
    pub hjb: HjbSolution,
    pub fp: FpSolution,
    pub mu: MeasurePath<JointControlMeasure>,
    /// μ-path the last stage started from.
    pub warm_start: MeasurePath<JointControlMeasure>,
    pub history: Vec<IterationRecord>,
    pub stages: Vec<StageSummary>,
    pub converged: bool,
}

impl EquilibriumSolution {
    pub fn time(&self) -> &TimeGrid {
        self.hjb.time()
    }

    pub fn density(&self, j: usize) -> &GridMeasure {
        self.fp.get(j)
    }

    /// Sweeps run in the final θ stage.
    pub fn sweeps(&self) -> usize {
        self.history
            .iter()
            .filter(|r| r.theta == self.theta)
            .count()
    }

    /// b = −D_pH^θ(·, Du, μ) at every time node.
    pub fn drift<H: Hamiltonian>(&self, base: &H) -> Result<MeasurePath<VectorField>> {
        let model = theta_scale(base, self.theta)?;
        drift_path(&model, &self.hjb, &self.mu)
    }
}

fn drift_path<H: Hamiltonian>(
    model: &ThetaScaled<H>,
    hjb: &HjbSolution,
    mu: &MeasurePath<JointControlMeasure>,
) -> Result<MeasurePath<VectorField>> {
    let mut out = Vec::with_capacity(mu.slices().len());
    for (j, mu_j) in mu.slices().iter().enumerate() {
        let coupling = model.coupling(mu_j)?;
        out.push(h_p_field(model, hjb.gradient(j), &coupling).scaled(-1.0));
    }
    MeasurePath::new(*mu.time(), out)
}

/// Distance used for the m-metric: exact W₁ in d = 1, debiased Sinkhorn in d = 2.
pub fn density_distance(a: &GridMeasure, b: &GridMeasure) -> Result<f64> {
    if a.grid().dim() == 1 {
        wasserstein_1d(a, b, 1.0)
    } else {
        wasserstein_sinkhorn(a, b, 1.0, &SinkhornConfig::for_torus(2, 1.0))
    }
}

/// Per-slice μ solves on the current (m, Du), warm-started from the current α.
fn mu_path<H: Hamiltonian>(
    model: &ThetaScaled<H>,
    state: &EquilibriumSolution,
    cfg: &MuSolveConfig,
) -> Result<MeasurePath<JointControlMeasure>> {
    let len = state.time().len();
    let solved = par::map_range(len, |j| {
        solve_mu_from(
            state.fp.get(j),
            state.hjb.gradient(j),
            model,
            cfg,
            state.mu.get(j).control().clone(),
        )
        .map(|s| s.measure)
    });
    MeasurePath::new(*state.time(), solved.into_iter().collect::<Result<_>>()?)
}

/// One sweep at the θ of `model`: μ from the current (m, Du), u backward,
/// m forward with the new drift, then density damping by `delta`.
pub fn picard_iterate<H: Hamiltonian>(
    state: &EquilibriumSolution,
    problem: &MfgProblem<H>,
    model: &ThetaScaled<H>,
    delta: f64,
    cfg: &LoopConfig,
) -> Result<(EquilibriumSolution, IterationRecord)> {
    let sweep = state
        .history
        .iter()
        .filter(|r| r.theta == model.theta())
        .count()
        + 1;
    let at = |e: Error| e.at_iteration(sweep);
    let mu = mu_path(model, state, &cfg.mu).map_err(at)?;
    let hjb = solve_backward(model, &mu, &problem.terminal).map_err(at)?;
    let drift = drift_path(model, &hjb, &mu).map_err(at)?;
    let fp = solve_forward(&drift, &problem.initial).map_err(at)?;
    let residual = duality_residual(&hjb, &fp, &mu, model).map_err(at)?;

    let mut u_change = 0.0f64;
    for (old, new) in state.hjb.values().iter().zip(hjb.values()) {
        u_change = u_change.max(old.sup_distance(new)?);
    }
    let distances = par::map_range(fp.slices().len(), |j| {
        density_distance(state.fp.get(j), fp.get(j))
    });
    let mut m_change = 0.0f64;
    for d in distances {
        m_change = m_change.max(d.map_err(at)?);
    }
    let damped = state
        .fp
        .slices()
        .iter()
        .zip(fp.slices())
        .map(|(old, new)| old.blend(new, delta))
        .collect::<Result<Vec<_>>>()?;
    let record = IterationRecord {
        theta: model.theta(),
        sweep,
        damping: delta,
        u_change,
        m_change,
        duality_residual: residual,
    };
    let mut history = state.history.clone();
    history.push(record);
    Ok((
        EquilibriumSolution {
            theta: model.theta(),
            hjb,
            fp: fp.with_slices(damped)?,
            mu,
            warm_start: state.warm_start.clone(),
            history,
            stages: state.stages.clone(),
            converged: false,
        },
        record,
    ))
}

/// Runs the θ-continuation up to `theta`, starting from the θ = 0 solution.
pub fn solve_equilibrium<H: Hamiltonian + Clone>(
    problem: &MfgProblem<H>,
    theta: f64,
    cfg: &LoopConfig,
) -> Result<EquilibriumSolution> {
    solve_equilibrium_from(problem, theta, cfg, problem.trivial_state()?)
}

/// θ-continuation from a caller-supplied initial state, which stands in for
/// the θ = 0 stage.
pub fn solve_equilibrium_from<H: Hamiltonian + Clone>(
    problem: &MfgProblem<H>,
    theta: f64,
    cfg: &LoopConfig,
    initial: EquilibriumSolution,
) -> Result<EquilibriumSolution> {
    cfg.validate()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::domain("θ", theta, "(0, 1]"));
    }
    let mut state = initial;
    for stage in cfg.stages(theta) {
        if stage == 0.0 {
            continue;
        }
        state = solve_stage(problem, stage, cfg, state)?;
        if !state.converged {
            break;
        }
    }
    Ok(state)
}

fn solve_stage<H: Hamiltonian + Clone>(
    problem: &MfgProblem<H>,
    theta: f64,
    cfg: &LoopConfig,
    start: EquilibriumSolution,
) -> Result<EquilibriumSolution> {
    let model = theta_scale(problem.model.clone(), theta)?;
    let mut state = start;
    state.warm_start = state.mu.clone();
    let mut best: Option<(f64, EquilibriumSolution)> = None;
    let mut since_best = 0;
    let mut fictitious_from: Option<usize> = match cfg.damping {
        Damping::FictitiousPlay => Some(0),
        Damping::Fixed(_) => None,
    };
    let mut converged = false;
    for k in 0..cfg.max_iterations {
        let delta = match (fictitious_from, cfg.damping) {
            (Some(origin), _) => 1.0 / ((k - origin) as f64 + 2.0),
            (None, Damping::Fixed(d)) => d,
            (None, Damping::FictitiousPlay) => unreachable!(),
        };
        let (next, record) = picard_iterate(&state, problem, &model, delta, cfg)?;
        state = next;
        let metric = record.u_change.max(record.m_change);
        if metric <= cfg.tolerance {
            converged = true;
            break;
        }
        if best.as_ref().is_none_or(|(b, _)| metric < *b) {
            best = Some((metric, state.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_WINDOW && fictitious_from.is_none() {
                fictitious_from = Some(k + 1);
                since_best = 0;
            }
        }
    }
    if !converged {
        if let Some((_, kept)) = best {
            let history = state.history;
            state = kept;
            state.history = history;
        }
    }
    finish_stage(&model, state, converged, cfg)
}

/// Re-solves μ on the final (m, Du) so the fixed-point residual meets the μ
/// tolerance, and records the stage summary.
fn finish_stage<H: Hamiltonian>(
    model: &ThetaScaled<H>,
    mut state: EquilibriumSolution,
    converged: bool,
    cfg: &LoopConfig,
) -> Result<EquilibriumSolution> {
    state.mu = mu_path(model, &state, &cfg.mu)?;
    let diag = hjb_diagnostics(&state.hjb)?;
    let mut max_moment = 0.0f64;
    for mu in state.mu.slices() {
        max_moment = max_moment.max(lambda_q(mu, 2.0)?);
    }
    state.stages.push(StageSummary {
        theta: model.theta(),
        sweeps: state.sweeps(),
        converged,
        sup_u: diag.sup_u,
        sup_gradient: diag.sup_gradient,
        semiconcavity: diag.semiconcavity,
        max_moment,
    });
    state.converged = converged;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumCertificate {
    pub duality_residual: f64,
    /// sup_t ‖α + D_pH^θ(·, Du, μ)‖_∞.
    pub fixed_point_residual: f64,
    /// Smallest monotonicity pairing against the warm-start μ-path.
    pub min_pairing: f64,
    pub moments_hold: bool,
}

/// Post-hoc checks on a solved equilibrium.
pub fn equilibrium_certificate<H: Hamiltonian + Lagrangian>(
    sol: &EquilibriumSolution,
    base: &H,
) -> Result<EquilibriumCertificate> {
    if sol.theta == 0.0 {
        return Ok(EquilibriumCertificate {
            duality_residual: 0.0,
            fixed_point_residual: 0.0,
            min_pairing: 0.0,
            moments_hold: true,
        });
    }
    let model = theta_scale(base, sol.theta)?;
    let mut fixed_point_residual = 0.0f64;
    let mut moments_hold = true;
    for (j, mu) in sol.mu.slices().iter().enumerate() {
        let coupling = model.coupling(mu)?;
        let target = h_p_field(&model, sol.hjb.gradient(j), &coupling).scaled(-1.0);
        fixed_point_residual = fixed_point_residual.max(mu.control().sup_distance(&target)?);
        moments_hold &= moment_certificate(mu, sol.hjb.gradient(j), &model)?.holds();
    }
    let stride = (sol.time().steps() / 10).max(1);
    let mut min_pairing = f64::INFINITY;
    for j in (0..sol.time().len()).step_by(stride) {
        let pairing = monotonicity_pairing(&model, sol.mu.get(j), sol.warm_start.get(j))?;
        min_pairing = min_pairing.min(pairing);
    }
    Ok(EquilibriumCertificate {
        duality_residual: duality_residual(&sol.hjb, &sol.fp, &sol.mu, &model)?,
        fixed_point_residual,
        min_pairing,
        moments_hold,
    })
}
