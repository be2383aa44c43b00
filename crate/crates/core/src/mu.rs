//! Per-slice fixed point μ = (I, −D_pH^θ(·, Du, μ))♯m.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::VectorField;
use crate::math;
use crate::measure::{lambda_inf, lambda_q, GridMeasure, JointControlMeasure};
use crate::model::{h_p_field, Hamiltonian, Model, ThetaScaled};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSolveConfig {
    /// Sup-norm bound on α + D_pH^θ(·, Du, μ).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// ω in α ← (1−ω)α + ω(−D_pH^θ).
    pub relaxation: f64,
}

impl Default for MuSolveConfig {
    fn default() -> Self {
        MuSolveConfig {
            tolerance: 1e-10,
            max_iterations: 200,
            relaxation: 1.0,
        }
    }
}

impl MuSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::domain("mu.tolerance", self.tolerance, "(0, ∞)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("mu.max_iterations", 0.0, "[1, ∞)"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::domain("mu.relaxation", self.relaxation, "(0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuSolution {
    pub measure: JointControlMeasure,
    /// ‖α + D_pH^θ(·, Du, μ)‖_∞ at the returned μ.
    pub residual: f64,
    /// Sup-norm of each α update, in order.
    pub updates: Vec<f64>,
}

impl MuSolution {
    pub fn iterations(&self) -> usize {
        self.updates.len()
    }
}

pub fn solve_mu<H: Hamiltonian>(
    m: &GridMeasure,
    du: &VectorField,
    model: &ThetaScaled<H>,
    cfg: &MuSolveConfig,
) -> Result<MuSolution> {
    solve_mu_from(m, du, model, cfg, VectorField::zeros(m.grid()))
}

/// [`solve_mu`] started from a given control field instead of α ≡ 0.
pub fn solve_mu_from<H: Hamiltonian>(
    m: &GridMeasure,
    du: &VectorField,
    model: &ThetaScaled<H>,
    cfg: &MuSolveConfig,
    initial: VectorField,
) -> Result<MuSolution> {
    cfg.validate()?;
    m.grid().check_same(du.grid())?;
    m.grid().check_same(initial.grid())?;
    if !du.is_finite() {
        return Err(Error::InvalidField("non-finite gradient".into()));
    }
    if model.theta() == 0.0 {
        return Ok(MuSolution {
            measure: JointControlMeasure::at_rest(m.clone()),
            residual: 0.0,
            updates: Vec::new(),
        });
    }

    let omega = cfg.relaxation;
    let mut alpha = initial;
    let mut updates = Vec::new();
    loop {
        let mu = JointControlMeasure::new(m.clone(), alpha)?;
        let coupling = model.coupling(&mu)?;
        let target = h_p_field(model, du, &coupling).scaled(-1.0);
        if !target.is_finite() {
            return Err(Error::InvalidField("non-finite D_pH in μ iteration".into()));
        }
        let residual = mu.control().sup_distance(&target)?;
        if residual <= cfg.tolerance {
            return Ok(MuSolution {
                measure: mu,
                residual,
                updates,
            });
        }
        if updates.len() == cfg.max_iterations {
            let ratio = match updates.as_slice() {
                [.., a, b] if *a > 0.0 => b / a,
                _ => f64::NAN,
            };
            return Err(Error::NonContraction {
                iterations: updates.len(),
                residual,
                ratio,
            });
        }
        let next: Vec<f64> = mu
            .control()
            .values()
            .iter()
            .zip(target.values())
            .map(|(a, t)| (1.0 - omega) * a + omega * t)
            .collect();
        updates.push(omega * residual);
        alpha = VectorField::new(m.grid(), next)?;
    }
}

/// Moment bounds a solved μ must satisfy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCertificate {
    pub lambda_q: f64,
    pub lambda_inf: f64,
    /// Λ_q̃(μ)^q̃.
    pub moment: f64,
    /// 4C₀² + q̃^{q−1}(2C₀)^q/q · ‖Du‖^q_{L^q(m)}.
    pub moment_bound: f64,
    /// C₀(1 + ‖Du‖_∞ + Λ_q̃).
    pub sup_bound: f64,
}

impl MomentCertificate {
    pub fn holds(&self) -> bool {
        self.moment <= self.moment_bound && self.lambda_inf <= self.sup_bound
    }
}

pub fn moment_certificate<H: Hamiltonian>(
    mu: &JointControlMeasure,
    du: &VectorField,
    model: &H,
) -> Result<MomentCertificate> {
    mu.grid().check_same(du.grid())?;
    let constants = model.constants();
    let (c0, q) = (constants.c0, constants.q);
    let q_conj = constants.conjugate();
    let lam = lambda_q(mu, q_conj)?;
    let lam_inf = lambda_inf(mu, 0.0)?;
    let w = mu.grid().cell_volume();
    let du_q: f64 = mu
        .state()
        .density()
        .iter()
        .enumerate()
        .map(|(node, m)| math::powf(math::norm(du.at(node)), q) * m * w)
        .sum();
    let moment_bound =
        4.0 * c0 * c0 + math::powf(q_conj, q - 1.0) * math::powf(2.0 * c0, q) / q * du_q;
    Ok(MomentCertificate {
        lambda_q: lam,
        lambda_inf: lam_inf,
        moment: math::powf(lam, q_conj),
        moment_bound,
        sup_bound: c0 * (1.0 + du.sup_norm() + lam),
    })
}
