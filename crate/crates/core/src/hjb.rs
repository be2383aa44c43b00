//! Backward solver for −∂_t u + (−Δ)^s u + H^θ(x, Du, μ) = 0, u(T) = θ u_T.
//!
//! Exponential Euler: the diffusion is integrated exactly by the spectral
//! semigroup and the Hamiltonian is explicit at the later time level,
//! u^j = T(Δt)[u^{j+1} − Δt H^θ(·, Du^{j+1}, μ^{j+1})].

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TimeGrid, VectorField};
use crate::math;
use crate::measure::{JointControlMeasure, MeasurePath};
use crate::model::{h_field, h_p_field, Hamiltonian, Model, ThetaScaled};
use crate::spectral;

/// Hölder exponent used for the Du diagnostic.
pub const GRADIENT_HOLDER_EXPONENT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct HjbSolution {
    time: TimeGrid,
    values: Vec<ScalarField>,
    gradients: Vec<VectorField>,
}

impl HjbSolution {
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn values(&self) -> &[ScalarField] {
        &self.values
    }

    pub fn gradients(&self) -> &[VectorField] {
        &self.gradients
    }

    pub fn value(&self, j: usize) -> &ScalarField {
        &self.values[j]
    }

    pub fn gradient(&self, j: usize) -> &VectorField {
        &self.gradients[j]
    }

    /// u(·, 0).
    pub fn initial(&self) -> &ScalarField {
        &self.values[0]
    }

    /// Wraps a value path, computing its spectral gradients.
    pub fn from_values(time: TimeGrid, values: Vec<ScalarField>) -> Result<Self> {
        if values.len() != time.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} time nodes",
                values.len(),
                time.len()
            )));
        }
        let gradients = values
            .iter()
            .map(spectral::gradient)
            .collect::<Result<Vec<_>>>()?;
        Ok(HjbSolution {
            time,
            values,
            gradients,
        })
    }

    /// The θ = 0 solution on a given grid: u ≡ 0.
    pub fn zero(time: TimeGrid, terminal: &ScalarField) -> Self {
        let grid = terminal.grid();
        HjbSolution {
            values: alloc::vec![ScalarField::zeros(grid); time.len()],
            gradients: alloc::vec![VectorField::zeros(grid); time.len()],
            time,
        }
    }
}

/// One backward step from the later level.
pub fn hjb_step<H: Hamiltonian>(
    u_next: &ScalarField,
    mu_next: &JointControlMeasure,
    model: &H,
    dt: f64,
) -> Result<ScalarField> {
    u_next.grid().check_same(mu_next.grid())?;
    let du = spectral::gradient(u_next)?;
    let coupling = model.coupling(mu_next)?;
    step(u_next, &du, model, &coupling, dt, 0)
}

fn step<H: Hamiltonian>(
    u_next: &ScalarField,
    du_next: &VectorField,
    model: &H,
    coupling: &H::Coupling,
    dt: f64,
    time_index: usize,
) -> Result<ScalarField> {
    if !(dt > 0.0) {
        return Err(Error::domain("Δt", dt, "(0, ∞)"));
    }
    let h = h_field(model, du_next, coupling);
    if !h.is_finite() {
        return Err(Error::BlowUp { time_index });
    }
    let explicit = u_next.axpy(-dt, &h)?;
    let u = spectral::semigroup_apply(&explicit, dt)?;
    if !u.is_finite() {
        return Err(Error::BlowUp { time_index });
    }
    Ok(u)
}

/// Marches from u(T) = θ u_T down to t = 0.
///
/// Before each step the explicit transport speed is checked:
/// ‖D_pH^θ(·, Du, μ)‖_∞ Δt ≤ Δx.
pub fn solve_backward<H: Hamiltonian>(
    model: &ThetaScaled<H>,
    mu_path: &MeasurePath<JointControlMeasure>,
    terminal: &ScalarField,
) -> Result<HjbSolution> {
    let time = *mu_path.time();
    let grid = terminal.grid();
    for mu in mu_path.slices() {
        grid.check_same(mu.grid())?;
    }
    if !terminal.is_finite() {
        return Err(Error::InvalidField("non-finite terminal condition".into()));
    }
    let theta = model.theta();
    if theta == 0.0 {
        return Ok(HjbSolution::zero(time, terminal));
    }
    let steps = time.steps();
    let dt = time.dt();
    let mut values = alloc::vec![ScalarField::zeros(grid); steps + 1];
    let mut gradients = alloc::vec![VectorField::zeros(grid); steps + 1];
    values[steps] = terminal.scaled(theta);
    gradients[steps] = spectral::gradient(&values[steps])?;
    for j in (0..steps).rev() {
        let coupling = model.coupling(mu_path.get(j + 1))?;
        let speed = h_p_field(model, &gradients[j + 1], &coupling).sup_norm();
        check_cfl(speed, dt, grid.spacing(), time.horizon())?;
        values[j] = step(&values[j + 1], &gradients[j + 1], model, &coupling, dt, j)?;
        gradients[j] = spectral::gradient(&values[j])?;
    }
    Ok(HjbSolution {
        time,
        values,
        gradients,
    })
}

pub(crate) fn check_cfl(speed: f64, dt: f64, dx: f64, horizon: f64) -> Result<()> {
    if !speed.is_finite() {
        return Err(Error::InvalidField(format!("transport speed {speed}")));
    }
    let courant = speed * dt / dx;
    if courant > 1.0 {
        return Err(Error::Cfl {
            courant,
            required_steps: math::ceil(horizon * speed / dx) as usize,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbDiagnostics {
    /// max_t ‖u(t)‖_∞
    pub sup_u: f64,
    /// max_t ‖Du(t)‖_∞
    pub sup_gradient: f64,
    /// max over t, nodes and axes of the centred second difference at h = Δx.
    pub semiconcavity: f64,
    /// max_t [Du(t)]_{C^0.3}, over components.
    pub gradient_holder: f64,
    /// max_t of the relative high-frequency content of u(t).
    pub spectral_tail: f64,
}

pub fn hjb_diagnostics(sol: &HjbSolution) -> Result<HjbDiagnostics> {
    let mut out = HjbDiagnostics {
        sup_u: 0.0,
        sup_gradient: 0.0,
        semiconcavity: f64::NEG_INFINITY,
        gradient_holder: 0.0,
        spectral_tail: 0.0,
    };
    for (u, du) in sol.values.iter().zip(&sol.gradients) {
        out.sup_u = out.sup_u.max(u.sup_norm());
        out.sup_gradient = out.sup_gradient.max(du.sup_norm());
        out.semiconcavity = out.semiconcavity.max(max_second_difference(u));
        for axis in 0..du.dim() {
            let component = du.component_field(axis);
            out.gradient_holder = out.gradient_holder.max(spectral::holder_seminorm(
                &component,
                GRADIENT_HOLDER_EXPONENT,
            )?);
        }
        out.spectral_tail = out.spectral_tail.max(spectral::spectral_tail(u));
    }
    Ok(out)
}

/// (u(x+h e_axis) − 2u(x) + u(x−h e_axis)) / h² with h = Δx.
pub fn second_difference(u: &ScalarField, node: usize, axis: usize) -> f64 {
    let grid = u.grid();
    let h = grid.spacing();
    let mut offset = [0isize; 2];
    offset[axis] = 1;
    let plus = u.values()[grid.shifted(node, offset)];
    offset[axis] = -1;
    let minus = u.values()[grid.shifted(node, offset)];
    (plus - 2.0 * u.values()[node] + minus) / (h * h)
}

fn max_second_difference(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let mut best = f64::NEG_INFINITY;
    for node in 0..grid.len() {
        for axis in 0..grid.dim() {
            best = best.max(second_difference(u, node, axis));
        }
    }
    best
}
