//! Forward solver for ∂_t m + (−Δ)^s m + div(b m) = 0 with b = −D_pH^θ.
//!
//! Each step advects by first-order upwind finite volumes, then diffuses by
//! the exact semigroup. Round-off negativity from the spectral stage is
//! clipped and the density renormalized.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TimeGrid, VectorField};
use crate::hjb::{check_cfl, HjbSolution};
use crate::math;
use crate::measure::{GridMeasure, JointControlMeasure, MeasurePath, MASS_TOLERANCE};
use crate::model::{h_field, h_p_field, Hamiltonian, Model, ThetaScaled};
use crate::spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct FpSolution {
    path: MeasurePath<GridMeasure>,
    /// Mass before renormalization, per step (index 0 is m₀).
    pub mass_trace: Vec<f64>,
    /// Smallest density before clipping, per step.
    pub min_trace: Vec<f64>,
    pub sup_trace: Vec<f64>,
    /// K = sup_t ‖[div b]⁻‖_∞.
    pub compression_rate: f64,
}

impl FpSolution {
    pub fn path(&self) -> &MeasurePath<GridMeasure> {
        &self.path
    }

    pub fn time(&self) -> &TimeGrid {
        self.path.time()
    }

    pub fn get(&self, j: usize) -> &GridMeasure {
        self.path.get(j)
    }

    pub fn slices(&self) -> &[GridMeasure] {
        self.path.slices()
    }

    pub fn terminal(&self) -> &GridMeasure {
        self.path
            .slices()
            .last()
            .expect("time grid has at least two nodes")
    }

    /// Replaces the density path, keeping the solve's traces.
    pub(crate) fn with_slices(mut self, slices: Vec<GridMeasure>) -> Result<Self> {
        self.path = MeasurePath::new(*self.path.time(), slices)?;
        Ok(self)
    }

    /// ‖m₀‖_∞ e^{K t} at each time node.
    pub fn sup_bound(&self) -> Vec<f64> {
        let time = self.path.time();
        let m0 = self.sup_trace[0];
        (0..time.len())
            .map(|j| m0 * math::exp(self.compression_rate * time.time(j)))
            .collect()
    }
}

/// Outcome of one step with its positivity bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Stepped {
    pub measure: GridMeasure,
    pub mass: f64,
    pub pre_clip_min: f64,
}

pub fn fp_step(m: &GridMeasure, b: &VectorField, dt: f64) -> Result<GridMeasure> {
    let speed = b.sup_norm();
    check_cfl(speed, dt, m.grid().spacing(), dt)?;
    advance(m, b, dt).map(|s| s.measure)
}

pub(crate) fn advance(m: &GridMeasure, b: &VectorField, dt: f64) -> Result<Stepped> {
    m.grid().check_same(b.grid())?;
    if !(dt > 0.0) {
        return Err(Error::domain("Δt", dt, "(0, ∞)"));
    }
    let advected = upwind(m, b, dt);
    let diffused = spectral::semigroup_apply(&advected, dt)?.into_values();
    let pre_clip_min = diffused.iter().copied().fold(f64::INFINITY, f64::min);
    let w = m.grid().cell_volume();
    let removed: f64 = diffused.iter().filter(|v| **v < 0.0).map(|v| -v * w).sum();
    if removed > MASS_TOLERANCE {
        return Err(Error::Conservation { drift: removed });
    }
    let mass = diffused.iter().sum::<f64>() * w;
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Conservation { drift: mass - 1.0 });
    }
    let clipped = diffused.into_iter().map(|v| v.max(0.0)).collect();
    Ok(Stepped {
        measure: GridMeasure::normalized(m.grid(), clipped)?,
        mass,
        pre_clip_min,
    })
}

/// Donor-cell update m − Δt div(b m) with face velocities averaged from the
/// two adjacent nodes.
fn upwind(m: &GridMeasure, b: &VectorField, dt: f64) -> ScalarField {
    let grid = m.grid();
    let d = grid.dim();
    let ratio = dt / grid.spacing();
    let density = m.density();
    let mut out = density.to_vec();
    for axis in 0..d {
        let mut ahead = [0isize; 2];
        ahead[axis] = 1;
        for node in 0..grid.len() {
            let next = grid.shifted(node, ahead);
            let v = 0.5 * (b.at(node)[axis] + b.at(next)[axis]);
            let flux = if v > 0.0 {
                v * density[node]
            } else if v < 0.0 {
                v * density[next]
            } else {
                0.0
            };
            out[node] -= ratio * flux;
            out[next] += ratio * flux;
        }
    }
    ScalarField::from_raw(grid, out)
}

/// Steps m₀ forward with b(t^j) driving the step from t^j to t^{j+1}.
pub fn solve_forward(b_path: &MeasurePath<VectorField>, m0: &GridMeasure) -> Result<FpSolution> {
    let time = *b_path.time();
    let grid = m0.grid();
    let dt = time.dt();
    let mut compression = 0.0f64;
    for b in b_path.slices() {
        grid.check_same(b.grid())?;
        check_cfl(b.sup_norm(), dt, grid.spacing(), time.horizon())?;
        let div = spectral::divergence(b)?;
        compression = compression.max(-div.min());
    }
    let mut slices = Vec::with_capacity(time.len());
    let mut mass_trace = Vec::with_capacity(time.len());
    let mut min_trace = Vec::with_capacity(time.len());
    let mut sup_trace = Vec::with_capacity(time.len());
    mass_trace.push(m0.mass());
    min_trace.push(m0.density().iter().copied().fold(f64::INFINITY, f64::min));
    sup_trace.push(m0.sup_norm());
    slices.push(m0.clone());
    for j in 0..time.steps() {
        let stepped = advance(&slices[j], b_path.get(j), dt)?;
        mass_trace.push(stepped.mass);
        min_trace.push(stepped.pre_clip_min);
        sup_trace.push(stepped.measure.sup_norm());
        slices.push(stepped.measure);
    }
    Ok(FpSolution {
        path: MeasurePath::new(time, slices)?,
        mass_trace,
        min_trace,
        sup_trace,
        compression_rate: compression.max(0.0),
    })
}

/// |∫u(0)m₀ − ∫u(T)m(T) − ∫₀^T∫(Du·D_pH^θ − H^θ) m dx dt|, with the time
/// integral by the trapezoidal rule. u(T) already carries the factor θ.
pub fn duality_residual<H: Hamiltonian>(
    u: &HjbSolution,
    m: &FpSolution,
    mu_path: &MeasurePath<JointControlMeasure>,
    model: &ThetaScaled<H>,
) -> Result<f64> {
    let time = u.time();
    if time != m.time() || time != mu_path.time() {
        return Err(Error::Dimension("time grids differ".into()));
    }
    if model.theta() == 0.0 {
        return Ok(0.0);
    }
    let last = time.steps();
    let start = m.get(0).integrate(u.value(0))?;
    let end = m.get(last).integrate(u.value(last))?;
    let mut running = Vec::with_capacity(time.len());
    for j in 0..time.len() {
        let du = u.gradient(j);
        let coupling = model.coupling(mu_path.get(j))?;
        let h = h_field(model, du, &coupling);
        let hp = h_p_field(model, du, &coupling);
        let d = du.dim();
        let integrand: Vec<f64> = (0..du.grid().len())
            .map(|node| {
                let dot: f64 = (0..d).map(|i| du.at(node)[i] * hp.at(node)[i]).sum();
                dot - h.values()[node]
            })
            .collect();
        running.push(
            m.get(j)
                .integrate(&ScalarField::new(du.grid(), integrand)?)?,
        );
    }
    let dt = time.dt();
    let integral =
        dt * (0.5 * running[0] + running[1..last].iter().sum::<f64>() + 0.5 * running[last]);
    Ok((start - end - integral).abs())
}
