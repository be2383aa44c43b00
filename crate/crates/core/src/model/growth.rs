use alloc::vec::Vec;

use rand::Rng;

use super::Hamiltonian;
use crate::error::Result;
use crate::grid::{SpectralGrid, VectorField};
use crate::math;
use crate::measure::{lambda_q, GridMeasure, JointControlMeasure};

/// Fresh random measure every this many probes; couplings can be costly.
const PROBES_PER_MEASURE: usize = 16;

/// Half-widths of the uniform boxes momenta and controls are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRanges {
    pub momentum: f64,
    pub control: f64,
}

impl Default for ProbeRanges {
    fn default() -> Self {
        ProbeRanges {
            momentum: 5.0,
            control: 2.0,
        }
    }
}

/// Smallest constants making each growth inequality hold on every probe.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub probes: usize,
    /// |D_pH| ≤ C(1 + |p|^{q-1} + Λ)
    pub drift_constant: f64,
    /// |H| ≤ C(1 + |p|^q + Λ^q̃)
    pub value_constant: f64,
    /// p·D_pH − H ≥ |p|^q / C − C(1 + Λ^q̃)
    pub coercivity_constant: f64,
}

impl GrowthReport {
    /// C̃₀: one constant serving all three inequalities.
    pub fn constant(&self) -> f64 {
        self.drift_constant
            .max(self.value_constant)
            .max(self.coercivity_constant)
    }

    pub fn feasible(&self) -> bool {
        self.constant().is_finite()
    }
}

pub fn growth_check<M: Hamiltonian, R: Rng + ?Sized>(
    model: &M,
    grid: &SpectralGrid,
    probes: usize,
    ranges: ProbeRanges,
    rng: &mut R,
) -> Result<GrowthReport> {
    let d = grid.dim();
    let constants = model.constants();
    let (q, q_conj) = (constants.q, constants.conjugate());
    let mut report = GrowthReport {
        probes,
        drift_constant: 0.0,
        value_constant: 0.0,
        coercivity_constant: 0.0,
    };
    let mut state = None;
    for probe in 0..probes {
        if probe % PROBES_PER_MEASURE == 0 {
            let mu = random_measure(grid, ranges.control, rng)?;
            let lambda = lambda_q(&mu, q_conj)?;
            state = Some((model.coupling(&mu)?, lambda));
        }
        let (coupling, lambda) = state.as_ref().expect("measure drawn on first probe");
        let node = rng.random_range(0..grid.len());
        let mut p = [0.0; 2];
        for v in p[..d].iter_mut() {
            *v = rng.random_range(-ranges.momentum..=ranges.momentum);
        }
        let p = &p[..d];
        let mut drift = [0.0; 2];
        model.h_p(node, p, coupling, &mut drift[..d]);
        let h = model.h(node, p, coupling);
        let size = math::norm(p);
        let lam_pow = math::powf(*lambda, q_conj);

        let drift_ratio = math::norm(&drift[..d]) / (1.0 + math::powf(size, q - 1.0) + lambda);
        let value_ratio = h.abs() / (1.0 + math::powf(size, q) + lam_pow);
        // b C² + c C − a ≥ 0 with c = p·D_pH − H, a = |p|^q, b = 1 + Λ^q̃.
        let c = p.iter().zip(&drift).map(|(p, b)| p * b).sum::<f64>() - h;
        let (a, b) = (math::powf(size, q), 1.0 + lam_pow);
        let coercive = (-c + math::sqrt(c * c + 4.0 * a * b)) / (2.0 * b);

        report.drift_constant = worst(report.drift_constant, drift_ratio);
        report.value_constant = worst(report.value_constant, value_ratio);
        report.coercivity_constant = worst(report.coercivity_constant, coercive);
    }
    Ok(report)
}

fn worst(current: f64, candidate: f64) -> f64 {
    if candidate.is_nan() {
        f64::INFINITY
    } else {
        current.max(candidate)
    }
}

fn random_measure<R: Rng + ?Sized>(
    grid: &SpectralGrid,
    control: f64,
    rng: &mut R,
) -> Result<JointControlMeasure> {
    let density: Vec<f64> = (0..grid.len())
        .map(|_| rng.random_range(0.1..1.0))
        .collect();
    let state = GridMeasure::normalized(grid, density)?;
    let values: Vec<f64> = (0..grid.len() * grid.dim())
        .map(|_| rng.random_range(-control..=control))
        .collect();
    JointControlMeasure::new(state, VectorField::new(grid, values)?)
}
